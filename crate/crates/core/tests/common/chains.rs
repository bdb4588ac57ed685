//! Brute-force merge oracle and checkers for chains and gap fills.

use dlo::chainfit::{chain_end_pose, Chain, End, Pose};
use dlo::geom::Vec2;
use dlo::merge::{best_merge, fill_gap, MergeConfig};
use rand::Rng;
use std::f64::consts::{PI, TAU};

pub const L_S: f64 = 15.0;

/// Costs recomputed from raw headings.
pub fn oracle_total(a: &Pose, b: &Pose, cfg: &MergeConfig) -> f64 {
    let wrap = |x: f64| {
        let y = x.rem_euclid(TAU);
        if y > PI {
            y - TAU
        } else {
            y
        }
    };
    let ha = a.dir.y.atan2(a.dir.x);
    let hb_in = (-b.dir.y).atan2(-b.dir.x);
    let (dx, dy) = (b.point.x - a.point.x, b.point.y - a.point.y);
    let e = (dx * dx + dy * dy).sqrt();
    let d = wrap(hb_in - ha).abs();
    let c = if e == 0.0 {
        0.0
    } else {
        let hc = dy.atan2(dx);
        wrap(hc - ha).abs() + wrap(hb_in - hc).abs()
    };
    cfg.w_euclidean * e + cfg.w_direction * d + cfg.w_curvature * c
}

pub fn random_chain(r: &mut impl Rng) -> Chain {
    let mut joints = vec![Vec2::new(r.gen_range(0.0..300.0), r.gen_range(0.0..300.0))];
    let mut h: f64 = r.gen_range(0.0..TAU);
    for _ in 0..r.gen_range(1..5) {
        h += r.gen_range(-0.4..0.4);
        let last = *joints.last().unwrap();
        joints.push(last + Vec2::from_angle(h) * L_S);
    }
    Chain::open(joints)
}

pub fn random_pose(r: &mut impl Rng, spread: f64) -> Pose {
    Pose {
        point: Vec2::new(r.gen_range(-spread..spread), r.gen_range(-spread..spread)),
        dir: Vec2::from_angle(r.gen_range(0.0..TAU)),
    }
}

pub fn check_best_merge(chains: &[Chain]) {
    let cfg = MergeConfig::default();
    let ends = [End::Head, End::Tail];
    let mut all = Vec::new();
    for i in 0..chains.len() {
        for j in i + 1..chains.len() {
            for ea in ends {
                for eb in ends {
                    let t = oracle_total(&chain_end_pose(&chains[i], ea), &chain_end_pose(&chains[j], eb), &cfg);
                    all.push((t, i, j, ea, eb));
                }
            }
        }
    }
    assert_eq!(all.len(), 4 * chains.len() * (chains.len() - 1) / 2);
    let min = all.iter().map(|c| c.0).fold(f64::INFINITY, f64::min);
    let got = best_merge(chains, &cfg).unwrap();
    assert!((got.cost.total - min).abs() < 1e-9);
    let near: Vec<_> = all.iter().filter(|c| c.0 - min < 1e-9).collect();
    if near.len() == 1 {
        let o = near[0];
        assert_eq!((got.chain_a, got.chain_b, got.end_a, got.end_b), (o.1, o.2, o.3, o.4));
    }
}

pub fn turn(u: Vec2, v: Vec2) -> f64 {
    u.cross(v).atan2(u.dot(v)).abs()
}

pub fn check_fill(a: &Pose, b: &Pose, kappa: f64) -> (bool, f64) {
    let f = fill_gap(a, b, L_S, kappa);
    if f.segments.is_empty() {
        assert!(a.point.dist(b.point) < L_S / 2.0);
        return (true, 0.0);
    }
    let mut prev = a.point;
    for s in &f.segments {
        assert!(s.filled);
        assert_eq!(s.a, prev);
        assert!((s.length() - L_S).abs() <= 1e-9 * L_S);
        prev = s.b;
    }
    for w in f.segments.windows(2) {
        assert!(turn(w[0].direction(), w[1].direction()) <= kappa + 1e-9);
    }
    assert!(turn(a.dir, f.segments[0].direction()) <= kappa + 1e-9);
    assert!(turn(-b.dir, f.segments.last().unwrap().direction()) <= kappa + 1e-9);
    let residual = f.end_point().unwrap().dist(b.point);
    if f.feasible {
        assert!(residual <= L_S);
    }
    (f.feasible, residual)
}

/// Dense quarter circle from integrating a constant heading rate.
pub fn integrated_arc(radius: f64) -> Vec<Vec2> {
    let steps = 100_000;
    let len = radius * PI / 2.0;
    let ds = len / steps as f64;
    let mut p = Vec2::new(0.0, 0.0);
    let mut out = vec![p];
    for i in 0..steps {
        let heading = (i as f64 + 0.5) * ds / radius;
        p += Vec2::from_angle(heading) * ds;
        out.push(p);
    }
    out
}

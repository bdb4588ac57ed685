//! Fixed-length chain fitting over traced skeleton borders, and pruning of
//! the duplicate segments produced by the out-and-back traversal.

use std::collections::HashSet;
use std::f64::consts::{FRAC_PI_6, PI};

use serde::{Deserialize, Serialize};

use crate::contour::PixelPath;
use crate::geom::{angle_between, point_segment_distance, Vec2};

/// One rigid link of a chain.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Segment {
    pub a: Vec2,
    pub b: Vec2,
    /// Synthesized while filling a gap rather than fitted to pixels.
    pub filled: bool,
}

impl Segment {
    pub fn length(&self) -> f64 {
        self.a.dist(self.b)
    }

    pub fn midpoint(&self) -> Vec2 {
        self.a.lerp(self.b, 0.5)
    }

    pub fn direction(&self) -> Vec2 {
        (self.b - self.a).normalized()
    }
}

/// Ordered joints; segment `i` spans `joints[i] → joints[i + 1]`, and a
/// closed chain has one extra segment from the last joint back to the first.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct Chain {
    pub joints: Vec<Vec2>,
    pub filled: Vec<bool>,
    pub closed: bool,
}

/// Which end of a chain.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum End {
    Head,
    Tail,
}

/// Terminal joint plus the outward unit direction of the terminal segment.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Pose {
    pub point: Vec2,
    pub dir: Vec2,
}

impl Chain {
    /// An open chain of fitted segments through `joints`.
    pub fn open(joints: Vec<Vec2>) -> Self {
        let n = joints.len().saturating_sub(1);
        Self {
            joints,
            filled: vec![false; n],
            closed: false,
        }
    }

    pub fn segment_count(&self) -> usize {
        self.filled.len()
    }

    pub fn is_empty(&self) -> bool {
        self.filled.is_empty()
    }

    /// Joint-count/flag-count consistency.
    pub fn is_well_formed(&self) -> bool {
        if self.closed {
            self.joints.len() == self.filled.len() && self.joints.len() >= 3
        } else {
            self.joints.len() == self.filled.len() + 1
        }
    }

    pub fn segment(&self, i: usize) -> Segment {
        let a = self.joints[i];
        let b = self.joints[(i + 1) % self.joints.len()];
        Segment {
            a,
            b,
            filled: self.filled[i],
        }
    }

    pub fn segments(&self) -> impl Iterator<Item = Segment> + '_ {
        (0..self.segment_count()).map(|i| self.segment(i))
    }

    /// Sum of actual segment lengths.
    pub fn length(&self) -> f64 {
        self.segments().map(|s| s.length()).sum()
    }

    pub fn reversed(&self) -> Self {
        let mut joints = self.joints.clone();
        joints.reverse();
        let mut filled = self.filled.clone();
        if self.closed {
            // segment i of the reversal spans old joints (n-1-i) → (n-2-i)
            let n = filled.len();
            filled = (0..n).map(|i| self.filled[(2 * n - 2 - i) % n]).collect();
        } else {
            filled.reverse();
        }
        Self {
            joints,
            filled,
            closed: self.closed,
        }
    }
}

/// Outward pose at one end of an open chain.
///
/// Panics if the chain has no segments.
pub fn chain_end_pose(chain: &Chain, end: End) -> Pose {
    assert!(
        !chain.is_empty() && chain.joints.len() >= 2,
        "end pose of an empty chain"
    );
    let j = &chain.joints;
    let (point, inner) = match end {
        End::Head => (j[0], j[1]),
        End::Tail => (j[j.len() - 1], j[j.len() - 2]),
    };
    Pose {
        point,
        dir: (point - inner).normalized(),
    }
}

/// Fitting and pruning parameters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct FitConfig {
    /// Fixed segment length in pixels.
    pub segment_length: f64,
    /// Half-width of the retrace window used to detect branch tips.
    pub tip_window: usize,
    /// Also start a new chain wherever the trace passes a branch junction.
    pub split_at_junctions: bool,
    /// Overlap distance in pixels; `None` means half the segment length.
    pub overlap_dist: Option<f64>,
    /// Largest acute angle (radians) at which two nearby segments count as overlapping.
    pub overlap_angle: f64,
}

impl Default for FitConfig {
    fn default() -> Self {
        Self {
            segment_length: 15.0,
            tip_window: 3,
            split_at_junctions: true,
            overlap_dist: None,
            overlap_angle: FRAC_PI_6,
        }
    }
}

impl FitConfig {
    pub fn overlap_dist(&self) -> f64 {
        self.overlap_dist.unwrap_or(self.segment_length / 2.0)
    }

    pub fn is_valid(&self) -> bool {
        self.segment_length > std::f64::consts::SQRT_2
            && self.tip_window >= 1
            && self.overlap_dist() > 0.0
            && self.overlap_angle.is_finite()
    }
}

fn near(a: (i32, i32), b: (i32, i32)) -> bool {
    (a.0 - b.0).abs() <= 1 && (a.1 - b.1).abs() <= 1
}

// The outbound and return legs of a staircase skeleton can differ by one
// corner pixel, so mirrored points only need to be 8-adjacent.
fn reverses_at(path: &[(i32, i32)], i: usize, w: usize) -> bool {
    let n = path.len();
    let reach = w.min(i).min(n - 1 - i);
    reach >= 1 && (1..=reach).all(|k| near(path[i + k], path[i - k]))
}

/// A trace with no reversal anywhere, including across its start, went
/// around a closed loop.
pub fn is_closed_trace(path: &PixelPath, w: usize) -> bool {
    let p = &path.points;
    let n = p.len();
    n >= 4 && p[1] != p[n - 1] && !(1..n - 1).any(|i| reverses_at(p, i, w))
}

/// Indices where the trace turns back on itself (mirrored points within one
/// pixel over the window), in increasing order. Open
/// traces always include the first and last index; closed loops yield `[0]`.
pub fn detect_tips(path: &PixelPath, w: usize) -> Vec<usize> {
    let p = &path.points;
    let n = p.len();
    if n == 0 {
        return Vec::new();
    }
    if is_closed_trace(path, w) {
        return vec![0];
    }
    let mut tips = vec![0];
    tips.extend((1..n.saturating_sub(1)).filter(|&i| reverses_at(p, i, w)));
    if n > 1 {
        tips.push(n - 1);
    }
    tips
}

/// Clockwise from north.
const RING: [(i32, i32); 8] = [(0, -1), (1, -1), (1, 0), (1, 1), (0, 1), (-1, 1), (-1, 0), (-1, -1)];

/// Pixels of the traced set where three or more branches meet (three or
/// more background-to-foreground transitions around the 8-neighborhood).
fn junction_pixels(pixels: &HashSet<(i32, i32)>) -> HashSet<(i32, i32)> {
    pixels
        .iter()
        .copied()
        .filter(|&(x, y)| {
            let on: Vec<bool> = RING.iter().map(|d| pixels.contains(&(x + d.0, y + d.1))).collect();
            (0..8).filter(|&k| !on[k] && on[(k + 1) % 8]).count() >= 3
        })
        .collect()
}

/// One index per passage of the trace through a junction: among each run of
/// consecutive indices lying on or beside a junction pixel, the first one
/// closest to a junction.
pub fn junction_indices(path: &PixelPath) -> Vec<usize> {
    let pixels: HashSet<(i32, i32)> = path.points.iter().copied().collect();
    let junctions = junction_pixels(&pixels);
    if junctions.is_empty() {
        return Vec::new();
    }
    let closeness = |q: (i32, i32)| -> Option<u8> {
        if junctions.contains(&q) {
            Some(0)
        } else if RING.iter().any(|d| junctions.contains(&(q.0 + d.0, q.1 + d.1))) {
            Some(1)
        } else {
            None
        }
    };
    let mut cuts = Vec::new();
    let mut run: Option<(usize, u8)> = None;
    for (i, &q) in path.points.iter().enumerate() {
        match (closeness(q), run) {
            (Some(c), Some((_, best))) if c < best => run = Some((i, c)),
            (Some(_), Some(_)) => {}
            (Some(c), None) => run = Some((i, c)),
            (None, Some((j, _))) => {
                cuts.push(j);
                run = None;
            }
            (None, None) => {}
        }
    }
    if let Some((j, _)) = run {
        cuts.push(j);
    }
    cuts
}

fn to_vec2(p: (i32, i32)) -> Vec2 {
    Vec2::new(p.0 as f64, p.1 as f64)
}

/// Joints along `pts`: each next joint is the first later pixel at least
/// `l_s` away (straight-line) from the current one. The remainder is dropped.
fn fit_run(pts: &[(i32, i32)], l_s: f64) -> Vec<Vec2> {
    let Some(&first) = pts.first() else {
        return Vec::new();
    };
    let mut anchor = to_vec2(first);
    let mut joints = vec![anchor];
    for &p in &pts[1..] {
        let q = to_vec2(p);
        if q.dist(anchor) >= l_s {
            joints.push(q);
            anchor = q;
        }
    }
    joints
}

/// Fits fixed-length chains to a traced border, starting a new chain at
/// every branch tip. Chains with no segments are discarded.
pub fn fit_chains(path: &PixelPath, cfg: &FitConfig) -> Vec<Chain> {
    let l_s = cfg.segment_length;
    let p = &path.points;
    if p.len() < 2 {
        return Vec::new();
    }
    if is_closed_trace(path, cfg.tip_window) {
        let mut cyclic = p.clone();
        cyclic.push(p[0]);
        let mut joints = fit_run(&cyclic, l_s);
        if joints.len() > 1 && joints.last() == joints.first() {
            joints.pop();
        }
        if joints.len() >= 3 {
            let n = joints.len();
            return vec![Chain {
                joints,
                filled: vec![false; n],
                closed: true,
            }];
        }
        let chain = Chain::open(fit_run(p, l_s));
        return if chain.is_empty() { Vec::new() } else { vec![chain] };
    }
    let mut cuts = detect_tips(path, cfg.tip_window);
    if cfg.split_at_junctions {
        cuts.extend(junction_indices(path));
        cuts.sort_unstable();
        cuts.dedup();
    }
    cuts.windows(2)
        .map(|t| Chain::open(fit_run(&p[t[0]..=t[1]], l_s)))
        .filter(|c| !c.is_empty())
        .collect()
}

/// Two segments overlap when one's midpoint lies within the overlap distance
/// of the other segment and their lines meet at an acute angle below the
/// overlap angle.
pub fn segments_overlap(s: &Segment, t: &Segment, cfg: &FitConfig) -> bool {
    let d = point_segment_distance(s.midpoint(), t.a, t.b)
        .0
        .min(point_segment_distance(t.midpoint(), s.a, s.b).0);
    if d >= cfg.overlap_dist() {
        return false;
    }
    let theta = angle_between(s.direction(), t.direction());
    theta.min(PI - theta) < cfg.overlap_angle
}

fn adjacent_in_chain(c: &Chain, i: usize, j: usize) -> bool {
    let n = c.segment_count();
    i.abs_diff(j) == 1 || (c.closed && n > 2 && i.abs_diff(j) == n - 1)
}

/// Whether segments `(ci, si)` and `(cj, sj)` of `chains` are subject to the
/// overlap rule (consecutive segments of one chain share a joint and are exempt).
pub fn overlap_conflict(chains: &[Chain], a: (usize, usize), b: (usize, usize), cfg: &FitConfig) -> bool {
    if a == b || (a.0 == b.0 && adjacent_in_chain(&chains[a.0], a.1, b.1)) {
        return false;
    }
    segments_overlap(&chains[a.0].segment(a.1), &chains[b.0].segment(b.1), cfg)
}

/// Removes overlapping segments. Segments of longer chains win; among equal
/// lengths the earlier chain wins, and within a chain the earlier segment.
/// Chains are split where interior segments were removed.
pub fn prune_overlaps(chains: &[Chain], cfg: &FitConfig) -> Vec<Chain> {
    let mut order: Vec<usize> = (0..chains.len()).collect();
    order.sort_by_key(|&c| (std::cmp::Reverse(chains[c].segment_count()), c));

    let mut keep: Vec<Vec<bool>> = chains.iter().map(|c| vec![false; c.segment_count()]).collect();
    let mut kept: Vec<(usize, usize, Segment)> = Vec::new();
    for &c in &order {
        for s in 0..chains[c].segment_count() {
            let seg = chains[c].segment(s);
            let clash = kept.iter().any(|&(kc, ks, ref t)| {
                !(kc == c && adjacent_in_chain(&chains[c], s, ks)) && segments_overlap(&seg, t, cfg)
            });
            if !clash {
                keep[c][s] = true;
                kept.push((c, s, seg));
            }
        }
    }

    let mut out = Vec::new();
    for (chain, flags) in chains.iter().zip(&keep) {
        split_kept(chain, flags, &mut out);
    }
    out
}

fn split_kept(chain: &Chain, keep: &[bool], out: &mut Vec<Chain>) {
    let n = keep.len();
    if keep.iter().all(|&k| k) {
        if n > 0 {
            out.push(chain.clone());
        }
        return;
    }
    // For a closed chain, start scanning right after a removed segment so a
    // run that wraps around stays in one piece.
    let start = if chain.closed {
        (keep.iter().position(|&k| !k).unwrap() + 1) % n
    } else {
        0
    };
    let mut run: Vec<usize> = Vec::new();
    let mut flush = |run: &mut Vec<usize>| {
        if run.is_empty() {
            return;
        }
        let mut joints: Vec<Vec2> = run.iter().map(|&s| chain.joints[s]).collect();
        let last = *run.last().unwrap();
        joints.push(chain.joints[(last + 1) % chain.joints.len()]);
        let filled = run.iter().map(|&s| chain.filled[s]).collect();
        out.push(Chain {
            joints,
            filled,
            closed: false,
        });
        run.clear();
    };
    for k in 0..n {
        let s = (start + k) % n;
        if keep[s] {
            run.push(s);
        } else {
            flush(&mut run);
        }
    }
    flush(&mut run);
}

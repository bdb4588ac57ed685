//! Greedy end-to-end merging of fitted chains, with gap filling by
//! fixed-length segments that follow the chain tangents and then turn at a
//! bounded constant rate.

use std::f64::consts::{FRAC_PI_8, PI};

use serde::{Deserialize, Serialize};

use crate::chainfit::{chain_end_pose, Chain, End, Pose, Segment};
use crate::geom::{angle_between, signed_angle, wrap_angle, Vec2};

/// Partial costs for joining one pair of chain ends.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MergeCost {
    pub euclidean: f64,
    pub direction: f64,
    pub curvature: f64,
    pub total: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct MergeConfig {
    pub w_euclidean: f64,
    /// Pixels per radian.
    pub w_direction: f64,
    /// Pixels per radian.
    pub w_curvature: f64,
    /// Largest turn between consecutive filled segments, radians.
    pub max_turn: f64,
    /// Candidates above this total are never merged; `None` is unbounded.
    pub max_merge_cost: Option<f64>,
}

impl Default for MergeConfig {
    fn default() -> Self {
        // angular weights match the default segment length
        Self {
            w_euclidean: 1.0,
            w_direction: 15.0,
            w_curvature: 15.0,
            max_turn: FRAC_PI_8,
            max_merge_cost: None,
        }
    }
}

impl MergeConfig {
    pub fn is_valid(&self) -> bool {
        self.w_euclidean >= 0.0
            && self.w_direction >= 0.0
            && self.w_curvature >= 0.0
            && self.max_turn > 0.0
            && self.max_turn < PI
            && self.max_merge_cost.is_none_or(|c| !c.is_nan())
    }
}

/// One iteration of [`merge_all`]. Chain ids index the chain list as it was
/// at the start of that iteration.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MergeRecord {
    pub chain_a: usize,
    pub end_a: End,
    pub chain_b: usize,
    pub end_b: End,
    pub cost: MergeCost,
    pub filled_segments: usize,
    pub point_a: Vec2,
    pub point_b: Vec2,
    pub dir_a: Vec2,
    pub dir_b: Vec2,
    pub feasible: bool,
}

pub fn euclidean_cost(a: &Pose, b: &Pose) -> f64 {
    a.point.dist(b.point)
}

/// Zero when the two ends continue smoothly into each other.
pub fn direction_cost(a: &Pose, b: &Pose) -> f64 {
    angle_between(a.dir, -b.dir)
}

/// Turn from A's tangent onto the chord plus the turn from the chord onto
/// B's inward tangent.
pub fn curvature_cost(a: &Pose, b: &Pose) -> f64 {
    let chord = b.point - a.point;
    if chord.norm() == 0.0 {
        return 0.0;
    }
    signed_angle(a.dir, chord).abs() + signed_angle(chord, -b.dir).abs()
}

pub fn pose_cost(a: &Pose, b: &Pose, cfg: &MergeConfig) -> MergeCost {
    let euclidean = euclidean_cost(a, b);
    let direction = direction_cost(a, b);
    let curvature = curvature_cost(a, b);
    MergeCost {
        euclidean,
        direction,
        curvature,
        total: cfg.w_euclidean * euclidean + cfg.w_direction * direction + cfg.w_curvature * curvature,
    }
}

pub fn connection_cost(a: &Chain, end_a: End, b: &Chain, end_b: End, cfg: &MergeConfig) -> MergeCost {
    pose_cost(&chain_end_pose(a, end_a), &chain_end_pose(b, end_b), cfg)
}

/// The cheapest end pair chosen by [`best_merge`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MergeCandidate {
    pub chain_a: usize,
    pub end_a: End,
    pub chain_b: usize,
    pub end_b: End,
    pub cost: MergeCost,
}

fn mergeable(c: &Chain) -> bool {
    !c.closed && !c.is_empty()
}

/// Minimum-total candidate over all open chain pairs and their four end
/// combinations. Ties go to the lower first id, then the lower second id,
/// then head before tail.
pub fn best_merge(chains: &[Chain], cfg: &MergeConfig) -> Option<MergeCandidate> {
    let poses: Vec<Option<[Pose; 2]>> = chains
        .iter()
        .map(|c| mergeable(c).then(|| [chain_end_pose(c, End::Head), chain_end_pose(c, End::Tail)]))
        .collect();
    let ends = [End::Head, End::Tail];
    let mut best: Option<MergeCandidate> = None;
    for i in 0..chains.len() {
        let Some(pa) = &poses[i] else { continue };
        for j in i + 1..chains.len() {
            let Some(pb) = &poses[j] else { continue };
            for (ea, a) in ends.iter().zip(pa) {
                for (eb, b) in ends.iter().zip(pb) {
                    let cost = pose_cost(a, b, cfg);
                    if best.is_none_or(|m| cost.total < m.cost.total) {
                        best = Some(MergeCandidate {
                            chain_a: i,
                            end_a: *ea,
                            chain_b: j,
                            end_b: *eb,
                            cost,
                        });
                    }
                }
            }
        }
    }
    best.filter(|m| cfg.max_merge_cost.is_none_or(|limit| m.cost.total <= limit))
}

/// Filled segments bridging two chain ends.
#[derive(Debug, Clone, PartialEq)]
pub struct GapFill {
    pub segments: Vec<Segment>,
    /// The last joint lands within one segment length of the target.
    pub feasible: bool,
}

impl GapFill {
    pub fn end_point(&self) -> Option<Vec2> {
        self.segments.last().map(|s| s.b)
    }
}

fn polyline(start: Vec2, headings: &[f64], l_s: f64) -> Vec<Segment> {
    let mut a = start;
    headings
        .iter()
        .map(|&h| {
            let b = a + Vec2::from_angle(h) * l_s;
            let s = Segment { a, b, filled: true };
            a = b;
            s
        })
        .collect()
}

/// Headings along consecutive constant-rate pieces `(segments, turn per
/// joint)`. Each piece turns half a step at its ends, so an arc's joints lie
/// on a circle and a piece with zero turn is a straight run.
fn piece_headings(start: f64, pieces: &[(usize, f64)]) -> Vec<f64> {
    let mut h = start;
    let mut out = Vec::new();
    for &(m, turn) in pieces {
        out.extend((0..m).map(|j| h + turn * (j as f64 + 0.5)));
        h += turn * m as f64;
    }
    out
}

/// Sum of the segment vectors of one piece starting at heading `h`, in
/// units of the segment length.
fn piece_displacement(h: f64, (m, turn): (usize, f64)) -> Vec2 {
    let m_f = m as f64;
    let scale = if turn.abs() < 1e-12 {
        m_f
    } else {
        (m_f * turn / 2.0).sin() / (turn / 2.0).sin()
    };
    Vec2::from_angle(h + m_f * turn / 2.0) * scale
}

fn pieces_displacement(start: f64, pieces: &[(usize, f64)], l_s: f64) -> Vec2 {
    let mut h = start;
    let mut sum = Vec2::default();
    for &p in pieces {
        sum += piece_displacement(h, p);
        h += p.0 as f64 * p.1;
    }
    sum * l_s
}

/// Continuous straight-run lengths (in segments) before and after the
/// curved part that best close `rest`.
fn straight_counts(rest: Vec2, u_start: Vec2, u_end: Vec2, l_s: f64) -> (f64, f64) {
    let det = u_start.cross(u_end);
    if det.abs() < 1e-6 {
        return (rest.dot(u_start).max(0.0) / l_s, 0.0);
    }
    let n1 = rest.cross(u_end) / det;
    let n2 = u_start.cross(rest) / det;
    (n1 / l_s, n2 / l_s)
}

fn int_options(x: f64) -> [usize; 2] {
    let x = x.max(0.0);
    [x.floor() as usize, x.ceil() as usize]
}

/// Cost of each segment beyond the chord length, in segment lengths, so a
/// full loop never wins over a short bend by a few pixels of landing error.
const DETOUR_PENALTY: f64 = 0.1;

/// Search state for the curved fill: the closest landing so far.
struct Search {
    start: f64,
    chord: Vec2,
    l_s: f64,
    u_start: Vec2,
    best: Option<(f64, Vec<(usize, f64)>)>,
}

impl Search {
    fn best_miss(&self) -> f64 {
        self.best.as_ref().map_or(f64::INFINITY, |b| b.0)
    }

    /// Wraps `curve` in the straight runs that land nearest the target.
    fn try_curve(&mut self, curve: &[(usize, f64)], penalty: f64) {
        let arc = pieces_displacement(self.start, curve, self.l_s);
        let total: f64 = curve.iter().map(|&(m, t)| m as f64 * t).sum();
        let u_end = Vec2::from_angle(self.start + total);
        let (c1, c2) = straight_counts(self.chord - arc, self.u_start, u_end, self.l_s);
        for n1 in int_options(c1) {
            for n2 in int_options(c2) {
                if n1 + n2 == 0 && curve.iter().all(|p| p.0 == 0) {
                    continue;
                }
                let landed = self.u_start * (n1 as f64 * self.l_s) + arc + u_end * (n2 as f64 * self.l_s);
                let count = n1 + n2 + curve.iter().map(|p| p.0).sum::<usize>();
                let detour = (count as f64 - self.chord.norm() / self.l_s).max(0.0);
                let score = (landed - self.chord).norm() + penalty + DETOUR_PENALTY * self.l_s * detour;
                if score < self.best_miss() - 1e-9 {
                    let mut pieces = vec![(n1, 0.0)];
                    pieces.extend_from_slice(curve);
                    pieces.push((n2, 0.0));
                    self.best = Some((score, pieces));
                }
            }
        }
    }
}

/// Fixed-length filled segments from `a.point` toward `b.point`.
///
/// Gaps shorter than half a segment get no fill. When both ends already
/// point along the chord within `max_turn`, the fill is straight along the
/// chord. Otherwise it keeps A's heading, turns at a constant rate of at
/// most `max_turn` per joint (one arc, or two opposite arcs for an
/// S-shaped gap), and finishes straight into B; the candidate landing
/// closest to B, with a charge for every segment beyond the chord, wins.
pub fn fill_gap(a: &Pose, b: &Pose, l_s: f64, max_turn: f64) -> GapFill {
    let chord = b.point - a.point;
    let d = chord.norm();
    if d < l_s / 2.0 {
        return GapFill {
            segments: Vec::new(),
            feasible: true,
        };
    }
    let alpha = signed_angle(a.dir, chord);
    let beta = signed_angle(chord, -b.dir);
    if alpha.abs() <= max_turn && beta.abs() <= max_turn {
        let n = ((d / l_s).round() as usize).max(1);
        let segments = polyline(a.point, &vec![chord.angle(); n], l_s);
        let feasible = segments.last().unwrap().b.dist(b.point) <= l_s;
        return GapFill { segments, feasible };
    }

    let needed = signed_angle(a.dir, -b.dir);
    let long_way = needed - 2.0 * PI * if needed >= 0.0 { 1.0 } else { -1.0 };
    let span = (d / l_s).ceil() as usize + 1;
    let arcs = |total: f64| {
        let m_min = (total.abs() / max_turn - 1e-9).ceil().max(1.0) as usize;
        (m_min..=m_min + span).map(move |m| (m, total / m as f64))
    };

    let mut search = Search {
        start: a.dir.angle(),
        chord,
        l_s,
        u_start: a.dir,
        best: None,
    };
    // an S-curve must beat a single arc by a clear margin
    let s_penalty = 0.05 * l_s;
    let slacks = [0.0, -0.25, 0.25, -0.5, 0.5];
    for base in [needed, long_way] {
        for slack in slacks {
            for arc in arcs(base + slack * max_turn) {
                search.try_curve(&[arc], 0.0);
            }
        }
    }
    if search.best_miss() > 0.1 * l_s {
        for slack in slacks {
            let total = needed + slack * max_turn;
            for first_rate in [1.0, -1.0, 0.5, -0.5] {
                let rate = first_rate * max_turn;
                for m1 in 1..=span {
                    let rest = total - rate * m1 as f64;
                    if rest.abs() < 1e-9 || rest.signum() == rate.signum() {
                        continue;
                    }
                    for second in arcs(rest) {
                        search.try_curve(&[(m1, rate), second], s_penalty);
                    }
                }
            }
        }
    }
    let (_, pieces) = search.best.expect("at least one candidate path");
    let headings: Vec<f64> = piece_headings(a.dir.angle(), &pieces)
        .into_iter()
        .map(wrap_angle)
        .collect();
    let segments = polyline(a.point, &headings, l_s);
    let feasible = segments.last().unwrap().b.dist(b.point) <= l_s;
    GapFill { segments, feasible }
}

/// Joins `a` and `b` at the given ends through `fill`. The result runs from
/// A's far end to B's far end; the joint where the fill (or A, when the fill
/// is empty) meets B is moved to the midpoint of the two coincident points.
pub fn merge_pair(a: &Chain, end_a: End, b: &Chain, end_b: End, fill: &[Segment]) -> Chain {
    let a = if end_a == End::Head { a.reversed() } else { a.clone() };
    let b = if end_b == End::Tail { b.reversed() } else { b.clone() };
    let mut joints = a.joints.clone();
    let mut filled = a.filled.clone();
    joints.extend(fill.iter().map(|s| s.b));
    filled.extend(std::iter::repeat_n(true, fill.len()));
    let last = joints.pop().expect("chain has joints");
    joints.push(last.lerp(b.joints[0], 0.5));
    joints.extend_from_slice(&b.joints[1..]);
    filled.extend_from_slice(&b.filled);
    Chain {
        joints,
        filled,
        closed: false,
    }
}

/// Merges open chains greedily until one remains or no candidate is within
/// the cost limit. Closed chains pass through untouched. The merged chain
/// takes the lower of the two positions.
pub fn merge_all(chains: &[Chain], l_s: f64, cfg: &MergeConfig) -> (Vec<Chain>, Vec<MergeRecord>) {
    let mut chains = chains.to_vec();
    let mut records = Vec::new();
    while let Some(m) = best_merge(&chains, cfg) {
        let pa = chain_end_pose(&chains[m.chain_a], m.end_a);
        let pb = chain_end_pose(&chains[m.chain_b], m.end_b);
        let fill = fill_gap(&pa, &pb, l_s, cfg.max_turn);
        let merged = merge_pair(&chains[m.chain_a], m.end_a, &chains[m.chain_b], m.end_b, &fill.segments);
        records.push(MergeRecord {
            chain_a: m.chain_a,
            end_a: m.end_a,
            chain_b: m.chain_b,
            end_b: m.end_b,
            cost: m.cost,
            filled_segments: fill.segments.len(),
            point_a: pa.point,
            point_b: pb.point,
            dir_a: pa.dir,
            dir_b: pb.dir,
            feasible: fill.feasible,
        });
        chains[m.chain_a] = merged;
        chains.remove(m.chain_b);
    }
    (chains, records)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn pose(x: f64, y: f64, dx: f64, dy: f64) -> Pose {
        Pose {
            point: Vec2::new(x, y),
            dir: Vec2::new(dx, dy).normalized(),
        }
    }

    fn line(x0: f64, x1: f64) -> Chain {
        let n = ((x1 - x0) / 15.0).round() as usize;
        Chain::open((0..=n).map(|i| Vec2::new(x0 + 15.0 * i as f64, 0.0)).collect())
    }

    #[test]
    fn partial_cost_examples() {
        let a = pose(0.0, 0.0, 1.0, 0.0);
        assert_eq!(euclidean_cost(&a, &pose(3.0, 4.0, 1.0, 0.0)), 5.0);
        assert_eq!(direction_cost(&a, &pose(5.0, 0.0, -1.0, 0.0)), 0.0);
        assert!((direction_cost(&a, &pose(5.0, 0.0, 1.0, 0.0)) - PI).abs() < 1e-12);
        assert!((direction_cost(&a, &pose(5.0, 0.0, 0.0, 1.0)) - PI / 2.0).abs() < 1e-12);
        assert_eq!(curvature_cost(&a, &pose(7.0, 0.0, -1.0, 0.0)), 0.0);
        assert!((curvature_cost(&a, &pose(0.0, 2.0, -1.0, 0.0)) - PI).abs() < 1e-12);
        assert_eq!(curvature_cost(&a, &pose(0.0, 0.0, 0.0, 1.0)), 0.0);
    }

    #[test]
    fn aligned_chains_cost_the_gap() {
        let c = connection_cost(
            &line(0.0, 30.0),
            End::Tail,
            &line(42.0, 72.0),
            End::Head,
            &MergeConfig::default(),
        );
        assert!((c.total - 12.0).abs() < 1e-12);
    }

    #[test]
    fn nearest_collinear_pair_wins() {
        let chains = [line(0.0, 30.0), line(40.0, 70.0), line(120.0, 150.0)];
        let m = best_merge(&chains, &MergeConfig::default()).unwrap();
        assert_eq!((m.chain_a, m.end_a, m.chain_b, m.end_b), (0, End::Tail, 1, End::Head));
    }

    #[test]
    fn cost_limit_blocks_merge() {
        let chains = [line(0.0, 30.0), line(130.0, 160.0)];
        let cfg = MergeConfig {
            max_merge_cost: Some(50.0),
            ..Default::default()
        };
        assert!(best_merge(&chains, &cfg).is_none());
        let (out, rec) = merge_all(&chains, 15.0, &cfg);
        assert_eq!((out.len(), rec.len()), (2, 0));
    }

    #[test]
    fn straight_fill_along_chord() {
        let f = fill_gap(&pose(0.0, 0.0, 1.0, 0.0), &pose(45.0, 0.0, -1.0, 0.0), 15.0, FRAC_PI_8);
        assert!(f.feasible);
        let xs: Vec<f64> = f.segments.iter().map(|s| s.b.x).collect();
        assert_eq!(xs, vec![15.0, 30.0, 45.0]);
        assert!(f.segments.iter().all(|s| s.filled && s.b.y == 0.0));
    }

    #[test]
    fn short_gap_joins_at_midpoint() {
        let a = line(0.0, 30.0);
        let b = line(35.0, 65.0);
        let f = fill_gap(
            &chain_end_pose(&a, End::Tail),
            &chain_end_pose(&b, End::Head),
            15.0,
            FRAC_PI_8,
        );
        assert!(f.segments.is_empty());
        let m = merge_pair(&a, End::Tail, &b, End::Head, &f.segments);
        assert_eq!(m.segment_count(), 4);
        assert_eq!(m.joints[2], Vec2::new(32.5, 0.0));
    }

    #[test]
    fn tail_to_tail_reverses_b() {
        let a = line(0.0, 30.0);
        let b = line(50.0, 80.0).reversed();
        let m = merge_pair(&a, End::Tail, &b, End::Tail, &[]);
        let xs: Vec<f64> = m.joints.iter().map(|j| j.x).collect();
        assert_eq!(xs, vec![0.0, 15.0, 40.0, 65.0, 80.0]);
    }

    #[test]
    fn head_merge_reverses_a() {
        let a = line(50.0, 80.0);
        let b = line(0.0, 30.0).reversed();
        let m = merge_pair(&a, End::Head, &b, End::Head, &[]);
        assert_eq!(m.joints.first().unwrap().x, 80.0);
        assert_eq!(m.joints.last().unwrap().x, 0.0);
    }

    #[test]
    fn filled_flags_follow_segments() {
        let a = line(0.0, 30.0);
        let b = line(75.0, 105.0);
        let (out, rec) = merge_all(&[a, b], 15.0, &MergeConfig::default());
        assert_eq!(out.len(), 1);
        assert_eq!(rec[0].filled_segments, 3);
        assert_eq!(out[0].filled, vec![false, false, true, true, true, false, false]);
        assert!(out[0].is_well_formed());
    }

    #[test]
    fn four_chains_three_records() {
        let chains = [
            line(0.0, 30.0),
            line(100.0, 130.0),
            line(50.0, 80.0),
            line(150.0, 180.0),
        ];
        let (out, rec) = merge_all(&chains, 15.0, &MergeConfig::default());
        assert_eq!((out.len(), rec.len()), (1, 3));
    }

    #[test]
    fn closed_chains_are_not_merged() {
        let ring = Chain {
            joints: vec![Vec2::new(0.0, 0.0), Vec2::new(15.0, 0.0), Vec2::new(7.5, 13.0)],
            filled: vec![false; 3],
            closed: true,
        };
        let (out, rec) = merge_all(&[ring.clone(), line(100.0, 130.0)], 15.0, &MergeConfig::default());
        assert!(rec.is_empty());
        assert_eq!(out[0], ring);
    }
}

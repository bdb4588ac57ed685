//! Seeded synthetic scenes with ground truth, detection scoring, and the
//! per-frame timing harness.
//!
//! A scene is one or two smooth curves (Catmull–Rom splines through a random
//! walk of control points) stroked in a solid color, with some arclength spans
//! left unpainted to act as occlusions. The truth records the dense
//! centerlines, the hidden spans and any crossing points.

use std::collections::HashMap;
use std::time::Instant;

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::chainfit::{Chain, FitConfig};
use crate::geom::{point_segment_distance, Vec2};
use crate::merge::MergeRecord;
use crate::pipeline::{detect, PipelineConfig, StageTimings};
use crate::raster::{connected_components, BinaryMask, Image, Rgb};

#[derive(Debug, Error, PartialEq)]
pub enum SynthError {
    #[error("invalid scene parameters: {0}")]
    InvalidParams(String),
    #[error("no scene satisfied the constraints after {attempts} attempts (seed {seed})")]
    Unsatisfiable { seed: u64, attempts: usize },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SceneParams {
    pub width: usize,
    pub height: usize,
    pub dlo_count: usize,
    pub stroke_width: u32,
    pub dlo_color: Rgb,
    pub background_color: Rgb,
    /// Total over all curves.
    pub gap_count: usize,
    /// Inclusive range of hidden-span lengths, pixels of arclength.
    pub gap_len: [f64; 2],
    /// One self-crossing (single curve) or one crossing between the curves.
    pub crossing: bool,
    pub seed: u64,
}

impl Default for SceneParams {
    fn default() -> Self {
        Self {
            width: 1280,
            height: 720,
            dlo_count: 1,
            stroke_width: 6,
            dlo_color: [255, 0, 0],
            background_color: [255, 255, 255],
            gap_count: 2,
            gap_len: [30.0, 60.0],
            crossing: false,
            seed: 0,
        }
    }
}

impl SceneParams {
    pub fn validate(&self) -> Result<(), SynthError> {
        let bad = |m: &str| Err(SynthError::InvalidParams(m.into()));
        if self.width < 200 || self.height < 200 {
            return bad("frame must be at least 200x200");
        }
        if !(1..=2).contains(&self.dlo_count) {
            return bad("dlo_count must be 1 or 2");
        }
        if self.stroke_width == 0 || self.stroke_width > 20 {
            return bad("stroke_width must be in 1..=20");
        }
        if self.gap_count > 6 {
            return bad("gap_count must be at most 6");
        }
        let [lo, hi] = self.gap_len;
        if !(lo.is_finite() && hi.is_finite()) || lo > hi || lo <= self.stroke_width as f64 {
            return bad("gap_len must be an ordered range above the stroke width");
        }
        if self.dlo_color == self.background_color {
            return bad("dlo_color must differ from background_color");
        }
        Ok(())
    }
}

/// Ground truth for one scene.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SceneTruth {
    /// Dense centerline per curve, at most one pixel between samples.
    pub centerlines: Vec<Vec<Vec2>>,
    /// Hidden arclength intervals per curve, sorted and disjoint.
    pub occluded_spans: Vec<Vec<[f64; 2]>>,
    pub crossings: Vec<Vec2>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Scene {
    pub image: Image,
    pub truth: SceneTruth,
    /// Exactly the painted pixels.
    pub stroke_mask: BinaryMask,
}

const ATTEMPTS: usize = 400;
/// Smallest radius of curvature of a generated curve, pixels.
const MIN_RADIUS: f64 = 60.0;
/// Hidden spans stay this far (arclength) from curve ends and crossings.
const GAP_CLEARANCE: f64 = 50.0;
/// Shortest visible stretch between two hidden spans.
const MIN_VISIBLE: f64 = 60.0;

/// Cumulative arclength of a polyline.
pub fn arclengths(pts: &[Vec2]) -> Vec<f64> {
    let mut s = Vec::with_capacity(pts.len());
    let mut acc = 0.0;
    for (i, p) in pts.iter().enumerate() {
        if i > 0 {
            acc += p.dist(pts[i - 1]);
        }
        s.push(acc);
    }
    s
}

/// Uniform Catmull–Rom spline through `ctrl`, sampled at most a quarter
/// pixel apart. End tangents use mirrored phantom points.
pub fn catmull_rom(ctrl: &[Vec2]) -> Vec<Vec2> {
    let n = ctrl.len();
    if n < 2 {
        return ctrl.to_vec();
    }
    let at = |i: isize| -> Vec2 {
        if i < 0 {
            ctrl[0] * 2.0 - ctrl[1]
        } else if i as usize >= n {
            ctrl[n - 1] * 2.0 - ctrl[n - 2]
        } else {
            ctrl[i as usize]
        }
    };
    let mut out = vec![ctrl[0]];
    for i in 0..n - 1 {
        let (p0, p1, p2, p3) = (
            at(i as isize - 1),
            at(i as isize),
            at(i as isize + 1),
            at(i as isize + 2),
        );
        let steps = (p1.dist(p2) * 4.0).ceil().max(1.0) as usize;
        for k in 1..=steps {
            let t = k as f64 / steps as f64;
            let (t2, t3) = (t * t, t * t * t);
            let p = (p1 * 2.0
                + (p2 - p0) * t
                + (p0 * 2.0 - p1 * 5.0 + p2 * 4.0 - p3) * t2
                + (p1 * 3.0 - p0 - p2 * 3.0 + p3) * t3)
                * 0.5;
            out.push(p);
        }
    }
    out
}

/// Drops samples while keeping consecutive kept points at most `max_gap`
/// apart (given input spacing at most `max_gap`). Both ends are kept.
pub fn decimate(pts: &[Vec2], max_gap: f64) -> Vec<Vec2> {
    let Some(&first) = pts.first() else {
        return Vec::new();
    };
    let mut out = vec![first];
    for i in 1..pts.len() {
        let last = *out.last().unwrap();
        if i + 1 == pts.len() || last.dist(pts[i + 1]) > max_gap {
            out.push(pts[i]);
        }
    }
    out
}

/// Largest heading change per pixel, measured over ~8 px windows.
fn max_curvature(pts: &[Vec2], s: &[f64]) -> f64 {
    let mut worst: f64 = 0.0;
    let mut j = 0;
    let mut k = 0;
    for i in 0..pts.len() {
        while j < i && s[i] - s[j] > 4.0 {
            j += 1;
        }
        while k + 1 < pts.len() && s[k] - s[i] < 4.0 {
            k += 1;
        }
        if j == i || k == i || j == 0 && s[i] < 4.0 || s[k] - s[i] < 4.0 {
            continue;
        }
        let h0 = pts[i] - pts[j];
        let h1 = pts[k] - pts[i];
        let turn = crate::geom::angle_between(h0, h1);
        worst = worst.max(turn / ((s[k] - s[j]) / 2.0));
    }
    worst
}

/// Spatial hash over curve samples.
struct Grid {
    cell: f64,
    bins: HashMap<(i64, i64), Vec<(usize, usize)>>,
}

impl Grid {
    fn new(curves: &[Vec<Vec2>], cell: f64) -> Self {
        let mut bins: HashMap<(i64, i64), Vec<(usize, usize)>> = HashMap::new();
        for (c, pts) in curves.iter().enumerate() {
            for (i, p) in pts.iter().enumerate() {
                bins.entry(Self::key(*p, cell)).or_default().push((c, i));
            }
        }
        Self { cell, bins }
    }

    fn key(p: Vec2, cell: f64) -> (i64, i64) {
        ((p.x / cell).floor() as i64, (p.y / cell).floor() as i64)
    }

    fn near(&self, p: Vec2) -> impl Iterator<Item = &(usize, usize)> {
        let (kx, ky) = Self::key(p, self.cell);
        (-1..=1)
            .flat_map(move |dy| (-1..=1).map(move |dx| (kx + dx, ky + dy)))
            .filter_map(|k| self.bins.get(&k))
            .flatten()
    }
}

fn segments_intersect(a: Vec2, b: Vec2, c: Vec2, d: Vec2) -> Option<Vec2> {
    let r = b - a;
    let s = d - c;
    let den = r.cross(s);
    if den.abs() < 1e-12 {
        return None;
    }
    let t = (c - a).cross(s) / den;
    let u = (c - a).cross(r) / den;
    ((0.0..1.0).contains(&t) && (0.0..1.0).contains(&u)).then(|| a + r * t)
}

/// A place where two stretches of curve meet: positions on each and the point.
#[derive(Debug, Clone, Copy)]
struct Contact {
    a: (usize, usize),
    b: (usize, usize),
    point: Vec2,
}

/// Two samples `(curve, index, curve, index)` closer than the clearance.
type NearPair = (usize, usize, usize, usize);

/// Pairs of samples closer than `clearance` that are not neighbors along one
/// curve, plus every proper crossing between the polylines.
fn contacts(curves: &[Vec<Vec2>], arcs: &[Vec<f64>], clearance: f64) -> (Vec<NearPair>, Vec<Contact>) {
    let grid = Grid::new(curves, clearance);
    let mut near = Vec::new();
    let mut crosses = Vec::new();
    for (c, pts) in curves.iter().enumerate() {
        for (i, &p) in pts.iter().enumerate() {
            for &(d, j) in grid.near(p) {
                if (d, j) <= (c, i) {
                    continue;
                }
                if d == c && arcs[c][j] - arcs[c][i] < 4.0 * clearance {
                    continue;
                }
                if p.dist(curves[d][j]) < clearance {
                    near.push((c, i, d, j));
                }
                if i + 1 < pts.len() && j + 1 < curves[d].len() {
                    if let Some(x) = segments_intersect(p, pts[i + 1], curves[d][j], curves[d][j + 1]) {
                        crosses.push(Contact {
                            a: (c, i),
                            b: (d, j),
                            point: x,
                        });
                    }
                }
            }
        }
    }
    (near, crosses)
}

fn random_curve(rng: &mut ChaCha8Rng, p: &SceneParams, looping: bool) -> Vec<Vec2> {
    let mut turns;
    if looping {
        // the loop's total turn sets the crossing angle to roughly total - pi
        let total = rng.gen_range(4.1..5.2);
        let k = (total / 0.6_f64).ceil() as usize;
        let steps = k + rng.gen_range(4..=6);
        turns = vec![0.0; steps];
        let first = rng.gen_range(2..=steps - k - 2);
        let sign = if rng.gen_bool(0.5) { 1.0 } else { -1.0 };
        for (i, t) in turns.iter_mut().enumerate() {
            *t = if (first..first + k).contains(&i) {
                sign * (total / k as f64 + rng.gen_range(-0.05..0.05))
            } else {
                rng.gen_range(-0.15..0.15)
            };
        }
    } else {
        turns = vec![0.0; rng.gen_range(10..=13)];
        let mut prev = 0.0;
        for t in turns.iter_mut() {
            prev = (0.7 * prev + rng.gen_range(-0.25..0.25_f64)).clamp(-0.45, 0.45);
            *t = prev;
        }
    }
    let mut heading: f64 = rng.gen_range(0.0..std::f64::consts::TAU);
    let mut pts = vec![Vec2::default()];
    for t in turns {
        heading += t;
        let len = rng.gen_range(70.0..95.0);
        let last = *pts.last().unwrap();
        pts.push(last + Vec2::from_angle(heading) * len);
    }
    // shift into the frame with the margin, at a random offset
    let margin = 2.0 * p.stroke_width as f64 + 2.0;
    let dense = catmull_rom(&pts);
    let (mut lo, mut hi) = (Vec2::new(f64::MAX, f64::MAX), Vec2::new(f64::MIN, f64::MIN));
    for q in &dense {
        lo = Vec2::new(lo.x.min(q.x), lo.y.min(q.y));
        hi = Vec2::new(hi.x.max(q.x), hi.y.max(q.y));
    }
    let room = Vec2::new(
        p.width as f64 - 1.0 - 2.0 * margin,
        p.height as f64 - 1.0 - 2.0 * margin,
    ) - (hi - lo);
    if room.x < 0.0 || room.y < 0.0 {
        return Vec::new();
    }
    let shift = Vec2::new(
        margin + rng.gen_range(0.0..=room.x),
        margin + rng.gen_range(0.0..=room.y),
    ) - lo;
    decimate(&dense, 1.0).into_iter().map(|q| q + shift).collect()
}

/// Picks sorted, disjoint hidden spans on a curve of length `len`, away from
/// the ends and from the arclength positions in `avoid`.
fn place_gaps(rng: &mut ChaCha8Rng, len: f64, count: usize, range: [f64; 2], avoid: &[f64]) -> Option<Vec<[f64; 2]>> {
    let mut spans: Vec<[f64; 2]> = Vec::new();
    for _ in 0..count {
        let mut placed = false;
        for _ in 0..200 {
            let g = rng.gen_range(range[0]..=range[1]);
            let hi = len - GAP_CLEARANCE - g;
            if hi <= GAP_CLEARANCE {
                return None;
            }
            let s0 = rng.gen_range(GAP_CLEARANCE..hi);
            let s1 = s0 + g;
            let clear_of_gaps = spans
                .iter()
                .all(|o| s1 + MIN_VISIBLE <= o[0] || o[1] + MIN_VISIBLE <= s0);
            let clear_of_points = avoid.iter().all(|&a| a < s0 - GAP_CLEARANCE || a > s1 + GAP_CLEARANCE);
            if clear_of_gaps && clear_of_points {
                spans.push([s0, s1]);
                placed = true;
                break;
            }
        }
        if !placed {
            return None;
        }
    }
    spans.sort_by(|a, b| a[0].total_cmp(&b[0]));
    Some(spans)
}

fn stamp(mask: &mut BinaryMask, c: Vec2, r: f64) {
    let (x0, x1) = ((c.x - r).floor() as i64, (c.x + r).ceil() as i64);
    let (y0, y1) = ((c.y - r).floor() as i64, (c.y + r).ceil() as i64);
    for y in y0..=y1 {
        for x in x0..=x1 {
            let (dx, dy) = (x as f64 - c.x, y as f64 - c.y);
            if dx * dx + dy * dy <= r * r {
                mask.set_signed(x, y, true);
            }
        }
    }
}

fn try_scene(rng: &mut ChaCha8Rng, p: &SceneParams) -> Option<Scene> {
    let clearance = 3.0 * p.stroke_width as f64;
    let self_loop = p.crossing && p.dlo_count == 1;
    let curves: Vec<Vec<Vec2>> = (0..p.dlo_count).map(|_| random_curve(rng, p, self_loop)).collect();
    if curves.iter().any(|c| c.is_empty()) {
        return None;
    }
    let arcs: Vec<Vec<f64>> = curves.iter().map(|c| arclengths(c)).collect();
    if curves
        .iter()
        .zip(&arcs)
        .any(|(c, s)| max_curvature(c, s) > 1.0 / MIN_RADIUS)
    {
        return None;
    }

    let (near, crosses) = contacts(&curves, &arcs, clearance);
    let wanted = p.crossing as usize;
    if crosses.len() != wanted {
        return None;
    }
    if let Some(x) = crosses.first() {
        // the strands cross cleanly: steep enough, away from the ends, and
        // touching nowhere else
        let dir = |(c, i): (usize, usize)| curves[c][(i + 1).min(curves[c].len() - 1)] - curves[c][i];
        let angle = crate::geom::angle_between(dir(x.a), dir(x.b));
        if !(PI_4..=std::f64::consts::PI - PI_4).contains(&angle) {
            return None;
        }
        for (c, i) in [x.a, x.b] {
            if arcs[c][i] < 100.0 || arcs[c].last().unwrap() - arcs[c][i] < 100.0 {
                return None;
            }
        }
        let reach = clearance / (angle / 2.0).sin().min((PI_2 - angle / 2.0).sin()) + clearance;
        if near
            .iter()
            .any(|&(c, i, d, j)| curves[c][i].dist(x.point) > reach || curves[d][j].dist(x.point) > reach)
        {
            return None;
        }
    } else if !near.is_empty() {
        return None;
    }

    let mut spans = Vec::new();
    for c in 0..p.dlo_count {
        let count = p.gap_count / p.dlo_count + usize::from(c < p.gap_count % p.dlo_count);
        let avoid: Vec<f64> = crosses
            .iter()
            .flat_map(|x| [x.a, x.b])
            .filter(|&(cc, _)| cc == c)
            .map(|(cc, i)| arcs[cc][i])
            .collect();
        spans.push(place_gaps(rng, *arcs[c].last().unwrap(), count, p.gap_len, &avoid)?);
    }

    let mut mask = BinaryMask::new(p.width, p.height);
    let r = p.stroke_width as f64 / 2.0;
    for (c, pts) in curves.iter().enumerate() {
        for (q, &s) in pts.iter().zip(&arcs[c]) {
            if !spans[c].iter().any(|g| s > g[0] && s < g[1]) {
                stamp(&mut mask, *q, r);
            }
        }
    }
    if !p.crossing {
        let expected: usize = spans.iter().map(|g| g.len() + 1).sum();
        if connected_components(&mask).count as usize != expected {
            return None;
        }
    }

    let mut image = Image::new(p.width, p.height, p.background_color);
    for (x, y) in mask.foreground() {
        image.set(x, y, p.dlo_color);
    }
    Some(Scene {
        image,
        truth: SceneTruth {
            centerlines: curves,
            occluded_spans: spans,
            crossings: crosses.iter().map(|x| x.point).collect(),
        },
        stroke_mask: mask,
    })
}

const PI_4: f64 = std::f64::consts::FRAC_PI_4;
const PI_2: f64 = std::f64::consts::FRAC_PI_2;

/// Deterministic in `params` (including the seed).
pub fn generate_scene(params: &SceneParams) -> Result<Scene, SynthError> {
    params.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(params.seed);
    for _ in 0..ATTEMPTS {
        if let Some(scene) = try_scene(&mut rng, params) {
            return Ok(scene);
        }
    }
    Err(SynthError::Unsatisfiable {
        seed: params.seed,
        attempts: ATTEMPTS,
    })
}

/// Correctness thresholds.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ScoreConfig {
    /// Pixels.
    pub tol: f64,
    /// Frame deviation limit as a multiple of `tol`.
    pub frame_deviation_factor: f64,
    /// Arclength at each curve end exempt from coverage, pixels.
    pub end_margin: f64,
}

impl Default for ScoreConfig {
    fn default() -> Self {
        Self {
            tol: 5.0,
            frame_deviation_factor: 2.0,
            end_margin: 21.0,
        }
    }
}

impl ScoreConfig {
    /// Default thresholds with the end margin sized for the given segment
    /// length and stroke width.
    pub fn for_scene(fit: &FitConfig, stroke_width: u32) -> Self {
        Self {
            end_margin: fit.segment_length + stroke_width as f64,
            ..Default::default()
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Metrics {
    pub frame_correct: bool,
    pub occlusions_total: usize,
    pub occlusions_correct: usize,
    pub merges_total: usize,
    pub merges_correct: usize,
    /// Largest distance from a detected joint to the nearest centerline.
    pub max_deviation: f64,
    /// Per-frame pipeline time, milliseconds.
    pub time_ms: f64,
}

/// Nearest centerline position of a point.
#[derive(Debug, Clone, Copy)]
struct Projection {
    curve: usize,
    s: f64,
    dist: f64,
    index: usize,
}

struct TruthIndex<'a> {
    truth: &'a SceneTruth,
    arcs: Vec<Vec<f64>>,
}

impl<'a> TruthIndex<'a> {
    fn new(truth: &'a SceneTruth) -> Self {
        Self {
            truth,
            arcs: truth.centerlines.iter().map(|c| arclengths(c)).collect(),
        }
    }

    fn project(&self, p: Vec2) -> Option<Projection> {
        let mut best: Option<Projection> = None;
        for (c, pts) in self.truth.centerlines.iter().enumerate() {
            for (i, w) in pts.windows(2).enumerate() {
                let (dist, t) = point_segment_distance(p, w[0], w[1]);
                if best.is_none_or(|b| dist < b.dist) {
                    let s = self.arcs[c][i] + t * (self.arcs[c][i + 1] - self.arcs[c][i]);
                    best = Some(Projection {
                        curve: c,
                        s,
                        dist,
                        index: i,
                    });
                }
            }
        }
        best
    }

    /// Like `project`, but among positions within `reach` prefers the strand
    /// running along `dir`, so ends near a crossing land on their own strand.
    fn project_along(&self, p: Vec2, dir: Vec2, reach: f64) -> Option<Projection> {
        let mut best: Option<(f64, Projection)> = None;
        for (c, pts) in self.truth.centerlines.iter().enumerate() {
            for (i, w) in pts.windows(2).enumerate() {
                let (dist, t) = point_segment_distance(p, w[0], w[1]);
                if dist > reach {
                    continue;
                }
                let align = self.tangent(c, i).dot(dir).abs();
                let score = dist - reach * align;
                if best.is_none_or(|(b, _)| score < b) {
                    let s = self.arcs[c][i] + t * (self.arcs[c][i + 1] - self.arcs[c][i]);
                    best = Some((
                        score,
                        Projection {
                            curve: c,
                            s,
                            dist,
                            index: i,
                        },
                    ));
                }
            }
        }
        best.map(|(_, p)| p)
    }

    fn tangent(&self, c: usize, i: usize) -> Vec2 {
        let pts = &self.truth.centerlines[c];
        let (a, b) = (i.saturating_sub(3), (i + 4).min(pts.len() - 1));
        (pts[b] - pts[a]).normalized()
    }
}

fn chain_distance(p: Vec2, chains: &[Chain]) -> f64 {
    chains
        .iter()
        .flat_map(|c| c.segments())
        .map(|s| point_segment_distance(p, s.a, s.b).0)
        .fold(f64::INFINITY, f64::min)
}

/// Joints that bound at least one fitted (not filled) segment.
fn fitted_joints(chains: &[Chain]) -> Vec<Vec2> {
    let mut out = Vec::new();
    for c in chains {
        for s in c.segments().filter(|s| !s.filled) {
            out.push(s.a);
            out.push(s.b);
        }
    }
    out
}

/// Scores a detection against the truth.
///
/// * A merge is correct when both joined ends lie within twice `tol` of the
///   same curve, each end points along the curve toward the other, and no
///   fitted joint of the output lies on the curve strictly between them
///   (joints near a crossing are ignored, as both strands pass there).
/// * An occlusion is correct when every centerline sample in the hidden span
///   is within `tol` of a chain and every filled joint projecting into the
///   span is within `tol` of the centerline.
/// * The frame is correct when every centerline sample outside the end
///   margins is within `tol` of a chain and every joint is within
///   `frame_deviation_factor · tol` of a centerline.
pub fn score_detection(chains: &[Chain], records: &[MergeRecord], truth: &SceneTruth, cfg: &ScoreConfig) -> Metrics {
    let idx = TruthIndex::new(truth);
    let tol = cfg.tol;

    let max_deviation = chains
        .iter()
        .flat_map(|c| c.joints.iter())
        .map(|&j| idx.project(j).map_or(f64::INFINITY, |p| p.dist))
        .fold(0.0, f64::max);
    let covered = truth.centerlines.iter().zip(&idx.arcs).all(|(pts, s)| {
        let len = *s.last().unwrap_or(&0.0);
        pts.iter()
            .zip(s)
            .filter(|(_, &si)| si >= cfg.end_margin && si <= len - cfg.end_margin)
            .all(|(&q, _)| chain_distance(q, chains) <= tol)
    });
    let frame_correct = !chains.is_empty() && covered && max_deviation < cfg.frame_deviation_factor * tol;

    let mut occlusions_total = 0;
    let mut occlusions_correct = 0;
    let filled_joints: Vec<(Vec2, Option<Projection>)> = chains
        .iter()
        .flat_map(|c| c.segments().filter(|s| s.filled).flat_map(|s| [s.a, s.b]))
        .map(|j| (j, idx.project(j)))
        .collect();
    for (c, spans) in truth.occluded_spans.iter().enumerate() {
        for span in spans {
            occlusions_total += 1;
            let pts = &truth.centerlines[c];
            let bridged = pts
                .iter()
                .zip(&idx.arcs[c])
                .filter(|(_, &s)| s >= span[0] && s <= span[1])
                .all(|(&q, _)| chain_distance(q, chains) <= tol);
            let joints_ok = filled_joints.iter().all(|(_, p)| match p {
                Some(p) if p.curve == c && p.s >= span[0] - tol && p.s <= span[1] + tol => p.dist <= tol,
                _ => true,
            });
            if bridged && joints_ok && !chains.is_empty() {
                occlusions_correct += 1;
            }
        }
    }

    let fitted: Vec<Projection> = fitted_joints(chains)
        .into_iter()
        .filter(|j| truth.crossings.iter().all(|x| x.dist(*j) > 2.0 * tol + 6.0))
        .filter_map(|j| idx.project(j))
        .filter(|p| p.dist <= 2.0 * tol)
        .collect();
    let merges_correct = records
        .iter()
        .filter(|m| {
            let (Some(a), Some(b)) = (
                idx.project_along(m.point_a, m.dir_a, 2.0 * tol),
                idx.project_along(m.point_b, m.dir_b, 2.0 * tol),
            ) else {
                return false;
            };
            if a.curve != b.curve || a.dist > 2.0 * tol || b.dist > 2.0 * tol {
                return false;
            }
            let toward = |p: &Projection, dir: Vec2, other: f64| {
                let along = dir.dot(idx.tangent(p.curve, p.index));
                (other - p.s).abs() <= tol || (along > 0.0) == (other > p.s)
            };
            if !toward(&a, m.dir_a, b.s) || !toward(&b, m.dir_b, a.s) {
                return false;
            }
            let (lo, hi) = (a.s.min(b.s), a.s.max(b.s));
            !fitted
                .iter()
                .any(|p| p.curve == a.curve && p.s > lo + tol && p.s < hi - tol)
        })
        .count();

    Metrics {
        frame_correct,
        occlusions_total,
        occlusions_correct,
        merges_total: records.len(),
        merges_correct,
        max_deviation,
        time_ms: 0.0,
    }
}

/// Corpus manifest.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub version: u32,
    pub scenes: Vec<SceneParams>,
}

impl Manifest {
    pub fn new(scenes: Vec<SceneParams>) -> Self {
        Self { version: 1, scenes }
    }
}

/// `n` full-size single-curve scenes with 2 to 4 hidden spans; every third
/// scene has a self-crossing.
pub fn acceptance_corpus(n: usize) -> Vec<SceneParams> {
    (1..=n as u64)
        .map(|seed| SceneParams {
            gap_count: 2 + (seed % 3) as usize,
            crossing: seed % 3 == 0,
            seed,
            ..Default::default()
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FrameResult {
    pub seed: u64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub metrics: Option<Metrics>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub timings: Option<StageTimings>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Accuracy {
    pub frames_total: usize,
    pub frames_failed: usize,
    pub frames_correct: usize,
    pub occlusions_total: usize,
    pub occlusions_correct: usize,
    pub merges_total: usize,
    pub merges_correct: usize,
    pub frame_accuracy: f64,
    pub occlusion_accuracy: f64,
    pub merge_accuracy: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct TimingReport {
    pub mean_ms: f64,
    pub median_ms: f64,
    pub std_ms: f64,
    pub max_ms: f64,
    pub per_stage_mean_ms: StageTimings,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchReport {
    pub version: u32,
    pub accuracy: Accuracy,
    pub thresholds: ScoreConfig,
    pub timing: TimingReport,
    pub pipeline: PipelineConfig,
    pub frames: Vec<FrameResult>,
    pub environment: String,
}

fn ratio(a: usize, b: usize) -> f64 {
    if b == 0 {
        0.0
    } else {
        a as f64 / b as f64
    }
}

/// Sums per-frame metrics; failed frames count toward the total but not
/// toward any correct count.
pub fn aggregate(frames: &[FrameResult]) -> Accuracy {
    let mut a = Accuracy {
        frames_total: frames.len(),
        ..Default::default()
    };
    for f in frames {
        match &f.metrics {
            Some(m) => {
                a.frames_correct += m.frame_correct as usize;
                a.occlusions_total += m.occlusions_total;
                a.occlusions_correct += m.occlusions_correct;
                a.merges_total += m.merges_total;
                a.merges_correct += m.merges_correct;
            }
            None => a.frames_failed += 1,
        }
    }
    a.frame_accuracy = ratio(a.frames_correct, a.frames_total);
    a.occlusion_accuracy = ratio(a.occlusions_correct, a.occlusions_total);
    a.merge_accuracy = ratio(a.merges_correct, a.merges_total);
    a
}

pub fn timing_report(frames: &[FrameResult]) -> TimingReport {
    let times: Vec<&StageTimings> = frames.iter().filter_map(|f| f.timings.as_ref()).collect();
    if times.is_empty() {
        return TimingReport::default();
    }
    let n = times.len() as f64;
    let mut totals: Vec<f64> = times.iter().map(|t| t.total).collect();
    totals.sort_by(f64::total_cmp);
    let mean = totals.iter().sum::<f64>() / n;
    let median = if totals.len() % 2 == 1 {
        totals[totals.len() / 2]
    } else {
        (totals[totals.len() / 2 - 1] + totals[totals.len() / 2]) / 2.0
    };
    let std = (totals.iter().map(|t| (t - mean).powi(2)).sum::<f64>() / n).sqrt();
    let avg = |f: fn(&StageTimings) -> f64| times.iter().map(|t| f(t)).sum::<f64>() / n;
    TimingReport {
        mean_ms: mean,
        median_ms: median,
        std_ms: std,
        max_ms: *totals.last().unwrap(),
        per_stage_mean_ms: StageTimings {
            segment: avg(|t| t.segment),
            filter: avg(|t| t.filter),
            thin: avg(|t| t.thin),
            trace: avg(|t| t.trace),
            fit: avg(|t| t.fit),
            prune: avg(|t| t.prune),
            merge: avg(|t| t.merge),
            total: mean,
        },
    }
}

/// Generates, detects and scores one frame. Only detection is timed.
pub fn run_frame(params: &SceneParams, cfg: &PipelineConfig, score: &ScoreConfig) -> FrameResult {
    match generate_scene(params) {
        Ok(scene) => {
            let d = detect(&scene.image, cfg);
            let mut m = score_detection(&d.chains, &d.records, &scene.truth, score);
            m.time_ms = d.timings.total;
            FrameResult {
                seed: params.seed,
                metrics: Some(m),
                timings: Some(d.timings),
                error: None,
            }
        }
        Err(e) => FrameResult {
            seed: params.seed,
            metrics: None,
            timings: None,
            error: Some(e.to_string()),
        },
    }
}

/// Runs every scene in order on the calling thread.
pub fn run_benchmark(corpus: &[SceneParams], cfg: &PipelineConfig, score: &ScoreConfig) -> BenchReport {
    let started = Instant::now();
    let frames: Vec<FrameResult> = corpus.iter().map(|p| run_frame(p, cfg, score)).collect();
    BenchReport {
        version: 1,
        accuracy: aggregate(&frames),
        thresholds: *score,
        timing: timing_report(&frames),
        pipeline: *cfg,
        frames,
        environment: format!(
            "{} {}, single worker, {} build, wall {:.1} s",
            std::env::consts::OS,
            std::env::consts::ARCH,
            if cfg!(debug_assertions) { "debug" } else { "release" },
            started.elapsed().as_secs_f64()
        ),
    }
}

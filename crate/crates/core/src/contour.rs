//! Outer border following on thinned masks.
//!
//! Each 8-connected component is traced once, clockwise on screen, starting
//! at its topmost-leftmost pixel with the initial search direction pointing
//! west. On a one-pixel-wide skeleton the border walks out along every
//! branch and back again, so branch tips show up as reversals in the
//! sequence. Hole borders are not traced.

use crate::raster::{connected_components, BinaryMask};

/// Ordered 8-adjacent pixel coordinates.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PixelPath {
    pub points: Vec<(i32, i32)>,
}

impl PixelPath {
    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }
}

/// Clockwise on screen (y down), starting west.
const DIRS: [(i32, i32); 8] = [(-1, 0), (-1, -1), (0, -1), (1, -1), (1, 0), (1, 1), (0, 1), (-1, 1)];

fn dir_index(from: (i32, i32), to: (i32, i32)) -> usize {
    let d = (to.0 - from.0, to.1 - from.1);
    DIRS.iter()
        .position(|&x| x == d)
        .expect("consecutive border pixels are 8-adjacent")
}

fn fg(mask: &BinaryMask, p: (i32, i32)) -> bool {
    mask.get_signed(p.0 as i64, p.1 as i64)
}

/// Traces the outer border of the component containing `start`, which must
/// be its topmost-leftmost pixel.
pub fn trace_from(mask: &BinaryMask, start: (i32, i32)) -> PixelPath {
    let step = |p: (i32, i32), d: usize| (p.0 + DIRS[d].0, p.1 + DIRS[d].1);
    // Counter-clockwise from west: the last foreground neighbor the clockwise walk will reach.
    let first = [0usize, 7, 6, 5, 4, 3, 2, 1]
        .into_iter()
        .map(|d| step(start, d))
        .find(|&p| fg(mask, p));
    let Some(first) = first else {
        return PixelPath { points: vec![start] };
    };
    let mut points = vec![start];
    let (mut prev, mut cur) = (first, start);
    loop {
        let back = dir_index(cur, prev);
        let next = (1..=8)
            .map(|k| step(cur, (back + k) % 8))
            .find(|&p| fg(mask, p))
            .expect("a traced pixel always has a foreground neighbor");
        if next == start && cur == first {
            break;
        }
        prev = cur;
        cur = next;
        points.push(cur);
    }
    PixelPath { points }
}

/// One clockwise outer border per 8-connected component, ordered by each
/// component's first pixel in raster order.
pub fn trace_borders(mask: &BinaryMask) -> Vec<PixelPath> {
    let cc = connected_components(mask);
    let mut seen = vec![false; cc.count as usize];
    let mut out = Vec::with_capacity(cc.count as usize);
    for (i, &l) in cc.labels.iter().enumerate() {
        if l == 0 || seen[l as usize - 1] {
            continue;
        }
        seen[l as usize - 1] = true;
        let start = ((i % cc.width) as i32, (i / cc.width) as i32);
        out.push(trace_from(mask, start));
    }
    out
}

/// Sum of the Euclidean steps (1 or √2) between `path[i]` and `path[j]`.
///
/// Panics unless `i <= j < path.len()`.
pub fn path_arclength(path: &PixelPath, i: usize, j: usize) -> f64 {
    assert!(
        i <= j && j < path.points.len(),
        "arclength range {i}..={j} outside path of length {}",
        path.points.len()
    );
    path.points[i..=j]
        .windows(2)
        .map(|w| {
            let (dx, dy) = (w[1].0 - w[0].0, w[1].1 - w[0].1);
            ((dx * dx + dy * dy) as f64).sqrt()
        })
        .sum()
}

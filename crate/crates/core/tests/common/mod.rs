//! Independent reference implementations and fixture generators shared by
//! the integration tests. Outside `chains`, nothing here calls into the code
//! under test except for the `BinaryMask` container.
#![allow(dead_code)]

pub mod chains;

use dlo::raster::BinaryMask;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

fn to_grid(m: &BinaryMask) -> Vec<Vec<bool>> {
    (0..m.height())
        .map(|y| (0..m.width()).map(|x| m.get(x, y)).collect())
        .collect()
}

fn from_grid(g: &[Vec<bool>]) -> BinaryMask {
    let mut m = BinaryMask::new(g[0].len(), g.len());
    for (y, row) in g.iter().enumerate() {
        for (x, &v) in row.iter().enumerate() {
            m.set(x, y, v);
        }
    }
    m
}

/// Recursive 8-connected flood fill. Labels are assigned in raster order.
pub fn flood_fill_labels(m: &BinaryMask) -> (Vec<Vec<u32>>, u32) {
    fn fill(g: &[Vec<bool>], labels: &mut Vec<Vec<u32>>, x: i64, y: i64, id: u32) {
        if y < 0 || x < 0 || y as usize >= g.len() || x as usize >= g[0].len() {
            return;
        }
        let (ux, uy) = (x as usize, y as usize);
        if !g[uy][ux] || labels[uy][ux] != 0 {
            return;
        }
        labels[uy][ux] = id;
        for dy in -1..=1 {
            for dx in -1..=1 {
                if dx != 0 || dy != 0 {
                    fill(g, labels, x + dx, y + dy, id);
                }
            }
        }
    }
    let g = to_grid(m);
    let mut labels = vec![vec![0u32; m.width()]; m.height()];
    let mut n = 0;
    for y in 0..m.height() {
        for x in 0..m.width() {
            if g[y][x] && labels[y][x] == 0 {
                n += 1;
                fill(&g, &mut labels, x as i64, y as i64, n);
            }
        }
    }
    (labels, n)
}

pub fn component_count(m: &BinaryMask) -> u32 {
    flood_fill_labels(m).1
}

/// 4-connected background components of the mask padded by one pixel.
pub fn background_components(m: &BinaryMask) -> usize {
    let (w, h) = (m.width() + 2, m.height() + 2);
    let bg = |x: usize, y: usize| x == 0 || y == 0 || x == w - 1 || y == h - 1 || !m.get(x - 1, y - 1);
    let mut seen = vec![false; w * h];
    let mut n = 0;
    for s in 0..w * h {
        if seen[s] || !bg(s % w, s / w) {
            continue;
        }
        n += 1;
        let mut stack = vec![s];
        seen[s] = true;
        while let Some(i) = stack.pop() {
            let (x, y) = (i % w, i / w);
            let mut push = |nx: usize, ny: usize| {
                let j = ny * w + nx;
                if !seen[j] && bg(nx, ny) {
                    seen[j] = true;
                    stack.push(j);
                }
            };
            if x > 0 {
                push(x - 1, y);
            }
            if x + 1 < w {
                push(x + 1, y);
            }
            if y > 0 {
                push(x, y - 1);
            }
            if y + 1 < h {
                push(x, y + 1);
            }
        }
    }
    n
}

/// Straightforward two-subiteration thinning over the full grid, with the
/// same isolated-square rule as the library.
pub fn reference_thin(m: &BinaryMask) -> BinaryMask {
    let mut g = to_grid(m);
    let (w, h) = (m.width() as i64, m.height() as i64);
    let at = |g: &Vec<Vec<bool>>, x: i64, y: i64| -> u32 {
        (x >= 0 && y >= 0 && x < w && y < h && g[y as usize][x as usize]) as u32
    };
    loop {
        let mut changed = false;
        for pass in 0..2 {
            let snapshot = g.clone();
            let mut marked = vec![vec![false; w as usize]; h as usize];
            for y in 0..h {
                for x in 0..w {
                    if !snapshot[y as usize][x as usize] {
                        continue;
                    }
                    let p2 = at(&snapshot, x, y - 1);
                    let p3 = at(&snapshot, x + 1, y - 1);
                    let p4 = at(&snapshot, x + 1, y);
                    let p5 = at(&snapshot, x + 1, y + 1);
                    let p6 = at(&snapshot, x, y + 1);
                    let p7 = at(&snapshot, x - 1, y + 1);
                    let p8 = at(&snapshot, x - 1, y);
                    let p9 = at(&snapshot, x - 1, y - 1);
                    let seq = [p2, p3, p4, p5, p6, p7, p8, p9, p2];
                    let b: u32 = seq[..8].iter().sum();
                    let a = seq.windows(2).filter(|s| s[0] == 0 && s[1] == 1).count();
                    let cond = if pass == 0 {
                        p2 * p4 * p6 == 0 && p4 * p6 * p8 == 0
                    } else {
                        p2 * p4 * p8 == 0 && p2 * p6 * p8 == 0
                    };
                    if (2..=6).contains(&b) && a == 1 && cond {
                        marked[y as usize][x as usize] = true;
                    }
                }
            }
            for y in 0..(h - 1) as usize {
                for x in 0..(w - 1) as usize {
                    if marked[y][x] && marked[y][x + 1] && marked[y + 1][x] && marked[y + 1][x + 1] {
                        marked[y + 1][x + 1] = false;
                    }
                }
            }
            for y in 0..h as usize {
                for x in 0..w as usize {
                    if marked[y][x] {
                        g[y][x] = false;
                        changed = true;
                    }
                }
            }
        }
        if !changed && !reference_break_blocks(&mut g) {
            break;
        }
    }
    from_grid(&g)
}

/// Whether the foreground 8-neighbors of (x, y) form one 8-connected set
/// when the center is ignored. Plain search over the 3×3 window.
fn neighbors_connected(g: &[Vec<bool>], x: i64, y: i64) -> bool {
    let (w, h) = (g[0].len() as i64, g.len() as i64);
    let on = |x: i64, y: i64| x >= 0 && y >= 0 && x < w && y < h && g[y as usize][x as usize];
    let cells: Vec<(i64, i64)> = (-1..=1)
        .flat_map(|dy| (-1..=1).map(move |dx| (dx, dy)))
        .filter(|&(dx, dy)| (dx, dy) != (0, 0) && on(x + dx, y + dy))
        .collect();
    if cells.is_empty() {
        return true;
    }
    let mut reached = vec![false; cells.len()];
    reached[0] = true;
    let mut stack = vec![0];
    while let Some(i) = stack.pop() {
        for j in 0..cells.len() {
            let (a, b) = (cells[i], cells[j]);
            if !reached[j] && (a.0 - b.0).abs() <= 1 && (a.1 - b.1).abs() <= 1 {
                reached[j] = true;
                stack.push(j);
            }
        }
    }
    reached.iter().all(|&r| r)
}

fn reference_break_blocks(g: &mut [Vec<bool>]) -> bool {
    let (w, h) = (g[0].len(), g.len());
    let mut removed = false;
    for y in 0..h.saturating_sub(1) {
        for x in 0..w.saturating_sub(1) {
            if !(g[y][x] && g[y][x + 1] && g[y + 1][x] && g[y + 1][x + 1]) {
                continue;
            }
            for (bx, by) in [(x, y), (x + 1, y), (x, y + 1), (x + 1, y + 1)] {
                if neighbors_connected(g, bx as i64, by as i64) {
                    g[by][bx] = false;
                    removed = true;
                    break;
                }
            }
        }
    }
    removed
}

/// Moore-neighbor border following that stops when the first move repeats, one
/// border per component started at its first raster pixel.
pub fn moore_trace(m: &BinaryMask) -> Vec<Vec<(i32, i32)>> {
    // Clockwise on screen starting west.
    const RING: [(i32, i32); 8] = [(-1, 0), (-1, -1), (0, -1), (1, -1), (1, 0), (1, 1), (0, 1), (-1, 1)];
    let fg = |p: (i32, i32)| m.get_signed(p.0 as i64, p.1 as i64);
    let ring_pos = |c: (i32, i32), p: (i32, i32)| RING.iter().position(|&r| r == (p.0 - c.0, p.1 - c.1)).unwrap();
    let (labels, _) = flood_fill_labels(m);
    let mut done = std::collections::HashSet::new();
    let mut out = Vec::new();
    for y in 0..m.height() {
        for x in 0..m.width() {
            let l = labels[y][x];
            if l == 0 || !done.insert(l) {
                continue;
            }
            let start = (x as i32, y as i32);
            let mut path = vec![start];
            let (mut cur, mut back) = (start, (start.0 - 1, start.1));
            let mut second = None;
            loop {
                let b = ring_pos(cur, back);
                let mut prev_examined = back;
                let mut next = None;
                for k in 1..=8 {
                    let d = RING[(b + k) % 8];
                    let p = (cur.0 + d.0, cur.1 + d.1);
                    if fg(p) {
                        next = Some(p);
                        break;
                    }
                    prev_examined = p;
                }
                let Some(next) = next else { break };
                match second {
                    None => second = Some(next),
                    // about to repeat the very first move
                    Some(s) if cur == start && next == s => {
                        path.pop();
                        break;
                    }
                    _ => {}
                }
                cur = next;
                back = prev_examined;
                path.push(cur);
            }
            out.push(path);
        }
    }
    out
}

pub fn sorted_multiset(mut pts: Vec<(i32, i32)>) -> Vec<(i32, i32)> {
    pts.sort();
    pts
}

pub fn random_noise_mask(seed: u64, w: usize, h: usize, density: f64) -> BinaryMask {
    let mut r = rng(seed);
    let mut m = BinaryMask::new(w, h);
    for y in 0..h {
        for x in 0..w {
            if r.gen_bool(density) {
                m.set(x, y, true);
            }
        }
    }
    m
}

pub fn stamp_disk(m: &mut BinaryMask, cx: f64, cy: f64, r: f64) {
    let (x0, x1) = ((cx - r).floor() as i64, (cx + r).ceil() as i64);
    let (y0, y1) = ((cy - r).floor() as i64, (cy + r).ceil() as i64);
    for y in y0..=y1 {
        for x in x0..=x1 {
            let (dx, dy) = (x as f64 - cx, y as f64 - cy);
            if dx * dx + dy * dy <= r * r {
                m.set_signed(x, y, true);
            }
        }
    }
}

/// Union of a few disks and thick random strokes.
pub fn random_blobby_mask(seed: u64, w: usize, h: usize) -> BinaryMask {
    let mut r = rng(seed);
    let mut m = BinaryMask::new(w, h);
    for _ in 0..r.gen_range(1..4) {
        let (cx, cy) = (r.gen_range(0.0..w as f64), r.gen_range(0.0..h as f64));
        stamp_disk(&mut m, cx, cy, r.gen_range(1.5..8.0));
    }
    for _ in 0..r.gen_range(1..4) {
        let (mut x, mut y) = (r.gen_range(0.0..w as f64), r.gen_range(0.0..h as f64));
        let mut heading: f64 = r.gen_range(0.0..std::f64::consts::TAU);
        let rad = r.gen_range(0.8..3.5);
        for _ in 0..r.gen_range(10..60) {
            stamp_disk(&mut m, x, y, rad);
            heading += r.gen_range(-0.3..0.3);
            x += heading.cos();
            y += heading.sin();
        }
    }
    m
}

pub fn rectangle(w: usize, h: usize, x0: usize, y0: usize, rw: usize, rh: usize) -> BinaryMask {
    let mut m = BinaryMask::new(w, h);
    for y in y0..y0 + rh {
        for x in x0..x0 + rw {
            m.set(x, y, true);
        }
    }
    m
}

pub fn annulus(size: usize, r_in: f64, r_out: f64) -> BinaryMask {
    let mut m = BinaryMask::new(size, size);
    let c = (size as f64 - 1.0) / 2.0;
    for y in 0..size {
        for x in 0..size {
            let d = ((x as f64 - c).powi(2) + (y as f64 - c).powi(2)).sqrt();
            if d >= r_in && d <= r_out {
                m.set(x, y, true);
            }
        }
    }
    m
}

/// A thick sine-like stroke.
pub fn thick_curve(w: usize, h: usize, thickness: f64) -> BinaryMask {
    let mut m = BinaryMask::new(w, h);
    let mut t = 0.0;
    while t <= 1.0 {
        let x = 5.0 + t * (w as f64 - 10.0);
        let y = h as f64 / 2.0 + (h as f64 / 4.0) * (t * 6.0).sin();
        stamp_disk(&mut m, x, y, thickness / 2.0);
        t += 0.002;
    }
    m
}

/// Rectangles, annuli and curves used alongside the random masks.
pub fn fixtures() -> Vec<(String, BinaryMask)> {
    vec![
        ("rect 21x5".into(), rectangle(25, 9, 2, 2, 21, 5)),
        ("rect 30x12".into(), rectangle(40, 20, 5, 4, 30, 12)),
        ("square 2x2".into(), rectangle(6, 6, 2, 2, 2, 2)),
        ("annulus thin".into(), annulus(32, 8.0, 11.0)),
        ("annulus thick".into(), annulus(64, 10.0, 20.0)),
        ("curve 5px".into(), thick_curve(64, 40, 5.0)),
        ("curve 9px".into(), thick_curve(96, 64, 9.0)),
    ]
}

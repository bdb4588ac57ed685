//! Two-subiteration parallel thinning.
//!
//! Each subiteration marks every foreground pixel whose 3×3 neighborhood
//! (P2 = north, clockwise to P9 = north-west) satisfies
//!
//! * 2 ≤ B(P1) ≤ 6, B = number of foreground neighbors,
//! * A(P1) = 1, A = number of 0→1 transitions in P2, P3, …, P9, P2,
//! * P2·P4·P6 = 0 and P4·P6·P8 = 0 (first pass) or
//!   P2·P4·P8 = 0 and P2·P6·P8 = 0 (second pass),
//!
//! against a snapshot of the previous state, then clears them all at once.
//! Plain parallel deletion erases an isolated 2×2 square completely, so any
//! 2×2 block whose four pixels are all marked (scanned in raster order by
//! top-left corner) keeps its bottom-right pixel. The image border is
//! treated as background.
//!
//! Pinhole-sized holes can leave 2×2 blocks that no subiteration removes.
//! Once a full pass deletes nothing, blocks are scanned in raster order by
//! top-left corner and the first of their pixels (top-left, top-right,
//! bottom-left, bottom-right) whose foreground neighbors stay 8-connected
//! among themselves is cleared immediately. Thinning resumes until neither
//! step changes anything.

use crate::raster::{connected_components, BinaryMask};

/// A thinned component.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Skeleton {
    pub mask: BinaryMask,
    /// Id of the component in the labeling of the unthinned mask.
    pub source_component: u32,
}

// Neighbor bits: P2=bit0 (N), P3=bit1 (NE), P4=bit2 (E), P5=bit3 (SE),
// P6=bit4 (S), P7=bit5 (SW), P8=bit6 (W), P9=bit7 (NW).
const P2: u8 = 1;
const P4: u8 = 1 << 2;
const P6: u8 = 1 << 4;
const P8: u8 = 1 << 6;

fn deletable(n: u8, first_pass: bool) -> bool {
    let b = n.count_ones();
    if !(2..=6).contains(&b) {
        return false;
    }
    let transitions = (0..8)
        .filter(|&i| n & (1 << i) == 0 && n & (1 << ((i + 1) % 8)) != 0)
        .count();
    if transitions != 1 {
        return false;
    }
    let all = |mask: u8| n & mask == mask;
    if first_pass {
        !all(P2 | P4 | P6) && !all(P4 | P6 | P8)
    } else {
        !all(P2 | P4 | P8) && !all(P2 | P6 | P8)
    }
}

fn lookup_table(first_pass: bool) -> [bool; 256] {
    let mut t = [false; 256];
    for (n, slot) in t.iter_mut().enumerate() {
        *slot = deletable(n as u8, first_pass);
    }
    t
}

/// Padded working raster with a one-pixel background frame.
struct Grid {
    stride: usize,
    cells: Vec<u8>,
    offsets: [isize; 8],
}

impl Grid {
    fn new(mask: &BinaryMask) -> Self {
        let stride = mask.width() + 2;
        let mut cells = vec![0u8; stride * (mask.height() + 2)];
        for (x, y) in mask.foreground() {
            cells[(y + 1) * stride + x + 1] = 1;
        }
        let s = stride as isize;
        let offsets = [-s, -s + 1, 1, s + 1, s, s - 1, -1, -s - 1];
        Self { stride, cells, offsets }
    }

    #[inline]
    fn neighborhood(&self, i: usize) -> u8 {
        let mut n = 0u8;
        for (bit, off) in self.offsets.iter().enumerate() {
            n |= self.cells[(i as isize + off) as usize] << bit;
        }
        n
    }
}

/// Foreground neighbors of a pixel remain one 8-connected run around the ring.
/// Walking the ring, 4-neighbors (even bits) bridge their diagonal
/// neighbors, corners only touch their two ring mates.
fn ring_connected(n: u8) -> bool {
    if n == 0 {
        return true;
    }
    // A corner whose two edge mates are both background is its own run.
    let on = |i: usize| n & (1 << (i % 8)) != 0;
    let mut runs = 0;
    for i in 0..8 {
        if on(i) && !on(i + 7) {
            runs += 1;
        }
    }
    // Runs split only by a background corner are still joined through the
    // adjacent edge pixels, e.g. N and E touch across an empty NE.
    for i in (0..8).step_by(2) {
        if on(i) && !on(i + 1) && on(i + 2) {
            runs -= 1;
        }
    }
    runs <= 1
}

fn break_blocks(grid: &mut Grid, live: &mut Vec<usize>) -> bool {
    let stride = grid.stride;
    let mut removed = false;
    let mut k = 0;
    while k < live.len() {
        let i = live[k];
        k += 1;
        if grid.cells[i] == 0 {
            continue;
        }
        let block = [i, i + 1, i + stride, i + stride + 1];
        if !block.iter().all(|&j| grid.cells[j] == 1) {
            continue;
        }
        if let Some(&j) = block.iter().find(|&&j| ring_connected(grid.neighborhood(j))) {
            grid.cells[j] = 0;
            removed = true;
        }
    }
    live.retain(|&i| grid.cells[i] != 0);
    removed
}

/// Thins `mask` until a full pass deletes nothing.
pub fn thin(mask: &BinaryMask) -> BinaryMask {
    let tables = [lookup_table(true), lookup_table(false)];
    let mut grid = Grid::new(mask);
    let stride = grid.stride;
    let mut live: Vec<usize> = mask.foreground().map(|(x, y)| (y + 1) * stride + x + 1).collect();
    let mut marked = Vec::new();
    loop {
        let mut deleted_any = false;
        for table in &tables {
            marked.clear();
            marked.extend(live.iter().copied().filter(|&i| table[grid.neighborhood(i) as usize]));
            // 2 = marked for deletion in this subiteration.
            for &i in &marked {
                grid.cells[i] = 2;
            }
            // `live` is in raster order, so `marked` is too.
            for &i in &marked {
                let block = [i, i + 1, i + stride, i + stride + 1];
                if block.iter().all(|&j| grid.cells[j] == 2) {
                    grid.cells[i + stride + 1] = 1;
                }
            }
            for &i in &marked {
                if grid.cells[i] == 2 {
                    grid.cells[i] = 0;
                    deleted_any = true;
                }
            }
            live.retain(|&i| grid.cells[i] != 0);
        }
        if !deleted_any && !break_blocks(&mut grid, &mut live) {
            break;
        }
    }
    let (w, h) = (mask.width(), mask.height());
    let mut out = BinaryMask::new(w, h);
    for &i in &live {
        out.set(i % stride - 1, i / stride - 1, true);
    }
    debug_assert!(out.width() == w && out.height() == h);
    out
}

/// Thins `mask` and returns one skeleton per connected component.
pub fn skeleton_components(mask: &BinaryMask) -> Vec<Skeleton> {
    let source = connected_components(mask);
    let thinned = thin(mask);
    let cc = connected_components(&thinned);
    let mut first_pixel = vec![None; cc.count as usize];
    for (i, &l) in cc.labels.iter().enumerate() {
        if l > 0 && first_pixel[l as usize - 1].is_none() {
            first_pixel[l as usize - 1] = Some(i);
        }
    }
    first_pixel
        .into_iter()
        .enumerate()
        .map(|(k, i)| Skeleton {
            mask: cc.component_mask(k as u32 + 1),
            source_component: source.labels[i.expect("labels are gap-free")],
        })
        .collect()
}

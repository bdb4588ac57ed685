//! Image and mask primitives: binary PPM I/O, HSV color segmentation,
//! 8-connected component labeling and simple stroke drawing.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geom::Vec2;

pub type Rgb = [u8; 3];

/// Errors from decoding a binary PPM.
#[derive(Debug, Error, PartialEq, Eq)]
pub enum PpmError {
    #[error("bad magic at offset {offset}: expected \"P6\"")]
    BadMagic { offset: usize },
    #[error("malformed header field `{field}` at offset {offset}")]
    BadHeader { field: &'static str, offset: usize },
    #[error("unsupported maxval {maxval} at offset {offset}: only 255 is accepted")]
    UnsupportedMaxval { maxval: u32, offset: usize },
    #[error("truncated payload at offset {offset}: expected {expected} bytes, found {found}")]
    Truncated {
        offset: usize,
        expected: usize,
        found: usize,
    },
}

/// Row-major 8-bit RGB raster.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Image {
    width: usize,
    height: usize,
    pixels: Vec<Rgb>,
}

impl Image {
    /// A `width`×`height` image filled with `fill`.
    ///
    /// Panics if either dimension is zero.
    pub fn new(width: usize, height: usize, fill: Rgb) -> Self {
        assert!(width >= 1 && height >= 1, "image dimensions must be positive");
        Self {
            width,
            height,
            pixels: vec![fill; width * height],
        }
    }

    /// Wraps an existing pixel buffer; `None` if the length does not match.
    pub fn from_pixels(width: usize, height: usize, pixels: Vec<Rgb>) -> Option<Self> {
        (width >= 1 && height >= 1 && pixels.len() == width * height).then_some(Self { width, height, pixels })
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn pixels(&self) -> &[Rgb] {
        &self.pixels
    }

    pub fn get(&self, x: usize, y: usize) -> Rgb {
        self.pixels[y * self.width + x]
    }

    pub fn set(&mut self, x: usize, y: usize, c: Rgb) {
        self.pixels[y * self.width + x] = c;
    }

    /// Sets the pixel if `(x, y)` lies inside the image; silently ignores it otherwise.
    pub fn set_clipped(&mut self, x: i64, y: i64, c: Rgb) {
        if x >= 0 && y >= 0 && (x as usize) < self.width && (y as usize) < self.height {
            self.set(x as usize, y as usize, c);
        }
    }
}

/// Row-major foreground flags.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct BinaryMask {
    width: usize,
    height: usize,
    bits: Vec<bool>,
}

impl BinaryMask {
    pub fn new(width: usize, height: usize) -> Self {
        Self {
            width,
            height,
            bits: vec![false; width * height],
        }
    }

    pub fn from_bits(width: usize, height: usize, bits: Vec<bool>) -> Option<Self> {
        (bits.len() == width * height).then_some(Self { width, height, bits })
    }

    /// Parses rows of `#`/`1` (foreground) and anything else (background). Handy in tests.
    pub fn from_ascii(rows: &[&str]) -> Self {
        let height = rows.len();
        let width = rows.iter().map(|r| r.len()).max().unwrap_or(0);
        let mut m = Self::new(width, height);
        for (y, row) in rows.iter().enumerate() {
            for (x, ch) in row.chars().enumerate() {
                if ch == '#' || ch == '1' {
                    m.set(x, y, true);
                }
            }
        }
        m
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn bits(&self) -> &[bool] {
        &self.bits
    }

    pub fn get(&self, x: usize, y: usize) -> bool {
        self.bits[y * self.width + x]
    }

    /// Out-of-bounds coordinates read as background.
    pub fn get_signed(&self, x: i64, y: i64) -> bool {
        x >= 0
            && y >= 0
            && (x as usize) < self.width
            && (y as usize) < self.height
            && self.bits[y as usize * self.width + x as usize]
    }

    pub fn set(&mut self, x: usize, y: usize, v: bool) {
        self.bits[y * self.width + x] = v;
    }

    pub fn set_signed(&mut self, x: i64, y: i64, v: bool) {
        if x >= 0 && y >= 0 && (x as usize) < self.width && (y as usize) < self.height {
            self.set(x as usize, y as usize, v);
        }
    }

    pub fn count(&self) -> usize {
        self.bits.iter().filter(|&&b| b).count()
    }

    pub fn is_empty(&self) -> bool {
        !self.bits.iter().any(|&b| b)
    }

    /// Foreground coordinates in raster order.
    pub fn foreground(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        let w = self.width;
        self.bits
            .iter()
            .enumerate()
            .filter(|(_, &b)| b)
            .map(move |(i, _)| (i % w, i / w))
    }

    pub fn to_ascii(&self) -> String {
        let mut s = String::with_capacity((self.width + 1) * self.height);
        for y in 0..self.height {
            for x in 0..self.width {
                s.push(if self.get(x, y) { '#' } else { '.' });
            }
            s.push('\n');
        }
        s
    }
}

/// Inclusive HSV box. Hue in degrees; `hue_lo > hue_hi` wraps through 0.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ColorRange {
    pub hue_lo: f64,
    pub hue_hi: f64,
    pub sat_lo: f64,
    pub sat_hi: f64,
    pub val_lo: f64,
    pub val_hi: f64,
}

impl ColorRange {
    /// Saturated reds, wrapping through hue 0.
    pub fn red() -> Self {
        Self {
            hue_lo: 340.0,
            hue_hi: 20.0,
            sat_lo: 0.5,
            sat_hi: 1.0,
            val_lo: 0.3,
            val_hi: 1.0,
        }
    }

    /// The whole HSV cube.
    pub fn everything() -> Self {
        Self {
            hue_lo: 0.0,
            hue_hi: 360.0,
            sat_lo: 0.0,
            sat_hi: 1.0,
            val_lo: 0.0,
            val_hi: 1.0,
        }
    }

    pub fn is_valid(&self) -> bool {
        self.sat_lo <= self.sat_hi
            && self.val_lo <= self.val_hi
            && [
                self.hue_lo,
                self.hue_hi,
                self.sat_lo,
                self.sat_hi,
                self.val_lo,
                self.val_hi,
            ]
            .iter()
            .all(|v| v.is_finite())
    }

    pub fn contains(&self, (h, s, v): (f64, f64, f64)) -> bool {
        let hue_ok = if self.hue_lo <= self.hue_hi {
            h >= self.hue_lo && h <= self.hue_hi
        } else {
            h >= self.hue_lo || h <= self.hue_hi
        };
        hue_ok && s >= self.sat_lo && s <= self.sat_hi && v >= self.val_lo && v <= self.val_hi
    }
}

/// Hexcone HSV: hue in [0, 360), saturation and value in [0, 1]. Achromatic pixels get hue 0.
pub fn rgb_to_hsv([r, g, b]: Rgb) -> (f64, f64, f64) {
    let (r, g, b) = (r as f64 / 255.0, g as f64 / 255.0, b as f64 / 255.0);
    let max = r.max(g).max(b);
    let min = r.min(g).min(b);
    let delta = max - min;
    let v = max;
    let s = if max > 0.0 { delta / max } else { 0.0 };
    let h = if delta == 0.0 {
        0.0
    } else if max == r {
        60.0 * ((g - b) / delta).rem_euclid(6.0)
    } else if max == g {
        60.0 * ((b - r) / delta + 2.0)
    } else {
        60.0 * ((r - g) / delta + 4.0)
    };
    (if h >= 360.0 { h - 360.0 } else { h }, s, v)
}

/// Decodes a binary P6 pixmap with maxval 255.
pub fn load_ppm(bytes: &[u8]) -> Result<Image, PpmError> {
    if bytes.len() < 2 || &bytes[..2] != b"P6" {
        return Err(PpmError::BadMagic { offset: 0 });
    }
    let mut pos = 2;
    let field = |name: &'static str, pos: &mut usize| -> Result<u32, PpmError> {
        // whitespace and comments
        loop {
            match bytes.get(*pos) {
                Some(b) if b.is_ascii_whitespace() => *pos += 1,
                Some(b'#') => {
                    while let Some(&b) = bytes.get(*pos) {
                        *pos += 1;
                        if b == b'\n' {
                            break;
                        }
                    }
                }
                _ => break,
            }
        }
        let start = *pos;
        while bytes.get(*pos).is_some_and(|b| b.is_ascii_digit()) {
            *pos += 1;
        }
        let bad = PpmError::BadHeader {
            field: name,
            offset: start,
        };
        if start == *pos || *pos - start > 9 {
            return Err(bad);
        }
        std::str::from_utf8(&bytes[start..*pos])
            .ok()
            .and_then(|s| s.parse().ok())
            .ok_or(bad)
    };
    let width = field("width", &mut pos)? as usize;
    let height = field("height", &mut pos)? as usize;
    let maxval_offset = pos;
    let maxval = field("maxval", &mut pos)?;
    if width == 0 || height == 0 {
        return Err(PpmError::BadHeader {
            field: "dimensions",
            offset: 2,
        });
    }
    if maxval != 255 {
        return Err(PpmError::UnsupportedMaxval {
            maxval,
            offset: maxval_offset,
        });
    }
    match bytes.get(pos) {
        Some(b) if b.is_ascii_whitespace() => pos += 1,
        _ => {
            return Err(PpmError::BadHeader {
                field: "separator",
                offset: pos,
            })
        }
    }
    let expected = width * height * 3;
    let payload = &bytes[pos..];
    if payload.len() < expected {
        return Err(PpmError::Truncated {
            offset: pos + payload.len(),
            expected,
            found: payload.len(),
        });
    }
    let pixels = payload[..expected]
        .chunks_exact(3)
        .map(|c| [c[0], c[1], c[2]])
        .collect();
    Ok(Image { width, height, pixels })
}

/// Encodes as binary P6 with a `P6\n<w> <h>\n255\n` header.
pub fn save_ppm(image: &Image) -> Vec<u8> {
    let header = format!("P6\n{} {}\n255\n", image.width, image.height);
    let mut out = Vec::with_capacity(header.len() + image.pixels.len() * 3);
    out.extend_from_slice(header.as_bytes());
    for p in &image.pixels {
        out.extend_from_slice(p);
    }
    out
}

/// Foreground iff the pixel's HSV lies inside `range`.
pub fn segment_color(image: &Image, range: &ColorRange) -> BinaryMask {
    let bits = image.pixels.iter().map(|&p| range.contains(rgb_to_hsv(p))).collect();
    BinaryMask {
        width: image.width,
        height: image.height,
        bits,
    }
}

/// Per-pixel component ids, 0 for background and 1..=count otherwise.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ComponentLabeling {
    pub width: usize,
    pub height: usize,
    pub labels: Vec<u32>,
    pub count: u32,
}

impl ComponentLabeling {
    pub fn label(&self, x: usize, y: usize) -> u32 {
        self.labels[y * self.width + x]
    }

    /// Pixel count per component, indexed by `id - 1`.
    pub fn areas(&self) -> Vec<usize> {
        let mut areas = vec![0; self.count as usize];
        for &l in &self.labels {
            if l > 0 {
                areas[l as usize - 1] += 1;
            }
        }
        areas
    }

    /// Extracts one component as its own mask.
    pub fn component_mask(&self, id: u32) -> BinaryMask {
        BinaryMask {
            width: self.width,
            height: self.height,
            bits: self.labels.iter().map(|&l| l == id).collect(),
        }
    }
}

pub(crate) const NEIGHBORS8: [(i64, i64); 8] = [(-1, -1), (0, -1), (1, -1), (-1, 0), (1, 0), (-1, 1), (0, 1), (1, 1)];

/// 8-connected labeling. Ids follow the raster order of each component's first pixel.
pub fn connected_components(mask: &BinaryMask) -> ComponentLabeling {
    let (w, h) = (mask.width, mask.height);
    let mut labels = vec![0u32; w * h];
    let mut count = 0u32;
    let mut stack = Vec::new();
    for start in 0..w * h {
        if !mask.bits[start] || labels[start] != 0 {
            continue;
        }
        count += 1;
        labels[start] = count;
        stack.push(start);
        while let Some(i) = stack.pop() {
            let (x, y) = ((i % w) as i64, (i / w) as i64);
            for (dx, dy) in NEIGHBORS8 {
                let (nx, ny) = (x + dx, y + dy);
                if nx < 0 || ny < 0 || nx >= w as i64 || ny >= h as i64 {
                    continue;
                }
                let j = ny as usize * w + nx as usize;
                if mask.bits[j] && labels[j] == 0 {
                    labels[j] = count;
                    stack.push(j);
                }
            }
        }
    }
    ComponentLabeling {
        width: w,
        height: h,
        labels,
        count,
    }
}

/// Drops components with fewer than `min_area` pixels.
pub fn remove_small_components(mask: &BinaryMask, min_area: usize) -> BinaryMask {
    if min_area <= 1 {
        return mask.clone();
    }
    let cc = connected_components(mask);
    let areas = cc.areas();
    let bits = cc
        .labels
        .iter()
        .map(|&l| l > 0 && areas[l as usize - 1] >= min_area)
        .collect();
    BinaryMask {
        width: mask.width,
        height: mask.height,
        bits,
    }
}

/// Integer pixels of the Bresenham line from `a` to `b`, endpoints included.
pub fn bresenham(a: (i64, i64), b: (i64, i64)) -> Vec<(i64, i64)> {
    let (mut x, mut y) = a;
    let dx = (b.0 - a.0).abs();
    let dy = -(b.1 - a.1).abs();
    let sx = if a.0 < b.0 { 1 } else { -1 };
    let sy = if a.1 < b.1 { 1 } else { -1 };
    let mut err = dx + dy;
    let mut out = Vec::with_capacity((dx - dy) as usize + 1);
    loop {
        out.push((x, y));
        if (x, y) == b {
            break;
        }
        let e2 = 2 * err;
        if e2 >= dy {
            err += dy;
            x += sx;
        }
        if e2 <= dx {
            err += dx;
            y += sy;
        }
    }
    out
}

/// Offsets of a round brush `thickness` pixels across.
fn brush(thickness: u32) -> Vec<(i64, i64)> {
    let t = thickness.max(1) as i64;
    let r = t as f64 / 2.0;
    let o = if t % 2 == 0 { -0.5 } else { 0.0 };
    let mut out = Vec::new();
    for dy in -t..=t {
        for dx in -t..=t {
            let (fx, fy) = (dx as f64 + o, dy as f64 + o);
            if fx * fx + fy * fy <= r * r {
                out.push((dx, dy));
            }
        }
    }
    out
}

/// Strokes a polyline in place. Pixels falling outside the image are skipped.
pub fn draw_polyline_mut(image: &mut Image, points: &[Vec2], color: Rgb, thickness: u32) {
    let pen = brush(thickness);
    let round = |p: Vec2| (p.x.round() as i64, p.y.round() as i64);
    let mut stamp = |(x, y): (i64, i64)| {
        for &(dx, dy) in &pen {
            image.set_clipped(x + dx, y + dy, color);
        }
    };
    match points {
        [] => {}
        [p] => stamp(round(*p)),
        _ => {
            for w in points.windows(2) {
                for px in bresenham(round(w[0]), round(w[1])) {
                    stamp(px);
                }
            }
        }
    }
}

/// Returns a copy of `image` with the polyline stroked on top.
pub fn draw_polyline(image: &Image, points: &[Vec2], color: Rgb, thickness: u32) -> Image {
    let mut out = image.clone();
    draw_polyline_mut(&mut out, points, color, thickness);
    out
}

//! End-to-end detection: color segmentation through merged chains.

use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::chainfit::{fit_chains, prune_overlaps, Chain, FitConfig};
use crate::contour::trace_borders;
use crate::merge::{merge_all, MergeConfig, MergeRecord};
use crate::raster::{draw_polyline_mut, remove_small_components, segment_color, ColorRange, Image, Rgb};
use crate::skeletonize::thin;

/// Colors and stroke width for overlay rendering.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct OverlayStyle {
    pub fitted_color: Rgb,
    pub filled_color: Rgb,
    pub joint_color: Rgb,
    pub thickness: u32,
}

impl Default for OverlayStyle {
    fn default() -> Self {
        Self {
            fitted_color: [128, 0, 160],
            filled_color: [255, 105, 180],
            joint_color: [0, 0, 0],
            thickness: 3,
        }
    }
}

/// Every tunable of the detector.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PipelineConfig {
    pub color: ColorRange,
    pub fit: FitConfig,
    pub merge: MergeConfig,
    /// Components smaller than this many pixels are discarded before thinning.
    pub min_component_area: usize,
    pub overlay: OverlayStyle,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        Self {
            color: ColorRange::red(),
            fit: FitConfig::default(),
            merge: MergeConfig::default(),
            min_component_area: 30,
            overlay: OverlayStyle::default(),
        }
    }
}

impl PipelineConfig {
    pub fn is_valid(&self) -> bool {
        self.color.is_valid() && self.fit.is_valid() && self.merge.is_valid() && self.overlay.thickness >= 1
    }
}

/// Wall time per stage, in milliseconds.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct StageTimings {
    pub segment: f64,
    pub filter: f64,
    pub thin: f64,
    pub trace: f64,
    pub fit: f64,
    pub prune: f64,
    pub merge: f64,
    pub total: f64,
}

impl StageTimings {
    pub const STAGES: [&'static str; 7] = ["segment", "filter", "thin", "trace", "fit", "prune", "merge"];

    pub fn stages(&self) -> [f64; 7] {
        [
            self.segment,
            self.filter,
            self.thin,
            self.trace,
            self.fit,
            self.prune,
            self.merge,
        ]
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Detection {
    pub chains: Vec<Chain>,
    pub records: Vec<MergeRecord>,
    pub timings: StageTimings,
}

struct Clock(Instant);

impl Clock {
    fn lap(&mut self) -> f64 {
        let now = Instant::now();
        let ms = (now - self.0).as_secs_f64() * 1e3;
        self.0 = now;
        ms
    }
}

pub fn detect(image: &Image, cfg: &PipelineConfig) -> Detection {
    let start = Instant::now();
    let mut clock = Clock(start);
    let mut t = StageTimings::default();

    let mask = segment_color(image, &cfg.color);
    t.segment = clock.lap();
    let mask = remove_small_components(&mask, cfg.min_component_area);
    t.filter = clock.lap();
    let skeleton = thin(&mask);
    t.thin = clock.lap();
    let paths = trace_borders(&skeleton);
    t.trace = clock.lap();
    let fitted: Vec<Chain> = paths.iter().flat_map(|p| fit_chains(p, &cfg.fit)).collect();
    t.fit = clock.lap();
    let pruned = prune_overlaps(&fitted, &cfg.fit);
    t.prune = clock.lap();
    let (chains, records) = merge_all(&pruned, cfg.fit.segment_length, &cfg.merge);
    t.merge = clock.lap();
    t.total = start.elapsed().as_secs_f64() * 1e3;

    Detection {
        chains,
        records,
        timings: t,
    }
}

/// Draws every chain onto a copy of `image`: fitted segments in one color,
/// filled segments in another, joints as small dots.
pub fn render_overlay(image: &Image, chains: &[Chain], style: &OverlayStyle) -> Image {
    let mut out = image.clone();
    for c in chains {
        for s in c.segments() {
            let color = if s.filled {
                style.filled_color
            } else {
                style.fitted_color
            };
            draw_polyline_mut(&mut out, &[s.a, s.b], color, style.thickness);
        }
        for &j in &c.joints {
            draw_polyline_mut(&mut out, &[j], style.joint_color, style.thickness + 2);
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geom::Vec2;

    #[test]
    fn blank_frame_has_no_chains() {
        let img = Image::new(64, 48, [255, 255, 255]);
        let d = detect(&img, &PipelineConfig::default());
        assert!(d.chains.is_empty() && d.records.is_empty());
    }

    #[test]
    fn straight_stroke_gives_one_chain() {
        let white = Image::new(200, 60, [255, 255, 255]);
        let img =
            crate::raster::draw_polyline(&white, &[Vec2::new(20.0, 30.0), Vec2::new(180.0, 30.0)], [255, 0, 0], 6);
        let d = detect(&img, &PipelineConfig::default());
        assert_eq!(d.chains.len(), 1);
        assert!(d.chains[0].segment_count() >= 9);
        assert!(d.chains[0].joints.iter().all(|j| (j.y - 30.0).abs() <= 1.5));
    }

    #[test]
    fn config_round_trips_through_json() {
        let cfg = PipelineConfig::default();
        let text = serde_json::to_string(&cfg).unwrap();
        assert_eq!(serde_json::from_str::<PipelineConfig>(&text).unwrap(), cfg);
        let partial: PipelineConfig = serde_json::from_str(r#"{"min_component_area": 5}"#).unwrap();
        assert_eq!(partial.min_component_area, 5);
        assert!(serde_json::from_str::<PipelineConfig>(r#"{"bogus": 1}"#).is_err());
    }
}

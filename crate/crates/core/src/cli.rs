//! Command-line frontend: `detect`, `batch`, `synth` and `bench`.
//!
//! Exit status: 0 success, 1 some batch frames failed, 2 I/O or unreadable
//! image, 3 bad config or manifest.

use std::fs;
use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::chainfit::Chain;
use crate::geom::Vec2;
use crate::merge::MergeRecord;
use crate::pipeline::{detect, render_overlay, PipelineConfig, StageTimings};
use crate::raster::{load_ppm, save_ppm, Image, PpmError};
use crate::synthbench::{
    acceptance_corpus, generate_scene, run_benchmark, Manifest, SceneParams, SceneTruth, ScoreConfig, SynthError,
};

pub const CONFIG_ENV: &str = "DLO_CONFIG";

#[derive(Debug, Parser)]
#[command(
    name = "dlo",
    version,
    about = "Detect deformable linear objects as chains of fixed-length segments"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Detect chains in one PPM frame.
    Detect {
        input: PathBuf,
        /// Pipeline config JSON (falls back to $DLO_CONFIG, then defaults).
        #[arg(long)]
        config: Option<PathBuf>,
        /// Detection document path; stdout when absent.
        #[arg(long)]
        out: Option<PathBuf>,
        /// Write the frame with chains drawn on it.
        #[arg(long)]
        overlay: Option<PathBuf>,
        /// Leave timing fields out so reruns are byte-identical.
        #[arg(long)]
        no_timings: bool,
    },
    /// Detect every frame_NNNNNN.ppm in a directory.
    Batch {
        frames: PathBuf,
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
        /// Worker threads.
        #[arg(long, default_value_t = 1)]
        parallel: usize,
        #[arg(long)]
        no_timings: bool,
    },
    /// Render the scenes of a manifest (or one default scene for --seed).
    Synth {
        manifest: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Generate, detect and score a corpus; prints the report.
    Bench {
        /// Corpus manifest; the 100-scene acceptance corpus when absent.
        manifest: Option<PathBuf>,
        #[arg(long)]
        config: Option<PathBuf>,
        /// Also write the report here.
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{}: {source}", path.display())]
    Io { path: PathBuf, source: std::io::Error },
    #[error("{}: {source}", path.display())]
    Image { path: PathBuf, source: PpmError },
    #[error("config: {0}")]
    Config(String),
    #[error("{failed} of {total} frames failed")]
    PartialBatch { failed: usize, total: usize },
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::PartialBatch { .. } => 1,
            CliError::Io { .. } | CliError::Image { .. } => 2,
            CliError::Config(_) => 3,
        }
    }
}

impl From<SynthError> for CliError {
    fn from(e: SynthError) -> Self {
        CliError::Config(e.to_string())
    }
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> CliError + '_ {
    move |source| CliError::Io {
        path: path.to_path_buf(),
        source,
    }
}

/// One chain as written to disk.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChainRecord {
    pub joints: Vec<[f64; 2]>,
    pub filled: Vec<bool>,
    pub closed: bool,
}

impl From<&Chain> for ChainRecord {
    fn from(c: &Chain) -> Self {
        Self {
            joints: c.joints.iter().map(|j| [j.x, j.y]).collect(),
            filled: c.filled.clone(),
            closed: c.closed,
        }
    }
}

impl From<&ChainRecord> for Chain {
    fn from(c: &ChainRecord) -> Self {
        Chain {
            joints: c.joints.iter().map(|&[x, y]| Vec2::new(x, y)).collect(),
            filled: c.filled.clone(),
            closed: c.closed,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DetectionDocument {
    pub version: u32,
    pub segment_length: f64,
    pub chains: Vec<ChainRecord>,
    pub merge_records: Vec<MergeRecord>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub timings_ms: Option<StageTimings>,
}

impl DetectionDocument {
    pub fn new(chains: &[Chain], records: &[MergeRecord], segment_length: f64, timings: Option<StageTimings>) -> Self {
        Self {
            version: 1,
            segment_length,
            chains: chains.iter().map(ChainRecord::from).collect(),
            merge_records: records.to_vec(),
            timings_ms: timings,
        }
    }

    /// Version is 1 and every chain has one flag per segment.
    pub fn is_valid(&self) -> bool {
        self.version == 1 && self.segment_length > 0.0 && self.chains.iter().all(|c| Chain::from(c).is_well_formed())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TruthDocument {
    pub version: u32,
    pub params: SceneParams,
    pub truth: SceneTruth,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BatchFrame {
    pub frame: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub chains: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub time_ms: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BatchSummary {
    pub version: u32,
    pub frames_total: usize,
    pub frames_failed: usize,
    /// Mean detection time over the frames that succeeded.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub mean_ms: Option<f64>,
    pub frames: Vec<BatchFrame>,
}

/// Pretty JSON with a trailing newline.
pub fn to_json<T: Serialize>(value: &T) -> Vec<u8> {
    let mut out = serde_json::to_vec_pretty(value).expect("serializable");
    out.push(b'\n');
    out
}

/// One-line JSON with a trailing newline, for point-heavy documents.
pub fn to_json_compact<T: Serialize>(value: &T) -> Vec<u8> {
    let mut out = serde_json::to_vec(value).expect("serializable");
    out.push(b'\n');
    out
}

fn write(path: &Path, bytes: &[u8]) -> Result<(), CliError> {
    fs::write(path, bytes).map_err(io_err(path))
}

/// Reads the config from `path`, else from `$DLO_CONFIG`, else defaults.
pub fn load_config(path: Option<&Path>) -> Result<PipelineConfig, CliError> {
    let path = match path {
        Some(p) => p.to_path_buf(),
        None => match std::env::var_os(CONFIG_ENV) {
            Some(p) if !p.is_empty() => PathBuf::from(p),
            _ => return Ok(PipelineConfig::default()),
        },
    };
    let text = fs::read_to_string(&path).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
    let cfg: PipelineConfig =
        serde_json::from_str(&text).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
    if !cfg.is_valid() {
        return Err(CliError::Config(format!("{}: values out of range", path.display())));
    }
    Ok(cfg)
}

pub fn load_manifest(path: &Path) -> Result<Manifest, CliError> {
    let text = fs::read_to_string(path).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
    let m: Manifest = serde_json::from_str(&text).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
    if m.version != 1 {
        return Err(CliError::Config(format!(
            "{}: unsupported version {}",
            path.display(),
            m.version
        )));
    }
    for p in &m.scenes {
        p.validate()?;
    }
    Ok(m)
}

fn read_image(path: &Path) -> Result<Image, CliError> {
    let bytes = fs::read(path).map_err(io_err(path))?;
    load_ppm(&bytes).map_err(|source| CliError::Image {
        path: path.to_path_buf(),
        source,
    })
}

fn detect_document(image: &Image, cfg: &PipelineConfig, timings: bool) -> DetectionDocument {
    let d = detect(image, cfg);
    DetectionDocument::new(
        &d.chains,
        &d.records,
        cfg.fit.segment_length,
        timings.then_some(d.timings),
    )
}

pub fn cmd_detect(
    input: &Path,
    cfg: &PipelineConfig,
    out: Option<&Path>,
    overlay: Option<&Path>,
    timings: bool,
) -> Result<(), CliError> {
    let image = read_image(input)?;
    let doc = detect_document(&image, cfg, timings);
    let bytes = to_json_compact(&doc);
    match out {
        Some(p) => write(p, &bytes)?,
        None => print!("{}", String::from_utf8_lossy(&bytes)),
    }
    if let Some(p) = overlay {
        let chains: Vec<Chain> = doc.chains.iter().map(Chain::from).collect();
        write(p, &save_ppm(&render_overlay(&image, &chains, &cfg.overlay)))?;
    }
    Ok(())
}

/// Six-digit frame number from `frame_NNNNNN.ppm`.
fn frame_number(name: &str) -> Option<u32> {
    let digits = name.strip_prefix("frame_")?.strip_suffix(".ppm")?;
    (digits.len() == 6 && digits.bytes().all(|b| b.is_ascii_digit())).then(|| digits.parse().ok())?
}

pub fn cmd_batch(
    frames: &Path,
    cfg: &PipelineConfig,
    out_dir: &Path,
    workers: usize,
    timings: bool,
) -> Result<BatchSummary, CliError> {
    let mut names: Vec<(u32, String)> = fs::read_dir(frames)
        .map_err(io_err(frames))?
        .filter_map(|e| e.ok())
        .filter_map(|e| {
            let name = e.file_name().into_string().ok()?;
            Some((frame_number(&name)?, name))
        })
        .collect();
    names.sort();
    fs::create_dir_all(out_dir).map_err(io_err(out_dir))?;

    let run = |name: &String| -> BatchFrame {
        let result = read_image(&frames.join(name)).and_then(|img| {
            let d = detect(&img, cfg);
            let doc = DetectionDocument::new(
                &d.chains,
                &d.records,
                cfg.fit.segment_length,
                timings.then_some(d.timings),
            );
            let target = out_dir.join(name.replace(".ppm", ".json"));
            write(&target, &to_json_compact(&doc))?;
            Ok((d.chains.len(), d.timings.total))
        });
        match result {
            Ok((chains, ms)) => BatchFrame {
                frame: name.clone(),
                chains: Some(chains),
                time_ms: timings.then_some(ms),
                error: None,
            },
            Err(e) => {
                eprintln!("dlo: {name}: {e}");
                BatchFrame {
                    frame: name.clone(),
                    chains: None,
                    time_ms: None,
                    error: Some(e.to_string()),
                }
            }
        }
    };
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers.max(1))
        .build()
        .map_err(|e| CliError::Config(e.to_string()))?;
    let results: Vec<BatchFrame> = pool.install(|| names.par_iter().map(|(_, n)| run(n)).collect());

    let failed = results.iter().filter(|f| f.error.is_some()).count();
    let times: Vec<f64> = results.iter().filter_map(|f| f.time_ms).collect();
    let summary = BatchSummary {
        version: 1,
        frames_total: results.len(),
        frames_failed: failed,
        mean_ms: timings.then(|| {
            if times.is_empty() {
                0.0
            } else {
                times.iter().sum::<f64>() / times.len() as f64
            }
        }),
        frames: results,
    };
    write(&out_dir.join("summary.json"), &to_json(&summary))?;
    if failed > 0 {
        return Err(CliError::PartialBatch {
            failed,
            total: summary.frames_total,
        });
    }
    Ok(summary)
}

/// Writes `frame_NNNNNN.ppm` and `truth_NNNNNN.json` for each scene,
/// numbered from 1 in manifest order.
pub fn cmd_synth(scenes: &[SceneParams], out_dir: &Path) -> Result<(), CliError> {
    for p in scenes {
        p.validate()?;
    }
    fs::create_dir_all(out_dir).map_err(io_err(out_dir))?;
    for (i, p) in scenes.iter().enumerate() {
        let scene = generate_scene(p)?;
        let n = i + 1;
        write(&out_dir.join(format!("frame_{n:06}.ppm")), &save_ppm(&scene.image))?;
        let doc = TruthDocument {
            version: 1,
            params: p.clone(),
            truth: scene.truth,
        };
        write(&out_dir.join(format!("truth_{n:06}.json")), &to_json_compact(&doc))?;
    }
    Ok(())
}

pub fn cmd_bench(scenes: &[SceneParams], cfg: &PipelineConfig, out: Option<&Path>) -> Result<(), CliError> {
    let stroke = scenes.iter().map(|p| p.stroke_width).max().unwrap_or(6);
    let report = run_benchmark(scenes, cfg, &ScoreConfig::for_scene(&cfg.fit, stroke));
    let bytes = to_json(&report);
    if let Some(p) = out {
        write(p, &bytes)?;
    }
    print!("{}", String::from_utf8_lossy(&bytes));
    Ok(())
}

pub fn run(cli: Cli) -> Result<(), CliError> {
    match cli.command {
        Command::Detect {
            input,
            config,
            out,
            overlay,
            no_timings,
        } => {
            let cfg = load_config(config.as_deref())?;
            cmd_detect(&input, &cfg, out.as_deref(), overlay.as_deref(), !no_timings)
        }
        Command::Batch {
            frames,
            config,
            out,
            parallel,
            no_timings,
        } => {
            let cfg = load_config(config.as_deref())?;
            cmd_batch(&frames, &cfg, &out, parallel, !no_timings).map(|_| ())
        }
        Command::Synth { manifest, out, seed } => {
            let scenes = match (manifest, seed) {
                (Some(m), _) => load_manifest(&m)?.scenes,
                (None, Some(seed)) => vec![SceneParams {
                    seed,
                    ..Default::default()
                }],
                (None, None) => return Err(CliError::Config("synth needs a manifest or --seed".into())),
            };
            cmd_synth(&scenes, &out)
        }
        Command::Bench { manifest, config, out } => {
            let cfg = load_config(config.as_deref())?;
            let scenes = match manifest {
                Some(m) => load_manifest(&m)?.scenes,
                None => acceptance_corpus(100),
            };
            cmd_bench(&scenes, &cfg, out.as_deref())
        }
    }
}

/// Parses arguments, runs, reports errors on stderr and returns the status.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 3 } else { 0 };
        }
    };
    match run(cli) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("dlo: {e}");
            e.exit_code()
        }
    }
}

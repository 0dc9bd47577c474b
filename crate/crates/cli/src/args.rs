use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use panotrack_core::Mode;

#[derive(Debug, Parser)]
#[command(name = "panotrack", version, about = "Panoramic multi-object tracking and evaluation")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Track every sequence of a detection directory.
    Track(TrackArgs),
    /// Score tracker output against ground truth.
    Eval(EvalArgs),
    /// Re-run a tracking manifest and report candidate entropies.
    EntropyReport(EntropyArgs),
    /// Run the feature-block invariant suite.
    DssmCheck(DssmArgs),
    /// Re-run a tracking manifest into a new output directory.
    Replay(ReplayArgs),
    /// Write a synthetic panoramic sequence (detections and ground truth).
    Synth(SynthArgs),
}

#[derive(Debug, Clone, Args)]
pub struct ReplayArgs {
    #[arg(long)]
    pub manifest: PathBuf,
    #[arg(long)]
    pub out_dir: PathBuf,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Panoramic {
    On,
    Off,
    /// Use the sequence's metadata sidecar.
    Auto,
}

impl Panoramic {
    pub fn resolve(self, from_meta: bool) -> bool {
        match self {
            Panoramic::On => true,
            Panoramic::Off => false,
            Panoramic::Auto => from_meta,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Panoramic::On => "on",
            Panoramic::Off => "off",
            Panoramic::Auto => "auto",
        }
    }
}

fn probability(s: &str) -> Result<f64, String> {
    let v: f64 = s.parse().map_err(|_| format!("'{s}' is not a number"))?;
    if (0.0..=1.0).contains(&v) {
        Ok(v)
    } else {
        Err(format!("{v} is outside [0, 1]"))
    }
}

fn non_negative(s: &str) -> Result<f64, String> {
    let v: f64 = s.parse().map_err(|_| format!("'{s}' is not a number"))?;
    if v >= 0.0 && v.is_finite() {
        Ok(v)
    } else {
        Err(format!("{v} must be finite and non-negative"))
    }
}

/// Positive radius; `inf` disables the gate.
pub fn radius(s: &str) -> Result<f64, String> {
    let v: f64 = s.parse().map_err(|_| format!("'{s}' is not a number"))?;
    if v > 0.0 {
        Ok(v)
    } else {
        Err(format!("gate radius must be positive, got {v}"))
    }
}

fn scans(s: &str) -> Result<usize, String> {
    match s {
        "1" | "2" | "4" => Ok(s.parse().unwrap()),
        _ => Err(format!("scan count must be 1, 2 or 4, got '{s}'")),
    }
}

fn mode(s: &str) -> Result<Mode, String> {
    s.parse().map_err(|e: panotrack_core::Error| e.to_string())
}

/// Tracker settings. Every flag can also come from a `PANOTRACK_*`
/// environment variable or the `--config` file; flags and environment win
/// over the file, the file over built-in defaults.
#[derive(Debug, Clone, Default, Args)]
pub struct TrackerFlags {
    /// key=value file mirroring the tracker configuration.
    #[arg(long, env = "PANOTRACK_CONFIG")]
    pub config: Option<PathBuf>,
    /// Lifecycle: threshold-driven `e2e` or assignment-driven `da`.
    #[arg(long, env = "PANOTRACK_MODE", value_parser = mode)]
    pub mode: Option<Mode>,
    /// Initialization threshold τ_I [default: 0.55].
    #[arg(long, env = "PANOTRACK_TAU_INIT", value_parser = probability)]
    pub tau_init: Option<f64>,
    /// Update threshold τ_U [default: 0.45].
    #[arg(long, env = "PANOTRACK_TAU_UPDATE", value_parser = probability)]
    pub tau_update: Option<f64>,
    /// Prior noise scale [default: 0.5].
    #[arg(long, env = "PANOTRACK_NOISE", value_parser = non_negative)]
    pub noise: Option<f64>,
    /// Feature noise scale [default: same as --noise].
    #[arg(long, env = "PANOTRACK_FEATURE_NOISE", value_parser = non_negative)]
    pub feature_noise: Option<f64>,
    /// Decoder gate radius in pixels, or `inf` [default: 100].
    #[arg(long, env = "PANOTRACK_GATE", value_parser = radius)]
    pub gate: Option<f64>,
    /// Frames a track may go unmatched before removal [default: 1].
    #[arg(long, env = "PANOTRACK_MAX_AGE", value_parser = clap::value_parser!(u32).range(1..))]
    pub max_age: Option<u32>,
    /// Frames before a track is reported [default: 1].
    #[arg(long, env = "PANOTRACK_MIN_HITS", value_parser = clap::value_parser!(u32).range(1..))]
    pub min_hits: Option<u32>,
    /// Score splitting the two association stages in `da` mode [default: 0].
    #[arg(long, env = "PANOTRACK_CONF_SPLIT", value_parser = probability)]
    pub conf_split: Option<f64>,
    /// Re-associate decoder bindings in `da` mode [default: false].
    #[arg(long, env = "PANOTRACK_DA_REBIND", num_args = 0..=1, default_missing_value = "true")]
    pub da_rebind: Option<bool>,
    /// Largest 1 - IoU accepted by `da` association [default: 0.7].
    #[arg(long, env = "PANOTRACK_IOU_GATE", value_parser = probability)]
    pub iou_gate: Option<f64>,
    /// Fill frames a track was missed in once it is re-matched [default: true].
    #[arg(long, env = "PANOTRACK_INTERPOLATE_GAPS", num_args = 0..=1, default_missing_value = "true")]
    pub interpolate_gaps: Option<bool>,
    /// Random seed for prior noise [default: 0].
    #[arg(long, env = "PANOTRACK_SEED")]
    pub seed: Option<u64>,
}

#[derive(Debug, Clone, Args)]
pub struct TrackArgs {
    /// Directory of `<sequence>.txt` detections with `<sequence>.meta` sidecars.
    #[arg(long, env = "PANOTRACK_DET_DIR")]
    pub det_dir: PathBuf,
    /// Output directory for `<sequence>.txt` tracks and `manifest.json`.
    #[arg(long, env = "PANOTRACK_OUT_DIR")]
    pub out_dir: PathBuf,
    #[command(flatten)]
    pub tracker: TrackerFlags,
    /// Treat the image as a 360° panorama.
    #[arg(long, env = "PANOTRACK_PANORAMIC", value_enum, default_value = "auto")]
    pub panoramic: Panoramic,
    /// Drop detections smaller than this many pixels before tracking
    /// (bare `--min-area` means 800). Off unless given.
    #[arg(long, env = "PANOTRACK_MIN_AREA", value_parser = non_negative, num_args = 0..=1, default_missing_value = "800")]
    pub min_area: Option<f64>,
    /// Worker threads [default: logical cores].
    #[arg(long, env = "PANOTRACK_JOBS", value_parser = clap::value_parser!(u32).range(1..))]
    pub jobs: Option<u32>,
}

#[derive(Debug, Clone, Args)]
pub struct EvalArgs {
    /// Ground truth: `<sequence>.txt` with `<sequence>.meta` sidecars.
    #[arg(long, env = "PANOTRACK_GT_DIR")]
    pub gt_dir: PathBuf,
    /// Tracker output: `<sequence>.txt`.
    #[arg(long, env = "PANOTRACK_RES_DIR")]
    pub res_dir: PathBuf,
    /// Where to write report.txt and report.csv.
    #[arg(long, env = "PANOTRACK_REPORT_DIR")]
    pub out_dir: Option<PathBuf>,
    /// Evaluate the sequences present on both sides instead of failing.
    #[arg(long)]
    pub allow_partial: bool,
    #[arg(long, env = "PANOTRACK_PANORAMIC", value_enum, default_value = "auto")]
    pub panoramic: Panoramic,
    /// IoU threshold of CLEAR and IDF1 matching.
    #[arg(long, default_value_t = 0.5, value_parser = probability)]
    pub iou_threshold: f64,
    /// Drop boxes smaller than this many pixels on both sides
    /// (bare `--min-area` means 800). Off unless given.
    #[arg(long, env = "PANOTRACK_MIN_AREA", value_parser = non_negative, num_args = 0..=1, default_missing_value = "800")]
    pub min_area: Option<f64>,
    #[arg(long, env = "PANOTRACK_JOBS", value_parser = clap::value_parser!(u32).range(1..))]
    pub jobs: Option<u32>,
}

#[derive(Debug, Clone, Args)]
pub struct EntropyArgs {
    /// `manifest.json` written by `track`.
    #[arg(long)]
    pub manifest: PathBuf,
    /// Override the manifest's decoder gate radius (pixels or `inf`).
    #[arg(long, value_parser = radius)]
    pub gate: Option<f64>,
    /// Directory for per-frame `<sequence>.entropy.csv` files.
    #[arg(long)]
    pub csv: Option<PathBuf>,
}

#[derive(Debug, Clone, Args)]
pub struct DssmArgs {
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Also check a parameter file (JSON) by running it on a random map.
    #[arg(long)]
    pub params: Option<PathBuf>,
    /// Write seeded random parameters to this file and exit.
    #[arg(long)]
    pub write_params: Option<PathBuf>,
    #[arg(long, default_value_t = 4)]
    pub channels: usize,
    #[arg(long, default_value_t = 3)]
    pub kernels: usize,
    #[arg(long, default_value_t = 4, value_parser = scans)]
    pub scans: usize,
}

#[derive(Debug, Clone, Args)]
pub struct SynthArgs {
    /// Writes `<out>/det/<name>.{txt,meta}` and `<out>/gt/<name>.{txt,meta}`.
    #[arg(long)]
    pub out_dir: PathBuf,
    #[arg(long, default_value = "synthetic")]
    pub name: String,
    #[arg(long, default_value_t = 5)]
    pub objects: usize,
    #[arg(long, default_value_t = 100)]
    pub frames: u32,
    #[arg(long, default_value_t = 2048)]
    pub width: u32,
    #[arg(long, default_value_t = 800)]
    pub height: u32,
    #[arg(long, default_value_t = 0.0, value_parser = probability)]
    pub dropout: f64,
    #[arg(long, default_value_t = 0.0, value_parser = non_negative)]
    pub jitter: f64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
}

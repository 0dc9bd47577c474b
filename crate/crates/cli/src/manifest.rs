//! `manifest.json`: everything needed to reproduce a `track` run.

use std::path::{Path, PathBuf};

use panotrack_core::mot_io::write_atomic;
use panotrack_core::TrackerConfig;
use serde::{Deserialize, Serialize};

use crate::failure::{CliResult, Failure};

pub const FILE_NAME: &str = "manifest.json";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SequenceEntry {
    pub name: String,
    pub detections: PathBuf,
    pub meta: PathBuf,
    pub output: PathBuf,
    pub panoramic: bool,
    pub n_detections: usize,
    pub n_records: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub tool: String,
    pub version: String,
    /// The command line as given.
    pub argv: Vec<String>,
    pub config: TrackerConfig,
    pub seed: u64,
    pub panoramic: String,
    pub min_area: Option<f64>,
    pub det_dir: PathBuf,
    pub out_dir: PathBuf,
    pub sequences: Vec<SequenceEntry>,
    pub jobs: usize,
    pub wall_clock_seconds: f64,
}

impl RunManifest {
    pub fn write(&self, path: &Path) -> CliResult<()> {
        let mut text = serde_json::to_string_pretty(self).map_err(|e| Failure::validation(e.to_string()))?;
        text.push('\n');
        write_atomic(path, text.as_bytes())?;
        Ok(())
    }

    pub fn read(path: &Path) -> CliResult<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Failure::io(path, e))?;
        let m: RunManifest =
            serde_json::from_str(&text).map_err(|e| Failure::validation(format!("{}: {e}", path.display())))?;
        m.config.validate()?;
        Ok(m)
    }
}

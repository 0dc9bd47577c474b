pub mod dssm;
pub mod entropy;
pub mod eval;
pub mod synth;
pub mod track;

use std::path::{Path, PathBuf};

use crate::failure::{CliResult, Failure};

/// Sorted `(name, path)` of every `*.<ext>` file in `dir`.
pub fn list_by_extension(dir: &Path, ext: &str) -> CliResult<Vec<(String, PathBuf)>> {
    let entries = std::fs::read_dir(dir).map_err(|e| Failure::io(dir, e))?;
    let mut out = Vec::new();
    for entry in entries {
        let path = entry.map_err(|e| Failure::io(dir, e))?.path();
        if path.is_file() && path.extension().is_some_and(|x| x == ext) {
            if let Some(stem) = path.file_stem().and_then(|s| s.to_str()) {
                out.push((stem.to_string(), path.clone()));
            }
        }
    }
    out.sort();
    Ok(out)
}

pub fn thread_pool(jobs: Option<u32>) -> CliResult<rayon::ThreadPool> {
    let mut b = rayon::ThreadPoolBuilder::new();
    if let Some(j) = jobs {
        b = b.num_threads(j as usize);
    }
    b.build().map_err(|e| Failure::validation(format!("cannot start worker pool: {e}")))
}

pub fn create_dir(dir: &Path) -> CliResult<()> {
    std::fs::create_dir_all(dir).map_err(|e| Failure::io(dir, e))
}

/// Absolute form of a path that exists.
pub fn absolute(path: &Path) -> CliResult<PathBuf> {
    std::fs::canonicalize(path).map_err(|e| Failure::io(path, e))
}

use std::path::Path;
use std::time::Instant;

use panotrack_core::mot_io::{filter_min_area, load_detections, write_tracks};
use panotrack_core::tracker::run_sequence;
use panotrack_core::{SequenceMeta, TrackerConfig};
use rayon::prelude::*;

use super::{absolute, create_dir, list_by_extension, thread_pool};
use crate::args::{Panoramic, TrackArgs};
use crate::config;
use crate::failure::{CliResult, Failure};
use crate::manifest::{RunManifest, SequenceEntry, FILE_NAME};

/// What one sequence needs: inputs, resolved geometry and the output path.
struct Job {
    name: String,
    det: std::path::PathBuf,
    meta_path: std::path::PathBuf,
    output: std::path::PathBuf,
}

pub fn run(args: &TrackArgs, argv: Vec<String>) -> CliResult<()> {
    let started = Instant::now();
    let cfg = config::resolve(&args.tracker)?;
    let det_dir = absolute(&args.det_dir)?;
    let sequences = list_by_extension(&det_dir, "txt")?;
    if sequences.is_empty() {
        return Err(Failure::validation(format!("no <sequence>.txt files in {}", det_dir.display())));
    }
    create_dir(&args.out_dir)?;
    let out_dir = absolute(&args.out_dir)?;
    if out_dir == det_dir {
        return Err(Failure::validation("--out-dir must differ from --det-dir"));
    }

    let jobs: Vec<Job> = sequences
        .into_iter()
        .map(|(name, det)| Job {
            meta_path: det.with_extension("meta"),
            output: out_dir.join(format!("{name}.txt")),
            name,
            det,
        })
        .collect();

    let pool = thread_pool(args.jobs)?;
    let entries = pool.install(|| {
        jobs.par_iter()
            .map(|j| track_one(j, &cfg, args.panoramic, args.min_area))
            .collect::<CliResult<Vec<SequenceEntry>>>()
    })?;

    for e in &entries {
        eprintln!("{}: {} detections -> {} records", e.name, e.n_detections, e.n_records);
    }
    let manifest = RunManifest {
        tool: env!("CARGO_PKG_NAME").into(),
        version: env!("CARGO_PKG_VERSION").into(),
        argv,
        seed: cfg.rng_seed,
        config: cfg,
        panoramic: args.panoramic.as_str().into(),
        min_area: args.min_area,
        det_dir,
        out_dir: out_dir.clone(),
        sequences: entries,
        jobs: pool.current_num_threads(),
        wall_clock_seconds: started.elapsed().as_secs_f64(),
    };
    manifest.write(&out_dir.join(FILE_NAME))
}

fn track_one(job: &Job, cfg: &TrackerConfig, panoramic: Panoramic, min_area: Option<f64>) -> CliResult<SequenceEntry> {
    let meta = read_meta(&job.meta_path)?;
    let pano = panoramic.resolve(meta.panoramic);
    let canvas = meta.canvas_with(pano);
    let mut dets = load_detections(&job.det, &meta)?;
    if let Some(a) = min_area {
        dets = filter_min_area(&dets, a);
    }
    let records = run_sequence(&dets, canvas, cfg)?;
    write_tracks(&records, &job.output)?;
    Ok(SequenceEntry {
        name: job.name.clone(),
        detections: job.det.clone(),
        meta: job.meta_path.clone(),
        output: job.output.clone(),
        panoramic: pano,
        n_detections: dets.values().map(Vec::len).sum(),
        n_records: records.len(),
    })
}

pub fn read_meta(path: &Path) -> CliResult<SequenceMeta> {
    if !path.is_file() {
        return Err(Failure::io(path, "metadata sidecar not found"));
    }
    Ok(SequenceMeta::read(path)?)
}

/// Re-runs a manifest into `out_dir` with the recorded configuration.
pub fn replay(manifest_path: &Path, out_dir: &Path) -> CliResult<()> {
    let m = RunManifest::read(manifest_path)?;
    create_dir(out_dir)?;
    for s in &m.sequences {
        let meta = read_meta(&s.meta)?;
        let mut dets = load_detections(&s.detections, &meta)?;
        if let Some(a) = m.min_area {
            dets = filter_min_area(&dets, a);
        }
        let records = run_sequence(&dets, meta.canvas_with(s.panoramic), &m.config)?;
        let name = s
            .output
            .file_name()
            .ok_or_else(|| Failure::validation(format!("manifest output path {} has no file name", s.output.display())))?;
        write_tracks(&records, &out_dir.join(name))?;
        eprintln!("{}: {} records", s.name, records.len());
    }
    Ok(())
}

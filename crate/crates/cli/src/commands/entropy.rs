use panotrack_core::entropy::EntropyReport;
use panotrack_core::mot_io::{filter_min_area, load_detections, write_atomic};
use panotrack_core::{Detection, Tracker};

use super::create_dir;
use crate::args::EntropyArgs;
use crate::commands::track::read_meta;
use crate::failure::{CliResult, Failure};
use crate::manifest::RunManifest;

/// Replays every sequence of a manifest with candidate recording on and
/// prints one `key=value` block per sequence. A sequence whose feedback
/// entropy exceeds the independent one is a defect and fails the command.
pub fn run(args: &EntropyArgs) -> CliResult<()> {
    if !args.manifest.is_file() {
        return Err(Failure::io(&args.manifest, "manifest not found"));
    }
    let m = RunManifest::read(&args.manifest)?;
    let mut cfg = m.config.clone();
    if let Some(g) = args.gate {
        cfg.gate_radius = g;
    }
    if let Some(dir) = &args.csv {
        create_dir(dir)?;
    }

    let mut defects = Vec::new();
    for s in &m.sequences {
        let meta = read_meta(&s.meta)?;
        let canvas = meta.canvas_with(s.panoramic);
        let mut dets = load_detections(&s.detections, &meta)?;
        if let Some(a) = m.min_area {
            dets = filter_min_area(&dets, a);
        }
        let mut tracker = Tracker::new(cfg.clone(), canvas)?;
        tracker.record_candidates();
        for (frame, recs) in &dets {
            let d: Vec<Detection> = recs.iter().map(|r| Detection::from_record(r, &canvas)).collect();
            tracker.process_frame(*frame, &d)?;
        }
        let report = EntropyReport::from_frames(&tracker.take_candidates(), None)?;

        println!("sequence={}", s.name);
        println!("gate_radius={}", cfg.gate_radius);
        print!("{}", report.to_kv());
        println!();
        if let Some(dir) = &args.csv {
            write_atomic(&dir.join(format!("{}.entropy.csv", s.name)), report.to_csv().as_bytes())?;
        }
        if !report.is_consistent() {
            defects.push(s.name.clone());
        }
    }
    if defects.is_empty() {
        Ok(())
    } else {
        Err(Failure::validation(format!(
            "defect: h_feedback > h_independent in {}",
            defects.join(", ")
        )))
    }
}

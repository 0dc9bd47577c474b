use std::collections::BTreeMap;

use panotrack_core::metrics::report::{render_csv, render_text, ReportRow, COMBINED};
use panotrack_core::metrics::{evaluate_counts, pool, EvalCounts, EvalOptions};
use panotrack_core::mot_io::{load_ground_truth, load_tracks, write_atomic};
use rayon::prelude::*;

use super::{create_dir, list_by_extension, thread_pool};
use crate::args::{EvalArgs, Panoramic};
use crate::commands::track::read_meta;
use crate::failure::{CliResult, Failure};

pub fn run(args: &EvalArgs) -> CliResult<()> {
    let gt: BTreeMap<String, _> = list_by_extension(&args.gt_dir, "txt")?.into_iter().collect();
    let res: BTreeMap<String, _> = list_by_extension(&args.res_dir, "txt")?.into_iter().collect();

    let missing: Vec<&String> = gt.keys().filter(|k| !res.contains_key(*k)).collect();
    let extra: Vec<&String> = res.keys().filter(|k| !gt.contains_key(*k)).collect();
    for name in &missing {
        eprintln!("unmatched: {name} has ground truth but no result");
    }
    for name in &extra {
        eprintln!("unmatched: {name} has a result but no ground truth");
    }
    if (!missing.is_empty() || !extra.is_empty()) && !args.allow_partial {
        return Err(Failure::validation(format!(
            "{} unmatched sequence(s); pass --allow-partial to evaluate the rest",
            missing.len() + extra.len()
        )));
    }
    let names: Vec<&String> = gt.keys().filter(|k| res.contains_key(*k)).collect();
    if names.is_empty() {
        return Err(Failure::validation("no sequence present in both directories"));
    }

    let opts = EvalOptions {
        iou_threshold: args.iou_threshold,
        min_area: args.min_area,
        panoramic: match args.panoramic {
            Panoramic::Auto => None,
            p => Some(p.resolve(false)),
        },
        ..EvalOptions::default()
    };
    opts.validate()?;

    let pool_threads = thread_pool(args.jobs)?;
    let counts = pool_threads.install(|| {
        names
            .par_iter()
            .map(|name| {
                let gt_path = &gt[*name];
                let meta = read_meta(&gt_path.with_extension("meta"))?;
                let g = load_ground_truth(gt_path, &meta)?;
                let p = load_tracks(&res[*name], &meta)?;
                Ok(evaluate_counts(&g, &p, &meta, &opts)?)
            })
            .collect::<CliResult<Vec<EvalCounts>>>()
    })?;

    let mut rows: Vec<ReportRow> = names
        .iter()
        .zip(&counts)
        .map(|(n, c)| ReportRow::new(n.as_str(), &c.result()))
        .collect();
    rows.push(ReportRow::new(COMBINED, &pool(&counts, &opts).result()));

    let text = render_text(&rows);
    print!("{text}");
    if let Some(dir) = &args.out_dir {
        create_dir(dir)?;
        write_atomic(&dir.join("report.txt"), text.as_bytes())?;
        write_atomic(&dir.join("report.csv"), render_csv(&rows).as_bytes())?;
    }
    Ok(())
}

use panotrack_core::mot_io::{render_tracks, write_atomic};
use panotrack_core::synthetic::{generate, SceneConfig};

use super::create_dir;
use crate::args::SynthArgs;
use crate::failure::CliResult;

pub fn run(args: &SynthArgs) -> CliResult<()> {
    let cfg = SceneConfig {
        name: args.name.clone(),
        n_objects: args.objects,
        n_frames: args.frames,
        width: args.width,
        height: args.height,
        dropout: args.dropout,
        jitter: args.jitter,
        seed: args.seed,
        ..SceneConfig::default()
    };
    let scene = generate(&cfg)?;
    let meta = scene.meta.to_kv();
    for (sub, records) in [("det", &scene.detections), ("gt", &scene.ground_truth)] {
        let dir = args.out_dir.join(sub);
        create_dir(&dir)?;
        write_atomic(&dir.join(format!("{}.txt", args.name)), render_tracks(records).as_bytes())?;
        write_atomic(&dir.join(format!("{}.meta", args.name)), meta.as_bytes())?;
    }
    println!(
        "{}: {} frames, {} objects, {} detections",
        args.name,
        args.frames,
        args.objects,
        scene.detections.len()
    );
    Ok(())
}

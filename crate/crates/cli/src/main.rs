//! `panotrack`: track, evaluate and diagnose panoramic multi-object tracking.
//!
//! Exit codes: 0 success, 1 usage, 2 validation, 3 I/O.

mod args;
mod commands;
mod config;
mod failure;
mod manifest;

use std::process::ExitCode;

use clap::Parser;

use args::{Cli, Command};
use failure::{Failure, EXIT_USAGE};

fn dispatch(cli: &Cli, argv: Vec<String>) -> Result<(), Failure> {
    match &cli.command {
        Command::Track(a) => commands::track::run(a, argv),
        Command::Eval(a) => commands::eval::run(a),
        Command::EntropyReport(a) => commands::entropy::run(a),
        Command::DssmCheck(a) => commands::dssm::run(a),
        Command::Replay(a) => commands::track::replay(&a.manifest, &a.out_dir),
        Command::Synth(a) => commands::synth::run(a),
    }
}

fn main() -> ExitCode {
    let argv: Vec<String> = std::env::args().collect();
    let cli = match Cli::try_parse_from(&argv) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(EXIT_USAGE) } else { ExitCode::SUCCESS };
        }
    };
    match dispatch(&cli, argv) {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {f}");
            ExitCode::from(f.code)
        }
    }
}

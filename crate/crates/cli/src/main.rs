//! `srr`: structured residual reconstruction from the command line.
//!
//! Exit codes: 0 success, 2 bad input or usage, 3 numerical or domain
//! failure, 4 I/O failure.

mod commands;
mod config;

use std::ffi::OsString;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{CommandFactory, FromArgMatches, Parser, Subcommand};
use srr_core::SrrError;

use commands::{
    CalibrateArgs, CompareArgs, DecomposeArgs, FinetuneArgs, GenSynthArgs, StabilityArgs, SweepArgs,
};

#[derive(Debug, Parser)]
#[command(name = "srr", version, about = "Low-rank reconstruction of quantized weight matrices")]
struct Cli {
    /// TOML file whose [<command>] table supplies defaults for that command's flags.
    #[arg(long, global = true, value_name = "FILE")]
    config: Option<PathBuf>,
    #[command(subcommand)]
    command: Cmd,
}

#[derive(Debug, Subcommand)]
enum Cmd {
    /// Decompose one weight matrix into Q + L R.
    Decompose(DecomposeArgs),
    /// Evaluate the true loss and the selector objective for every split k.
    Sweep(SweepArgs),
    /// Compare QER, SRR (split and global) and the oracle over an ensemble.
    Compare(CompareArgs),
    /// Spread of the selected split across probe seeds.
    Stability(StabilityArgs),
    /// Gradient-descent fine-tuning of a split adapter on synthetic data.
    FinetuneToy(FinetuneArgs),
    /// Write a synthetic weight matrix with a prescribed spectrum.
    GenSynth(GenSynthArgs),
    /// Accumulate calibration statistics from an activation matrix.
    Calibrate(CalibrateArgs),
}

fn exit_code(e: &SrrError) -> u8 {
    match e {
        SrrError::Input(_) | SrrError::Format(_) => 2,
        SrrError::Domain(_) | SrrError::Numeric(_) => 3,
        SrrError::Io(_) => 4,
    }
}

/// Finds `--config` and the subcommand name without a full parse, so that
/// config values can satisfy required flags.
fn prescan(args: &[OsString]) -> (Option<PathBuf>, Option<String>) {
    let mut config = None;
    let mut sub = None;
    let mut it = args.iter().skip(1);
    while let Some(a) = it.next() {
        let s = a.to_string_lossy();
        if s == "--config" {
            config = it.next().map(PathBuf::from);
        } else if let Some(v) = s.strip_prefix("--config=") {
            config = Some(PathBuf::from(v));
        } else if sub.is_none() && !s.starts_with('-') {
            sub = Some(s.into_owned());
        }
    }
    (config, sub)
}

fn parse(args: Vec<OsString>) -> Result<Cli, SrrError> {
    let mut cmd = Cli::command();
    if let (Some(path), Some(sub)) = prescan(&args) {
        if cmd.find_subcommand(&sub).is_some() {
            cmd = config::apply_config(cmd, &path, &sub)?;
        }
    }
    let matches = cmd.try_get_matches_from(args).unwrap_or_else(|e| e.exit());
    Cli::from_arg_matches(&matches).map_err(|e| SrrError::Input(e.to_string()))
}

fn run(cli: Cli) -> Result<(), SrrError> {
    match cli.command {
        Cmd::Decompose(a) => commands::decompose(a),
        Cmd::Sweep(a) => commands::sweep(a),
        Cmd::Compare(a) => commands::compare(a),
        Cmd::Stability(a) => commands::stability(a),
        Cmd::FinetuneToy(a) => commands::finetune_toy(a),
        Cmd::GenSynth(a) => commands::gen_synth(a),
        Cmd::Calibrate(a) => commands::calibrate(a),
    }
}

fn main() -> ExitCode {
    match parse(std::env::args_os().collect()).and_then(run) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}

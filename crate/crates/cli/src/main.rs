// SPDX-License-Identifier: MIT OR Apache-2.0

//! `bqcd`: threshold calibration, Monte Carlo campaigns, approximation
//! tables and single-trajectory traces for the `G_n ≥ A` change detector.
//!
//! Exit codes: 0 success, 2 configuration error, 3 refused estimate
//! (for example too many censored trials), 1 anything else.

mod commands;
mod config;
mod error;

use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use crate::commands::Context;
use crate::error::CliError;

#[derive(Parser)]
#[command(name = "bqcd", version, about = "Bayesian quickest change detection with a global false-alarm bound")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Common {
    /// JSON run configuration.
    #[arg(long, value_name = "PATH")]
    config: PathBuf,
    /// Overrides the configured seed.
    #[arg(long, value_name = "N")]
    seed: Option<u64>,
    /// Output directory.
    #[arg(long, value_name = "DIR", default_value = ".")]
    out: PathBuf,
    /// Worker threads (defaults to all cores).
    #[arg(long, value_name = "N")]
    threads: Option<usize>,
}

#[derive(Subcommand)]
enum Command {
    /// Resolve the threshold A from alpha, estimating the overshoot if asked.
    Calibrate(Common),
    /// Run the configured campaign (pfa, add, cond_add or slope).
    Simulate(Common),
    /// Per-step trace of G_n and the posterior on one simulated trajectory.
    Trace {
        #[command(flatten)]
        common: Common,
        /// Change point; omit for a trajectory without change.
        #[arg(long)]
        k: Option<usize>,
        /// Number of observations to simulate.
        #[arg(long)]
        n_max: Option<usize>,
    },
    /// Closed-form ADD and PFA approximations over A_grid.
    Approx(Common),
    /// Run the threshold rule and Shiryaev's rule on shared trajectories.
    Compare(Common),
}

fn context(common: &Common) -> Result<Context, CliError> {
    if let Some(threads) = common.threads {
        if threads == 0 {
            return Err(CliError::config("--threads", "must be at least 1"));
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build_global()
            .map_err(|e| CliError::Runtime(e.to_string()))?;
    }
    let loaded = config::load(&common.config)?;
    let seed = common.seed.or(loaded.config.seed).unwrap_or(0);
    Ok(Context {
        loaded,
        seed,
        out_dir: common.out.clone(),
    })
}

fn run(cli: Cli) -> Result<serde_json::Value, CliError> {
    match cli.command {
        Command::Calibrate(common) => commands::calibrate(&context(&common)?),
        Command::Simulate(common) => commands::simulate(&context(&common)?),
        Command::Trace { common, k, n_max } => commands::trace_cmd(&context(&common)?, k, n_max),
        Command::Approx(common) => commands::approx(&context(&common)?),
        Command::Compare(common) => commands::compare(&context(&common)?),
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    match run(cli) {
        Ok(summary) => {
            let text = serde_json::to_string_pretty(&summary).expect("summary serializes");
            // A closed stdout (e.g. piped into `head`) is not a failure.
            let _ = writeln!(std::io::stdout().lock(), "{text}");
            ExitCode::SUCCESS
        }
        Err(err) => {
            eprintln!("bqcd: {err}");
            err.exit_code()
        }
    }
}

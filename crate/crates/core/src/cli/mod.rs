//! Command-line entry point. Every subcommand reads one JSON run config
//! (plus `--set` overrides), writes its artifacts under the output
//! directory and leaves a `manifest_<command>.json` next to them.

mod commands;
mod config;

use std::ffi::OsString;
use std::path::PathBuf;

use clap::{Parser, Subcommand};

pub use commands::{read_samples, write_samples, Metrics, SampleStats};
pub use config::{apply_override, EvalConfig, RunConfig, SampleConfig};

use crate::error::Error;

/// Exit status for configuration and argument errors.
pub const EXIT_VALIDATION: i32 = 1;
/// Exit status for failures while running.
pub const EXIT_RUNTIME: i32 = 2;

#[derive(Debug, Parser)]
#[command(name = "hollowflow", version, about = "Hollow message passing flows with exact divergence")]
pub struct Cli {
    /// JSON run config; defaults are used for missing keys.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Dotted-path override, e.g. `--set train.epochs=5`. Repeatable.
    #[arg(long = "set", value_name = "KEY=VALUE", global = true)]
    pub overrides: Vec<String>,
    /// Output directory (overrides `out`).
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    /// Run seed (overrides `seed`).
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Suppress progress output.
    #[arg(long, global = true)]
    pub quiet: bool,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Metropolis samples of the configured system.
    GenerateData {
        /// Defaults to `<out>/data.csv`.
        #[arg(long)]
        output: Option<PathBuf>,
    },
    /// Flow matching on a data CSV.
    Train {
        /// Defaults to `<out>/data.csv`.
        #[arg(long)]
        data: Option<PathBuf>,
    },
    /// Pushes prior draws through a checkpoint with log-densities.
    Sample {
        /// Defaults to `<out>/best.json`.
        #[arg(long)]
        checkpoint: Option<PathBuf>,
    },
    /// Importance weights and effective sample sizes of a sample CSV.
    Evaluate {
        /// Defaults to `<out>/samples.csv`.
        #[arg(long)]
        samples: Option<PathBuf>,
        /// Defaults to `<out>/best.json`.
        #[arg(long)]
        checkpoint: Option<PathBuf>,
    },
    /// Runtime sweep of hollow and baseline models.
    Bench,
    /// Graph, line graph and pruning profile of one configuration.
    InspectGraph {
        /// Data CSV to take the configuration from; a prior draw otherwise.
        #[arg(long)]
        data: Option<PathBuf>,
        #[arg(long, default_value_t = 0)]
        index: usize,
    },
}

impl Command {
    pub fn name(&self) -> &'static str {
        match self {
            Command::GenerateData { .. } => "generate-data",
            Command::Train { .. } => "train",
            Command::Sample { .. } => "sample",
            Command::Evaluate { .. } => "evaluate",
            Command::Bench => "bench",
            Command::InspectGraph { .. } => "inspect-graph",
        }
    }
}

fn is_validation(e: &Error) -> bool {
    matches!(e, Error::Config { .. })
}

/// Parses `args` (program name first), runs the command and returns the
/// process exit status.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_VALIDATION } else { 0 };
        }
    };
    let cfg = match RunConfig::load(cli.config.as_deref(), &cli.overrides) {
        Ok(c) => c,
        Err(e) => {
            eprintln!("error: {e}");
            return if is_validation(&e) { EXIT_VALIDATION } else { EXIT_RUNTIME };
        }
    };
    let seed = cli.seed.unwrap_or(cfg.seed);
    let mut cfg = cfg.with_seed(seed);
    if let Some(out) = &cli.out {
        cfg.out = out.clone();
    }
    match commands::execute(&cli.command, &cfg, cli.quiet) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            if is_validation(&e) {
                EXIT_VALIDATION
            } else {
                EXIT_RUNTIME
            }
        }
    }
}

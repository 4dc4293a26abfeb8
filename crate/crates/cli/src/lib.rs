//! Command-line driver: synthetic data, pipeline runs, sweeps and diagnostics.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod args;
mod commands;
mod output;
mod sweep;

use std::path::PathBuf;

use thiserror::Error;
use wsfair_core::ErrorKind;

pub use args::{Cli, Command};
pub use commands::{cmd_center_scan, cmd_estimate, cmd_run, cmd_synth};
pub use sweep::cmd_sweep;

/// Written into every JSON report.
pub const SPEC_VERSION: &str = "1";

/// Environment variable holding the worker-thread count.
pub const THREADS_ENV: &str = "WSFAIR_THREADS";

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error(transparent)]
    Core(#[from] wsfair_core::Error),
}

impl CliError {
    /// 1 for usage errors, 2 for bad or missing data, 3 for numerical failure.
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Usage(_) => 1,
            CliError::Core(e) => match e.kind() {
                ErrorKind::Usage => 1,
                ErrorKind::Data => 2,
                ErrorKind::Numerical => 3,
            },
        }
    }
}

/// Thread count from [`THREADS_ENV`]; one thread when unset.
pub fn thread_count() -> Result<usize, CliError> {
    match std::env::var(THREADS_ENV) {
        Err(_) => Ok(1),
        Ok(v) => match v.trim().parse::<usize>() {
            Ok(n) if n >= 1 => Ok(n),
            _ => Err(CliError::Usage(format!("{THREADS_ENV} must be a positive integer, got {v:?}"))),
        },
    }
}

/// Runs a parsed command on a dedicated pool and returns the files written.
pub fn execute(cli: &Cli) -> Result<Vec<PathBuf>, CliError> {
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(thread_count()?)
        .build()
        .map_err(|e| CliError::Usage(format!("cannot start worker pool: {e}")))?;
    pool.install(|| match &cli.command {
        Command::Synth(a) => cmd_synth(a),
        Command::Run(a) => cmd_run(a),
        Command::Sweep(a) => cmd_sweep(a),
        Command::CenterScan(a) => cmd_center_scan(a),
        Command::Estimate(a) => cmd_estimate(a),
    })
}

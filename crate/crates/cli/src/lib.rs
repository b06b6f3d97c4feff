//! Experiment runner behind the `extremal-kpca` binary.
//!
//! Each subcommand reads a key=value configuration, runs one experiment
//! family and writes CSV tables, SVG figures and a `run.json` record to an
//! output directory.

pub mod config;
pub mod output;
pub mod runner;
pub mod svg;

pub use config::{DavisKahanConfig, ExperimentConfig, RatesConfig, RawConfig};
pub use runner::{run_davis_kahan, run_experiment, run_rate_validation, Stage};

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    /// Bad flags, keys or values. Exit code 1.
    #[error("configuration error: {0}")]
    Config(String),
    /// Numerical or I/O failure while running. Exit code 2.
    #[error("runtime error: {0}")]
    Runtime(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => 1,
            CliError::Runtime(_) => 2,
        }
    }
}

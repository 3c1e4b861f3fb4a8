//! Config-driven experiment runner for modulated-clock sampling studies.
//!
//! Each experiment turns a [`ResolvedConfig`] into an [`Outcome`] in memory;
//! [`execute`] times the run and writes `results.csv`, `manifest.txt` and
//! plots.

pub mod config;
pub mod experiments;
pub mod output;
pub mod plot;
pub mod spectrogram;

use std::path::Path;
use std::time::Instant;

use thiserror::Error;

pub use config::{ConfigFile, ExperimentId, ResolvedConfig, Scale};
pub use output::{Manifest, Outcome, Record};

#[derive(Debug, Error)]
pub enum CliError {
    #[error("config error: {0}")]
    Config(String),

    #[error("numerical failure: {0}")]
    Numerical(nyfold_core::Error),

    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),

    #[error("output error: {0}")]
    Output(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => 2,
            CliError::Numerical(_) => 3,
            CliError::Io(_) | CliError::Output(_) => 1,
        }
    }
}

impl From<nyfold_core::Error> for CliError {
    fn from(e: nyfold_core::Error) -> Self {
        match e {
            nyfold_core::Error::InvalidParameter(_) | nyfold_core::Error::DimensionMismatch { .. } => {
                CliError::Config(e.to_string())
            }
            other => CliError::Numerical(other),
        }
    }
}

/// Runs the experiment, writes its outputs into `out_dir` and returns the
/// manifest that was written.
pub fn execute(config: &ResolvedConfig, out_dir: &Path) -> Result<Manifest, CliError> {
    let start = Instant::now();
    let outcome = experiments::run(config)?;
    let manifest = Manifest {
        experiment: config.experiment.to_string(),
        scale: config.scale.to_string(),
        seed: config.seed,
        library_version: env!("CARGO_PKG_VERSION").to_string(),
        wall_clock_s: start.elapsed().as_secs_f64(),
        conventions: outcome.conventions.clone(),
        summary: outcome.summary.clone(),
        config: config.table.clone(),
        records: outcome.records.clone(),
    };
    output::write_outputs(out_dir, &manifest, &outcome)?;
    Ok(manifest)
}

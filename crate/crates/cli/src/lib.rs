//! Experiment runner for the BLS / S-BLS benchmarks: grid execution over
//! noise levels, methods and seeds, tracking traces, timing comparison and
//! dataset export.

pub mod config;
pub mod grid;
pub mod timing;
pub mod trace;

use std::fs;
use std::io;
use std::path::{Path, PathBuf};

pub use config::{parse_config, parse_config_str, Benchmark, ExperimentConfig, Method};
pub use grid::{run_cell, run_grid, write_grid_outputs, CellFailure, CellRun, GridOutcome};
pub use timing::{timing_report, TimingReport, TimingRow};
pub use trace::{emit_tracking_trace, TrackingSummary};

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("config key `{key}`: {message}")]
    Config { key: String, message: String },
    #[error("config: {0}")]
    ConfigSyntax(String),
    #[error(transparent)]
    Core(#[from] sbls_core::Error),
    #[error("io: {0}")]
    Io(#[from] io::Error),
    #[error("no trained {0} model for this cell")]
    MissingModel(Method),
    #[error("{0}")]
    Usage(String),
}

impl CliError {
    /// Process exit status: 2 for configuration problems, 1 otherwise.
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config { .. } | CliError::ConfigSyntax(_) => 2,
            _ => 1,
        }
    }
}

/// Applies the command-line overrides shared by every subcommand.
pub fn apply_overrides(
    config: &mut ExperimentConfig,
    seed_override: Option<u64>,
    out: Option<PathBuf>,
) {
    if let Some(seed) = seed_override {
        config.seeds = vec![seed];
    }
    if let Some(dir) = out {
        config.output_dir = dir;
    }
}

/// Writes `contents` next to `path` and renames it into place.
pub(crate) fn write_atomic(path: &Path, contents: &str) -> io::Result<()> {
    if let Some(parent) = path.parent() {
        fs::create_dir_all(parent)?;
    }
    let mut tmp = path.as_os_str().to_owned();
    tmp.push(".tmp");
    let tmp = PathBuf::from(tmp);
    fs::write(&tmp, contents)?;
    fs::rename(&tmp, path)
}

/// File-name fragment for a noise level, e.g. `0.25` → `0p25`.
pub(crate) fn level_tag(gamma: f64) -> String {
    format!("{gamma}").replace('.', "p")
}

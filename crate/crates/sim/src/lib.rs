//! Monte Carlo harness around `fdsim-core`: scenario configuration, the
//! per-realization pipeline of both TDD phases, ρ and power sweeps, and CSV
//! or JSON emission.

use std::path::{Path, PathBuf};

pub mod config;
pub mod emit;
pub mod model;
pub mod sweep;
pub mod validate;

pub use config::ScenarioConfig;

#[derive(Debug, thiserror::Error)]
pub enum SimError {
    #[error("configuration error: {0}")]
    Config(String),

    #[error("numerical failure: {0}")]
    Numerical(#[from] fdsim_core::Error),

    #[error("realization {index}: {attempts} degenerate draws in a row, last: {source}")]
    Resample { index: u64, attempts: usize, source: fdsim_core::Error },

    #[error("{}: {source}", path.display())]
    Io { path: PathBuf, source: std::io::Error },
}

impl SimError {
    pub fn io(path: &Path, source: std::io::Error) -> Self {
        Self::Io { path: path.to_path_buf(), source }
    }

    /// Process exit code: 1 configuration, 2 numerical, 3 IO.
    pub fn exit_code(&self) -> u8 {
        match self {
            Self::Config(_) => 1,
            Self::Numerical(_) | Self::Resample { .. } => 2,
            Self::Io { .. } => 3,
        }
    }
}

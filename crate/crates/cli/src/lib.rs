//! Library side of the scenario runner: configuration handling and the
//! scenario implementations, shared by the `nctrans` binary and the
//! integration tests.

pub mod config;
pub mod scenarios;

use std::path::PathBuf;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("config error: {0}")]
    Config(String),
    #[error("tolerance failure: {0}")]
    Tolerance(String),
    #[error("computation failed: {0}")]
    Compute(String),
    #[error("I/O error on {path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
}

impl CliError {
    /// Stable exit-code contract: 0 success, 1 tolerance/computation
    /// failure, 2 config error, 3 I/O error.
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Config(_) => 2,
            CliError::Tolerance(_) | CliError::Compute(_) => 1,
            CliError::Io { .. } => 3,
        }
    }

    pub fn from_config(error: nctrans::Error) -> Self {
        match error {
            nctrans::Error::Io(source) => CliError::Io {
                path: PathBuf::new(),
                source,
            },
            other => CliError::Config(other.to_string()),
        }
    }
}

//! Study harness for the thin-layer limit: configuration, initial data,
//! `ε`-sweeps against the planar reference, and the auxiliary checks.

use std::path::PathBuf;

use thiserror::Error;
use thinlayer_core::fields::FieldError;

pub mod checks;
pub mod config;
pub mod initial;
pub mod study;

pub use config::StudyConfig;
pub use study::{run_study, StudyReport};

#[derive(Debug, Error)]
pub enum HarnessError {
    /// Bad input: config, recipe or grid.
    #[error("{0}")]
    Validation(String),
    #[error("{0}")]
    Runtime(String),
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
}

impl HarnessError {
    /// Process exit status: 1 for invalid input, 2 for failures while running.
    pub fn exit_code(&self) -> i32 {
        match self {
            Self::Validation(_) => 1,
            Self::Runtime(_) | Self::Io { .. } => 2,
        }
    }
}

impl From<FieldError> for HarnessError {
    fn from(e: FieldError) -> Self {
        Self::Validation(e.to_string())
    }
}

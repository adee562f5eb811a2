//! Orchestration behind the `twsense` binary: run configuration, the
//! subcommand implementations and their report schemas.
//!
//! Errors split into two classes that map onto the process exit codes:
//! configuration / validation problems ([`CliError::Config`], exit 1) and
//! numeric or domain failures from the simulation itself
//! ([`CliError::Numeric`], exit 2).

// Validation deliberately writes `!(x > 0.0)` so NaN fails the check.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

use thiserror::Error;

pub mod commands;
pub mod config;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Config(String),
    #[error("{0}")]
    Numeric(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => 1,
            CliError::Numeric(_) => 2,
        }
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Config(e.to_string())
    }
}

impl From<twsense_core::propagation::PropagationError> for CliError {
    fn from(e: twsense_core::propagation::PropagationError) -> Self {
        CliError::Numeric(e.to_string())
    }
}

impl From<twsense_core::ris::RisError> for CliError {
    fn from(e: twsense_core::ris::RisError) -> Self {
        CliError::Numeric(e.to_string())
    }
}

impl From<twsense_core::csi::CsiError> for CliError {
    fn from(e: twsense_core::csi::CsiError) -> Self {
        CliError::Numeric(e.to_string())
    }
}

impl From<twsense_core::features::FeatureError> for CliError {
    fn from(e: twsense_core::features::FeatureError) -> Self {
        CliError::Numeric(e.to_string())
    }
}

impl From<twsense_core::svm::SvmError> for CliError {
    fn from(e: twsense_core::svm::SvmError) -> Self {
        // A model schema mismatch is a configuration problem, not a numeric
        // failure.
        match &e {
            twsense_core::svm::SvmError::FormatVersion { .. }
            | twsense_core::svm::SvmError::ModelJson(_) => CliError::Config(e.to_string()),
            _ => CliError::Numeric(e.to_string()),
        }
    }
}

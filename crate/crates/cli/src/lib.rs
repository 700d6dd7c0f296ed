//! Command-line pipeline: master-file ingestion, run configuration,
//! orchestration, and report emission.

#![allow(clippy::needless_range_loop)] // shared index walks parallel arrays
#![allow(clippy::neg_cmp_op_on_partial_ord)] // negated compares also reject NaN

pub mod config;
pub mod master;
pub mod pipeline;
pub mod report;

use std::fmt;

/// Process-level failure with its exit code.
///
/// Validation problems (bad config, malformed input, unusable arguments)
/// exit with 1; runtime failures (fits that do not converge, io while
/// writing) exit with 2.
#[derive(Debug)]
pub enum CliError {
    Validation(String),
    Runtime(String),
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Validation(msg) => write!(f, "invalid input: {msg}"),
            CliError::Runtime(msg) => write!(f, "run failed: {msg}"),
        }
    }
}

impl std::error::Error for CliError {}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Validation(_) => 1,
            CliError::Runtime(_) => 2,
        }
    }

    /// Prefixes the message with what was being attempted.
    pub fn context(self, what: &str) -> Self {
        match self {
            CliError::Validation(msg) => CliError::Validation(format!("{what}: {msg}")),
            CliError::Runtime(msg) => CliError::Runtime(format!("{what}: {msg}")),
        }
    }
}

impl From<disagg_core::Error> for CliError {
    fn from(e: disagg_core::Error) -> Self {
        use disagg_core::Error::*;
        match e {
            Alignment(_) | Schema(_) | Domain(_) | Unsupported(_) | InvalidArgument(_) => {
                CliError::Validation(e.to_string())
            }
            RankDeficient(_) | NonConvergence(_) | Infeasible(_) => {
                CliError::Runtime(e.to_string())
            }
        }
    }
}

pub type CliResult<T> = Result<T, CliError>;

use std::path::Path;

use thiserror::Error;
use ttrank_core::Error as CoreError;

/// A failed command, carrying the process exit code it maps to.
#[derive(Debug, Error)]
pub enum CliError {
    /// Bad arguments or configuration (exit 2).
    #[error("{0}")]
    Usage(String),

    /// Missing or unreadable input, unwritable output, corrupt container (exit 3).
    #[error("{0}")]
    Io(String),

    /// Numerical breakdown, or a replay that did not reproduce its outputs (exit 4).
    #[error("{0}")]
    Numerical(String),

    /// A checked inequality was violated (exit 5).
    #[error("{0}")]
    BoundViolation(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) => 2,
            CliError::Io(_) => 3,
            CliError::Numerical(_) => 4,
            CliError::BoundViolation(_) => 5,
        }
    }

    pub fn io(path: &Path, e: impl std::fmt::Display) -> Self {
        CliError::Io(format!("{}: {e}", path.display()))
    }
}

impl From<CoreError> for CliError {
    fn from(e: CoreError) -> Self {
        match e {
            CoreError::NonFinite(_) | CoreError::NumericalFailure(_) => CliError::Numerical(e.to_string()),
            CoreError::Data(_) => CliError::Io(e.to_string()),
            _ => CliError::Usage(e.to_string()),
        }
    }
}

pub type CliResult<T> = std::result::Result<T, CliError>;

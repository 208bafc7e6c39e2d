use std::fmt::Display;

use thiserror::Error;

/// Failures of a command, each mapped to a documented exit code.
#[derive(Debug, Error)]
pub enum CliError {
    /// Invalid or inconsistent configuration (exit 2).
    #[error("config error: {0}")]
    Config(String),
    /// The threshold search failed (exit 3).
    #[error("threshold search failed: {0}")]
    Search(String),
    /// The nonlinearity failed its hypothesis check (exit 4).
    #[error("hypothesis check failed: {0}")]
    Hypothesis(String),
    /// A certificate or re-verification failed (exit 5).
    #[error("certificate failed: {0}")]
    Certificate(String),
    /// Reading or writing files failed (exit 1).
    #[error("i/o error: {0}")]
    Io(String),
}

impl CliError {
    pub fn config(field: &str, msg: impl Display) -> Self {
        CliError::Config(format!("{field}: {msg}"))
    }

    pub fn io(path: &std::path::Path, e: impl Display) -> Self {
        CliError::Io(format!("{}: {e}", path.display()))
    }

    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Io(_) => 1,
            CliError::Config(_) => 2,
            CliError::Search(_) => 3,
            CliError::Hypothesis(_) => 4,
            CliError::Certificate(_) => 5,
        }
    }
}

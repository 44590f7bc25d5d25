//! Harness around the active-learning engine: configuration files,
//! dataset persistence, run manifests, reports, and the statistics used
//! to compare strategies.

pub mod commands;
pub mod config;
pub mod dataset;
pub mod manifest;
pub mod report;
pub mod stats;

/// Process exit contract: 0 success, 1 validation failure, 2 runtime
/// failure.
#[derive(Debug)]
pub enum CliError {
    /// Bad inputs detected before any compute: config, flags, paths.
    Validation(String),
    /// Failures during execution.
    Runtime(anyhow::Error),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Validation(_) => 1,
            CliError::Runtime(_) => 2,
        }
    }

    pub fn validation(msg: impl Into<String>) -> Self {
        CliError::Validation(msg.into())
    }
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CliError::Validation(msg) => write!(f, "validation error: {msg}"),
            CliError::Runtime(err) => write!(f, "error: {err:#}"),
        }
    }
}

impl From<anyhow::Error> for CliError {
    fn from(err: anyhow::Error) -> Self {
        CliError::Runtime(err)
    }
}

impl From<alflow::Error> for CliError {
    fn from(err: alflow::Error) -> Self {
        CliError::Runtime(anyhow::Error::new(err))
    }
}

impl From<std::io::Error> for CliError {
    fn from(err: std::io::Error) -> Self {
        CliError::Runtime(anyhow::Error::new(err))
    }
}

pub type CliResult<T> = std::result::Result<T, CliError>;

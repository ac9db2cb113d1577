use std::path::PathBuf;

/// Failure of a run, split by who has to act on it.
#[derive(Debug, thiserror::Error)]
pub enum CliError {
    /// Bad flags, config file or initial-state file.
    #[error("configuration error: {0}")]
    Config(String),
    /// The numerics aborted (integrator failure, lost positivity, ...).
    #[error("numerical error: {0}")]
    Numerical(#[from] spinbath_core::Error),
    #[error("cannot write {path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error("malformed output file {path}: {reason}")]
    Format { path: PathBuf, reason: String },
}

impl CliError {
    pub fn config(msg: impl Into<String>) -> Self {
        Self::Config(msg.into())
    }

    pub fn exit_code(&self) -> i32 {
        match self {
            Self::Config(_) => 2,
            Self::Numerical(_) => 3,
            Self::Io { .. } | Self::Format { .. } => 1,
        }
    }
}

pub type CliResult<T> = Result<T, CliError>;

use std::path::PathBuf;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("config error in `{field}`: {reason}")]
    Config { field: String, reason: String },
    #[error("I/O error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{aborted} of {trials} trials hit the retry cap (limit is a fraction of {limit})")]
    AbortLimit { aborted: usize, trials: usize, limit: f64 },
    #[error(transparent)]
    Core(#[from] mqft_core::Error),
}

impl CliError {
    pub fn config(field: impl Into<String>, reason: impl Into<String>) -> Self {
        Self::Config { field: field.into(), reason: reason.into() }
    }

    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Self::Io { path: path.into(), source }
    }

    /// Process exit status for this error.
    pub fn exit_code(&self) -> i32 {
        match self {
            Self::Config { .. } => 2,
            Self::Io { .. } => 3,
            Self::AbortLimit { .. } => 4,
            Self::Core(mqft_core::Error::InvalidParameter { .. } | mqft_core::Error::InvalidPhaseWord(_)) => 2,
            Self::Core(_) => 1,
        }
    }
}

pub type Result<T> = std::result::Result<T, CliError>;

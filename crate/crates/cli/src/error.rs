use std::path::PathBuf;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    /// One diagnostic per offending field.
    #[error("invalid configuration:\n  {}", .0.join("\n  "))]
    Config(Vec<String>),

    #[error("{0}")]
    Usage(String),

    #[error("validation failed: {0}")]
    ValidationFailed(String),

    #[error(transparent)]
    Core(#[from] igeo_core::Error),

    #[error("cannot access {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl CliError {
    /// 0 success, 1 validation failure, 2 runtime/domain error,
    /// 3 accuracy not achieved.
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) | CliError::Usage(_) | CliError::ValidationFailed(_) => 1,
            CliError::Core(igeo_core::Error::Accuracy { .. }) => 3,
            CliError::Core(_) | CliError::Io { .. } => 2,
        }
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        CliError::Io { path: path.into(), source }
    }
}

pub type CliResult<T> = std::result::Result<T, CliError>;

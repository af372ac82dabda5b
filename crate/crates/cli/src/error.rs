use std::path::PathBuf;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    /// Bad flags, malformed or inconsistent configuration.
    #[error("{0}")]
    Usage(String),

    #[error("{path}: {source}")]
    ConfigParse {
        path: PathBuf,
        source: serde_json::Error,
    },

    #[error("invalid configuration: {0}")]
    Invalid(#[source] qwfs::Error),

    #[error("{0}")]
    Runtime(#[from] qwfs::Error),

    #[error("{context}: {source}")]
    Io {
        context: String,
        source: std::io::Error,
    },

    /// Every realization of at least one ensemble failed to optimize.
    #[error("optimizer failed on every realization of {0}")]
    AllFailed(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) | CliError::ConfigParse { .. } | CliError::Invalid(_) => 2,
            CliError::Runtime(_) | CliError::Io { .. } | CliError::AllFailed(_) => 1,
        }
    }

    pub fn io(context: impl Into<String>) -> impl FnOnce(std::io::Error) -> CliError {
        let context = context.into();
        move |source| CliError::Io { context, source }
    }
}

pub type CliResult<T> = std::result::Result<T, CliError>;

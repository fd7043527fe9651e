use std::path::PathBuf;

use coat_core::CoatError;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error(transparent)]
    Core(#[from] CoatError),
    #[error("{path}: {source}")]
    File {
        path: PathBuf,
        #[source]
        source: Box<CliError>,
    },
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
    #[error("{0}")]
    Format(String),
}

impl CliError {
    /// 2 for usage mistakes, 1 for everything that went wrong while running.
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) => 2,
            CliError::Core(CoatError::Usage(_) | CoatError::Config(_)) => 2,
            CliError::File { source, .. } => source.exit_code(),
            _ => 1,
        }
    }

    pub fn in_file(self, path: impl Into<PathBuf>) -> Self {
        CliError::File {
            path: path.into(),
            source: Box::new(self),
        }
    }
}

pub type Result<T, E = CliError> = std::result::Result<T, E>;

pub(crate) fn usage<T>(msg: impl Into<String>) -> Result<T> {
    Err(CliError::Usage(msg.into()))
}

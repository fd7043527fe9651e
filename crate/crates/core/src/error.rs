use thiserror::Error;

#[derive(Debug, Error)]
pub enum CoatError {
    #[error("shape error: {0}")]
    Shape(String),
    #[error("config error: {0}")]
    Config(String),
    #[error("contract violation: {0}")]
    Contract(String),
    #[error("usage error: {0}")]
    Usage(String),
    #[error("parse error at line {line}, column {column}: {message}")]
    Parse {
        line: usize,
        column: usize,
        message: String,
    },
    #[error("generation failed: {0}")]
    Generation(String),
    #[error("oracle failed: {0}")]
    Oracle(String),
    #[error("curriculum round failed: {0}")]
    Curriculum(String),
    #[error("unsupported format version {found} (expected {expected})")]
    Version { found: u32, expected: u32 },
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T, E = CoatError> = std::result::Result<T, E>;

pub(crate) fn shape_err<T>(msg: impl Into<String>) -> Result<T> {
    Err(CoatError::Shape(msg.into()))
}

pub(crate) fn parse_err<T>(line: usize, column: usize, msg: impl Into<String>) -> Result<T> {
    Err(CoatError::Parse {
        line,
        column,
        message: msg.into(),
    })
}

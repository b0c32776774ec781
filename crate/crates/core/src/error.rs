use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension error: {0}")]
    Shape(String),

    #[error("domain error: {0}")]
    Domain(String),

    #[error("precondition failed: {0}")]
    Precondition(String),

    #[error("invalid data: {0}")]
    Validation(String),

    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error("format error: expected {expected}, found {found}")]
    Format { expected: String, found: String },

    #[error("non-finite value in {0}")]
    NonFinite(String),

    #[error("configuration mismatch: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

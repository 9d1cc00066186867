use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    /// Cholesky hit a non-positive pivot.
    #[error("matrix is not positive-definite (pivot {pivot} = {value:e})")]
    NotPositiveDefinite { pivot: usize, value: f64 },

    #[error("dimension mismatch: expected {expected}, got {actual}")]
    DimensionMismatch { expected: usize, actual: usize },

    #[error("insufficient secondary data: K = {k} < N = {n}")]
    InsufficientSecondaryData { k: usize, n: usize },

    #[error("could not build a direction orthogonal to the steering vector")]
    DegenerateDirection,

    #[error("insufficient trials: {trials} < 100/pfa = {required}")]
    InsufficientTrials { trials: usize, required: usize },

    #[error("insufficient data: {0}")]
    InsufficientData(String),

    #[error("parse error at line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error("invalid {field}: {message}")]
    Validation { field: String, message: String },

    #[error("format error: {0}")]
    Format(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    pub fn validation(field: &str, message: impl Into<String>) -> Self {
        Error::Validation {
            field: field.to_owned(),
            message: message.into(),
        }
    }
}

use thiserror::Error;

#[derive(Debug, Error)]
pub enum MlError {
    #[error("empty input")]
    EmptyInput,

    #[error("expected {expected} features, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("length mismatch: {0} vs {1}")]
    LengthMismatch(usize, usize),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("{algorithm} does not support {task}")]
    UnsupportedTask { algorithm: String, task: String },

    #[error("stratification failed: {0}")]
    Stratification(String),

    #[error("model file: {0}")]
    ModelFile(String),

    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, MlError>;

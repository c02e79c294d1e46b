use thiserror::Error;

#[derive(Debug, Error)]
pub enum MtclmError {
    #[error("empty data: {0}")]
    EmptyData(String),

    #[error("label out of range: y[{index}] = {label} exceeds K = {k_max}")]
    LabelOutOfRange {
        index: usize,
        label: usize,
        k_max: usize,
    },

    #[error("non-finite predictor at row {row}, column {col}")]
    NonFinitePredictor { row: usize, col: usize },

    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("invalid parameters: {0}")]
    InvalidParams(String),

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("{0}")]
    Undefined(String),

    #[error("degenerate fold {fold}: {reason}; consider unstratified folds or fewer folds")]
    DegenerateFold { fold: usize, reason: String },

    #[error("non-finite objective at start")]
    NonFiniteStart,

    #[error("parse error at line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, MtclmError>;

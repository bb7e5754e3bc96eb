use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("degenerate labels: {0}")]
    DegenerateLabels(String),

    #[error("parse error at row {row}: {message}")]
    Parse { row: usize, message: String },

    #[error("not enough samples in `{dataset}` for class {class}: requested {requested}, available {available}")]
    Shortage {
        dataset: String,
        class: usize,
        requested: usize,
        available: usize,
    },

    #[error("requested subspace dimension {requested} exceeds the data rank; achievable dimension is {achievable}")]
    RankDeficient { requested: usize, achievable: usize },

    #[error("percentage drop is undefined for a non-positive self score ({0})")]
    UndefinedDrop(f64),

    #[error("average precision needs at least one positive label")]
    NoPositives,

    #[error("index {index} out of range for length {len}")]
    IndexOutOfRange { index: usize, len: usize },

    #[error("stratification impossible: {0}")]
    Stratification(String),

    #[error("empty input: {0}")]
    Empty(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidInput(msg.into())
    }
}

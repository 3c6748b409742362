use thiserror::Error;

/// Errors produced anywhere in the crate.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid schema: {0}")]
    InvalidSchema(String),

    #[error("code {code} out of range for variable `{variable}` (cardinality {cardinality})")]
    InvalidCode {
        variable: String,
        code: usize,
        cardinality: usize,
    },

    #[error("row has {got} values, expected {expected}")]
    RowWidth { expected: usize, got: usize },

    #[error("domain error: {0}")]
    Domain(String),

    #[error("dataset is empty")]
    EmptyDataset,

    #[error("staged tree would need {0} internal vertices, above the supported limit")]
    TreeTooLarge(usize),

    #[error("every class has zero joint probability for this instance; fit with smoothing > 0")]
    ZeroProbability,

    #[error("length mismatch: {0} predictions vs {1} labels")]
    LengthMismatch(usize, usize),

    #[error("csv: {0}")]
    Csv(String),

    #[error("invalid model document: {0}")]
    Document(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl From<csv::Error> for Error {
    fn from(e: csv::Error) -> Self {
        Error::Csv(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, Error>;

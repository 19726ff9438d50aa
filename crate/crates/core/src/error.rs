use thiserror::Error;

/// Errors produced by the ingestion, dissimilarity and clustering layers.
#[derive(Debug, Error)]
pub enum Error {
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),

    #[error("empty dataset: {0}")]
    EmptyDataset(String),

    #[error("records not sorted by timestamp (record {index})")]
    UnsortedInput { index: usize },

    #[error("{domain} value {value} out of range")]
    Domain { domain: &'static str, value: f64 },

    #[error("schema mismatch: {0}")]
    SchemaMismatch(String),

    #[error("dataset too small: need at least {needed}, got {actual}")]
    TooSmall { needed: usize, actual: usize },

    #[error("conductance is undefined for an empty or full node set")]
    UndefinedConductance,

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("invalid parameter configuration: {0}")]
    InvalidPc(String),

    #[error("invalid planted pattern: {0}")]
    InvalidPattern(String),
}

pub type Result<T> = std::result::Result<T, Error>;

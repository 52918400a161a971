use thiserror::Error;

/// Errors raised by the library.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid region: {0}")]
    InvalidRegion(String),

    #[error("site {0:?} is not in the region")]
    SiteOutsideRegion(Vec<i32>),

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("invalid disorder model: {0}")]
    InvalidModel(String),

    #[error("realization does not cover site {0:?}")]
    MissingSite(Vec<i32>),

    #[error("region W is not a subset of the sample region")]
    NotSubset,

    #[error("singular or unresolved linear system (condition estimate {condition:.3e}): {reason}")]
    Singular { condition: f64, reason: String },

    #[error("non-finite Green function value at realization {realization}")]
    NonFinite { realization: u64 },

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("region of {sites} sites exceeds the limit of {limit}")]
    TooLarge { sites: usize, limit: usize },

    #[error("not enough data: {0}")]
    InsufficientData(String),

    #[error("configuration error: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

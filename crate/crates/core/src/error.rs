use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("cannot read {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("malformed CSV: {0}")]
    Csv(#[from] csv::Error),

    #[error("target column `{0}` not found in CSV header")]
    MissingTargetColumn(String),

    #[error("row {row}, column `{column}`: cannot parse {value:?} as a number")]
    Parse {
        row: usize,
        column: String,
        value: String,
    },

    #[error("row {row}, column `{column}`: value is not finite")]
    NonFinite { row: usize, column: String },

    #[error("dataset has {rows} rows, need at least {required}")]
    TooFewRows { rows: usize, required: usize },

    #[error("invalid split: {0}")]
    InvalidSplit(String),

    #[error("column {column} has zero variance and cannot be standardized")]
    ZeroVariance { column: usize },

    #[error("invalid spline basis: {0}")]
    InvalidSpline(String),

    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("penalized normal equations are not positive definite")]
    SingularSystem,

    #[error("term for feature {0} is inactive")]
    InactiveTerm(usize),

    #[error("invalid term specification: {0}")]
    InvalidTerm(String),

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("Pareto front is empty")]
    EmptyFront,

    #[error("test partition overlaps the training partition")]
    PartitionOverlap,

    #[error("JSON error: {0}")]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}

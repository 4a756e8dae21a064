use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("{path}: line {line}: {message}")]
    Parse {
        path: PathBuf,
        line: usize,
        message: String,
    },

    #[error("non-finite value at row {row}, column {col}")]
    NonFinite { row: usize, col: usize },

    #[error("constant activation vector at row {row}")]
    ConstantRow { row: usize },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("need at least k+1 points (k = {k}, n = {n})")]
    TooFewPoints { k: usize, n: usize },

    #[error("every point was flagged as an outlier; the filtered cloud would be empty")]
    AllFlagged,

    #[error("max_dim {0} is unsupported (the cap is 2)")]
    UnsupportedDimension(usize),

    #[error(
        "estimated filtration size {estimated_bytes} bytes exceeds the memory budget of {budget_bytes} bytes"
    )]
    MemoryBudget {
        estimated_bytes: u64,
        budget_bytes: u64,
    },

    #[error("malformed filtration at simplex {vertices:?} (value {value}): {reason}")]
    MalformedFiltration {
        vertices: Vec<u32>,
        value: f64,
        reason: String,
    },

    #[error("scale convention mismatch: {left} vs {right}")]
    ScaleMismatch { left: String, right: String },

    #[error("invalid matching: {0}")]
    InvalidMatching(String),

    #[error("distance matrix contains an infinite entry between {0} and {1}; drop one of these diagrams before embedding")]
    InfiniteDistance(String, String),

    #[error("unknown {kind} '{name}' (available: {available})")]
    UnknownStrategy {
        kind: &'static str,
        name: String,
        available: String,
    },

    #[error("{0}")]
    Experiment(String),

    /// A required parameter is missing or a combination of parameters is invalid.
    #[error("{0}")]
    Usage(String),

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn parse(path: impl Into<PathBuf>, line: usize, message: impl Into<String>) -> Self {
        Error::Parse {
            path: path.into(),
            line,
            message: message.into(),
        }
    }
}

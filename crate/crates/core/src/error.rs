use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("image dimensions {width}x{height} must be even and at least 2x2")]
    OddDimensions { width: usize, height: usize },

    #[error("expected {expected} samples, got {got}")]
    SampleCount { expected: usize, got: usize },

    #[error("sample {value} at index {index} exceeds max value {max_value}")]
    SampleOutOfRange { index: usize, value: u32, max_value: u16 },

    #[error("images do not match: {0}")]
    Mismatch(String),

    #[error("drop index {value} at position {index} is not strictly ascending")]
    NotAscending { index: usize, value: usize },

    #[error("drop index {value} at position {index} is adjacent to the previous drop")]
    AdjacentRows { index: usize, value: usize },

    #[error("drop index {value} at position {index} is outside an image of height {height}")]
    OutOfRange { index: usize, value: usize, height: usize },

    #[error("drops at positions {index} and {next} collapse onto strip row {position}")]
    DegenerateStrip { index: usize, next: usize, position: usize },

    #[error("strip position {value} at index {index} would map to a negative row")]
    NegativeRow { index: usize, value: usize },

    #[error("cannot place {n_strips} strips (min gap {min_gap}) in {height} rows")]
    Infeasible { n_strips: usize, height: usize, min_gap: usize },

    #[error("invalid parameter: {0}")]
    InvalidParam(String),

    #[error("t-test needs at least 2 samples per group (got {a} and {b})")]
    TooFewSamples { a: usize, b: usize },

    #[error("t-test undefined: both samples have zero variance")]
    ZeroVariance,

    #[error("average precision undefined: no ground-truth boxes")]
    Undefined,

    #[error("{path}: malformed image: {message}")]
    Format { path: String, message: String },

    #[error("annotation record {record}: {message}")]
    Annotation { record: usize, message: String },

    #[error("cannot access {}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("csv: {0}")]
    Csv(#[from] csv::Error),

    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
}

impl Error {
    /// True for failures of the filesystem rather than of the data.
    pub fn is_io(&self) -> bool {
        matches!(self, Error::Io { .. })
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io { path: path.into(), source }
    }
}

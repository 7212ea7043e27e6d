use std::path::PathBuf;

/// Errors produced by the library.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("empty input")]
    Empty,

    #[error("non-finite value {value} at index {index}")]
    NonFinite { index: usize, value: f64 },

    #[error("negative entry {value} at index {index}")]
    NegativeEntry { index: usize, value: f64 },

    #[error("entries sum to {sum}, outside tolerance {tol:e}")]
    SumOutOfTolerance { sum: f64, tol: f64 },

    #[error("row {row}: {source}")]
    InvalidRow {
        row: usize,
        #[source]
        source: Box<Error>,
    },

    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),

    #[error("Rényi order must be positive and different from 1, got {0}")]
    InvalidOrder(f64),

    #[error("empty batch")]
    EmptyBatch,

    #[error("support weight of class {0} is zero")]
    ZeroWeight(usize),

    #[error("all support weights are zero")]
    AllWeightsZero,

    #[error("M-step did not converge in {iterations} iterations (|f(x)| = {residual:e})")]
    MaxIterationsExceeded { iterations: usize, residual: f64 },

    #[error("gradient undefined at the simplex boundary: mean label of class {class} is zero")]
    BoundaryPoint { class: usize },

    #[error("class index {index} out of range for K = {k}")]
    IndexOutOfRange { index: usize, k: usize },

    #[error("row {row} of the transition matrix is not a distribution: {source}")]
    NotADistribution {
        row: usize,
        #[source]
        source: Box<Error>,
    },

    #[error("confusion matrix is not square ({rows}x{cols})")]
    NonSquare { rows: usize, cols: usize },

    #[error("length mismatch: {left} vs {right}")]
    LengthMismatch { left: usize, right: usize },

    #[error("invalid parameter: {0}")]
    InvalidParams(String),

    #[error("{path}: parse error at row {row}, column {col}: {msg}")]
    Parse {
        path: PathBuf,
        row: usize,
        col: usize,
        msg: String,
    },

    #[error("{path}: row {row} has {found} fields, expected {expected}")]
    RaggedRows {
        path: PathBuf,
        row: usize,
        expected: usize,
        found: usize,
    },

    #[error("invalid checkpoint: {0}")]
    Checkpoint(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

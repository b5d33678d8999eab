use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid perturbation: {0}")]
    InvalidPerturbation(String),

    #[error("argument {value} lies in the excluded interval [{lower}, {upper}]")]
    Domain { value: f64, lower: f64, upper: f64 },

    #[error("value {value} is outside the attained range ({lower}, {upper})")]
    OutOfRange { value: f64, lower: f64, upper: f64 },

    #[error("invalid spectral model: {0}")]
    Model(String),

    #[error("index {index} out of range 1..={len}")]
    Index { index: usize, len: usize },

    #[error("size mismatch: {0}")]
    Size(String),

    #[error("matrix is not symmetric (max asymmetry {asymmetry:e})")]
    Symmetry { asymmetry: f64 },

    #[error("theta = {theta} does not satisfy the separation condition (threshold {threshold})")]
    NotSeparated { theta: f64, threshold: f64 },

    #[error("thetas {offenders:?} do not satisfy the separation condition")]
    NotSeparatedMany { offenders: Vec<f64> },

    #[error("no root of the counting function found for rank {rank}")]
    MissingRoot { rank: usize },

    #[error("eigensolver did not converge")]
    Eigensolve,

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("precondition violated: {0}")]
    Precondition(String),

    #[error("{failed} of {total} trials failed")]
    TooManyFailures { failed: usize, total: usize },

    #[error("I/O error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("JSON error: {0}")]
    Json(#[from] serde_json::Error),

    #[error("CSV error: {0}")]
    Csv(#[from] csv::Error),
}

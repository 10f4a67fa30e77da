use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid grid: {0}")]
    InvalidGrid(String),

    #[error("grid mismatch: expected {expected} interior points, got {found}")]
    GridMismatch { expected: usize, found: usize },

    #[error("non-finite value in field at index {index}")]
    NonFinite { index: usize },

    #[error("unsupported derivative order {0} (only 1 and 2)")]
    DerivativeOrder(u32),

    #[error("invalid field configuration: {0}")]
    InvalidField(String),

    #[error("eigensolver failed to converge for eigenvalue {index} after {iterations} sweeps")]
    EigenNoConvergence { index: usize, iterations: usize },

    #[error("requested {requested} eigenpairs but the grid has only {available} points")]
    BasisTooLarge { requested: usize, available: usize },

    #[error("fixed-point iteration did not converge in {iterations} iterations (last change {last_change:e})")]
    FixedPointDiverged { iterations: usize, last_change: f64 },

    #[error("invalid stepper configuration: {0}")]
    InvalidStepper(String),

    #[error("need at least {needed} samples, got {found}")]
    InsufficientSamples { needed: usize, found: usize },

    #[error("initial state not representable in the basis: truncation residual {residual:e}")]
    BasisTruncation { residual: f64 },

    #[error("superposition is not normalized: sum |C_n|^2 = {sum} (deficit {deficit:e})")]
    NotNormalized { sum: f64, deficit: f64 },

    #[error("config error: {0}")]
    Config(String),

    #[error("output path collision: {0}")]
    PathCollision(PathBuf),

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("{path}: {source}")]
    Json {
        path: PathBuf,
        #[source]
        source: serde_json::Error,
    },
}

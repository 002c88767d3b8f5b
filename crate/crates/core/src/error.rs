use thiserror::Error;

/// Errors produced by the estimation library.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("insufficient samples for lag order: t = {samples}, p = {lags}")]
    InsufficientSamples { samples: usize, lags: usize },
    #[error("domain requires non-negative weights (entry ({row}, {col}) = {value})")]
    NegativeWeight { row: usize, col: usize, value: f64 },
    #[error("spectral radius not below s = {s}")]
    OutOfDomain { s: f64 },
    #[error("infeasible warm start: {0}")]
    InfeasibleStart(String),
    #[error("shape mismatch: {0}")]
    Shape(String),
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("unstable process specification after {attempts} attempts (companion spectral radius {radius:.4})")]
    Unstable { attempts: usize, radius: f64 },
    #[error("NFE undefined for zero reference")]
    ZeroReference,
    #[error("average degree {degree} too large for {nodes} nodes")]
    DegreeTooLarge { degree: f64, nodes: usize },
    #[error("empty list")]
    Empty,
    #[error("invalid weights: {0}")]
    InvalidWeights(String),
}

pub type Result<T> = std::result::Result<T, Error>;

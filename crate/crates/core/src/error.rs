use thiserror::Error;

pub type Result<T, E = Error> = core::result::Result<T, E>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("invalid model: {0}")]
    InvalidModel(&'static str),
    #[error("invalid configuration: {0}")]
    InvalidConfig(&'static str),
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("node {node} out of range for a graph with {n} nodes")]
    NodeOutOfRange { node: usize, n: usize },
    #[error("model has {slots} edge slots, enumeration is capped at {cap}")]
    TooLargeToEnumerate { slots: usize, cap: usize },
    #[error("matrix is numerically singular")]
    Singular,
    #[error("matrix norm {norm} is not below the convergence radius {radius}")]
    OutsideRadius { norm: f64, radius: f64 },
    #[error("invalid norm: {0}")]
    InvalidNorm(&'static str),
    #[error("conditioning event has zero probability")]
    UndefinedConditional,
    #[error("invalid argument: {0}")]
    InvalidArgument(&'static str),
}

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("matrix is not positive definite (pivot {index} = {pivot:e})")]
    NotPositiveDefinite { index: usize, pivot: f64 },

    #[error("matrix is not Hermitian (max defect {defect:e})")]
    NotHermitian { defect: f64 },

    #[error("dimension mismatch in {op}: expected {expected:?}, found {found:?}")]
    DimensionMismatch {
        op: &'static str,
        expected: (usize, usize),
        found: (usize, usize),
    },

    #[error("non-finite value in {0}")]
    NonFinite(&'static str),

    #[error("target index {index} out of range for {count} targets")]
    IndexOutOfRange { index: usize, count: usize },

    #[error("invalid scenario: {0}")]
    InvalidScenario(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("Fisher information matrix is singular")]
    SingularFisher,

    #[error("all {samples} prior draws were rejected")]
    AllDrawsRejected { samples: usize },

    #[error("CRB summary is not valid (ill-conditioned Fisher information)")]
    InvalidCrb,

    #[error("quadrature did not converge after {points} points (last relative change {last_change:e})")]
    QuadratureNotConverged { points: usize, last_change: f64 },

    #[error("grid step {step:e} rad exceeds one tenth of the prior support ({limit:e} rad)")]
    GridTooCoarse { step: f64, limit: f64 },
}

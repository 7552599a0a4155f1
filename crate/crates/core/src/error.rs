use thiserror::Error;

/// Errors raised by the estimation routines.
///
/// Numeric payloads are reported as `f64` regardless of the scalar type used.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("sample must contain at least two distinct values")]
    FewerThanTwoDistinctPoints,
    #[error("log-concave fit did not converge within {max_iterations} active-set iterations")]
    NonConvergence { max_iterations: usize },
    #[error("bandwidth is not positive: s^2 - sigma^2 = {squared:e}")]
    NonPositiveBandwidth { squared: f64 },
    #[error("quantile level {0} is outside (0, 1)")]
    QuantileOutOfRange(f64),
    #[error("estimated Fisher information {0:e} is numerically zero")]
    DegenerateInformation(f64),
    #[error("no {sample}-observation falls inside the truncation window")]
    EmptyTruncationWindow { sample: &'static str },
    #[error("likelihood maximization did not converge within {evaluations} evaluations")]
    OptimizerFailure { evaluations: usize },
    #[error("invalid sample: {0}")]
    InvalidSample(String),
    #[error("invalid density: {0}")]
    InvalidDensity(String),
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

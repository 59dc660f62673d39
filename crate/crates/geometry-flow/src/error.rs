use thiserror::Error;

#[derive(Debug, Clone, Error, PartialEq)]
pub enum FlowError {
    #[error("invalid domain: {0}")]
    InvalidDomain(String),
    #[error("trajectory left the chart at t = {t} (point {point:?})")]
    DomainExit { t: f64, point: Vec<f64> },
    #[error("step size underflow at t = {t} (h = {h:e})")]
    StepFailure { t: f64, h: f64 },
    #[error("jacobian unavailable at {point:?}: non-finite difference quotient")]
    JacobianUnavailable { point: Vec<f64> },
    #[error("tolerance must be positive and finite, got {0}")]
    InvalidTolerance(f64),
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
}

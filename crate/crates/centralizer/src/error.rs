use geometry_flow::FlowError;
use poincare::PoincareError;
use thiserror::Error;

#[derive(Debug, Clone, Error, PartialEq)]
pub enum CentralizerError {
    #[error("field vanishes at {point:?}")]
    SingularPoint { point: Vec<f64> },
    #[error("scalar field is not invariant: residual {residual:e} exceeds {threshold:e}")]
    InvarianceViolated { residual: f64, threshold: f64 },
    #[error("rotation number {theta} is rational (continued fraction terminates)")]
    RationalRotation { theta: f64 },
    #[error("series interrupted at index {index}: {source}")]
    SeriesInterrupted { index: usize, source: PoincareError },
    #[error("invalid input: {0}")]
    InvalidInput(String),
    #[error(transparent)]
    Poincare(#[from] PoincareError),
    #[error(transparent)]
    Flow(#[from] FlowError),
}

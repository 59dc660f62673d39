use geometry_flow::FlowError;
use poincare::PoincareError;
use thiserror::Error;

#[derive(Debug, Clone, Error, PartialEq)]
pub enum PerturbError {
    #[error("budget infeasible: {0}")]
    InfeasibleBudget(String),
    #[error("flow map not injective on the tube: {0}")]
    InjectivityFailure(String),
    #[error("C1 distance {attained:e} exceeds the budget {budget:e}")]
    EpsilonExceeded { attained: f64, budget: f64 },
    #[error("hypothesis not verified: {0}")]
    HypothesisUnverified(String),
    #[error("invalid input: {0}")]
    InvalidInput(String),
    #[error(transparent)]
    Poincare(#[from] PoincareError),
    #[error(transparent)]
    Flow(#[from] FlowError),
}

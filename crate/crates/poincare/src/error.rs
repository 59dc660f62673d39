use geometry_flow::FlowError;
use thiserror::Error;

#[derive(Debug, Clone, Error, PartialEq)]
pub enum PoincareError {
    #[error("field vanishes (below zero tolerance) at {point:?}")]
    SingularPoint { point: Vec<f64> },
    #[error("no crossing of the target section within horizon {horizon}")]
    NoHit { horizon: f64 },
    #[error("crossing at t = {time} too shallow: |<X,u>|/|X| = {ratio:e}")]
    Tangency { time: f64, ratio: f64 },
    #[error("lifted map jacobian condition number {cond:e} exceeds 1e8")]
    IllConditioned { cond: f64 },
    #[error("calibration failed: {0}")]
    CalibrationFailed(String),
    #[error("point is {distance:e} off the section hyperplane or outside its disk")]
    OffSection { distance: f64 },
    #[error("section radius {0} must lie in (0, R]")]
    InvalidRadius(f64),
    #[error(transparent)]
    Flow(#[from] FlowError),
}

//! Flat-chart geometry and flow integration.
//!
//! Domains are tori, boxes and planar annuli with the affine exponential map
//! `exp_p(v) = p + v`. Vector fields carry an analytic or central-difference
//! Jacobian; the integrator is an adaptive Dormand–Prince pair whose state can be
//! augmented with the tangent flow `DX_t`.

mod bracket;
mod domain;
mod error;
mod field;
mod integrate;

pub use bracket::lie_bracket;
pub use domain::{lattice, ChartKind, DomainChart};
pub use error::FlowError;
pub use field::{
    central_gradient, classify, EvalFn, JacobianFn, Singularity, SingularityKind, VectorField, FD_REL, ZERO_REL,
};
pub use integrate::{
    augment, flow, flow_unwrapped, flow_with_tangent, orbit, variational, DenseStep, Integrator, IntegratorOptions,
    OrbitSegment, Outcome, StepControl, StepRecord, StepStats,
};

pub type Vector = nalgebra::DVector<f64>;
pub type Matrix = nalgebra::DMatrix<f64>;

/// Spectral norm (largest singular value).
pub fn spectral_norm(m: &Matrix) -> f64 {
    if m.is_empty() {
        return 0.0;
    }
    m.clone().svd(false, false).singular_values.max()
}

/// Smallest singular value.
pub fn min_singular(m: &Matrix) -> f64 {
    if m.is_empty() {
        return 0.0;
    }
    m.clone().svd(false, false).singular_values.min()
}

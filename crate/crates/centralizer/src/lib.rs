//! Centralizer diagnostics for flows: commutation and collinearity residuals,
//! normal distortion of the linear Poincaré flow, separation and kinematic probes,
//! gradient decay near saddles and Birkhoff deviations of circle rotations.

mod birkhoff;
mod commute;
mod decay;
mod distortion;
mod error;
mod sampler;
mod separating;

pub use birkhoff::{birkhoff_deviation, convergent_denominators, BirkhoffReport, DEFAULT_GRID};
pub use commute::{
    collinearity_defect, commutation_residual, invariance_residual, recover_f, CommutationReport, SampleFailure,
};
pub use decay::{gradient_decay_probe, DecayReport, INVARIANCE_THRESHOLD};
pub use distortion::*;
pub use error::CentralizerError;
pub use sampler::{PairSampler, Region};
pub use separating::{
    kinematic_probe, same_orbit, separating_probe, trapping_balls, verify_trapping_ball, KinematicCase,
    KinematicReport, KinematicRow, SeparatingReport, SeparationWitness, TrappingBall,
};

mod bump;
mod bundle;
mod cocycle;
mod error;
mod pipeline;
mod realize;
mod tube;

pub use bump::{BumpProfile, RadialBump};
pub use bundle::{lift_perturbation, BundleCheck, LiftDistance, LiftedPerturbation, PerturbationBundle};
pub use cocycle::{
    cocycle_perturbation, verify_cocycle, Ball, CocycleCheck, CocycleOptions, CocyclePerturbation, FiberMap,
};
pub use error::PerturbError;
pub use pipeline::{
    distort_pair, Certified, DistortReport, DistortSpec, Hypotheses, PairRow, PipelineOptions, StepControl,
};
pub use realize::{perturbed_field, realize, Realization, RealizationReport, RealizeOptions, StepFidelity};
pub use tube::{BaseOrbit, InjectivityReport, TubeChart, TubeRegion};

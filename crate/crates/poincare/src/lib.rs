//! Normal frames, the linear Poincaré flow, transverse sections with their
//! Poincaré maps and hitting times, linearizing charts, and the boundedness
//! certificate with its `(α, β)` calibration.

mod certificate;
mod error;
mod frame;
mod linearize;
mod lpf;
mod section;

pub use certificate::{
    boundedness_certificate, calibrate, hitting_time_bounds_check, BoundednessCertificate, Calibration,
    CertificateOptions, ConditionMaxima, HitRow, HittingReport,
};
pub use error::PoincareError;
pub use frame::{normal_frame, NormalFrame};
pub use linearize::{linearizing_coordinates, LinearizingChart, PsiBounds};
pub use lpf::{linear_poincare, logabsdet, lpf_sweep_csv, LinearPoincareOp};
pub use section::{disk_points, Hit, MapOptions, PoincareMap, SectionDisk};

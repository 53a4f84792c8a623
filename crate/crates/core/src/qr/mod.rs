//! Quasiregularity diagnostics: dilatation profiles, Lipschitz constants,
//! Pansu differentials, Jacobians, multiplicity, area formula and branch scans.

mod jacobian;
mod morphism;
mod newton;
mod profile;
mod region;
mod scan;

use thiserror::Error;

pub use jacobian::{jacobian_volume_ratio, JacobianEstimate, JacobianOptions};
pub use morphism::{morphism_jacobian, morphism_norms, pansu_differential, GradedMorphism, PansuFit, PansuOptions};
pub use newton::{multiplicity_count, multiplicity_with_starts, solve_preimage, MultiplicityResult, NewtonOptions};
pub use profile::{dilatation_profile, lip_profile, tail, DilatationProfile, LipProfile, ProfileOptions};
pub use region::Region;
pub use scan::{area_formula_check, local_injectivity_scan, AreaCheck, AreaOptions, BranchScan, FlagReason, FlaggedPoint, ScanOptions};

/// Maps are analysed through their catalogue descriptors.
pub type SmoothMapModel = crate::maps::MapDescriptor;

#[derive(Debug, Error)]
pub enum QrError {
    #[error("dimension mismatch: {0}")]
    Dimension(String),
    #[error("unsupported: {0}")]
    Unsupported(String),
    #[error("invalid options: {0}")]
    Options(String),
    #[error("morphism: {0}")]
    Morphism(String),
    #[error(transparent)]
    Metric(#[from] crate::metric::MetricError),
    #[error(transparent)]
    Map(#[from] crate::maps::MapError),
}

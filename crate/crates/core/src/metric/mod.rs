//! Carnot-Carathéodory distances, sphere samples and ball volumes.

mod heisenberg;
mod solver;
mod sphere;
mod volume;

use thiserror::Error;

pub use heisenberg::{heisenberg_distance, heisenberg_norm};
pub use solver::{cc_distance, DistanceOptions, DistanceResult};
pub use sphere::{cc_sphere_sample, sphere_point, SphereOptions, SphereSample};
pub use volume::{ball_box_report, ball_volume, BallBoxReport, VolumeEstimate};

#[derive(Debug, Error)]
pub enum MetricError {
    #[error("dimension mismatch: {0}")]
    Dimension(String),
    #[error("invalid options: {0}")]
    Options(String),
    #[error("radius must be positive, got {0}")]
    NonPositiveRadius(f64),
    #[error("no Monte Carlo sample fell inside the ball of radius {radius}")]
    DegenerateSampling { radius: f64 },
    #[error("sphere sampling produced no points at radius {0}")]
    EmptySphere(f64),
    #[error(transparent)]
    Frame(#[from] crate::frame::FrameError),
    #[error("csv output: {0}")]
    Csv(#[from] csv::Error),
}

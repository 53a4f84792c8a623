//! Discrete p-modulus of finite curve families over grid densities, and the
//! `K_O` inequality check for maps.
//!
//! Curves are polylines in a coordinate chart and `ds` is the chart's
//! Euclidean arc length. For horizontal straight segments (the families used
//! on Carnot groups) this agrees with the CC length.

mod family;
mod grid;
mod ko;
mod solve;

use thiserror::Error;

pub use family::{CurveFamily, DEFAULT_LENGTH_FLOOR};
pub use grid::DensityGrid;
pub use ko::{ko_check, KoOptions, KoReport};
pub use solve::{modulus_exhaustive, modulus_p, ModulusOptions, ModulusResult};

#[derive(Debug, Error)]
pub enum ModulusError {
    #[error("curve family is empty after removing curves shorter than {floor}")]
    EmptyFamily { floor: f64 },
    #[error("invalid curve family: {0}")]
    InvalidFamily(String),
    #[error("invalid grid: {0}")]
    InvalidGrid(String),
    #[error("exponent p must be at least 1 (got {0})")]
    Exponent(f64),
    #[error("density is not admissible for {} image curves (worst integral {worst})", violators.len())]
    NotAdmissible { violators: Vec<usize>, worst: f64 },
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Qr(#[from] crate::qr::QrError),
}

//! Numerical laboratory for equiregular sub-Riemannian geometry.
//!
//! * [`algebra`]: Carnot algebras, BCH group law, dilations, homogeneous norms.
//! * [`poly`] and [`frame`]: polynomial horizontal frames, brackets, growth
//!   vectors, flows, privileged coordinates and nilpotent approximation.
//! * [`space`] and [`metric`]: Carnot-Carathéodory distances (closed form on
//!   the Heisenberg group, optimal-control transcription in general), sphere
//!   sampling and Monte Carlo ball volumes.
//! * [`modulus`]: p-modulus of discretized curve families and the K_O check.
//! * [`qr`]: dilatation profiles, Lipschitz constants, Pansu differentials,
//!   Jacobians, multiplicity, area formula and branch-set scans.
//! * [`maps`]: the catalogue of example maps.

pub mod algebra;
pub mod frame;
pub mod maps;
pub mod metric;
pub mod modulus;
pub mod ode;
pub mod poly;
pub mod qr;
pub mod space;
pub mod util;

pub use algebra::{CarnotAlgebra, GroupElement, HomogeneousNorm, NormKind};
pub use frame::{HorizontalFrame, GrowthData};
pub use poly::{Poly, PolyVectorField};
pub use space::SrSpace;

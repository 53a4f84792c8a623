//! Metric spaces the analyses run on.
//!
//! An [`SrSpace`] bundles a distance with the chart data sphere sampling and
//! blow-ups need: weights, privileged coordinates around a point and
//! horizontal rays.

use std::collections::HashMap;
use std::sync::{Arc, Mutex};

use crate::algebra::{dilate_coords, CarnotAlgebra};
use crate::frame::{Controls, FrameError, HorizontalFrame, PrivilegedFrame};
use crate::metric::{cc_distance, heisenberg_distance, DistanceOptions};

pub trait SrSpace: Send + Sync {
    fn name(&self) -> String;
    fn dim(&self) -> usize;
    /// Number of horizontal directions.
    fn rank(&self) -> usize;
    /// Weights of privileged coordinates, nondecreasing.
    fn weights(&self) -> &[u32];
    fn distance(&self, p: &[f64], q: &[f64]) -> f64;
    /// Point whose privileged coordinates centered at `p` are `z`.
    fn from_privileged(&self, p: &[f64], z: &[f64]) -> Vec<f64>;
    /// Privileged coordinates of `x` centered at `p`.
    fn to_privileged(&self, p: &[f64], x: &[f64]) -> Vec<f64>;
    /// End of the horizontal curve from `p` driven by the constant control `u` for time `s`.
    fn horizontal_ray(&self, p: &[f64], u: &[f64], s: f64) -> Vec<f64>;
    /// Relative accuracy of [`SrSpace::distance`].
    fn relative_noise(&self) -> f64 {
        1e-12
    }
    /// Group structure when the chart is a Carnot group in exponential coordinates.
    fn group(&self) -> Option<&CarnotAlgebra> {
        None
    }

    fn homogeneous_dimension(&self) -> usize {
        self.weights().iter().map(|&w| w as usize).sum()
    }
}

/// R^n with the Euclidean metric, viewed as the abelian Carnot group.
#[derive(Clone, Debug)]
pub struct EuclideanSpace {
    weights: Vec<u32>,
    algebra: CarnotAlgebra,
}

impl EuclideanSpace {
    pub fn new(n: usize) -> Self {
        Self {
            weights: vec![1; n],
            algebra: CarnotAlgebra::abelian(n),
        }
    }
}

impl SrSpace for EuclideanSpace {
    fn name(&self) -> String {
        format!("euclidean({})", self.weights.len())
    }
    fn dim(&self) -> usize {
        self.weights.len()
    }
    fn rank(&self) -> usize {
        self.weights.len()
    }
    fn weights(&self) -> &[u32] {
        &self.weights
    }
    fn distance(&self, p: &[f64], q: &[f64]) -> f64 {
        crate::util::euclidean_distance(p, q)
    }
    fn from_privileged(&self, p: &[f64], z: &[f64]) -> Vec<f64> {
        p.iter().zip(z).map(|(a, b)| a + b).collect()
    }
    fn to_privileged(&self, p: &[f64], x: &[f64]) -> Vec<f64> {
        x.iter().zip(p).map(|(a, b)| a - b).collect()
    }
    fn horizontal_ray(&self, p: &[f64], u: &[f64], s: f64) -> Vec<f64> {
        p.iter().zip(u).map(|(a, b)| a + s * b).collect()
    }
    fn group(&self) -> Option<&CarnotAlgebra> {
        Some(&self.algebra)
    }
}

/// How a [`CarnotSpace`] evaluates distances.
#[derive(Clone, Debug, PartialEq)]
pub enum DistanceMethod {
    /// Closed form; only for the first Heisenberg group.
    HeisenbergExact,
    Solver(DistanceOptions),
}

/// A Carnot group in exponential coordinates with its left-invariant frame.
#[derive(Clone, Debug)]
pub struct CarnotSpace {
    name: String,
    algebra: CarnotAlgebra,
    frame: HorizontalFrame,
    method: DistanceMethod,
}

impl CarnotSpace {
    /// Heisenberg group with the closed-form distance.
    pub fn heisenberg() -> Self {
        Self {
            name: "heisenberg1".into(),
            algebra: CarnotAlgebra::heisenberg(),
            frame: HorizontalFrame::heisenberg(),
            method: DistanceMethod::HeisenbergExact,
        }
    }

    /// Any Carnot group, distances by the control solver.
    pub fn with_solver(name: &str, algebra: CarnotAlgebra, opts: DistanceOptions) -> Self {
        let frame = HorizontalFrame::left_invariant(&algebra);
        Self {
            name: name.into(),
            algebra,
            frame,
            method: DistanceMethod::Solver(opts),
        }
    }

    pub fn algebra(&self) -> &CarnotAlgebra {
        &self.algebra
    }

    pub fn frame(&self) -> &HorizontalFrame {
        &self.frame
    }

    pub fn method(&self) -> &DistanceMethod {
        &self.method
    }
}

impl SrSpace for CarnotSpace {
    fn name(&self) -> String {
        self.name.clone()
    }
    fn dim(&self) -> usize {
        self.algebra.dim()
    }
    fn rank(&self) -> usize {
        self.algebra.rank()
    }
    fn weights(&self) -> &[u32] {
        self.algebra.weights()
    }
    fn distance(&self, p: &[f64], q: &[f64]) -> f64 {
        match &self.method {
            DistanceMethod::HeisenbergExact => heisenberg_distance(p, q),
            DistanceMethod::Solver(opts) => {
                // Left invariance: solve from the identity.
                let pinv: Vec<f64> = p.iter().map(|v| -v).collect();
                let target = self.algebra.mul(&pinv, q);
                cc_distance(&self.frame, &vec![0.0; p.len()], &target, opts)
                    .map(|r| r.value)
                    .unwrap_or(f64::NAN)
            }
        }
    }
    fn from_privileged(&self, p: &[f64], z: &[f64]) -> Vec<f64> {
        self.algebra.mul(p, z)
    }
    fn to_privileged(&self, p: &[f64], x: &[f64]) -> Vec<f64> {
        let pinv: Vec<f64> = p.iter().map(|v| -v).collect();
        self.algebra.mul(&pinv, x)
    }
    fn horizontal_ray(&self, p: &[f64], u: &[f64], s: f64) -> Vec<f64> {
        let mut v = vec![0.0; self.dim()];
        for (i, ui) in u.iter().enumerate() {
            v[i] = s * ui;
        }
        self.algebra.mul(p, &v)
    }
    fn relative_noise(&self) -> f64 {
        match self.method {
            DistanceMethod::HeisenbergExact => 1e-12,
            DistanceMethod::Solver(_) => 1e-3,
        }
    }
    fn group(&self) -> Option<&CarnotAlgebra> {
        Some(&self.algebra)
    }
}

/// A general polynomial frame; distances by the control solver, privileged
/// coordinates built (and cached) per center.
pub struct FrameSpace {
    name: String,
    frame: HorizontalFrame,
    weights: Vec<u32>,
    opts: DistanceOptions,
    charts: Mutex<HashMap<Vec<u64>, Arc<PrivilegedFrame>>>,
}

impl FrameSpace {
    /// Weights are taken at `reference`; the frame is assumed equiregular near it.
    pub fn new(name: &str, frame: HorizontalFrame, reference: &[f64], opts: DistanceOptions) -> Result<Self, FrameError> {
        let weights = frame.growth_vector_at(reference)?.weights;
        Ok(Self {
            name: name.into(),
            frame,
            weights,
            opts,
            charts: Mutex::new(HashMap::new()),
        })
    }

    pub fn frame(&self) -> &HorizontalFrame {
        &self.frame
    }

    pub fn privileged_frame(&self, p: &[f64]) -> Result<Arc<PrivilegedFrame>, FrameError> {
        let key: Vec<u64> = p.iter().map(|v| v.to_bits()).collect();
        if let Some(c) = self.charts.lock().unwrap().get(&key) {
            return Ok(c.clone());
        }
        let pf = Arc::new(PrivilegedFrame::at(&self.frame, p)?);
        self.charts.lock().unwrap().insert(key, pf.clone());
        Ok(pf)
    }
}

impl SrSpace for FrameSpace {
    fn name(&self) -> String {
        self.name.clone()
    }
    fn dim(&self) -> usize {
        self.frame.dim()
    }
    fn rank(&self) -> usize {
        self.frame.rank()
    }
    fn weights(&self) -> &[u32] {
        &self.weights
    }
    fn distance(&self, p: &[f64], q: &[f64]) -> f64 {
        cc_distance(&self.frame, p, q, &self.opts)
            .map(|r| r.value)
            .unwrap_or(f64::NAN)
    }
    fn from_privileged(&self, p: &[f64], z: &[f64]) -> Vec<f64> {
        match self.privileged_frame(p) {
            Ok(pf) => pf.chart.from_privileged(z),
            Err(_) => vec![f64::NAN; p.len()],
        }
    }
    fn to_privileged(&self, p: &[f64], x: &[f64]) -> Vec<f64> {
        match self.privileged_frame(p) {
            Ok(pf) => pf.chart.to_privileged(x),
            Err(_) => vec![f64::NAN; p.len()],
        }
    }
    fn horizontal_ray(&self, p: &[f64], u: &[f64], s: f64) -> Vec<f64> {
        self.frame
            .flow(&Controls::Constant(u.to_vec()), p, s)
            .unwrap_or_else(|e| match e {
                FrameError::Integration(ode) => ode.last_state().to_vec(),
                _ => vec![f64::NAN; p.len()],
            })
    }
    fn relative_noise(&self) -> f64 {
        1e-3
    }
}

/// `δ_λ` in privileged coordinates around `p`.
pub fn dilate_around(space: &dyn SrSpace, p: &[f64], lambda: f64, x: &[f64]) -> Vec<f64> {
    let z = space.to_privileged(p, x);
    space.from_privileged(p, &dilate_coords(space.weights(), lambda, &z))
}

/// Resolves a space name: `heisenberg1`, `euclidean(n)`, `carnot(<algebra>)`
/// (solver distances), or any frame accepted by [`HorizontalFrame::resolve`].
pub fn resolve_space(spec: &str, opts: &DistanceOptions) -> Result<Arc<dyn SrSpace>, FrameError> {
    let (head, arg) = crate::util::split_call(spec).unwrap_or((spec, None));
    match (head, arg) {
        ("heisenberg1", None) | ("h1", None) => Ok(Arc::new(CarnotSpace::heisenberg())),
        ("euclidean", Some(a)) => {
            let n: usize = a
                .trim()
                .parse()
                .map_err(|_| FrameError::Definition(format!("bad dimension in {spec:?}")))?;
            Ok(Arc::new(EuclideanSpace::new(n)))
        }
        ("carnot", Some(a)) => Ok(Arc::new(CarnotSpace::with_solver(
            spec,
            CarnotAlgebra::builtin(a)?,
            opts.clone(),
        ))),
        _ => {
            let frame = HorizontalFrame::resolve(spec)?;
            let origin = vec![0.0; frame.dim()];
            Ok(Arc::new(FrameSpace::new(spec, frame, &origin, opts.clone())?))
        }
    }
}

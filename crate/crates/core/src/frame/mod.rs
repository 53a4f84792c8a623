//! Horizontal frames of polynomial vector fields on a single chart.

mod file;
mod privileged;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::algebra::{AlgebraError, CarnotAlgebra};
use crate::ode::{self, OdeError, OdeOptions};
use crate::poly::{lie_bracket, CompiledField, Poly, PolyVectorField};

pub use file::{FrameFile, FrameFieldSpec};
pub use privileged::{
    blowup_frame, nilpotent_approximation, NilpotentApproximation, PrivilegedChart, PrivilegedFrame,
};

/// Default cap on the bracket length explored by [`HorizontalFrame::growth_vector_at`].
pub const DEFAULT_BRACKET_CAP: usize = 6;
/// Relative singular-value threshold for numerical ranks.
pub const RANK_TOL: f64 = 1e-9;

#[derive(Debug, Error)]
pub enum FrameError {
    #[error("dimension mismatch: {0}")]
    Dimension(String),
    #[error("frame is not bracket generating within {cap} levels at {point:?} (ranks {ranks:?})")]
    NonGenerating {
        point: Vec<f64>,
        ranks: Vec<usize>,
        cap: usize,
    },
    #[error("flow integration failed: {0}")]
    Integration(#[from] OdeError),
    #[error("invalid frame definition: {0}")]
    Definition(String),
    #[error("scale must be positive, got {0}")]
    NonPositiveScale(f64),
    #[error("privileged coordinates: {0}")]
    Chart(String),
    #[error(transparent)]
    Algebra(#[from] AlgebraError),
}

/// Flag data of a frame at a point.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GrowthData {
    pub point: Vec<f64>,
    /// r_k = dim H^(k) at the point.
    pub ranks: Vec<usize>,
    /// n_k = r_k − r_{k−1}.
    pub growth: Vec<usize>,
    pub weights: Vec<u32>,
    pub step: usize,
    #[serde(rename = "Q")]
    pub q: usize,
}

/// Iterated brackets evaluated at one point, with an adapted basis.
#[derive(Clone, Debug)]
pub(crate) struct BracketFlag {
    pub growth: GrowthData,
    /// Adapted fields `Z_1..Z_n` (brackets of the frame), ordered by weight.
    pub adapted: Vec<PolyVectorField>,
}

/// `r` polynomial vector fields declared orthonormal for the sub-Riemannian metric.
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(from = "FrameRepr", into = "FrameRepr")]
pub struct HorizontalFrame {
    n: usize,
    fields: Vec<PolyVectorField>,
    compiled: CompiledField,
}

#[derive(Clone, Serialize, Deserialize)]
struct FrameRepr {
    n: usize,
    fields: Vec<PolyVectorField>,
}

impl From<FrameRepr> for HorizontalFrame {
    fn from(r: FrameRepr) -> Self {
        HorizontalFrame::new(r.fields).expect("serialized frame is consistent")
    }
}

impl From<HorizontalFrame> for FrameRepr {
    fn from(f: HorizontalFrame) -> Self {
        FrameRepr {
            n: f.n,
            fields: f.fields,
        }
    }
}

impl PartialEq for HorizontalFrame {
    fn eq(&self, other: &Self) -> bool {
        self.n == other.n && self.fields == other.fields
    }
}

/// Controls driving `γ' = Σ_j u_j(t) X_j(γ)`.
#[derive(Clone, Debug, PartialEq)]
pub enum Controls {
    Constant(Vec<f64>),
    /// Consecutive `(duration, control)` pieces.
    Piecewise(Vec<(f64, Vec<f64>)>),
}

impl HorizontalFrame {
    pub fn new(fields: Vec<PolyVectorField>) -> Result<Self, FrameError> {
        let n = fields
            .first()
            .map(|f| f.dim())
            .ok_or_else(|| FrameError::Definition("frame needs at least one field".into()))?;
        if fields.iter().any(|f| f.dim() != n) {
            return Err(FrameError::Dimension("fields live on different charts".into()));
        }
        let compiled = CompiledField::new(&fields);
        Ok(Self { n, fields, compiled })
    }

    /// `X = ∂x − (y/2)∂t`, `Y = ∂y + (x/2)∂t`.
    pub fn heisenberg() -> Self {
        let n = 3;
        Self::new(vec![
            PolyVectorField::new(vec![Poly::constant(n, 1.0), Poly::zero(n), Poly::var(n, 1).scale(-0.5)]),
            PolyVectorField::new(vec![Poly::zero(n), Poly::constant(n, 1.0), Poly::var(n, 0).scale(0.5)]),
        ])
        .unwrap()
    }

    /// `X = ∂x − (y/2)(1 + x²)∂t`, `Y = ∂y + (x/2)∂t`; its tangent cone at 0 is h_1.
    pub fn perturbed_heisenberg() -> Self {
        let n = 3;
        let t = Poly::from_terms(n, [(vec![0, 1, 0], -0.5), (vec![2, 1, 0], -0.5)]);
        Self::new(vec![
            PolyVectorField::new(vec![Poly::constant(n, 1.0), Poly::zero(n), t]),
            PolyVectorField::new(vec![Poly::zero(n), Poly::constant(n, 1.0), Poly::var(n, 0).scale(0.5)]),
        ])
        .unwrap()
    }

    /// `X_1 = ∂x`, `X_2 = ∂y + x∂z + x²∂w`.
    pub fn engel() -> Self {
        let n = 4;
        Self::new(vec![
            PolyVectorField::coordinate(n, 0),
            PolyVectorField::new(vec![
                Poly::zero(n),
                Poly::constant(n, 1.0),
                Poly::var(n, 0),
                Poly::var(n, 0).pow(2),
            ]),
        ])
        .unwrap()
    }

    /// Coordinate fields `∂_1..∂_n`.
    pub fn abelian(n: usize) -> Self {
        Self::new((0..n).map(|i| PolyVectorField::coordinate(n, i)).collect()).unwrap()
    }

    /// Left-invariant frame of a Carnot group in exponential coordinates:
    /// `X_j(x) = Σ_k β_k ad_x^k(e_j)` with `β_k` the coefficients of `z / (1 − e^{−z})`.
    pub fn left_invariant(algebra: &CarnotAlgebra) -> Self {
        const BETA: [f64; 9] = [
            1.0,
            0.5,
            1.0 / 12.0,
            0.0,
            -1.0 / 720.0,
            0.0,
            1.0 / 30240.0,
            0.0,
            -1.0 / 1209600.0,
        ];
        let n = algebra.dim();
        let x: Vec<Poly> = (0..n).map(|i| Poly::var(n, i)).collect();
        let ad = |v: &[Poly]| -> Vec<Poly> {
            let mut out: Vec<Poly> = (0..n).map(|_| Poly::zero(n)).collect();
            for &(i, j, k, c) in algebra.nonzero_constants() {
                if !v[j].is_zero() {
                    out[k] = out[k].add(&x[i].mul(&v[j]).scale(c));
                }
            }
            out
        };
        let fields = algebra
            .layer_range(1)
            .map(|j| {
                let mut term: Vec<Poly> = (0..n)
                    .map(|k| Poly::constant(n, if k == j { 1.0 } else { 0.0 }))
                    .collect();
                let mut total = term.clone();
                for beta in BETA.iter().take(algebra.step()).skip(1) {
                    term = ad(&term);
                    if *beta != 0.0 {
                        for k in 0..n {
                            total[k] = total[k].add(&term[k].scale(*beta));
                        }
                    }
                }
                PolyVectorField::new(total)
            })
            .collect();
        Self::new(fields).unwrap()
    }

    /// Named frames: `heisenberg1`, `perturbed-heisenberg`, `engel`, `abelian(n)`,
    /// `carnot(<algebra>)`.
    pub fn builtin(name: &str) -> Result<Self, FrameError> {
        let (head, arg) = crate::util::split_call(name)
            .ok_or_else(|| FrameError::Definition(format!("malformed frame name {name:?}")))?;
        match (head, arg) {
            ("heisenberg1", None) | ("h1", None) => Ok(Self::heisenberg()),
            ("perturbed-heisenberg", None) => Ok(Self::perturbed_heisenberg()),
            ("engel", None) => Ok(Self::engel()),
            ("abelian", Some(a)) => {
                let n: usize = a
                    .trim()
                    .parse()
                    .map_err(|_| FrameError::Definition(format!("bad dimension in {name:?}")))?;
                if n == 0 {
                    return Err(FrameError::Definition("abelian(0) is empty".into()));
                }
                Ok(Self::abelian(n))
            }
            ("carnot", Some(a)) => Ok(Self::left_invariant(&CarnotAlgebra::builtin(a)?)),
            _ => Err(FrameError::Definition(format!("unknown frame {name:?}"))),
        }
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn rank(&self) -> usize {
        self.fields.len()
    }

    pub fn fields(&self) -> &[PolyVectorField] {
        &self.fields
    }

    pub fn compiled(&self) -> &CompiledField {
        &self.compiled
    }

    /// Writes `Σ_j u_j X_j(x)` into `out`.
    pub fn velocity(&self, u: &[f64], x: &[f64], out: &mut [f64]) {
        self.compiled.combine(u, x, out);
    }

    /// Largest coefficient distance between corresponding fields.
    pub fn max_coefficient_distance(&self, other: &Self) -> f64 {
        self.fields
            .iter()
            .zip(&other.fields)
            .map(|(a, b)| a.max_coefficient_distance(b))
            .fold(0.0, f64::max)
    }

    /// Whether the fields are linearly independent at `p`.
    pub fn independent_at(&self, p: &[f64]) -> bool {
        let values: Vec<Vec<f64>> = self.fields.iter().map(|f| f.eval(p)).collect();
        crate::algebra::numerical_rank(&values, self.n, RANK_TOL) == self.fields.len()
    }

    pub fn growth_vector_at(&self, p: &[f64]) -> Result<GrowthData, FrameError> {
        Ok(self.bracket_flag(p, DEFAULT_BRACKET_CAP)?.growth)
    }

    pub(crate) fn bracket_flag(&self, p: &[f64], cap: usize) -> Result<BracketFlag, FrameError> {
        if p.len() != self.n {
            return Err(FrameError::Dimension(format!(
                "point has {} coordinates, chart dimension is {}",
                p.len(),
                self.n
            )));
        }
        let n = self.n;
        let mut ranks = Vec::new();
        let mut adapted: Vec<PolyVectorField> = Vec::new();
        let mut adapted_values: Vec<Vec<f64>> = Vec::new();
        let mut weights = Vec::new();
        let mut level: Vec<PolyVectorField> = self.fields.clone();
        let mut all_values: Vec<Vec<f64>> = Vec::new();
        for k in 1..=cap {
            if k > 1 {
                let mut next = Vec::new();
                for x in &self.fields {
                    for z in &level {
                        let b = lie_bracket(x, z);
                        if !b.is_zero() && !next.contains(&b) {
                            next.push(b);
                        }
                    }
                }
                if next.is_empty() {
                    break;
                }
                level = next;
            }
            for f in &level {
                let v = f.eval(p);
                all_values.push(v.clone());
                let mut trial = adapted_values.clone();
                trial.push(v.clone());
                if crate::algebra::numerical_rank(&trial, n, RANK_TOL) > adapted_values.len() {
                    adapted_values.push(v);
                    adapted.push(f.clone());
                    weights.push(k as u32);
                }
            }
            let rank = adapted_values.len();
            ranks.push(rank);
            if rank == n {
                let mut growth = Vec::with_capacity(ranks.len());
                let mut prev = 0;
                for &r in &ranks {
                    growth.push(r - prev);
                    prev = r;
                }
                let q = growth.iter().enumerate().map(|(i, g)| (i + 1) * g).sum();
                return Ok(BracketFlag {
                    growth: GrowthData {
                        point: p.to_vec(),
                        step: ranks.len(),
                        ranks,
                        growth,
                        weights,
                        q,
                    },
                    adapted,
                });
            }
        }
        Err(FrameError::NonGenerating {
            point: p.to_vec(),
            ranks,
            cap,
        })
    }

    /// Endpoint of `γ' = Σ u_j(t) X_j(γ)`, `γ(0) = p`, after time `duration`.
    ///
    /// Piecewise controls are integrated piece by piece (exact switching) and
    /// truncated at `duration`.
    pub fn flow(&self, controls: &Controls, p: &[f64], duration: f64) -> Result<Vec<f64>, FrameError> {
        self.flow_with(controls, p, duration, &OdeOptions::default())
    }

    pub fn flow_with(
        &self,
        controls: &Controls,
        p: &[f64],
        duration: f64,
        opts: &OdeOptions,
    ) -> Result<Vec<f64>, FrameError> {
        if p.len() != self.n {
            return Err(FrameError::Dimension("start point has wrong dimension".into()));
        }
        let pieces: Vec<(f64, &[f64])> = match controls {
            Controls::Constant(u) => vec![(duration, u.as_slice())],
            Controls::Piecewise(ps) => {
                let mut left = duration;
                let mut out = Vec::new();
                for (d, u) in ps {
                    if left <= 0.0 {
                        break;
                    }
                    let d = d.min(left);
                    out.push((d, u.as_slice()));
                    left -= d;
                }
                out
            }
        };
        let mut x = p.to_vec();
        for (d, u) in pieces {
            if u.len() != self.rank() {
                return Err(FrameError::Dimension(format!(
                    "control has {} entries for {} fields",
                    u.len(),
                    self.rank()
                )));
            }
            x = ode::integrate(|_, y, dy| self.velocity(u, y, dy), 0.0, d, &x, opts)?;
        }
        Ok(x)
    }

    /// Flow with time-dependent controls `u(t)`.
    pub fn flow_fn(
        &self,
        u: impl Fn(f64) -> Vec<f64>,
        p: &[f64],
        duration: f64,
    ) -> Result<Vec<f64>, FrameError> {
        Ok(ode::integrate(
            |t, y, dy| self.velocity(&u(t), y, dy),
            0.0,
            duration,
            p,
            &OdeOptions::default(),
        )?)
    }

    /// Matrix whose columns are `X_j(p)`.
    pub fn frame_matrix(&self, p: &[f64]) -> DMatrix<f64> {
        let vals = self.compiled.eval_all(p);
        DMatrix::from_fn(self.n, self.fields.len(), |i, j| vals[j][i])
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn heisenberg_growth_everywhere() {
        let f = HorizontalFrame::heisenberg();
        for p in [[0.0, 0.0, 0.0], [1.0, -2.0, 0.5]] {
            let g = f.growth_vector_at(&p).unwrap();
            assert_eq!(g.ranks, vec![2, 3]);
            assert_eq!(g.growth, vec![2, 1]);
            assert_eq!(g.q, 4);
            assert_eq!(g.weights, vec![1, 1, 2]);
        }
    }

    #[test]
    fn abelian_growth() {
        let g = HorizontalFrame::abelian(2).growth_vector_at(&[0.0, 0.0]).unwrap();
        assert_eq!(g.ranks, vec![2]);
        assert_eq!(g.q, 2);
    }

    #[test]
    fn engel_growth_at_origin() {
        let g = HorizontalFrame::engel().growth_vector_at(&[0.0; 4]).unwrap();
        assert_eq!(g.ranks, vec![2, 3, 4]);
        assert_eq!(g.q, 7);
    }

    #[test]
    fn non_generating_frame_is_reported() {
        let f = HorizontalFrame::new(vec![PolyVectorField::coordinate(3, 0), PolyVectorField::coordinate(3, 1)]).unwrap();
        match f.growth_vector_at(&[0.0; 3]) {
            Err(FrameError::NonGenerating { ranks, .. }) => assert_eq!(ranks, vec![2]),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn flow_straight_line_and_zero_time() {
        let f = HorizontalFrame::heisenberg();
        let end = f.flow(&Controls::Constant(vec![1.0, 0.0]), &[0.0; 3], 1.0).unwrap();
        assert!((end[0] - 1.0).abs() < 1e-12 && end[1].abs() < 1e-12 && end[2].abs() < 1e-12);
        let p = [0.3, 0.2, 0.1];
        assert_eq!(f.flow(&Controls::Constant(vec![1.0, 1.0]), &p, 0.0).unwrap(), p.to_vec());
    }

    #[test]
    fn commutator_square_reaches_vertical() {
        let f = HorizontalFrame::heisenberg();
        let loop_controls = Controls::Piecewise(vec![
            (1.0, vec![1.0, 0.0]),
            (1.0, vec![0.0, 1.0]),
            (1.0, vec![-1.0, 0.0]),
            (1.0, vec![0.0, -1.0]),
        ]);
        let end = f.flow(&loop_controls, &[0.0; 3], 4.0).unwrap();
        assert!(end[0].abs() < 1e-6 && end[1].abs() < 1e-6 && (end[2] - 1.0).abs() < 1e-6);
    }

    #[test]
    fn left_invariant_heisenberg_matches_convention() {
        let f = HorizontalFrame::left_invariant(&CarnotAlgebra::heisenberg());
        assert_eq!(f, HorizontalFrame::heisenberg());
    }

    #[test]
    fn builtin_frames() {
        assert_eq!(HorizontalFrame::builtin("engel").unwrap().dim(), 4);
        assert_eq!(HorizontalFrame::builtin("abelian(3)").unwrap().rank(), 3);
        assert_eq!(HorizontalFrame::builtin("carnot(engel)").unwrap().dim(), 4);
        assert!(HorizontalFrame::builtin("klein-bottle").is_err());
    }
}

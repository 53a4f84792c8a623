//! Stratified nilpotent Lie algebras and the Carnot groups they generate.
//!
//! Group elements are stored in exponential coordinates of the first kind, so
//! the group law is the (finite) Baker-Campbell-Hausdorff series, inversion is
//! negation and dilations act diagonally on the graded basis.

mod bch;
mod laws;
mod loader;
mod norm;

use std::fmt;
use std::ops::Range;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use bch::{bch_closed_form, MAX_BCH_STEP};
pub use laws::{check_group_laws, LawReport};
pub use loader::{AlgebraFile, RawConstant};
pub use norm::{HomogeneousNorm, NormKind};

/// Absolute tolerance used for the antisymmetry and Jacobi checks.
pub const STRUCTURE_TOL: f64 = 1e-12;

#[derive(Debug, Error)]
pub enum AlgebraError {
    #[error("dimension mismatch: {0}")]
    Dimension(String),
    #[error("BCH series implemented up to step {max}, algebra has step {step}")]
    UnsupportedStep { step: usize, max: usize },
    #[error("dilation factor must be positive, got {0}")]
    NonPositiveDilation(f64),
    #[error("invalid algebra definition: {0}")]
    Definition(String),
    #[error("algebra violates the stratification axioms: {0}")]
    Invalid(ValidationReport),
}

/// A violated axiom, with 0-based basis indices.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "axiom", rename_all = "snake_case")]
pub enum Violation {
    Antisymmetry { i: usize, j: usize, k: usize, sum: f64 },
    Jacobi { i: usize, j: usize, l: usize, residual: f64 },
    Grading { i: usize, j: usize, k: usize, value: f64 },
    Generation { layer: usize, rank: usize, expected: usize },
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct ValidationReport {
    pub violations: Vec<Violation>,
}

impl ValidationReport {
    pub fn is_valid(&self) -> bool {
        self.violations.is_empty()
    }
}

impl fmt::Display for ValidationReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.violations.is_empty() {
            return write!(f, "valid");
        }
        let parts: Vec<String> = self.violations.iter().map(|v| format!("{v:?}")).collect();
        write!(f, "{}", parts.join("; "))
    }
}

/// Element of a Carnot group in exponential coordinates.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct GroupElement(Vec<f64>);

impl GroupElement {
    pub fn new(coords: Vec<f64>) -> Self {
        Self(coords)
    }

    pub fn identity(n: usize) -> Self {
        Self(vec![0.0; n])
    }

    pub fn coords(&self) -> &[f64] {
        &self.0
    }

    pub fn into_coords(self) -> Vec<f64> {
        self.0
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }
}

impl From<Vec<f64>> for GroupElement {
    fn from(v: Vec<f64>) -> Self {
        Self(v)
    }
}

impl From<&[f64]> for GroupElement {
    fn from(v: &[f64]) -> Self {
        Self(v.to_vec())
    }
}

impl AsRef<[f64]> for GroupElement {
    fn as_ref(&self) -> &[f64] {
        &self.0
    }
}

/// Stratified nilpotent Lie algebra `V_1 ⊕ … ⊕ V_s` with a graded basis.
///
/// Basis vectors are ordered layer by layer; `[e_i, e_j] = Σ_k c[i][j][k] e_k`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CarnotAlgebra {
    layers: Vec<usize>,
    #[serde(skip)]
    weights: Vec<u32>,
    /// Dense tensor, index `(i * n + j) * n + k`.
    constants: Vec<f64>,
    #[serde(skip)]
    sparse: Vec<(usize, usize, usize, f64)>,
}

impl CarnotAlgebra {
    /// Builds an algebra from a dense structure tensor without checking the axioms.
    pub fn from_tensor(layers: Vec<usize>, constants: Vec<f64>) -> Result<Self, AlgebraError> {
        if layers.is_empty() || layers.iter().any(|&d| d == 0) {
            return Err(AlgebraError::Dimension(format!(
                "layers must be nonempty and positive, got {layers:?}"
            )));
        }
        let n: usize = layers.iter().sum();
        if constants.len() != n * n * n {
            return Err(AlgebraError::Dimension(format!(
                "structure tensor has {} entries, expected n^3 = {}",
                constants.len(),
                n * n * n
            )));
        }
        if constants.iter().any(|c| !c.is_finite()) {
            return Err(AlgebraError::Definition("non-finite structure constant".into()));
        }
        let weights = layers
            .iter()
            .enumerate()
            .flat_map(|(k, &d)| std::iter::repeat_n(k as u32 + 1, d))
            .collect();
        let mut sparse = Vec::new();
        for i in 0..n {
            for j in 0..n {
                for k in 0..n {
                    let c = constants[(i * n + j) * n + k];
                    if c != 0.0 {
                        sparse.push((i, j, k, c));
                    }
                }
            }
        }
        Ok(Self {
            layers,
            weights,
            constants,
            sparse,
        })
    }

    /// Builds an algebra from nonzero constants `[e_i, e_j] = v e_k` (0-based),
    /// completing the tensor by antisymmetry.
    pub fn from_constants(
        layers: Vec<usize>,
        entries: &[(usize, usize, usize, f64)],
    ) -> Result<Self, AlgebraError> {
        let n: usize = layers.iter().sum();
        let mut c = vec![0.0; n * n * n];
        let mut set = vec![false; n * n * n];
        for &(i, j, k, v) in entries {
            if i >= n || j >= n || k >= n {
                return Err(AlgebraError::Dimension(format!(
                    "constant ({i}, {j}, {k}) out of range for n = {n}"
                )));
            }
            if i == j {
                if v != 0.0 {
                    return Err(AlgebraError::Definition(format!(
                        "[e_{i}, e_{i}] must vanish, got {v}"
                    )));
                }
                continue;
            }
            for (a, b, val) in [(i, j, v), (j, i, -v)] {
                let idx = (a * n + b) * n + k;
                if set[idx] && c[idx] != val {
                    return Err(AlgebraError::Definition(format!(
                        "conflicting constants for [e_{a}, e_{b}] along e_{k}"
                    )));
                }
                c[idx] = val;
                set[idx] = true;
            }
        }
        Self::from_tensor(layers, c)
    }

    /// First Heisenberg algebra h_1: `[e1, e2] = e3`.
    pub fn heisenberg() -> Self {
        Self::heisenberg_n(1)
    }

    /// Heisenberg algebra h_m of dimension 2m+1: `[e_i, e_{m+i}] = e_{2m+1}`.
    pub fn heisenberg_n(m: usize) -> Self {
        let entries: Vec<_> = (0..m).map(|i| (i, m + i, 2 * m, 1.0)).collect();
        Self::from_constants(vec![2 * m, 1], &entries).expect("heisenberg constants are well formed")
    }

    /// Engel algebra: layers (2,1,1), `[e1,e2] = e3`, `[e1,e3] = e4`.
    pub fn engel() -> Self {
        Self::filiform(4)
    }

    /// Model filiform algebra of dimension `n ≥ 3`: `[e1, e_k] = e_{k+1}` for `k = 2..n-1`.
    pub fn filiform(n: usize) -> Self {
        assert!(n >= 3, "filiform algebras need n >= 3");
        let mut layers = vec![2];
        layers.extend(std::iter::repeat_n(1, n - 2));
        let entries: Vec<_> = (1..n - 1).map(|k| (0, k, k + 1, 1.0)).collect();
        Self::from_constants(layers, &entries).expect("filiform constants are well formed")
    }

    /// Abelian algebra R^n (single layer).
    pub fn abelian(n: usize) -> Self {
        Self::from_tensor(vec![n], vec![0.0; n * n * n]).expect("abelian tensor is well formed")
    }

    /// Strictly upper triangular `m × m` matrices, graded by superdiagonal.
    ///
    /// Basis `E_{a,b}` (a < b) ordered by `b - a`, then by `a`.
    pub fn upper_triangular(m: usize) -> Self {
        assert!(m >= 2);
        let mut basis = Vec::new();
        for d in 1..m {
            for a in 0..m - d {
                basis.push((a, a + d));
            }
        }
        let index = |a: usize, b: usize| basis.iter().position(|&e| e == (a, b));
        let mut entries = Vec::new();
        for (i, &(a, b)) in basis.iter().enumerate() {
            for (j, &(c, d)) in basis.iter().enumerate() {
                // [E_ab, E_cd] = δ_bc E_ad − δ_da E_cb
                if b == c {
                    entries.push((i, j, index(a, d).unwrap(), 1.0));
                }
                if d == a {
                    entries.push((i, j, index(c, b).unwrap(), -1.0));
                }
            }
        }
        let layers = (1..m).map(|d| m - d).collect();
        // Both orderings are listed explicitly, so build the tensor directly.
        let n = basis.len();
        let mut c = vec![0.0; n * n * n];
        for (i, j, k, v) in entries {
            c[(i * n + j) * n + k] += v;
        }
        Self::from_tensor(layers, c).expect("matrix constants are well formed")
    }

    pub fn dim(&self) -> usize {
        self.weights.len()
    }

    pub fn layers(&self) -> &[usize] {
        &self.layers
    }

    pub fn step(&self) -> usize {
        self.layers.len()
    }

    pub fn rank(&self) -> usize {
        self.layers[0]
    }

    pub fn weights(&self) -> &[u32] {
        &self.weights
    }

    /// Basis index range of layer `k` (1-based).
    pub fn layer_range(&self, k: usize) -> Range<usize> {
        let start: usize = self.layers[..k - 1].iter().sum();
        start..start + self.layers[k - 1]
    }

    pub fn constant(&self, i: usize, j: usize, k: usize) -> f64 {
        let n = self.dim();
        self.constants[(i * n + j) * n + k]
    }

    /// Nonzero structure constants `(i, j, k, c_ij^k)`.
    pub fn nonzero_constants(&self) -> &[(usize, usize, usize, f64)] {
        &self.sparse
    }

    /// Q = Σ_k k·n_k.
    pub fn homogeneous_dimension(&self) -> usize {
        self.layers.iter().enumerate().map(|(k, &d)| (k + 1) * d).sum()
    }

    pub fn bracket(&self, x: &[f64], y: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.dim()];
        self.bracket_into(x, y, &mut out);
        out
    }

    fn bracket_into(&self, x: &[f64], y: &[f64], out: &mut [f64]) {
        out.iter_mut().for_each(|v| *v = 0.0);
        for &(i, j, k, c) in &self.sparse {
            out[k] += c * x[i] * y[j];
        }
    }

    /// Checks antisymmetry, Jacobi, grading and generation; never fails on a
    /// well-formed tensor, violations are listed in the report.
    pub fn verify_structure(&self) -> ValidationReport {
        let n = self.dim();
        let mut violations = Vec::new();
        let scale = self.sparse.iter().fold(1.0f64, |m, c| m.max(c.3.abs()));

        for i in 0..n {
            for j in i..n {
                for k in 0..n {
                    let sum = self.constant(i, j, k) + self.constant(j, i, k);
                    if sum.abs() > STRUCTURE_TOL * scale {
                        violations.push(Violation::Antisymmetry { i, j, k, sum });
                    }
                }
            }
        }

        let e = |i: usize| {
            let mut v = vec![0.0; n];
            v[i] = 1.0;
            v
        };
        for i in 0..n {
            for j in i + 1..n {
                for l in j + 1..n {
                    let a = self.bracket(&e(i), &self.bracket(&e(j), &e(l)));
                    let b = self.bracket(&e(j), &self.bracket(&e(l), &e(i)));
                    let c = self.bracket(&e(l), &self.bracket(&e(i), &e(j)));
                    let residual = (0..n).map(|k| (a[k] + b[k] + c[k]).abs()).fold(0.0, f64::max);
                    if residual > STRUCTURE_TOL * scale * scale {
                        violations.push(Violation::Jacobi { i, j, l, residual });
                    }
                }
            }
        }

        let s = self.step() as u32;
        for &(i, j, k, value) in &self.sparse {
            let target = self.weights[i] + self.weights[j];
            if target > s || self.weights[k] != target {
                violations.push(Violation::Grading { i, j, k, value });
            }
        }

        // Iterated brackets of V_1 must span each higher layer.
        let mut current: Vec<Vec<f64>> = self.layer_range(1).map(e).collect();
        for layer in 2..=self.step() {
            let range = self.layer_range(layer);
            let mut next = Vec::new();
            for a in self.layer_range(1) {
                for v in &current {
                    let b = self.bracket(&e(a), v);
                    next.push(b[range.clone()].to_vec());
                }
            }
            let rank = numerical_rank(&next, range.len(), 1e-9);
            if rank < range.len() {
                violations.push(Violation::Generation {
                    layer,
                    rank,
                    expected: range.len(),
                });
            }
            current = next
                .into_iter()
                .map(|v| {
                    let mut full = vec![0.0; n];
                    full[range.clone()].copy_from_slice(&v);
                    full
                })
                .collect();
        }

        ValidationReport { violations }
    }

    /// Verifies the axioms, returning the algebra or the report as an error.
    pub fn validated(self) -> Result<Self, AlgebraError> {
        let report = self.verify_structure();
        if report.is_valid() {
            Ok(self)
        } else {
            Err(AlgebraError::Invalid(report))
        }
    }

    /// Group law `x * y` via the BCH series truncated at the step.
    pub fn product(&self, x: &GroupElement, y: &GroupElement) -> Result<GroupElement, AlgebraError> {
        self.check_dims(x)?;
        self.check_dims(y)?;
        if self.step() > MAX_BCH_STEP {
            return Err(AlgebraError::UnsupportedStep {
                step: self.step(),
                max: MAX_BCH_STEP,
            });
        }
        Ok(GroupElement(bch::bch(self, x.coords(), y.coords())))
    }

    /// Group law on raw coordinate slices. Panics if the step exceeds [`MAX_BCH_STEP`].
    pub fn mul(&self, x: &[f64], y: &[f64]) -> Vec<f64> {
        assert!(self.step() <= MAX_BCH_STEP, "unsupported BCH step {}", self.step());
        bch::bch(self, x, y)
    }

    /// In exponential coordinates the inverse is negation.
    pub fn inverse(&self, x: &GroupElement) -> GroupElement {
        GroupElement(x.coords().iter().map(|v| -v).collect())
    }

    pub fn dilate(&self, lambda: f64, x: &GroupElement) -> Result<GroupElement, AlgebraError> {
        if !(lambda > 0.0) {
            return Err(AlgebraError::NonPositiveDilation(lambda));
        }
        self.check_dims(x)?;
        Ok(GroupElement(dilate_coords(&self.weights, lambda, x.coords())))
    }

    /// Max-power homogeneous norm adapted to this grading.
    pub fn default_norm(&self) -> HomogeneousNorm {
        HomogeneousNorm::new(NormKind::MaxPower, self.weights.clone())
    }

    fn check_dims(&self, x: &GroupElement) -> Result<(), AlgebraError> {
        if x.dim() != self.dim() {
            return Err(AlgebraError::Dimension(format!(
                "element has {} coordinates, algebra dimension is {}",
                x.dim(),
                self.dim()
            )));
        }
        Ok(())
    }

    /// Restores the derived caches after deserialization.
    pub fn rebuild(self) -> Result<Self, AlgebraError> {
        Self::from_tensor(self.layers, self.constants)
    }
}

/// `δ_λ` on raw coordinates: coordinate `i` scaled by `λ^{w_i}`.
pub fn dilate_coords(weights: &[u32], lambda: f64, x: &[f64]) -> Vec<f64> {
    x.iter()
        .zip(weights)
        .map(|(v, &w)| v * lambda.powi(w as i32))
        .collect()
}

/// Rank of a set of vectors of length `dim`, singular values relative to the largest.
pub(crate) fn numerical_rank(vectors: &[Vec<f64>], dim: usize, rel_tol: f64) -> usize {
    if vectors.is_empty() || dim == 0 {
        return 0;
    }
    let m = DMatrix::from_fn(dim, vectors.len(), |r, c| vectors[c][r]);
    let sv = m.singular_values();
    let max = sv.iter().cloned().fold(0.0, f64::max);
    if max == 0.0 {
        return 0;
    }
    sv.iter().filter(|&&s| s > rel_tol * max).count()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn heisenberg_is_valid() {
        let h = CarnotAlgebra::heisenberg();
        assert!(h.verify_structure().is_valid());
        assert_eq!(h.homogeneous_dimension(), 4);
        assert_eq!(h.weights(), &[1, 1, 2]);
    }

    #[test]
    fn symmetric_tensor_reports_antisymmetry() {
        let mut c = vec![0.0; 27];
        c[(0 * 3 + 1) * 3 + 2] = 1.0;
        c[(1 * 3 + 0) * 3 + 2] = 1.0;
        let a = CarnotAlgebra::from_tensor(vec![2, 1], c).unwrap();
        let report = a.verify_structure();
        assert!(report
            .violations
            .iter()
            .any(|v| matches!(v, Violation::Antisymmetry { i: 0, j: 1, k: 2, .. })));
    }

    #[test]
    fn zero_brackets_fail_generation() {
        let a = CarnotAlgebra::from_tensor(vec![2, 1], vec![0.0; 27]).unwrap();
        let report = a.verify_structure();
        assert_eq!(
            report.violations,
            vec![Violation::Generation {
                layer: 2,
                rank: 0,
                expected: 1
            }]
        );
    }

    #[test]
    fn misgraded_bracket_is_reported() {
        // [e1, e2] landing in the first layer.
        let a = CarnotAlgebra::from_constants(vec![2, 1], &[(0, 1, 0, 1.0), (0, 1, 2, 1.0)]).unwrap();
        assert!(a
            .verify_structure()
            .violations
            .iter()
            .any(|v| matches!(v, Violation::Grading { k: 0, .. })));
    }

    #[test]
    fn jacobi_violation_detected() {
        // layers (2,1,1) with [e1,e2]=e3, [e1,e3]=e4, [e2,e3]=e4 is fine;
        // break Jacobi in a 3-step algebra with a lone [e3, e1] mismatch on a free basis.
        let a = CarnotAlgebra::from_constants(
            vec![3, 1, 1],
            &[(0, 1, 3, 1.0), (1, 2, 3, 1.0), (0, 3, 4, 1.0), (2, 3, 4, 1.0)],
        )
        .unwrap();
        let report = a.verify_structure();
        assert!(report
            .violations
            .iter()
            .any(|v| matches!(v, Violation::Jacobi { .. })));
    }

    #[test]
    fn tensor_size_mismatch_is_an_error() {
        assert!(matches!(
            CarnotAlgebra::from_tensor(vec![2, 1], vec![0.0; 8]),
            Err(AlgebraError::Dimension(_))
        ));
    }

    #[test]
    fn builtin_algebras_validate() {
        for a in [
            CarnotAlgebra::heisenberg_n(2),
            CarnotAlgebra::engel(),
            CarnotAlgebra::filiform(6),
            CarnotAlgebra::abelian(3),
            CarnotAlgebra::upper_triangular(4),
        ] {
            assert!(a.verify_structure().is_valid(), "{:?}", a.layers());
        }
    }

    #[test]
    fn homogeneous_dimensions() {
        assert_eq!(CarnotAlgebra::heisenberg().homogeneous_dimension(), 4);
        assert_eq!(CarnotAlgebra::engel().homogeneous_dimension(), 7);
        assert_eq!(CarnotAlgebra::abelian(5).homogeneous_dimension(), 5);
    }

    #[test]
    fn heisenberg_product_formula() {
        let h = CarnotAlgebra::heisenberg();
        let x = GroupElement::new(vec![0.3, -1.2, 0.7]);
        let y = GroupElement::new(vec![2.0, 0.5, -0.4]);
        let z = h.product(&x, &y).unwrap();
        let expected_t = 0.7 - 0.4 + 0.5 * (0.3 * 0.5 - (-1.2) * 2.0);
        assert!((z.coords()[0] - 2.3).abs() < 1e-15);
        assert!((z.coords()[1] - (-0.7)).abs() < 1e-15);
        assert!((z.coords()[2] - expected_t).abs() < 1e-15);
    }

    #[test]
    fn identity_and_inverse() {
        let e = CarnotAlgebra::engel();
        let x = GroupElement::new(vec![0.1, 0.2, -0.3, 0.4]);
        let id = GroupElement::identity(4);
        assert_eq!(e.product(&x, &id).unwrap(), x);
        assert_eq!(e.product(&id, &x).unwrap(), x);
        let inv = e.inverse(&x);
        assert_eq!(inv.coords(), &[-0.1, -0.2, 0.3, -0.4]);
        let prod = e.product(&x, &inv).unwrap();
        assert!(prod.coords().iter().all(|v| *v == 0.0));
        assert_eq!(e.inverse(&id), id);
    }

    #[test]
    fn dilation_rules() {
        let h = CarnotAlgebra::heisenberg();
        let x = GroupElement::new(vec![1.0, 2.0, 3.0]);
        assert_eq!(h.dilate(2.0, &x).unwrap().coords(), &[2.0, 4.0, 12.0]);
        assert_eq!(h.dilate(1.0, &x).unwrap(), x);
        assert!(matches!(h.dilate(0.0, &x), Err(AlgebraError::NonPositiveDilation(_))));
        assert!(matches!(h.dilate(-1.0, &x), Err(AlgebraError::NonPositiveDilation(_))));
    }

    #[test]
    fn upper_triangular_layers() {
        let a = CarnotAlgebra::upper_triangular(5);
        assert_eq!(a.layers(), &[4, 3, 2, 1]);
        assert_eq!(a.step(), 4);
    }
}

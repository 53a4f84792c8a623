//! Randomised checks of the group laws.

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::{dilate_coords, CarnotAlgebra};
use crate::util::task_rng;

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct LawReport {
    pub algebra_dim: usize,
    pub homogeneous_dimension: usize,
    pub tuples: usize,
    /// Largest relative defect of `(xy)z = x(yz)`.
    pub associativity: f64,
    /// Largest defect of `x x⁻¹ = e = x⁻¹ x`.
    pub inverse: f64,
    /// Largest relative defect of `δ_λ(xy) = δ_λ(x) δ_λ(y)`.
    pub dilation: f64,
    /// Largest relative defect of `δ_λ δ_μ = δ_{λμ}`.
    pub dilation_semigroup: f64,
}

impl LawReport {
    pub fn worst(&self) -> f64 {
        self.associativity
            .max(self.inverse)
            .max(self.dilation)
            .max(self.dilation_semigroup)
    }
}

fn defect(a: &[f64], b: &[f64]) -> f64 {
    let scale = a.iter().chain(b).fold(1.0f64, |m, v| m.max(v.abs()));
    a.iter().zip(b).fold(0.0f64, |m, (x, y)| m.max((x - y).abs())) / scale
}

/// Checks the laws on `tuples` random triples with coordinates in `[-1, 1]`
/// and dilation factors in `[½, 2]`.
pub fn check_group_laws(alg: &CarnotAlgebra, tuples: usize, seed: u64) -> LawReport {
    let n = alg.dim();
    let w = alg.weights();
    let mut rng = task_rng(seed, 0);
    let point = |rng: &mut rand_chacha::ChaCha8Rng| -> Vec<f64> { (0..n).map(|_| rng.random_range(-1.0..=1.0)).collect() };
    let mut rep = LawReport {
        algebra_dim: n,
        homogeneous_dimension: alg.homogeneous_dimension(),
        tuples,
        associativity: 0.0,
        inverse: 0.0,
        dilation: 0.0,
        dilation_semigroup: 0.0,
    };
    let e = vec![0.0; n];
    for _ in 0..tuples {
        let (x, y, z) = (point(&mut rng), point(&mut rng), point(&mut rng));
        let (l, m): (f64, f64) = (rng.random_range(0.5..=2.0), rng.random_range(0.5..=2.0));
        let lhs = alg.mul(&alg.mul(&x, &y), &z);
        let rhs = alg.mul(&x, &alg.mul(&y, &z));
        rep.associativity = rep.associativity.max(defect(&lhs, &rhs));
        let xinv: Vec<f64> = x.iter().map(|v| -v).collect();
        rep.inverse = rep
            .inverse
            .max(defect(&alg.mul(&x, &xinv), &e))
            .max(defect(&alg.mul(&xinv, &x), &e));
        let lhs = dilate_coords(w, l, &alg.mul(&x, &y));
        let rhs = alg.mul(&dilate_coords(w, l, &x), &dilate_coords(w, l, &y));
        rep.dilation = rep.dilation.max(defect(&lhs, &rhs));
        let lhs = dilate_coords(w, l, &dilate_coords(w, m, &z));
        rep.dilation_semigroup = rep.dilation_semigroup.max(defect(&lhs, &dilate_coords(w, l * m, &z)));
    }
    rep
}

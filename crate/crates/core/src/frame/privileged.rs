//! Privileged coordinates, blow-ups of frames and nilpotent approximation.
//!
//! The chart at `o` is built in two stages. A linear change `y = B⁻¹(x − o)`
//! adapts the coordinates to the bracket flag (columns of `B` are adapted
//! brackets evaluated at `o`). Then each coordinate of weight `w ≥ 3` is
//! corrected by a polynomial in lower-weight coordinates,
//! `z_i = y_i − h_i(y)`, chosen so that every iterated derivative
//! `X_{j_1}⋯X_{j_k} z_i` with `k < w_i` vanishes at `o`. The corrections are
//! the solution of a small linear system; the resulting map is triangular, so
//! its inverse is again polynomial.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use super::{FrameError, GrowthData, HorizontalFrame, DEFAULT_BRACKET_CAP};
use crate::algebra::CarnotAlgebra;
use crate::poly::{lie_bracket, Poly, PolyVectorField};

/// Coefficients below this are treated as rounding noise in chart algebra.
const COEF_TOL: f64 = 1e-10;

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct PrivilegedChart {
    pub center: Vec<f64>,
    pub weights: Vec<u32>,
    /// Columns are the adapted vectors at the center.
    basis: Vec<Vec<f64>>,
    basis_inv: Vec<Vec<f64>>,
    /// `h_i(y)`; zero for coordinates needing no correction.
    corrections: Vec<Poly>,
}

impl PrivilegedChart {
    /// Identity chart centered at `center` with the given weights.
    pub fn translation(center: Vec<f64>, weights: Vec<u32>) -> Self {
        let n = center.len();
        let id: Vec<Vec<f64>> = (0..n)
            .map(|i| (0..n).map(|j| if i == j { 1.0 } else { 0.0 }).collect())
            .collect();
        Self {
            center,
            weights,
            basis: id.clone(),
            basis_inv: id,
            corrections: (0..n).map(|_| Poly::zero(n)).collect(),
        }
    }

    pub fn dim(&self) -> usize {
        self.center.len()
    }

    /// Columns of the adapted linear change, `basis()[i][j] = B_{ij}`.
    pub fn basis(&self) -> &[Vec<f64>] {
        &self.basis
    }

    pub fn corrections(&self) -> &[Poly] {
        &self.corrections
    }

    fn linear_to_y(&self, x: &[f64]) -> Vec<f64> {
        let d: Vec<f64> = x.iter().zip(&self.center).map(|(a, b)| a - b).collect();
        self.basis_inv
            .iter()
            .map(|row| row.iter().zip(&d).map(|(a, b)| a * b).sum())
            .collect()
    }

    /// Chart coordinates `x` to privileged coordinates `z`.
    pub fn to_privileged(&self, x: &[f64]) -> Vec<f64> {
        let y = self.linear_to_y(x);
        y.iter()
            .zip(&self.corrections)
            .map(|(yi, h)| yi - h.eval(&y))
            .collect()
    }

    /// Privileged coordinates `z` back to chart coordinates.
    pub fn from_privileged(&self, z: &[f64]) -> Vec<f64> {
        let n = self.dim();
        let mut y = vec![0.0; n];
        for i in 0..n {
            // h_i only involves coordinates of lower index.
            y[i] = z[i] + self.corrections[i].eval(&y);
        }
        (0..n)
            .map(|i| self.center[i] + (0..n).map(|j| self.basis[i][j] * y[j]).sum::<f64>())
            .collect()
    }

    /// `y` as polynomials in `z`.
    fn y_of_z(&self) -> Vec<Poly> {
        let n = self.dim();
        let mut y: Vec<Poly> = (0..n).map(|i| Poly::var(n, i)).collect();
        for i in 0..n {
            if !self.corrections[i].is_zero() {
                let h = self.corrections[i].compose(&y);
                y[i] = Poly::var(n, i).add(&h);
            }
        }
        y
    }

    /// Pushes a frame given in chart coordinates into privileged coordinates.
    pub fn transform_frame(&self, frame: &HorizontalFrame) -> Result<HorizontalFrame, FrameError> {
        let n = self.dim();
        let linear = linear_frame(frame, &self.center, &self.basis, &self.basis_inv);
        let y_of_z = self.y_of_z();
        let fields = linear
            .iter()
            .map(|x| {
                let comps = (0..n)
                    .map(|i| {
                        // X z_i = X^i − Σ_k X^k ∂_k h_i, as a polynomial in y, then in z.
                        let mut c = x.component(i).clone();
                        if !self.corrections[i].is_zero() {
                            c = c.sub(&x.apply(&self.corrections[i]));
                        }
                        c.compose(&y_of_z).prune(COEF_TOL)
                    })
                    .collect();
                PolyVectorField::new(comps)
            })
            .collect();
        HorizontalFrame::new(fields)
    }
}

/// Frame components in the linearly adapted coordinates `y`.
fn linear_frame(
    frame: &HorizontalFrame,
    center: &[f64],
    basis: &[Vec<f64>],
    basis_inv: &[Vec<f64>],
) -> Vec<PolyVectorField> {
    let n = frame.dim();
    // x_k = o_k + Σ_l B_kl y_l
    let subs: Vec<Poly> = (0..n)
        .map(|k| {
            let mut p = Poly::constant(n, center[k]);
            for (l, b) in basis[k].iter().enumerate() {
                if *b != 0.0 {
                    p = p.add(&Poly::var(n, l).scale(*b));
                }
            }
            p
        })
        .collect();
    frame
        .fields()
        .iter()
        .map(|f| {
            let xs: Vec<Poly> = f.components().iter().map(|c| c.compose(&subs)).collect();
            let comps = (0..n)
                .map(|i| {
                    let mut acc = Poly::zero(n);
                    for (k, xk) in xs.iter().enumerate() {
                        let a = basis_inv[i][k];
                        if a != 0.0 {
                            acc = acc.add(&xk.scale(a));
                        }
                    }
                    acc.prune(COEF_TOL)
                })
                .collect();
            PolyVectorField::new(comps)
        })
        .collect()
}

/// All exponent vectors over `vars` with total degree ≥ 2 and weighted degree ≤ `max_w`.
fn correction_monomials(n: usize, vars: &[usize], weights: &[u32], max_w: u32) -> Vec<Vec<u32>> {
    fn rec(
        idx: usize,
        vars: &[usize],
        weights: &[u32],
        budget: u32,
        cur: &mut Vec<u32>,
        out: &mut Vec<Vec<u32>>,
    ) {
        if idx == vars.len() {
            if cur.iter().sum::<u32>() >= 2 {
                out.push(cur.clone());
            }
            return;
        }
        let v = vars[idx];
        let w = weights[v];
        let mut k = 0;
        while k * w <= budget {
            cur[v] = k;
            rec(idx + 1, vars, weights, budget - k * w, cur, out);
            k += 1;
        }
        cur[v] = 0;
    }
    let mut out = Vec::new();
    rec(0, vars, weights, max_w, &mut vec![0; n], &mut out);
    out
}

/// Words `j_1..j_k` over `r` letters with `1 ≤ k ≤ max_len`.
fn words(r: usize, max_len: usize) -> Vec<Vec<usize>> {
    let mut out = Vec::new();
    let mut frontier: Vec<Vec<usize>> = vec![Vec::new()];
    for _ in 0..max_len {
        let mut next = Vec::new();
        for w in &frontier {
            for j in 0..r {
                let mut v = w.clone();
                v.push(j);
                next.push(v);
            }
        }
        out.extend(next.iter().cloned());
        frontier = next;
    }
    out
}

/// `X_{j_1}(X_{j_2}(⋯ X_{j_k} f))(0)`.
fn word_derivative_at_zero(fields: &[PolyVectorField], word: &[usize], f: &Poly) -> f64 {
    let mut g = f.clone();
    for &j in word.iter().rev() {
        g = fields[j].apply(&g);
        if g.is_zero() {
            return 0.0;
        }
    }
    g.eval(&vec![0.0; f.nvars()])
}

/// Non-holonomic order of `f` at 0 (capped at `cap + 1`).
fn nonholonomic_order(fields: &[PolyVectorField], f: &Poly, cap: usize) -> usize {
    let n = f.nvars();
    if f.eval(&vec![0.0; n]).abs() > COEF_TOL {
        return 0;
    }
    let mut layer: Vec<Poly> = vec![f.clone()];
    for k in 1..=cap {
        let mut next = Vec::new();
        for g in &layer {
            for x in fields {
                let d = x.apply(g).prune(COEF_TOL * 1e-3);
                if d.eval(&vec![0.0; n]).abs() > COEF_TOL {
                    return k;
                }
                if !d.is_zero() {
                    next.push(d);
                }
            }
        }
        layer = next;
    }
    cap + 1
}

fn build_chart(frame: &HorizontalFrame, o: &[f64]) -> Result<(PrivilegedChart, GrowthData), FrameError> {
    let n = frame.dim();
    if !frame.independent_at(o) {
        return Err(FrameError::Chart("frame fields are dependent at the center".into()));
    }
    let flag = frame.bracket_flag(o, DEFAULT_BRACKET_CAP)?;
    let weights = flag.growth.weights.clone();
    let b = DMatrix::from_fn(n, n, |i, j| flag.adapted[j].eval(o)[i]);
    let b_inv = b
        .clone()
        .try_inverse()
        .ok_or_else(|| FrameError::Chart("adapted basis is singular".into()))?;
    let basis: Vec<Vec<f64>> = (0..n).map(|i| (0..n).map(|j| b[(i, j)]).collect()).collect();
    let basis_inv: Vec<Vec<f64>> = (0..n).map(|i| (0..n).map(|j| b_inv[(i, j)]).collect()).collect();
    let linear = linear_frame(frame, o, &basis, &basis_inv);

    let mut corrections: Vec<Poly> = (0..n).map(|_| Poly::zero(n)).collect();
    for i in 0..n {
        let wi = weights[i];
        if wi < 3 {
            continue;
        }
        let vars: Vec<usize> = (0..n).filter(|&k| weights[k] < wi).collect();
        let monos = correction_monomials(n, &vars, &weights, wi - 1);
        if monos.is_empty() {
            continue;
        }
        let ws = words(frame.rank(), wi as usize - 1);
        let yi = Poly::var(n, i);
        let a = DMatrix::from_fn(ws.len(), monos.len(), |r, c| {
            word_derivative_at_zero(&linear, &ws[r], &Poly::monomial(n, monos[c].clone(), 1.0))
        });
        let rhs = DVector::from_iterator(ws.len(), ws.iter().map(|w| word_derivative_at_zero(&linear, w, &yi)));
        if rhs.amax() <= COEF_TOL {
            continue;
        }
        let svd = a.clone().svd(true, true);
        let coef = svd
            .solve(&rhs, 1e-12)
            .map_err(|e| FrameError::Chart(format!("correction solve failed: {e}")))?;
        let resid = (&a * &coef - &rhs).amax();
        if resid > 1e-8 * (1.0 + rhs.amax()) {
            return Err(FrameError::Chart(format!(
                "no polynomial correction for coordinate {i} (residual {resid:e})"
            )));
        }
        corrections[i] = Poly::from_terms(n, monos.into_iter().zip(coef.iter().copied())).prune(COEF_TOL);
    }

    let chart = PrivilegedChart {
        center: o.to_vec(),
        weights: weights.clone(),
        basis,
        basis_inv,
        corrections,
    };

    // Orders of the new coordinate functions, checked in y-coordinates.
    for i in 0..n {
        let zi = Poly::var(n, i).sub(&chart.corrections[i]);
        let ord = nonholonomic_order(&linear, &zi, weights[i] as usize);
        if ord != weights[i] as usize {
            return Err(FrameError::Chart(format!(
                "coordinate {i} has order {ord}, expected weight {}",
                weights[i]
            )));
        }
    }
    Ok((chart, flag.growth))
}

/// A frame expressed in privileged coordinates at a point, possibly blown up.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct PrivilegedFrame {
    pub chart: PrivilegedChart,
    pub frame: HorizontalFrame,
    /// Cumulative blow-up factor (1 for the unscaled frame).
    pub eps: f64,
}

impl PrivilegedFrame {
    pub fn at(frame: &HorizontalFrame, o: &[f64]) -> Result<Self, FrameError> {
        let (chart, _) = build_chart(frame, o)?;
        let transformed = chart.transform_frame(frame)?;
        Ok(Self {
            chart,
            frame: transformed,
            eps: 1.0,
        })
    }

    pub fn weights(&self) -> &[u32] {
        &self.chart.weights
    }

    /// `X^{o,ε}_j = ε · dδ_{1/ε} ∘ X_j ∘ δ_ε`: a monomial `c z^α` in slot `i`
    /// becomes `c ε^{1 − w_i + w(α)} z^α`.
    pub fn blowup(&self, eps: f64) -> Result<Self, FrameError> {
        if !(eps > 0.0) {
            return Err(FrameError::NonPositiveScale(eps));
        }
        let w = self.chart.weights.clone();
        let fields = self
            .frame
            .fields()
            .iter()
            .map(|f| {
                f.map_components(|i, p| {
                    Poly::from_terms(
                        p.nvars(),
                        p.terms().map(|(e, c)| {
                            let expo = 1 + Poly::weighted_degree(e, &w) as i32 - w[i] as i32;
                            (e.clone(), c * eps.powi(expo))
                        }),
                    )
                })
            })
            .collect();
        Ok(Self {
            chart: self.chart.clone(),
            frame: HorizontalFrame::new(fields)?,
            eps: self.eps * eps,
        })
    }

    /// Smallest `w(α) − w_i + 1` over all monomials; privileged means ≥ 0.
    pub fn min_homogeneous_degree(&self) -> i32 {
        let w = &self.chart.weights;
        self.frame
            .fields()
            .iter()
            .flat_map(|f| {
                f.components().iter().enumerate().flat_map(move |(i, p)| {
                    p.terms()
                        .map(move |(e, _)| 1 + Poly::weighted_degree(e, w) as i32 - w[i] as i32)
                })
            })
            .min()
            .unwrap_or(0)
    }

    /// The `ε → 0` limit: monomials with `w(α) = w_i − 1`.
    pub fn limit_frame(&self) -> HorizontalFrame {
        let w = self.chart.weights.clone();
        let fields = self
            .frame
            .fields()
            .iter()
            .map(|f| f.map_components(|i, p| p.filter_weighted(&w, |d| d + 1 == w[i])))
            .collect();
        HorizontalFrame::new(fields).expect("limit frame has the same shape")
    }
}

/// `X_j^{o,ε}` in privileged coordinates centered at `o`.
pub fn blowup_frame(frame: &HorizontalFrame, o: &[f64], eps: f64) -> Result<HorizontalFrame, FrameError> {
    if !(eps > 0.0) {
        return Err(FrameError::NonPositiveScale(eps));
    }
    Ok(PrivilegedFrame::at(frame, o)?.blowup(eps)?.frame)
}

/// Tangent Carnot group of a frame at a point.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct NilpotentApproximation {
    pub algebra: CarnotAlgebra,
    /// Homogeneous limit fields `X_j^{o,0}` in privileged coordinates.
    pub limit_frame: HorizontalFrame,
    pub chart: PrivilegedChart,
    pub growth: GrowthData,
    /// False when the growth vector changes in a small neighborhood of `o`.
    pub equiregular: bool,
}

/// Builds privileged coordinates at `o`, truncates the frame to its
/// homogeneous part and reads off the structure constants of the Lie algebra
/// the truncated fields generate.
pub fn nilpotent_approximation(frame: &HorizontalFrame, o: &[f64]) -> Result<NilpotentApproximation, FrameError> {
    let (chart, growth) = build_chart(frame, o)?;
    let transformed = chart.transform_frame(frame)?;
    let pf = PrivilegedFrame {
        chart: chart.clone(),
        frame: transformed,
        eps: 1.0,
    };
    if pf.min_homogeneous_degree() < 0 {
        return Err(FrameError::Chart("frame has terms of negative homogeneous degree".into()));
    }
    let limit = pf.limit_frame();
    let algebra = generated_algebra(&limit, &growth)?;
    let equiregular = probe_equiregular(frame, o, &growth);
    Ok(NilpotentApproximation {
        algebra,
        limit_frame: limit,
        chart,
        growth,
        equiregular,
    })
}

/// Coefficient vector of a field over a fixed monomial index.
struct CoefficientIndex {
    keys: Vec<(usize, Vec<u32>)>,
}

impl CoefficientIndex {
    fn new(fields: &[PolyVectorField]) -> Self {
        let mut keys = Vec::new();
        for f in fields {
            for (i, p) in f.components().iter().enumerate() {
                for (e, _) in p.terms() {
                    let k = (i, e.clone());
                    if !keys.contains(&k) {
                        keys.push(k);
                    }
                }
            }
        }
        Self { keys }
    }

    fn vector(&self, f: &PolyVectorField) -> Vec<f64> {
        self.keys.iter().map(|(i, e)| f.component(*i).coefficient(e)).collect()
    }
}

fn generated_algebra(limit: &HorizontalFrame, growth: &GrowthData) -> Result<CarnotAlgebra, FrameError> {
    let n = limit.dim();
    let mut basis: Vec<PolyVectorField> = limit.fields().to_vec();
    let mut layers = vec![basis.len()];
    let mut prev: Vec<PolyVectorField> = basis.clone();
    while basis.len() < n && layers.len() < DEFAULT_BRACKET_CAP {
        let mut added = Vec::new();
        for x in limit.fields() {
            for z in &prev {
                let b = lie_bracket(x, z).prune(COEF_TOL);
                if b.is_zero() {
                    continue;
                }
                let mut trial = basis.clone();
                trial.extend(added.iter().cloned());
                trial.push(b.clone());
                let idx = CoefficientIndex::new(&trial);
                let vecs: Vec<Vec<f64>> = trial.iter().map(|f| idx.vector(f)).collect();
                if crate::algebra::numerical_rank(&vecs, idx.keys.len(), 1e-9) == trial.len() {
                    added.push(b);
                }
            }
        }
        if added.is_empty() {
            break;
        }
        layers.push(added.len());
        basis.extend(added.iter().cloned());
        prev = added;
    }
    if basis.len() != n || layers != growth.growth {
        return Err(FrameError::Chart(format!(
            "truncated fields generate layers {layers:?}, growth vector is {:?}",
            growth.growth
        )));
    }

    let mut all: Vec<PolyVectorField> = basis.clone();
    let mut brackets = Vec::new();
    for i in 0..n {
        for j in 0..n {
            let b = lie_bracket(&basis[i], &basis[j]).prune(COEF_TOL);
            all.push(b.clone());
            brackets.push(b);
        }
    }
    let idx = CoefficientIndex::new(&all);
    let m = DMatrix::from_fn(idx.keys.len(), n, |r, c| idx.vector(&basis[c])[r]);
    let svd = m.clone().svd(true, true);
    let mut constants = vec![0.0; n * n * n];
    for i in 0..n {
        for j in 0..n {
            let b = &brackets[i * n + j];
            if b.is_zero() {
                continue;
            }
            let v = DVector::from_vec(idx.vector(b));
            let c = svd
                .solve(&v, 1e-12)
                .map_err(|e| FrameError::Chart(format!("bracket decomposition failed: {e}")))?;
            if (&m * &c - &v).amax() > 1e-8 * (1.0 + v.amax()) {
                return Err(FrameError::Chart("truncated fields do not close under brackets".into()));
            }
            for k in 0..n {
                let val = if c[k].abs() < 1e-12 { 0.0 } else { round_clean(c[k]) };
                constants[(i * n + j) * n + k] = val;
            }
        }
    }
    Ok(CarnotAlgebra::from_tensor(layers, constants)?.validated()?)
}

/// Snaps values within 1e-12 of a multiple of 1/720 (covers the rationals that
/// arise from polynomial frames with small coefficients).
fn round_clean(v: f64) -> f64 {
    let s = (v * 720.0).round() / 720.0;
    if (s - v).abs() < 1e-12 {
        s
    } else {
        v
    }
}

fn probe_equiregular(frame: &HorizontalFrame, o: &[f64], growth: &GrowthData) -> bool {
    let n = o.len();
    let h = 1e-3 * (1.0 + crate::util::norm2(o));
    (0..26u64).all(|i| {
        let p: Vec<f64> = crate::util::halton(i, n)
            .iter()
            .zip(o)
            .map(|(u, c)| c + h * (2.0 * u - 1.0))
            .collect();
        matches!(frame.growth_vector_at(&p), Ok(g) if g.growth == growth.growth)
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn monomial_enumeration() {
        // weights (1,1,2): degree ≥ 2, weighted ≤ 2 over vars {0,1}: x², xy, y²
        let m = correction_monomials(3, &[0, 1], &[1, 1, 2], 2);
        assert_eq!(m.len(), 3);
    }

    #[test]
    fn word_count() {
        assert_eq!(words(2, 3).len(), 2 + 4 + 8);
    }

    #[test]
    fn heisenberg_chart_is_identity_at_origin() {
        let pf = PrivilegedFrame::at(&HorizontalFrame::heisenberg(), &[0.0; 3]).unwrap();
        assert_eq!(pf.frame, HorizontalFrame::heisenberg());
        let x = [0.3, -0.2, 0.9];
        assert_eq!(pf.chart.to_privileged(&x), x.to_vec());
    }

    #[test]
    fn chart_round_trip_with_corrections() {
        // A non-homogeneous Engel-type frame forcing a quadratic correction.
        let n = 4;
        let x1 = PolyVectorField::new(vec![
            Poly::constant(n, 1.0),
            Poly::zero(n),
            Poly::zero(n),
            Poly::var(n, 1).scale(0.5),
        ]);
        let x2 = PolyVectorField::new(vec![
            Poly::zero(n),
            Poly::constant(n, 1.0),
            Poly::var(n, 0),
            Poly::var(n, 0).pow(2),
        ]);
        let frame = HorizontalFrame::new(vec![x1, x2]).unwrap();
        let pf = PrivilegedFrame::at(&frame, &[0.0; 4]).unwrap();
        assert!(pf.min_homogeneous_degree() >= 0);
        let x = [0.1, -0.3, 0.2, 0.05];
        let z = pf.chart.to_privileged(&x);
        let back = pf.chart.from_privileged(&z);
        for i in 0..4 {
            assert!((back[i] - x[i]).abs() < 1e-13);
        }
    }
}

//! Sparse real polynomials and polynomial vector fields.

use std::collections::btree_map::Entry;
use std::collections::BTreeMap;
use std::fmt;

use serde::{Deserialize, Serialize};

pub type Exponents = Vec<u32>;

/// Polynomial in `nvars` variables, stored as a sparse monomial map.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(from = "PolyRepr", into = "PolyRepr")]
pub struct Poly {
    nvars: usize,
    terms: BTreeMap<Exponents, f64>,
}

#[derive(Clone, Serialize, Deserialize)]
struct PolyRepr {
    nvars: usize,
    terms: Vec<(Exponents, f64)>,
}

impl From<PolyRepr> for Poly {
    fn from(r: PolyRepr) -> Self {
        Poly::from_terms(r.nvars, r.terms)
    }
}

impl From<Poly> for PolyRepr {
    fn from(p: Poly) -> Self {
        PolyRepr {
            nvars: p.nvars,
            terms: p.terms.into_iter().collect(),
        }
    }
}

impl Poly {
    pub fn zero(nvars: usize) -> Self {
        Self {
            nvars,
            terms: BTreeMap::new(),
        }
    }

    pub fn constant(nvars: usize, c: f64) -> Self {
        Self::monomial(nvars, vec![0; nvars], c)
    }

    /// The coordinate function `x_i`.
    pub fn var(nvars: usize, i: usize) -> Self {
        let mut e = vec![0; nvars];
        e[i] = 1;
        Self::monomial(nvars, e, 1.0)
    }

    pub fn monomial(nvars: usize, exps: Exponents, c: f64) -> Self {
        assert_eq!(exps.len(), nvars);
        let mut p = Self::zero(nvars);
        p.add_term(exps, c);
        p
    }

    pub fn from_terms(nvars: usize, terms: impl IntoIterator<Item = (Exponents, f64)>) -> Self {
        let mut p = Self::zero(nvars);
        for (e, c) in terms {
            assert_eq!(e.len(), nvars);
            p.add_term(e, c);
        }
        p
    }

    pub fn nvars(&self) -> usize {
        self.nvars
    }

    pub fn terms(&self) -> impl Iterator<Item = (&Exponents, f64)> {
        self.terms.iter().map(|(e, c)| (e, *c))
    }

    pub fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn coefficient(&self, exps: &[u32]) -> f64 {
        self.terms.get(exps).copied().unwrap_or(0.0)
    }

    pub fn add_term(&mut self, exps: Exponents, c: f64) {
        if c == 0.0 {
            return;
        }
        match self.terms.entry(exps) {
            Entry::Vacant(v) => {
                v.insert(c);
            }
            Entry::Occupied(mut o) => {
                *o.get_mut() += c;
                if *o.get() == 0.0 {
                    o.remove();
                }
            }
        }
    }

    pub fn degree(&self) -> u32 {
        self.terms.keys().map(|e| e.iter().sum()).max().unwrap_or(0)
    }

    pub fn eval(&self, x: &[f64]) -> f64 {
        self.terms
            .iter()
            .map(|(e, c)| c * e.iter().zip(x).map(|(&k, v)| v.powi(k as i32)).product::<f64>())
            .sum()
    }

    pub fn scale(&self, s: f64) -> Self {
        if s == 0.0 {
            return Self::zero(self.nvars);
        }
        Self {
            nvars: self.nvars,
            terms: self.terms.iter().map(|(e, c)| (e.clone(), c * s)).collect(),
        }
    }

    pub fn add(&self, other: &Self) -> Self {
        assert_eq!(self.nvars, other.nvars);
        let mut out = self.clone();
        for (e, c) in &other.terms {
            out.add_term(e.clone(), *c);
        }
        out
    }

    pub fn sub(&self, other: &Self) -> Self {
        self.add(&other.scale(-1.0))
    }

    pub fn mul(&self, other: &Self) -> Self {
        assert_eq!(self.nvars, other.nvars);
        let mut out = Self::zero(self.nvars);
        for (a, ca) in &self.terms {
            for (b, cb) in &other.terms {
                let e = a.iter().zip(b).map(|(x, y)| x + y).collect();
                out.add_term(e, ca * cb);
            }
        }
        out
    }

    pub fn pow(&self, k: u32) -> Self {
        let mut out = Self::constant(self.nvars, 1.0);
        for _ in 0..k {
            out = out.mul(self);
        }
        out
    }

    /// ∂/∂x_i
    pub fn derivative(&self, i: usize) -> Self {
        let mut out = Self::zero(self.nvars);
        for (e, c) in &self.terms {
            if e[i] > 0 {
                let mut d = e.clone();
                d[i] -= 1;
                out.add_term(d, c * e[i] as f64);
            }
        }
        out
    }

    /// Substitutes `x_i ↦ subs[i]`; the result lives in the variables of `subs`.
    pub fn compose(&self, subs: &[Poly]) -> Self {
        assert_eq!(subs.len(), self.nvars);
        let m = subs.first().map(|p| p.nvars).unwrap_or(0);
        let mut cache: Vec<Vec<Poly>> = subs.iter().map(|p| vec![Poly::constant(m, 1.0), p.clone()]).collect();
        let mut out = Poly::zero(m);
        for (e, c) in &self.terms {
            let mut term = Poly::constant(m, *c);
            for (i, &k) in e.iter().enumerate() {
                if k == 0 {
                    continue;
                }
                while cache[i].len() <= k as usize {
                    let next = cache[i].last().unwrap().mul(&subs[i]);
                    cache[i].push(next);
                }
                term = term.mul(&cache[i][k as usize]);
            }
            out = out.add(&term);
        }
        out
    }

    /// `p(x + o)` as a polynomial in `x`.
    pub fn shift(&self, o: &[f64]) -> Self {
        let subs: Vec<Poly> = (0..self.nvars)
            .map(|i| Poly::var(self.nvars, i).add(&Poly::constant(self.nvars, o[i])))
            .collect();
        self.compose(&subs)
    }

    pub fn weighted_degree(exps: &[u32], weights: &[u32]) -> u32 {
        exps.iter().zip(weights).map(|(e, w)| e * w).sum()
    }

    /// Keeps only monomials whose weighted degree satisfies `keep`.
    pub fn filter_weighted(&self, weights: &[u32], keep: impl Fn(u32) -> bool) -> Self {
        Self {
            nvars: self.nvars,
            terms: self
                .terms
                .iter()
                .filter(|(e, _)| keep(Self::weighted_degree(e, weights)))
                .map(|(e, c)| (e.clone(), *c))
                .collect(),
        }
    }

    /// Drops coefficients with `|c| ≤ tol`.
    pub fn prune(&self, tol: f64) -> Self {
        Self {
            nvars: self.nvars,
            terms: self
                .terms
                .iter()
                .filter(|(_, c)| c.abs() > tol)
                .map(|(e, c)| (e.clone(), *c))
                .collect(),
        }
    }

    pub fn max_abs_diff(&self, other: &Self) -> f64 {
        self.sub(other).terms.values().fold(0.0, |m, c| m.max(c.abs()))
    }
}

impl fmt::Display for Poly {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.terms.is_empty() {
            return write!(f, "0");
        }
        let mut first = true;
        for (e, c) in &self.terms {
            if !first {
                write!(f, " + ")?;
            }
            first = false;
            write!(f, "{c}")?;
            for (i, &k) in e.iter().enumerate() {
                match k {
                    0 => {}
                    1 => write!(f, "·x{}", i + 1)?,
                    _ => write!(f, "·x{}^{k}", i + 1)?,
                }
            }
        }
        Ok(())
    }
}

/// Vector field `Σ_i a_i(x) ∂_i` with polynomial coefficients.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PolyVectorField {
    components: Vec<Poly>,
}

impl PolyVectorField {
    pub fn new(components: Vec<Poly>) -> Self {
        let n = components.len();
        assert!(components.iter().all(|p| p.nvars() == n), "field must be square");
        Self { components }
    }

    pub fn zero(n: usize) -> Self {
        Self::new((0..n).map(|_| Poly::zero(n)).collect())
    }

    /// Constant field `∂_i`.
    pub fn coordinate(n: usize, i: usize) -> Self {
        let mut c: Vec<Poly> = (0..n).map(|_| Poly::zero(n)).collect();
        c[i] = Poly::constant(n, 1.0);
        Self::new(c)
    }

    pub fn dim(&self) -> usize {
        self.components.len()
    }

    pub fn components(&self) -> &[Poly] {
        &self.components
    }

    pub fn component(&self, i: usize) -> &Poly {
        &self.components[i]
    }

    pub fn eval(&self, x: &[f64]) -> Vec<f64> {
        self.components.iter().map(|p| p.eval(x)).collect()
    }

    /// Lie derivative `X f = Σ_k a_k ∂_k f`.
    pub fn apply(&self, f: &Poly) -> Poly {
        let mut out = Poly::zero(self.dim());
        for (k, a) in self.components.iter().enumerate() {
            if a.is_zero() {
                continue;
            }
            let d = f.derivative(k);
            if !d.is_zero() {
                out = out.add(&a.mul(&d));
            }
        }
        out
    }

    pub fn add(&self, other: &Self) -> Self {
        Self::new(self.components.iter().zip(&other.components).map(|(a, b)| a.add(b)).collect())
    }

    pub fn scale(&self, s: f64) -> Self {
        Self::new(self.components.iter().map(|a| a.scale(s)).collect())
    }

    pub fn map_components(&self, f: impl Fn(usize, &Poly) -> Poly) -> Self {
        Self::new(self.components.iter().enumerate().map(|(i, p)| f(i, p)).collect())
    }

    pub fn is_zero(&self) -> bool {
        self.components.iter().all(Poly::is_zero)
    }

    pub fn prune(&self, tol: f64) -> Self {
        Self::new(self.components.iter().map(|p| p.prune(tol)).collect())
    }

    /// Largest coefficient difference over all components.
    pub fn max_coefficient_distance(&self, other: &Self) -> f64 {
        self.components
            .iter()
            .zip(&other.components)
            .map(|(a, b)| a.max_abs_diff(b))
            .fold(0.0, f64::max)
    }

    pub fn compile(&self) -> CompiledField {
        CompiledField::new(std::slice::from_ref(self))
    }
}

/// `[X, Y] = (DY)X − (DX)Y`, componentwise `X(Y^i) − Y(X^i)`.
pub fn lie_bracket(x: &PolyVectorField, y: &PolyVectorField) -> PolyVectorField {
    assert_eq!(x.dim(), y.dim(), "fields live on different charts");
    PolyVectorField::new(
        (0..x.dim())
            .map(|i| x.apply(y.component(i)).sub(&y.apply(x.component(i))))
            .collect(),
    )
}

/// Flattened form of one or more fields for fast repeated evaluation.
#[derive(Clone, Debug)]
pub struct CompiledField {
    n: usize,
    nfields: usize,
    max_pow: Vec<u32>,
    // (field, component, coefficient, offset into exps)
    terms: Vec<(usize, usize, f64)>,
    exps: Vec<u32>,
}

impl CompiledField {
    pub fn new(fields: &[PolyVectorField]) -> Self {
        let n = fields.first().map(|f| f.dim()).unwrap_or(0);
        let mut max_pow = vec![0; n];
        let mut terms = Vec::new();
        let mut exps = Vec::new();
        for (fi, f) in fields.iter().enumerate() {
            for (ci, p) in f.components().iter().enumerate() {
                for (e, c) in p.terms() {
                    for (k, &v) in e.iter().enumerate() {
                        max_pow[k] = max_pow[k].max(v);
                    }
                    terms.push((fi, ci, c));
                    exps.extend_from_slice(e);
                }
            }
        }
        Self {
            n,
            nfields: fields.len(),
            max_pow,
            terms,
            exps,
        }
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn nfields(&self) -> usize {
        self.nfields
    }

    /// Writes `Σ_f u_f X_f(x)` into `out`.
    pub fn combine(&self, u: &[f64], x: &[f64], out: &mut [f64]) {
        let n = self.n;
        let mut powers = [[1.0f64; 8]; 8];
        let fast = n <= 8 && self.max_pow.iter().all(|&m| m < 8);
        out.iter_mut().for_each(|v| *v = 0.0);
        if fast {
            for k in 0..n {
                for p in 1..=self.max_pow[k] as usize {
                    powers[k][p] = powers[k][p - 1] * x[k];
                }
            }
        }
        for (t, &(fi, ci, c)) in self.terms.iter().enumerate() {
            let w = u[fi];
            if w == 0.0 {
                continue;
            }
            let e = &self.exps[t * n..(t + 1) * n];
            let mut m = c * w;
            for k in 0..n {
                if e[k] != 0 {
                    m *= if fast {
                        powers[k][e[k] as usize]
                    } else {
                        x[k].powi(e[k] as i32)
                    };
                }
            }
            out[ci] += m;
        }
    }

    /// Evaluates every field at `x`: row `f` of the result is `X_f(x)`.
    pub fn eval_all(&self, x: &[f64]) -> Vec<Vec<f64>> {
        (0..self.nfields)
            .map(|f| {
                let mut u = vec![0.0; self.nfields];
                u[f] = 1.0;
                let mut out = vec![0.0; self.n];
                self.combine(&u, x, &mut out);
                out
            })
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn p(n: usize, terms: &[(&[u32], f64)]) -> Poly {
        Poly::from_terms(n, terms.iter().map(|(e, c)| (e.to_vec(), *c)))
    }

    #[test]
    fn arithmetic_and_derivative() {
        // (x + y)^2 = x^2 + 2xy + y^2
        let s = Poly::var(2, 0).add(&Poly::var(2, 1));
        let sq = s.pow(2);
        assert_eq!(sq.coefficient(&[1, 1]), 2.0);
        assert_eq!(sq.derivative(0), p(2, &[(&[1, 0], 2.0), (&[0, 1], 2.0)]));
        assert_eq!(sq.eval(&[1.5, -0.5]), 1.0);
        assert!(sq.sub(&sq).is_zero());
    }

    #[test]
    fn shift_and_compose() {
        let q = p(1, &[(&[2], 1.0)]);
        let shifted = q.shift(&[1.0]);
        assert_eq!(shifted, p(1, &[(&[2], 1.0), (&[1], 2.0), (&[0], 1.0)]));
        // x^2 ∘ (2y) = 4y^2 with one variable
        let c = q.compose(&[Poly::var(1, 0).scale(2.0)]);
        assert_eq!(c, p(1, &[(&[2], 4.0)]));
    }

    #[test]
    fn heisenberg_bracket() {
        let n = 3;
        let x = PolyVectorField::new(vec![
            Poly::constant(n, 1.0),
            Poly::zero(n),
            Poly::var(n, 1).scale(-0.5),
        ]);
        let y = PolyVectorField::new(vec![
            Poly::zero(n),
            Poly::constant(n, 1.0),
            Poly::var(n, 0).scale(0.5),
        ]);
        assert_eq!(lie_bracket(&x, &y), PolyVectorField::coordinate(3, 2));
        assert!(lie_bracket(&x, &x).is_zero());
    }

    #[test]
    fn compiled_matches_direct() {
        let n = 3;
        let f = PolyVectorField::new(vec![
            p(n, &[(&[0, 0, 0], 1.0), (&[2, 1, 0], -0.3)]),
            p(n, &[(&[1, 0, 1], 2.0)]),
            p(n, &[(&[0, 3, 0], 0.7)]),
        ]);
        let g = PolyVectorField::coordinate(3, 1);
        let c = CompiledField::new(&[f.clone(), g.clone()]);
        let x = [0.4, -1.1, 2.0];
        let mut out = vec![0.0; 3];
        c.combine(&[0.5, -2.0], &x, &mut out);
        let fx = f.eval(&x);
        let gx = g.eval(&x);
        for i in 0..3 {
            assert!((out[i] - (0.5 * fx[i] - 2.0 * gx[i])).abs() < 1e-14);
        }
    }
}

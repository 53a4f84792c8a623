//! Damped Newton preimage solves and multiplicity counts.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use super::{QrError, Region, SmoothMapModel};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct NewtonOptions {
    pub starts: usize,
    pub max_iterations: usize,
    /// Residual tolerance relative to `1 + |y|`.
    pub tolerance: f64,
    /// Roots closer than this (relative to `1 + |x|`) are merged.
    pub dedupe: f64,
    pub fd_step: f64,
    /// Use catalogue preimages instead of Newton when the map provides them.
    pub exact: bool,
}

impl Default for NewtonOptions {
    fn default() -> Self {
        Self {
            starts: 64,
            max_iterations: 50,
            tolerance: 1e-11,
            dedupe: 1e-6,
            fd_step: 1e-6,
            exact: false,
        }
    }
}

fn max_abs(v: &[f64]) -> f64 {
    v.iter().fold(0.0, |m, x| m.max(x.abs()))
}

fn residual(f: &SmoothMapModel, x: &[f64], y: &[f64]) -> Vec<f64> {
    f.eval(x).iter().zip(y).map(|(a, b)| a - b).collect()
}

/// Solves `f(x) = y` from `start`; `None` when the iteration stalls.
pub fn solve_preimage(f: &SmoothMapModel, y: &[f64], start: &[f64], opts: &NewtonOptions) -> Option<Vec<f64>> {
    let n = start.len();
    let tol = opts.tolerance * (1.0 + max_abs(y));
    let mut x = start.to_vec();
    let mut res = residual(f, &x, y);
    let mut norm = max_abs(&res);
    for _ in 0..opts.max_iterations {
        if !norm.is_finite() {
            return None;
        }
        if norm <= tol {
            return Some(x);
        }
        let mut jac = DMatrix::zeros(res.len(), n);
        for j in 0..n {
            let h = opts.fd_step * (1.0 + x[j].abs());
            let mut xp = x.clone();
            xp[j] += h;
            let mut xm = x.clone();
            xm[j] -= h;
            let (fp, fm) = (f.eval(&xp), f.eval(&xm));
            for i in 0..res.len() {
                jac[(i, j)] = (fp[i] - fm[i]) / (2.0 * h);
            }
        }
        let rhs = -DVector::from_column_slice(&res);
        let step = match jac.clone().lu().solve(&rhs) {
            Some(s) if s.iter().all(|v| v.is_finite()) => s,
            _ => jac.svd(true, true).solve(&rhs, 1e-12).ok()?,
        };
        let mut t = 1.0;
        let mut accepted = false;
        for _ in 0..30 {
            let trial: Vec<f64> = x.iter().zip(step.iter()).map(|(a, s)| a + t * s).collect();
            let r = residual(f, &trial, y);
            let m = max_abs(&r);
            if m < norm {
                x = trial;
                res = r;
                norm = m;
                accepted = true;
                break;
            }
            t *= 0.5;
        }
        if !accepted {
            return None;
        }
    }
    (norm <= tol).then_some(x)
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct MultiplicityResult {
    pub target: Vec<f64>,
    pub count: usize,
    pub roots: Vec<Vec<f64>>,
    pub starts: usize,
    pub failures: usize,
    /// No start converged, so the count says nothing.
    pub incomplete: bool,
}

/// Like [`multiplicity_count`] with caller-supplied Newton starts.
pub fn multiplicity_with_starts(
    f: &SmoothMapModel,
    y: &[f64],
    starts: &[Vec<f64>],
    region: &Region,
    opts: &NewtonOptions,
) -> MultiplicityResult {
    let dom = f.domain.as_ref();
    let mut failures = 0;
    let mut roots: Vec<Vec<f64>> = Vec::new();
    let mut push = |x: Vec<f64>| {
        if !region.contains(dom, &x) {
            return;
        }
        let scale = 1.0 + max_abs(&x);
        if roots
            .iter()
            .all(|r| r.iter().zip(&x).fold(0.0f64, |m, (a, b)| m.max((a - b).abs())) > opts.dedupe * scale)
        {
            roots.push(x);
        }
    };
    let exact = if opts.exact { f.preimages(y) } else { None };
    if let Some(pre) = exact {
        pre.into_iter().for_each(&mut push);
    } else {
        for s in starts {
            match solve_preimage(f, y, s, opts) {
                Some(x) => push(x),
                None => failures += 1,
            }
        }
    }
    MultiplicityResult {
        target: y.to_vec(),
        count: roots.len(),
        roots,
        starts: starts.len(),
        failures,
        incomplete: !starts.is_empty() && failures == starts.len() && !opts.exact,
    }
}

/// `N(y, f, A)` by multi-start Newton with deduplicated roots.
pub fn multiplicity_count(
    f: &SmoothMapModel,
    y: &[f64],
    region: &Region,
    opts: &NewtonOptions,
) -> Result<MultiplicityResult, QrError> {
    if y.len() != f.target.dim() || region.dim() != f.domain.dim() {
        return Err(QrError::Dimension("target or region has the wrong dimension".into()));
    }
    let starts = region.starts(f.domain.as_ref(), opts.starts);
    Ok(multiplicity_with_starts(f, y, &starts, region, opts))
}

use serde::{Deserialize, Serialize};

use super::grid::Incidence;
use super::{CurveFamily, DensityGrid, ModulusError};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ModulusOptions {
    pub max_outer: usize,
    pub max_inner: usize,
    /// Largest accepted constraint violation before rescaling.
    pub tolerance: f64,
    /// Relative objective change that ends the outer loop.
    pub rel_tolerance: f64,
}

impl Default for ModulusOptions {
    fn default() -> Self {
        Self {
            max_outer: 200,
            max_inner: 500,
            tolerance: 1e-9,
            rel_tolerance: 1e-10,
        }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ModulusResult {
    /// `Σ ρ^p μ(cell)` of the rescaled, admissible density.
    pub value: f64,
    pub p: f64,
    pub rho: DensityGrid,
    /// `max(0, 1 − min_γ ∫_γ ρ ds)` after rescaling.
    pub worst_violation: f64,
    /// Smallest curve integral before rescaling.
    pub min_integral_before_rescaling: f64,
    pub iterations: usize,
    pub curves: usize,
    /// Dual lower bound, when the solver produces one.
    pub lower_bound: Option<f64>,
}

struct Program {
    rows: Vec<Incidence>,
    mu: f64,
    p: f64,
}

impl Program {
    fn build(family: &CurveFamily, shape: &[usize], p: f64) -> Result<(Self, DensityGrid), ModulusError> {
        if !(p >= 1.0) {
            return Err(ModulusError::Exponent(p));
        }
        let grid = DensityGrid::zeros(family.lo.clone(), family.hi.clone(), shape.to_vec())?;
        let rows = grid.incidence(family)?;
        if rows.iter().any(|r| r.iter().all(|e| e.1 <= 0.0)) {
            return Err(ModulusError::InvalidGrid("a curve does not meet the grid".into()));
        }
        let mu = grid.cell_volume();
        Ok((Self { rows, mu, p }, grid))
    }

    fn integrals(&self, rho: &[f64]) -> Vec<f64> {
        self.rows.iter().map(|r| r.iter().map(|&(k, l)| rho[k] * l).sum()).collect()
    }

    fn energy(&self, rho: &[f64]) -> f64 {
        self.mu * rho.iter().map(|v| v.powf(self.p)).sum::<f64>()
    }

    /// Augmented Lagrangian value and gradient.
    fn lagrangian(&self, rho: &[f64], lambda: &[f64], c: f64, grad: Option<&mut Vec<f64>>) -> f64 {
        let ints = self.integrals(rho);
        let mut val = self.energy(rho);
        let mut weights = vec![0.0; ints.len()];
        for i in 0..ints.len() {
            let s = (lambda[i] + c * (1.0 - ints[i])).max(0.0);
            val += (s * s - lambda[i] * lambda[i]) / (2.0 * c);
            weights[i] = s;
        }
        if let Some(g) = grad {
            for (gk, r) in g.iter_mut().zip(rho) {
                *gk = self.mu * self.p * r.powf(self.p - 1.0);
            }
            for (i, row) in self.rows.iter().enumerate() {
                if weights[i] > 0.0 {
                    for &(k, l) in row {
                        g[k] -= weights[i] * l;
                    }
                }
            }
        }
        val
    }

    fn finish(&self, mut grid: DensityGrid, mut rho: Vec<f64>, iterations: usize, lower: Option<f64>) -> ModulusResult {
        let ints = self.integrals(&rho);
        let min = ints.iter().copied().fold(f64::INFINITY, f64::min);
        if min > 0.0 {
            rho.iter_mut().for_each(|v| *v /= min);
        }
        let after = self.integrals(&rho).into_iter().fold(f64::INFINITY, f64::min);
        grid.values = rho;
        ModulusResult {
            value: self.energy(&grid.values),
            p: self.p,
            worst_violation: (1.0 - after).max(0.0),
            min_integral_before_rescaling: min,
            iterations,
            curves: self.rows.len(),
            lower_bound: lower,
            rho: grid,
        }
    }
}

/// Discrete `Mod_p` over a grid of the family's chart bounds: projected
/// gradient (accelerated, with backtracking) on an augmented Lagrangian, then
/// rescaling by the smallest curve integral so the density is admissible.
pub fn modulus_p(family: &CurveFamily, shape: &[usize], p: f64, opts: &ModulusOptions) -> Result<ModulusResult, ModulusError> {
    let (prog, grid) = Program::build(family, shape, p)?;
    let m = prog.rows.len();
    let n = grid.cells();
    let min_len = prog
        .rows
        .iter()
        .map(|r| r.iter().map(|e| e.1).sum::<f64>())
        .fold(f64::INFINITY, f64::min);
    let mut rho = vec![1.0 / min_len; n];
    let mut lambda = vec![0.0; m];
    let f0 = prog.energy(&rho).max(f64::MIN_POSITIVE);
    let mut c = 10.0 * f0 * prog.p;
    let c_max = 1e12 * c;
    let mut lip = 1.0;
    let mut grad = vec![0.0; n];
    let mut iterations = 0;
    let mut prev_violation = f64::INFINITY;
    let mut prev_energy = f64::INFINITY;
    for _outer in 0..opts.max_outer {
        let mut x_prev = rho.clone();
        let mut y = rho.clone();
        let mut t = 1.0f64;
        let mut phi_prev = prog.lagrangian(&x_prev, &lambda, c, None);
        for _inner in 0..opts.max_inner {
            iterations += 1;
            let phi_y = prog.lagrangian(&y, &lambda, c, Some(&mut grad));
            let mut x;
            let mut phi_x;
            loop {
                x = y.iter().zip(&grad).map(|(a, g)| (a - g / lip).max(0.0)).collect::<Vec<_>>();
                phi_x = prog.lagrangian(&x, &lambda, c, None);
                let (mut lin, mut quad) = (0.0, 0.0);
                for k in 0..n {
                    let d = x[k] - y[k];
                    lin += grad[k] * d;
                    quad += d * d;
                }
                if phi_x <= phi_y + lin + 0.5 * lip * quad + 1e-14 * phi_y.abs() || lip > 1e30 {
                    break;
                }
                lip *= 2.0;
            }
            let step = x.iter().zip(&x_prev).fold(0.0f64, |m, (a, b)| m.max((a - b).abs()));
            let scale = x.iter().fold(0.0f64, |m, a| m.max(a.abs())).max(f64::MIN_POSITIVE);
            if phi_x > phi_prev {
                // Adaptive restart of the momentum.
                t = 1.0;
                y = x.clone();
            } else {
                let t_next = 0.5 * (1.0 + (1.0 + 4.0 * t * t).sqrt());
                y = x.iter().zip(&x_prev).map(|(a, b)| a + (t - 1.0) / t_next * (a - b)).collect();
                t = t_next;
            }
            x_prev = x;
            phi_prev = phi_x;
            lip *= 0.9;
            if step <= 1e-12 * scale {
                break;
            }
        }
        rho = x_prev;
        let ints = prog.integrals(&rho);
        let violation = ints.iter().map(|v| 1.0 - v).fold(0.0f64, f64::max);
        for i in 0..m {
            lambda[i] = (lambda[i] + c * (1.0 - ints[i])).max(0.0);
        }
        let energy = prog.energy(&rho);
        if violation <= opts.tolerance && (energy - prev_energy).abs() <= opts.rel_tolerance * energy {
            break;
        }
        if violation > 0.25 * prev_violation && c < c_max {
            c *= 4.0;
        }
        prev_violation = violation;
        prev_energy = energy;
    }
    Ok(prog.finish(grid, rho, iterations, None))
}

/// Reference solver: coordinate ascent on the dual of the discrete program
/// (`p > 1`), run until the multipliers stop moving. Returns the rescaled
/// primal value with the dual value as a lower bound.
pub fn modulus_exhaustive(
    family: &CurveFamily,
    shape: &[usize],
    p: f64,
    max_sweeps: usize,
) -> Result<ModulusResult, ModulusError> {
    if !(p > 1.0) {
        return Err(ModulusError::Exponent(p));
    }
    let (prog, grid) = Program::build(family, shape, p)?;
    let m = prog.rows.len();
    let q = 1.0 / (p - 1.0);
    let coef = 1.0 / (p * prog.mu);
    let mut lambda = vec![0.0; m];
    let mut s = vec![0.0; grid.cells()];
    let mut sweeps = 0;
    let integral = |s: &[f64], row: &Incidence, extra: f64| -> f64 {
        row.iter()
            .map(|&(k, l)| l * ((s[k] + extra * l) * coef).max(0.0).powf(q))
            .sum()
    };
    for _ in 0..max_sweeps {
        sweeps += 1;
        let mut moved = 0.0f64;
        for i in 0..m {
            let row = &prog.rows[i];
            for &(k, l) in row {
                s[k] -= lambda[i] * l;
            }
            let base = integral(&s, row, 0.0);
            let new = if base >= 1.0 {
                0.0
            } else {
                let mut hi = lambda[i].max(1e-300);
                while integral(&s, row, hi) < 1.0 {
                    hi *= 2.0;
                }
                let mut lo = 0.0;
                for _ in 0..200 {
                    let mid = 0.5 * (lo + hi);
                    if integral(&s, row, mid) < 1.0 {
                        lo = mid;
                    } else {
                        hi = mid;
                    }
                    if hi - lo <= 1e-15 * hi {
                        break;
                    }
                }
                0.5 * (lo + hi)
            };
            moved = moved.max((new - lambda[i]).abs() / new.max(lambda[i]).max(1e-300));
            lambda[i] = new;
            for &(k, l) in row {
                s[k] += lambda[i] * l;
            }
        }
        if moved < 1e-13 {
            break;
        }
    }
    let rho: Vec<f64> = s.iter().map(|v| (v * coef).max(0.0).powf(q)).collect();
    let dual = lambda.iter().sum::<f64>() - (p - 1.0) * prog.energy(&rho);
    Ok(prog.finish(grid, rho, sweeps, Some(dual)))
}

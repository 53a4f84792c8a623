//! CC distance by direct transcription of the optimal control problem.
//!
//! Controls are piecewise constant on `segments` equal pieces of `[0, 1]`.
//! The solver minimizes the energy `Σ|u_k|²Δt` plus an endpoint penalty
//! `μ‖γ(1) − q‖²` with Levenberg-Marquardt steps, raising `μ` over a fixed
//! schedule, then projects the endpoint onto `q` with minimum-norm Newton
//! steps. Energy minimizers run at constant speed, so the reported length
//! `Σ|u_k|Δt` is the length-minimizing value as well.

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::frame::HorizontalFrame;
use crate::ode::rk4;
use crate::util::{standard_normal as normal, task_rng};

use super::MetricError;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DistanceOptions {
    pub segments: usize,
    /// RK4 steps per control segment.
    pub substeps: usize,
    /// Straight-line lift plus `starts − 1` random starts.
    pub starts: usize,
    pub penalties: Vec<f64>,
    pub max_iterations: usize,
    /// Endpoint error accepted as converged.
    pub tolerance: f64,
    pub seed: u64,
    pub parallel: bool,
}

impl Default for DistanceOptions {
    fn default() -> Self {
        Self {
            segments: 64,
            substeps: 2,
            starts: 8,
            penalties: vec![1e2, 1e3, 1e4, 1e5, 1e6, 1e7],
            max_iterations: 60,
            tolerance: 1e-6,
            seed: 0,
            parallel: true,
        }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct DistanceResult {
    /// Length of the best horizontal curve found (an upper bound for d(p, q)).
    pub value: f64,
    pub endpoint_error: f64,
    /// One control vector per segment.
    pub controls: Vec<Vec<f64>>,
    pub restarts_used: usize,
    pub converged: bool,
    pub seed: u64,
}

struct Transcription<'a> {
    frame: &'a HorizontalFrame,
    p: &'a [f64],
    q: &'a [f64],
    n: usize,
    r: usize,
    segments: usize,
    dt: f64,
    substeps: usize,
}

impl Transcription<'_> {
    fn segment(&self, x: &mut [f64], u: &[f64]) {
        let h = self.dt / self.substeps as f64;
        rk4(|y, dy| self.frame.velocity(u, y, dy), x, h, self.substeps);
    }

    fn endpoint(&self, u: &[f64]) -> Vec<f64> {
        let mut x = self.p.to_vec();
        for k in 0..self.segments {
            self.segment(&mut x, &u[k * self.r..(k + 1) * self.r]);
        }
        x
    }

    /// Endpoint and its Jacobian with respect to all controls.
    fn jacobian(&self, u: &[f64]) -> (Vec<f64>, DMatrix<f64>) {
        let (n, r) = (self.n, self.r);
        let mut states = Vec::with_capacity(self.segments + 1);
        let mut x = self.p.to_vec();
        states.push(x.clone());
        for k in 0..self.segments {
            self.segment(&mut x, &u[k * r..(k + 1) * r]);
            states.push(x.clone());
        }
        let mut jac = DMatrix::zeros(n, self.segments * r);
        let mut phi = DMatrix::<f64>::identity(n, n);
        let mut s_k = DMatrix::<f64>::zeros(n, n);
        let mut c_k = DMatrix::<f64>::zeros(n, r);
        let mut plus = vec![0.0; n];
        let mut minus = vec![0.0; n];
        for k in (0..self.segments).rev() {
            let uk = &u[k * r..(k + 1) * r];
            let xk = &states[k];
            for i in 0..n {
                let h = 1e-6 * (1.0 + xk[i].abs());
                plus.copy_from_slice(xk);
                plus[i] += h;
                self.segment(&mut plus, uk);
                minus.copy_from_slice(xk);
                minus[i] -= h;
                self.segment(&mut minus, uk);
                for a in 0..n {
                    s_k[(a, i)] = (plus[a] - minus[a]) / (2.0 * h);
                }
            }
            let mut up = uk.to_vec();
            for j in 0..r {
                let h = 1e-6 * (1.0 + uk[j].abs());
                up[j] = uk[j] + h;
                plus.copy_from_slice(xk);
                self.segment(&mut plus, &up);
                up[j] = uk[j] - h;
                minus.copy_from_slice(xk);
                self.segment(&mut minus, &up);
                up[j] = uk[j];
                for a in 0..n {
                    c_k[(a, j)] = (plus[a] - minus[a]) / (2.0 * h);
                }
            }
            let block = &phi * &c_k;
            jac.view_mut((0, k * r), (n, r)).copy_from(&block);
            phi = &phi * &s_k;
        }
        (states.pop().unwrap(), jac)
    }

    fn residual(&self, e: &[f64]) -> DVector<f64> {
        DVector::from_iterator(self.n, e.iter().zip(self.q).map(|(a, b)| a - b))
    }

    fn energy(&self, u: &[f64]) -> f64 {
        u.iter().map(|v| v * v).sum::<f64>() * self.dt
    }

    fn length(&self, u: &[f64]) -> f64 {
        u.chunks(self.r)
            .map(|c| c.iter().map(|v| v * v).sum::<f64>().sqrt())
            .sum::<f64>()
            * self.dt
    }

    /// Damped structured quasi-Newton on `½(energy + μ|E(u) − q|²)`.
    ///
    /// The Hessian model is `Δt·I + μJᵀJ + S`, where `S` approximates the
    /// constraint curvature `μ Σ_i res_i ∇²E_i` by symmetric secant (PSB)
    /// updates. `μ·res` tends to the Lagrange multiplier, so `S` carries over
    /// between penalty rounds.
    fn penalized(&self, u: &mut Vec<f64>, mu: f64, max_iter: usize, s_mat: &mut DMatrix<f64>) {
        let m = u.len();
        let mut lambda = 1e-3 * self.dt;
        let (e, mut jac) = self.jacobian(u);
        let mut res = self.residual(&e);
        let mut value = self.energy(u) + mu * res.norm_squared();
        for _ in 0..max_iter {
            let uv = DVector::from_column_slice(u);
            let g = &uv * self.dt + jac.transpose() * &res * mu;
            let base = jac.transpose() * &jac * mu + &*s_mat;
            let mut accepted = None;
            for _ in 0..40 {
                let mut h = base.clone();
                for i in 0..m {
                    h[(i, i)] += self.dt + lambda;
                }
                let Some(chol) = h.cholesky() else {
                    lambda = (lambda * 4.0).max(1e-6 * self.dt);
                    continue;
                };
                let step = -chol.solve(&g);
                let trial: Vec<f64> = u.iter().zip(step.iter()).map(|(x, d)| x + d).collect();
                let tres = self.residual(&self.endpoint(&trial));
                let tval = self.energy(&trial) + mu * tres.norm_squared();
                if tval.is_finite() && tval < value {
                    accepted = Some((trial, step, tval));
                    break;
                }
                lambda = (lambda * 4.0).max(1e-6 * self.dt);
            }
            let Some((trial, step, tval)) = accepted else { break };
            let gain = value - tval;
            *u = trial;
            value = tval;
            lambda = (lambda / 4.0).max(1e-12 * self.dt);
            let (e, jac_new) = self.jacobian(u);
            res = self.residual(&e);
            let y = (&jac_new - &jac).transpose() * (&res * mu);
            jac = jac_new;
            let ss = step.norm_squared();
            if ss > 0.0 {
                let r = &y - &*s_mat * &step;
                let rs = r.dot(&step);
                *s_mat += (&r * step.transpose() + &step * r.transpose()) / ss
                    - (&step * step.transpose()) * (rs / (ss * ss));
            }
            if gain <= 1e-15 * value.max(1e-300) {
                break;
            }
        }
    }

    /// Minimum-norm Newton steps onto the constraint `E(u) = q`.
    fn project(&self, u: &mut Vec<f64>) -> f64 {
        let mut err = self.residual(&self.endpoint(u)).norm();
        for _ in 0..10 {
            if err <= 1e-14 * (1.0 + crate::util::norm2(self.q)) {
                break;
            }
            let (e, jac) = self.jacobian(u);
            let res = -self.residual(&e);
            let jjt = &jac * jac.transpose();
            let Some(lu) = jjt.clone().cholesky() else { break };
            let step = jac.transpose() * lu.solve(&res);
            let trial: Vec<f64> = u.iter().zip(step.iter()).map(|(x, d)| x + d).collect();
            let terr = self.residual(&self.endpoint(&trial)).norm();
            if !(terr < err) {
                break;
            }
            *u = trial;
            err = terr;
        }
        err
    }
}

/// Rough homogeneous size of `q − p` with the weights at `p`.
fn scale_estimate(frame: &HorizontalFrame, p: &[f64], q: &[f64]) -> f64 {
    let weights = frame
        .growth_vector_at(p)
        .map(|g| g.weights)
        .unwrap_or_else(|_| vec![1; p.len()]);
    let mut w_sorted = weights;
    w_sorted.sort_unstable();
    p.iter()
        .zip(q)
        .zip(&w_sorted)
        .map(|((a, b), &w)| (b - a).abs().powf(1.0 / w as f64))
        .fold(0.0, f64::max)
}

/// Upper estimate of the CC distance from `p` to `q`.
pub fn cc_distance(
    frame: &HorizontalFrame,
    p: &[f64],
    q: &[f64],
    opts: &DistanceOptions,
) -> Result<DistanceResult, MetricError> {
    let n = frame.dim();
    if p.len() != n || q.len() != n {
        return Err(MetricError::Dimension(format!("points must have {n} coordinates")));
    }
    if opts.segments == 0 || opts.substeps == 0 || opts.starts == 0 {
        return Err(MetricError::Options("segments, substeps and starts must be positive".into()));
    }
    let r = frame.rank();
    if p == q {
        return Ok(DistanceResult {
            value: 0.0,
            endpoint_error: 0.0,
            controls: vec![vec![0.0; r]; opts.segments],
            restarts_used: 0,
            converged: true,
            seed: opts.seed,
        });
    }
    let tr = Transcription {
        frame,
        p,
        q,
        n,
        r,
        segments: opts.segments,
        dt: 1.0 / opts.segments as f64,
        substeps: opts.substeps,
    };

    // Straight-line lift: least-squares controls for q − p at p.
    let fm = frame.frame_matrix(p);
    let dq = DVector::from_iterator(n, q.iter().zip(p).map(|(a, b)| a - b));
    let lift = fm
        .clone()
        .svd(true, true)
        .solve(&dq, 1e-12)
        .unwrap_or_else(|_| DVector::zeros(r));
    let rho = scale_estimate(frame, p, q).max(1e-12);

    let run = |start: usize| -> (Vec<f64>, f64, f64) {
        let mut u: Vec<f64> = Vec::with_capacity(opts.segments * r);
        let mut rng = task_rng(opts.seed, start as u64);
        let modes: Vec<Vec<(f64, f64)>> = (0..r)
            .map(|_| {
                (1..=3)
                    .map(|_| (normal(&mut rng), normal(&mut rng)))
                    .collect()
            })
            .collect();
        let omega_shift: f64 = rng.random::<f64>();
        for k in 0..opts.segments {
            let t = (k as f64 + 0.5) * tr.dt;
            for j in 0..r {
                let mut v = lift[j];
                if start > 0 {
                    for (m, (a, b)) in modes[j].iter().enumerate() {
                        let w = std::f64::consts::TAU * (m as f64 + omega_shift);
                        v += rho * (a * (w * t).cos() + b * (w * t).sin()) / 3f64.sqrt();
                    }
                }
                u.push(v);
            }
        }
        let mut s_mat = DMatrix::zeros(u.len(), u.len());
        for &mu in &opts.penalties {
            tr.penalized(&mut u, mu / (rho * rho).max(1e-300), opts.max_iterations, &mut s_mat);
        }
        let err = tr.project(&mut u);
        let len = tr.length(&u);
        (u, len, err)
    };

    let runs: Vec<(Vec<f64>, f64, f64)> = if opts.parallel {
        (0..opts.starts).into_par_iter().map(run).collect()
    } else {
        (0..opts.starts).map(run).collect()
    };

    let ok = |e: f64| e <= opts.tolerance;
    let best = runs
        .iter()
        .enumerate()
        .min_by(|(_, a), (_, b)| match (ok(a.2), ok(b.2)) {
            (true, false) => std::cmp::Ordering::Less,
            (false, true) => std::cmp::Ordering::Greater,
            (true, true) => a.1.total_cmp(&b.1),
            (false, false) => a.2.total_cmp(&b.2),
        })
        .map(|(i, _)| i)
        .expect("at least one start");
    let (u, value, err) = &runs[best];
    Ok(DistanceResult {
        value: *value,
        endpoint_error: *err,
        controls: u.chunks(r).map(|c| c.to_vec()).collect(),
        restarts_used: opts.starts,
        converged: ok(*err),
        seed: opts.seed,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn straight_segment() {
        let f = HorizontalFrame::heisenberg();
        let res = cc_distance(&f, &[0.0; 3], &[1.0, 0.0, 0.0], &DistanceOptions::default()).unwrap();
        assert!((res.value - 1.0).abs() < 1e-3, "{}", res.value);
        assert!(res.endpoint_error < 1e-6);
    }

    #[test]
    fn same_point() {
        let f = HorizontalFrame::engel();
        let p = [0.1, 0.2, 0.3, 0.4];
        assert_eq!(cc_distance(&f, &p, &p, &DistanceOptions::default()).unwrap().value, 0.0);
    }
}

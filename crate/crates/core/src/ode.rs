//! Explicit Runge-Kutta integrators for flows of vector fields.

use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum OdeError {
    #[error("step size underflow at t = {t}")]
    StepUnderflow { t: f64, state: Vec<f64> },
    #[error("step budget exhausted at t = {t}")]
    TooManySteps { t: f64, state: Vec<f64> },
    #[error("non-finite state at t = {t}")]
    NonFinite { t: f64, state: Vec<f64> },
}

impl OdeError {
    /// Last accepted state before the failure.
    pub fn last_state(&self) -> &[f64] {
        match self {
            OdeError::StepUnderflow { state, .. }
            | OdeError::TooManySteps { state, .. }
            | OdeError::NonFinite { state, .. } => state,
        }
    }
}

#[derive(Clone, Copy, Debug)]
pub struct OdeOptions {
    pub rtol: f64,
    pub atol: f64,
    pub h_min: f64,
    pub max_steps: usize,
}

impl Default for OdeOptions {
    fn default() -> Self {
        Self {
            rtol: 1e-9,
            atol: 1e-12,
            h_min: 1e-14,
            max_steps: 200_000,
        }
    }
}

// Dormand-Prince 5(4) tableau.
const C: [f64; 7] = [0.0, 1.0 / 5.0, 3.0 / 10.0, 4.0 / 5.0, 8.0 / 9.0, 1.0, 1.0];
const A: [[f64; 6]; 7] = [
    [0.0; 6],
    [1.0 / 5.0, 0.0, 0.0, 0.0, 0.0, 0.0],
    [3.0 / 40.0, 9.0 / 40.0, 0.0, 0.0, 0.0, 0.0],
    [44.0 / 45.0, -56.0 / 15.0, 32.0 / 9.0, 0.0, 0.0, 0.0],
    [19372.0 / 6561.0, -25360.0 / 2187.0, 64448.0 / 6561.0, -212.0 / 729.0, 0.0, 0.0],
    [9017.0 / 3168.0, -355.0 / 33.0, 46732.0 / 5247.0, 49.0 / 176.0, -5103.0 / 18656.0, 0.0],
    [35.0 / 384.0, 0.0, 500.0 / 1113.0, 125.0 / 192.0, -2187.0 / 6784.0, 11.0 / 84.0],
];
const B5: [f64; 7] = [35.0 / 384.0, 0.0, 500.0 / 1113.0, 125.0 / 192.0, -2187.0 / 6784.0, 11.0 / 84.0, 0.0];
const B4: [f64; 7] = [
    5179.0 / 57600.0,
    0.0,
    7571.0 / 16695.0,
    393.0 / 640.0,
    -92097.0 / 339200.0,
    187.0 / 2100.0,
    1.0 / 40.0,
];

/// Integrates `y' = f(t, y)` from `t0` to `t1` with adaptive Dormand-Prince 5(4).
pub fn integrate<F>(mut f: F, t0: f64, t1: f64, y0: &[f64], opts: &OdeOptions) -> Result<Vec<f64>, OdeError>
where
    F: FnMut(f64, &[f64], &mut [f64]),
{
    let n = y0.len();
    let mut y = y0.to_vec();
    if t1 == t0 {
        return Ok(y);
    }
    let dir = (t1 - t0).signum();
    let span = (t1 - t0).abs();
    let mut t = t0;
    let mut h = span.min(0.1 * span.max(1e-3));
    let mut k = vec![vec![0.0; n]; 7];
    let mut tmp = vec![0.0; n];
    let mut y5 = vec![0.0; n];
    f(t, &y, &mut k[0]);
    let mut steps = 0;
    while (t1 - t) * dir > 0.0 {
        if steps >= opts.max_steps {
            return Err(OdeError::TooManySteps { t, state: y });
        }
        steps += 1;
        let remaining = (t1 - t).abs();
        let last = h >= remaining;
        if last {
            h = remaining;
        }
        let hs = h * dir;
        for s in 1..7 {
            for i in 0..n {
                let mut acc = y[i];
                for (j, kj) in k.iter().enumerate().take(s) {
                    acc += hs * A[s][j] * kj[i];
                }
                tmp[i] = acc;
            }
            f(t + C[s] * hs, &tmp, &mut k[s]);
        }
        let mut err = 0.0f64;
        for i in 0..n {
            let mut hi = y[i];
            let mut lo = y[i];
            for s in 0..7 {
                hi += hs * B5[s] * k[s][i];
                lo += hs * B4[s] * k[s][i];
            }
            y5[i] = hi;
            let sc = opts.atol + opts.rtol * y[i].abs().max(hi.abs());
            err = err.max(((hi - lo) / sc).abs());
        }
        if !err.is_finite() || y5.iter().any(|v| !v.is_finite()) {
            if h <= opts.h_min {
                return Err(OdeError::NonFinite { t, state: y });
            }
            h *= 0.25;
            continue;
        }
        if err <= 1.0 {
            t = if last { t1 } else { t + hs };
            std::mem::swap(&mut y, &mut y5);
            // FSAL: the last stage is f at the new point.
            k.swap(0, 6);
            let factor = if err == 0.0 { 5.0 } else { (0.9 * err.powf(-0.2)).clamp(0.2, 5.0) };
            h *= factor;
        } else {
            h *= (0.9 * err.powf(-0.2)).clamp(0.1, 0.9);
            if h < opts.h_min {
                return Err(OdeError::StepUnderflow { t, state: y });
            }
        }
    }
    Ok(y)
}

/// `steps` classical RK4 steps of size `h` for an autonomous field.
pub fn rk4<F>(mut f: F, y: &mut [f64], h: f64, steps: usize)
where
    F: FnMut(&[f64], &mut [f64]),
{
    let n = y.len();
    let mut k1 = vec![0.0; n];
    let mut k2 = vec![0.0; n];
    let mut k3 = vec![0.0; n];
    let mut k4 = vec![0.0; n];
    let mut tmp = vec![0.0; n];
    for _ in 0..steps {
        f(y, &mut k1);
        for i in 0..n {
            tmp[i] = y[i] + 0.5 * h * k1[i];
        }
        f(&tmp, &mut k2);
        for i in 0..n {
            tmp[i] = y[i] + 0.5 * h * k2[i];
        }
        f(&tmp, &mut k3);
        for i in 0..n {
            tmp[i] = y[i] + h * k3[i];
        }
        f(&tmp, &mut k4);
        for i in 0..n {
            y[i] += h / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exponential_decay() {
        let y = integrate(|_, y, d| d[0] = -y[0], 0.0, 2.0, &[1.0], &OdeOptions::default()).unwrap();
        assert!((y[0] - (-2.0f64).exp()).abs() < 1e-9);
    }

    #[test]
    fn harmonic_oscillator_backwards() {
        let f = |_: f64, y: &[f64], d: &mut [f64]| {
            d[0] = y[1];
            d[1] = -y[0];
        };
        let opts = OdeOptions::default();
        let fwd = integrate(f, 0.0, 3.0, &[1.0, 0.0], &opts).unwrap();
        let back = integrate(f, 3.0, 0.0, &fwd, &opts).unwrap();
        assert!((back[0] - 1.0).abs() < 1e-8 && back[1].abs() < 1e-8);
    }

    #[test]
    fn blow_up_reports_last_state() {
        // y' = y^2 from y(0) = 1 blows up at t = 1.
        let err = integrate(|_, y, d| d[0] = y[0] * y[0], 0.0, 2.0, &[1.0], &OdeOptions::default()).unwrap_err();
        assert!(err.last_state()[0] > 1e3);
    }

    #[test]
    fn rk4_exact_on_cubic() {
        // y' = 3 t^2 written autonomously via (t, y).
        let mut y = [0.0, 0.0];
        rk4(|s, d| {
            d[0] = 1.0;
            d[1] = 3.0 * s[0] * s[0];
        }, &mut y, 0.5, 2);
        assert!((y[1] - 1.0).abs() < 1e-14);
    }
}

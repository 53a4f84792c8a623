//! Closed-form CC distance on the first Heisenberg group.
//!
//! Geodesics from the origin project to circular arcs. With `ρ` the horizontal
//! displacement, `φ ∈ (0, 2π)` the turning angle and `R` the arc radius, the
//! swept area is `|t| = R²(φ − sin φ)/2` and `ρ = 2R sin(φ/2)`, so `φ` solves
//! `(φ − sin φ) / (8 sin²(φ/2)) = |t|/ρ²` and the length is `Rφ`.

use std::f64::consts::PI;

/// `φ − sin φ`, with a series near zero.
fn phi_minus_sin(phi: f64) -> f64 {
    if phi < 0.05 {
        let p2 = phi * phi;
        phi * p2 / 6.0 * (1.0 - p2 / 20.0 * (1.0 - p2 / 42.0 * (1.0 - p2 / 72.0)))
    } else {
        phi - phi.sin()
    }
}

/// Turning angle for `τ = |t|/ρ² > 0`.
fn turning_angle(tau: f64) -> f64 {
    // f(φ) = φ − sin φ − 8τ sin²(φ/2): negative below the root, positive above.
    let f = |phi: f64| {
        let s = (0.5 * phi).sin();
        phi_minus_sin(phi) - 8.0 * tau * s * s
    };
    let df = |phi: f64| {
        let c = 1.0 - phi.cos();
        c - 4.0 * tau * phi.sin()
    };
    let (mut lo, mut hi) = (0.0, 2.0 * PI);
    let mut phi = if tau < 0.1 {
        12.0 * tau
    } else {
        2.0 * PI - 2.0 * (PI / (4.0 * tau)).sqrt().min(1.0).asin()
    };
    if !(phi > lo && phi < hi) {
        phi = 0.5 * (lo + hi);
    }
    for _ in 0..200 {
        let v = f(phi);
        if v < 0.0 {
            lo = phi;
        } else {
            hi = phi;
        }
        let d = df(phi);
        let mut next = phi - v / d;
        if !(next > lo && next < hi) || !next.is_finite() {
            next = 0.5 * (lo + hi);
        }
        if (next - phi).abs() <= 4.0 * f64::EPSILON * phi.max(1e-300) || hi - lo <= 4.0 * f64::EPSILON * hi {
            return next;
        }
        phi = next;
    }
    phi
}

/// `d(0, (x, y, t))` for the frame `∂x − (y/2)∂t`, `∂y + (x/2)∂t`.
pub fn heisenberg_norm(x: f64, y: f64, t: f64) -> f64 {
    let rho = x.hypot(y);
    let at = t.abs();
    if at == 0.0 {
        return rho;
    }
    if rho == 0.0 {
        return 2.0 * (PI * at).sqrt();
    }
    let tau = at / (rho * rho);
    if !tau.is_finite() {
        return 2.0 * (PI * at).sqrt();
    }
    let phi = turning_angle(tau);
    if phi < 1.0 {
        let h = 0.5 * phi;
        // ρ φ / (2 sin(φ/2))
        rho * if h < 1e-8 { 1.0 + h * h / 6.0 } else { h / h.sin() }
    } else {
        phi * (2.0 * at / phi_minus_sin(phi)).sqrt()
    }
}

/// `d(p, q) = d(0, p⁻¹ q)` by left invariance.
pub fn heisenberg_distance(p: &[f64], q: &[f64]) -> f64 {
    let dx = q[0] - p[0];
    let dy = q[1] - p[1];
    let dt = q[2] - p[2] - 0.5 * (p[0] * q[1] - p[1] * q[0]);
    heisenberg_norm(dx, dy, dt)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn axes() {
        assert_eq!(heisenberg_norm(1.0, 0.0, 0.0), 1.0);
        assert!((heisenberg_norm(0.0, 0.0, 1.0) - 2.0 * PI.sqrt()).abs() < 1e-15);
    }

    #[test]
    fn continuous_towards_both_axes() {
        let v = heisenberg_norm(0.0, 0.0, 1.0);
        assert!((heisenberg_norm(1e-9, 0.0, 1.0) - v).abs() < 1e-7);
        assert!((heisenberg_norm(1.0, 0.0, 1e-12) - 1.0).abs() < 1e-10);
    }

    #[test]
    fn homogeneous() {
        let (x, y, t) = (0.3, -0.7, 0.45);
        let l = 2.5;
        let a = heisenberg_norm(l * x, l * y, l * l * t);
        assert!((a - l * heisenberg_norm(x, y, t)).abs() < 1e-13);
    }

    #[test]
    fn half_circle_arc() {
        // φ = π: ρ = 2R, |t| = πR²/2, length πR.
        let r = 0.8;
        let d = heisenberg_norm(2.0 * r, 0.0, PI * r * r / 2.0);
        assert!((d - PI * r).abs() < 1e-13);
    }
}

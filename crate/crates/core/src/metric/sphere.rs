//! Points at prescribed CC distance from a center.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::algebra::dilate_coords;
use crate::space::SrSpace;
use crate::util::sphere_directions;

use super::MetricError;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SphereOptions {
    /// Accepted relative deviation of the distance from the radius.
    pub tolerance: f64,
    pub max_iterations: usize,
    pub parallel: bool,
}

impl Default for SphereOptions {
    fn default() -> Self {
        Self {
            tolerance: 1e-3,
            max_iterations: 60,
            parallel: true,
        }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct SphereSample {
    pub center: Vec<f64>,
    pub radius: f64,
    pub requested: usize,
    pub points: Vec<Vec<f64>>,
    /// Distance from the center of each returned point.
    pub distances: Vec<f64>,
}

impl SphereSample {
    pub fn is_complete(&self) -> bool {
        self.points.len() == self.requested
    }
}

/// Finds `s` with `d(x, ray(s)) = r` by a secant iteration safeguarded by bisection.
fn solve_scale(
    space: &dyn SrSpace,
    x: &[f64],
    r: f64,
    ray: impl Fn(f64) -> Vec<f64>,
    s0: f64,
    opts: &SphereOptions,
) -> Option<(Vec<f64>, f64)> {
    let tol = opts.tolerance * r;
    let (mut lo, mut hi) = (0.0f64, f64::INFINITY);
    let mut s = s0;
    for _ in 0..opts.max_iterations {
        let y = ray(s);
        let d = space.distance(x, &y);
        if !d.is_finite() {
            hi = s;
            s = 0.5 * (lo + s);
            continue;
        }
        if (d - r).abs() <= tol {
            return Some((y, d));
        }
        if d < r {
            lo = s;
        } else {
            hi = s;
        }
        // Distances grow roughly linearly in the dilation parameter.
        let mut next = if d > 0.0 { s * r / d } else { 2.0 * s };
        if !(next > lo && next < hi) {
            next = if hi.is_finite() { 0.5 * (lo + hi) } else { 2.0 * s.max(lo) };
        }
        s = next;
    }
    None
}

/// One sphere point along a full direction `v` in privileged coordinates.
pub fn sphere_point(space: &dyn SrSpace, x: &[f64], r: f64, v: &[f64], opts: &SphereOptions) -> Option<(Vec<f64>, f64)> {
    let w = space.weights().to_vec();
    solve_scale(space, x, r, |s| space.from_privileged(x, &dilate_coords(&w, s, v)), r, opts)
}

/// `m` points at distance `r` from `x`.
///
/// The first half of the samples (at least `2·rank` when `m` allows) follow
/// horizontal rays in low-discrepancy control directions; the rest follow
/// dilation orbits `s ↦ δ_s v` of low-discrepancy directions `v` of the whole
/// privileged chart. Each ray is scaled so its end lies on the sphere.
pub fn cc_sphere_sample(
    space: &dyn SrSpace,
    x: &[f64],
    r: f64,
    m: usize,
    opts: &SphereOptions,
) -> Result<SphereSample, MetricError> {
    if !(r > 0.0) {
        return Err(MetricError::NonPositiveRadius(r));
    }
    if x.len() != space.dim() {
        return Err(MetricError::Dimension(format!("center must have {} coordinates", space.dim())));
    }
    let rank = space.rank();
    let n = space.dim();
    let m_h = if rank == n { m } else { m.min((m / 2).max(2 * rank)) };
    let mut rays: Vec<(bool, Vec<f64>)> = sphere_directions(rank, m_h).into_iter().map(|u| (true, u)).collect();
    rays.extend(sphere_directions(n, m - m_h).into_iter().map(|v| (false, v)));

    let solve = |(horizontal, dir): &(bool, Vec<f64>)| {
        if *horizontal {
            solve_scale(space, x, r, |s| space.horizontal_ray(x, dir, s), r, opts)
        } else {
            sphere_point(space, x, r, dir, opts)
        }
    };
    let found: Vec<Option<(Vec<f64>, f64)>> = if opts.parallel {
        rays.par_iter().map(solve).collect()
    } else {
        rays.iter().map(solve).collect()
    };
    let (points, distances): (Vec<_>, Vec<_>) = found.into_iter().flatten().unzip();
    Ok(SphereSample {
        center: x.to_vec(),
        radius: r,
        requested: m,
        points,
        distances,
    })
}

//! Monte Carlo volumes of CC balls and the Ball-Box slope fit.
//!
//! Volumes are Lebesgue measure in privileged coordinates at the center.

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::space::SrSpace;
use crate::util::{linear_fit, sphere_directions, task_rng};

use super::sphere::sphere_point;
use super::{MetricError, SphereOptions};

const BLOCK: usize = 4096;
/// Directions used to size the sampling box.
const BOX_PROBES: usize = 96;
/// Hits this close to the box boundary (as a fraction) trigger a larger box.
const SATURATION: f64 = 0.97;

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct VolumeEstimate {
    pub radius: f64,
    pub volume: f64,
    pub std_error: f64,
    pub samples: usize,
    pub hits: usize,
    /// Half-widths of the privileged-coordinate box that was sampled.
    pub box_half_widths: Vec<f64>,
}

/// Half-widths of a box containing the ball, from sphere probes.
fn bounding_box(space: &dyn SrSpace, p: &[f64], r: f64) -> Vec<f64> {
    let n = space.dim();
    let opts = SphereOptions {
        parallel: false,
        ..Default::default()
    };
    let mut half = vec![0.0f64; n];
    let mut probes = sphere_directions(n, BOX_PROBES);
    for i in 0..n {
        let mut e = vec![0.0; n];
        e[i] = 1.0;
        probes.push(e.clone());
        e[i] = -1.0;
        probes.push(e);
    }
    let pts: Vec<Vec<f64>> = probes
        .par_iter()
        .filter_map(|v| sphere_point(space, p, r, v, &opts))
        .map(|(y, _)| space.to_privileged(p, &y))
        .collect();
    for z in pts {
        for i in 0..n {
            half[i] = half[i].max(z[i].abs());
        }
    }
    let w = space.weights();
    for i in 0..n {
        // Fall back to the ball-box scaling when no probe moved this coordinate.
        if half[i] <= 0.0 {
            half[i] = r.powi(w[i] as i32);
        }
        half[i] *= 1.15;
    }
    half
}

/// Monte Carlo estimate of `Vol B(p, r)`.
///
/// Samples are drawn in blocks with independent streams `(seed, stream + block)`,
/// so results do not depend on the thread count.
pub fn ball_volume(
    space: &dyn SrSpace,
    p: &[f64],
    r: f64,
    n_samples: usize,
    seed: u64,
    stream: u64,
) -> Result<VolumeEstimate, MetricError> {
    if !(r > 0.0) {
        return Err(MetricError::NonPositiveRadius(r));
    }
    if p.len() != space.dim() {
        return Err(MetricError::Dimension(format!("center must have {} coordinates", space.dim())));
    }
    if n_samples == 0 {
        return Err(MetricError::Options("need at least one sample".into()));
    }
    let n = space.dim();
    let mut half = bounding_box(space, p, r);
    for _attempt in 0..6 {
        let blocks = n_samples.div_ceil(BLOCK);
        let counts: Vec<(usize, bool)> = (0..blocks)
            .into_par_iter()
            .map(|b| {
                let mut rng = task_rng(seed, stream.wrapping_mul(1 << 20).wrapping_add(b as u64));
                let count = BLOCK.min(n_samples - b * BLOCK);
                let mut hits = 0;
                let mut saturated = false;
                let mut z = vec![0.0; n];
                for _ in 0..count {
                    for i in 0..n {
                        z[i] = half[i] * (2.0 * rng.random::<f64>() - 1.0);
                    }
                    let x = space.from_privileged(p, &z);
                    if space.distance(p, &x) <= r {
                        hits += 1;
                        if z.iter().zip(&half).any(|(a, h)| a.abs() > SATURATION * h) {
                            saturated = true;
                        }
                    }
                }
                (hits, saturated)
            })
            .collect();
        let hits: usize = counts.iter().map(|c| c.0).sum();
        if counts.iter().any(|c| c.1) {
            for h in half.iter_mut() {
                *h *= 1.25;
            }
            continue;
        }
        if hits == 0 {
            return Err(MetricError::DegenerateSampling { radius: r });
        }
        let box_vol: f64 = half.iter().map(|h| 2.0 * h).product();
        let frac = hits as f64 / n_samples as f64;
        return Ok(VolumeEstimate {
            radius: r,
            volume: box_vol * frac,
            std_error: box_vol * (frac * (1.0 - frac) / n_samples as f64).sqrt(),
            samples: n_samples,
            hits,
            box_half_widths: half,
        });
    }
    Err(MetricError::DegenerateSampling { radius: r })
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct BallBoxReport {
    pub center: Vec<f64>,
    pub radii: Vec<f64>,
    pub volumes: Vec<f64>,
    pub std_errors: Vec<f64>,
    pub samples_per_radius: usize,
    pub fitted_slope: f64,
    pub fitted_intercept: f64,
    #[serde(rename = "Q_expected")]
    pub q_expected: usize,
    pub seed: u64,
}

impl BallBoxReport {
    pub fn to_csv(&self) -> Result<String, MetricError> {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(["radius", "volume", "std_error"])?;
        for i in 0..self.radii.len() {
            w.write_record([
                self.radii[i].to_string(),
                self.volumes[i].to_string(),
                self.std_errors[i].to_string(),
            ])?;
        }
        let bytes = w.into_inner().map_err(|e| MetricError::Options(e.to_string()))?;
        Ok(String::from_utf8(bytes).expect("csv output is utf-8"))
    }
}

/// Volumes on the ladder `r0·2^{−i}`, `i < k`, and the least-squares slope of
/// log-volume against log-radius.
pub fn ball_box_report(
    space: &dyn SrSpace,
    p: &[f64],
    r0: f64,
    k: usize,
    n_samples: usize,
    seed: u64,
) -> Result<BallBoxReport, MetricError> {
    if k == 0 {
        return Err(MetricError::Options("ladder must have at least one radius".into()));
    }
    let radii: Vec<f64> = (0..k).map(|i| r0 * 0.5f64.powi(i as i32)).collect();
    let mut volumes = Vec::with_capacity(k);
    let mut errs = Vec::with_capacity(k);
    for (i, &r) in radii.iter().enumerate() {
        let v = ball_volume(space, p, r, n_samples, seed, i as u64)?;
        volumes.push(v.volume);
        errs.push(v.std_error);
    }
    let (slope, intercept) = if k > 1 {
        let lx: Vec<f64> = radii.iter().map(|r| r.ln()).collect();
        let ly: Vec<f64> = volumes.iter().map(|v| v.ln()).collect();
        linear_fit(&lx, &ly)
    } else {
        (f64::NAN, volumes[0].ln())
    };
    Ok(BallBoxReport {
        center: p.to_vec(),
        radii,
        volumes,
        std_errors: errs,
        samples_per_radius: n_samples,
        fitted_slope: slope,
        fitted_intercept: intercept,
        q_expected: space.homogeneous_dimension(),
        seed,
    })
}

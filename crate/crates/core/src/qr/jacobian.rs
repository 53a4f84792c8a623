//! Volume-ratio estimates of the Jacobian `μ(f(B(x,r))) / μ(B(x,r))`.

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::metric::{ball_volume, cc_sphere_sample, SphereOptions};
use crate::util::task_rng;

use super::newton::solve_preimage;
use super::profile::tail;
use super::{NewtonOptions, QrError, SmoothMapModel};

const BLOCK: usize = 2048;
const SATURATION: f64 = 0.97;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct JacobianOptions {
    /// Monte Carlo samples for each of the two volumes.
    pub samples: usize,
    /// Sphere points used to size the image box.
    pub probes: usize,
    pub margin: f64,
    pub newton: NewtonOptions,
    /// Radii averaged for the limit (0: half the ladder).
    pub tail: usize,
    /// Root failures above this fraction mark the estimate unreliable.
    pub max_failure_rate: f64,
}

impl Default for JacobianOptions {
    fn default() -> Self {
        Self {
            samples: 20_000,
            probes: 64,
            margin: 1.3,
            newton: NewtonOptions::default(),
            tail: 0,
            max_failure_rate: 0.01,
        }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct JacobianEstimate {
    pub map: String,
    pub center: Vec<f64>,
    pub radii: Vec<f64>,
    pub image_volumes: Vec<f64>,
    pub ball_volumes: Vec<f64>,
    pub ratios: Vec<f64>,
    pub std_errors: Vec<f64>,
    pub root_failures: Vec<usize>,
    /// Mean ratio over the tail.
    pub extrapolated: f64,
    /// Tail spread plus two standard errors.
    pub error_bar: f64,
    pub unreliable: bool,
}

struct ImageVolume {
    volume: f64,
    std_error: f64,
    failures: usize,
}

fn image_volume(
    f: &SmoothMapModel,
    x: &[f64],
    r: f64,
    seed: u64,
    stream: u64,
    opts: &JacobianOptions,
) -> Result<ImageVolume, QrError> {
    let dom = f.domain.as_ref();
    let tgt = f.target.as_ref();
    let n = tgt.dim();
    let fx = f.eval(x);
    let sphere = SphereOptions {
        parallel: false,
        ..Default::default()
    };
    let mut probes = cc_sphere_sample(dom, x, r, opts.probes, &sphere)?.points;
    let inner = cc_sphere_sample(dom, x, 0.5 * r, opts.probes.div_ceil(2), &sphere)?.points;
    let starts: Vec<Vec<f64>> = std::iter::once(x.to_vec()).chain(inner.iter().take(4).cloned()).collect();
    probes.extend(inner);
    let mut half = vec![0.0f64; n];
    for p in &probes {
        let z = tgt.to_privileged(&fx, &f.eval(p));
        for i in 0..n {
            half[i] = half[i].max(z[i].abs());
        }
    }
    let w = tgt.weights();
    for i in 0..n {
        if half[i] <= 0.0 {
            half[i] = r.powi(w[i] as i32);
        }
        half[i] *= opts.margin;
    }
    let samples = opts.samples;
    for _attempt in 0..6 {
        let blocks = samples.div_ceil(BLOCK);
        let counts: Vec<(usize, usize, bool)> = (0..blocks)
            .into_par_iter()
            .map(|b| {
                let mut rng = task_rng(seed, stream.wrapping_mul(1 << 20).wrapping_add(b as u64));
                let count = BLOCK.min(samples - b * BLOCK);
                let (mut hits, mut failures, mut saturated) = (0, 0, false);
                let mut z = vec![0.0; n];
                for _ in 0..count {
                    for i in 0..n {
                        z[i] = half[i] * (2.0 * rng.random::<f64>() - 1.0);
                    }
                    let y = tgt.from_privileged(&fx, &z);
                    let exact = if opts.newton.exact { f.preimages(&y) } else { None };
                    let roots: Vec<Vec<f64>> = match exact {
                        Some(pre) => pre,
                        None => starts
                            .iter()
                            .filter_map(|s| solve_preimage(f, &y, s, &opts.newton))
                            .collect(),
                    };
                    if roots.is_empty() {
                        failures += 1;
                        continue;
                    }
                    if roots.iter().any(|p| dom.distance(x, p) <= r) {
                        hits += 1;
                        if z.iter().zip(&half).any(|(a, h)| a.abs() > SATURATION * h) {
                            saturated = true;
                        }
                    }
                }
                (hits, failures, saturated)
            })
            .collect();
        if counts.iter().any(|c| c.2) {
            half.iter_mut().for_each(|h| *h *= 1.25);
            continue;
        }
        let hits: usize = counts.iter().map(|c| c.0).sum();
        let failures = counts.iter().map(|c| c.1).sum();
        let box_vol: f64 = half.iter().map(|h| 2.0 * h).product();
        let frac = hits as f64 / samples as f64;
        return Ok(ImageVolume {
            volume: box_vol * frac,
            std_error: box_vol * (frac * (1.0 - frac) / samples as f64).sqrt(),
            failures,
        });
    }
    Err(QrError::Options(format!("image of the ball at radius {r} keeps saturating its box")))
}

/// Volume ratios at each radius; the image volume is found by sampling a box
/// around `f(x)` and solving for preimages in the ball.
pub fn jacobian_volume_ratio(
    f: &SmoothMapModel,
    x: &[f64],
    radii: &[f64],
    seed: u64,
    opts: &JacobianOptions,
) -> Result<JacobianEstimate, QrError> {
    if radii.is_empty() || opts.samples == 0 {
        return Err(QrError::Options("need radii and samples".into()));
    }
    if x.len() != f.domain.dim() {
        return Err(QrError::Dimension(format!("point must have {} coordinates", f.domain.dim())));
    }
    let mut est = JacobianEstimate {
        map: f.name.clone(),
        center: x.to_vec(),
        radii: radii.to_vec(),
        image_volumes: Vec::new(),
        ball_volumes: Vec::new(),
        ratios: Vec::new(),
        std_errors: Vec::new(),
        root_failures: Vec::new(),
        extrapolated: 0.0,
        error_bar: 0.0,
        unreliable: false,
    };
    for (i, &r) in radii.iter().enumerate() {
        let ball = ball_volume(f.domain.as_ref(), x, r, opts.samples, seed, 2 * i as u64)?;
        let img = image_volume(f, x, r, seed, 2 * i as u64 + 1, opts)?;
        let ratio = img.volume / ball.volume;
        let rel = (img.std_error / img.volume.max(f64::MIN_POSITIVE)).hypot(ball.std_error / ball.volume);
        est.image_volumes.push(img.volume);
        est.ball_volumes.push(ball.volume);
        est.ratios.push(ratio);
        est.std_errors.push(ratio * rel);
        est.root_failures.push(img.failures);
        if img.failures as f64 > opts.max_failure_rate * opts.samples as f64 {
            est.unreliable = true;
        }
    }
    let t = tail(&est.ratios, opts.tail);
    let se = tail(&est.std_errors, opts.tail);
    let mean = t.iter().sum::<f64>() / t.len() as f64;
    let spread = t.iter().fold(0.0f64, |m, v| m.max((v - mean).abs()));
    let se_mean = (se.iter().map(|s| s * s).sum::<f64>()).sqrt() / se.len() as f64;
    est.extrapolated = mean;
    est.error_bar = spread + 2.0 * se_mean;
    Ok(est)
}

//! Area-formula check and local-injectivity scan.

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::metric::{cc_sphere_sample, SphereOptions};
use crate::util::task_rng;

use super::newton::multiplicity_with_starts;
use super::{jacobian_volume_ratio, JacobianOptions, NewtonOptions, QrError, Region, SmoothMapModel};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AreaOptions {
    pub lhs_samples: usize,
    pub rhs_samples: usize,
    /// Cells per axis of the Jacobian cache over the region's bounding box.
    pub cells: usize,
    pub jacobian_radii: Vec<f64>,
    pub jacobian: JacobianOptions,
    pub newton: NewtonOptions,
    pub seed: u64,
}

impl Default for AreaOptions {
    fn default() -> Self {
        Self {
            lhs_samples: 20_000,
            rhs_samples: 4_000,
            cells: 4,
            jacobian_radii: vec![0.1, 0.05],
            jacobian: JacobianOptions {
                samples: 4_000,
                ..Default::default()
            },
            newton: NewtonOptions {
                starts: 32,
                ..Default::default()
            },
            seed: 0,
        }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct AreaCheck {
    /// `∫_A u(f(x)) J_f(x) dx`.
    pub lhs: f64,
    /// `∫ u(y) N(y, f, A) dy`.
    pub rhs: f64,
    pub lhs_std_error: f64,
    pub rhs_std_error: f64,
    /// `|lhs − rhs| / max(|lhs|, |rhs|)`.
    pub gap: f64,
    pub cell_centers: Vec<Vec<f64>>,
    pub cell_jacobians: Vec<f64>,
    pub incomplete_targets: usize,
}

fn mean_and_se(v: &[f64]) -> (f64, f64) {
    let n = v.len() as f64;
    let m = v.iter().sum::<f64>() / n;
    let var = v.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / (n - 1.0).max(1.0);
    (m, (var / n).sqrt())
}

/// Compares both sides of the area formula for a test function `u`
/// supported in the box `[u_lo, u_hi]` of the target.
pub fn area_formula_check(
    f: &SmoothMapModel,
    region: &Region,
    u: &(dyn Fn(&[f64]) -> f64 + Sync),
    u_lo: &[f64],
    u_hi: &[f64],
    opts: &AreaOptions,
) -> Result<AreaCheck, QrError> {
    let vol_a = region
        .volume()
        .ok_or_else(|| QrError::Unsupported("region needs a closed-form volume".into()))?;
    if opts.cells == 0 || opts.lhs_samples < 2 || opts.rhs_samples < 2 {
        return Err(QrError::Options("need cells and at least two samples per side".into()));
    }
    let n = f.domain.dim();
    // Bounding box of the region from a dense set of its points.
    let mut lo = vec![f64::INFINITY; n];
    let mut hi = vec![f64::NEG_INFINITY; n];
    for u in (0..4096).map(|i| crate::util::halton(i, n)).chain(corner_points(n)) {
        if let Some(x) = region.from_unit(&u) {
            for i in 0..n {
                lo[i] = lo[i].min(x[i]);
                hi[i] = hi[i].max(x[i]);
            }
        }
    }
    let c = opts.cells;
    let total = c.pow(n as u32);
    let centers: Vec<Vec<f64>> = (0..total)
        .map(|mut k| {
            (0..n)
                .map(|i| {
                    let j = k % c;
                    k /= c;
                    lo[i] + (j as f64 + 0.5) * (hi[i] - lo[i]) / c as f64
                })
                .collect()
        })
        .collect();
    let jac: Vec<f64> = centers
        .iter()
        .enumerate()
        .map(|(k, x)| {
            jacobian_volume_ratio(f, x, &opts.jacobian_radii, opts.seed.wrapping_add(1 + k as u64), &opts.jacobian)
                .map(|e| e.extrapolated)
        })
        .collect::<Result<_, _>>()?;
    let cell_of = |x: &[f64]| -> usize {
        let mut k = 0;
        for i in (0..n).rev() {
            let t = ((x[i] - lo[i]) / (hi[i] - lo[i]) * c as f64).floor();
            k = k * c + (t.max(0.0) as usize).min(c - 1);
        }
        k
    };

    let mut rng = task_rng(opts.seed, 0);
    let lhs_vals: Vec<f64> = (0..opts.lhs_samples)
        .map(|_| {
            let v: Vec<f64> = (0..n).map(|_| rng.random::<f64>()).collect();
            let x = region.from_unit(&v).expect("region has a unit-cube parametrisation");
            let fx = f.eval(&x);
            let w = u(&fx);
            if w == 0.0 {
                0.0
            } else {
                vol_a * w * jac[cell_of(&x)]
            }
        })
        .collect();

    let m = f.target.dim();
    let vol_u: f64 = u_lo.iter().zip(u_hi).map(|(a, b)| b - a).product();
    let starts = region.starts(f.domain.as_ref(), opts.newton.starts);
    let mut rng = task_rng(opts.seed, 1);
    let targets: Vec<Vec<f64>> = (0..opts.rhs_samples)
        .map(|_| (0..m).map(|i| u_lo[i] + rng.random::<f64>() * (u_hi[i] - u_lo[i])).collect())
        .collect();
    let rhs_parts: Vec<(f64, bool)> = targets
        .par_iter()
        .map(|y| {
            let w = u(y);
            if w == 0.0 {
                return (0.0, false);
            }
            let res = multiplicity_with_starts(f, y, &starts, region, &opts.newton);
            (vol_u * w * res.count as f64, res.incomplete)
        })
        .collect();
    let rhs_vals: Vec<f64> = rhs_parts.iter().map(|p| p.0).collect();
    let (lhs, lhs_se) = mean_and_se(&lhs_vals);
    let (rhs, rhs_se) = mean_and_se(&rhs_vals);
    let scale = lhs.abs().max(rhs.abs());
    Ok(AreaCheck {
        lhs,
        rhs,
        lhs_std_error: lhs_se,
        rhs_std_error: rhs_se,
        gap: if scale > 0.0 { (lhs - rhs).abs() / scale } else { 0.0 },
        cell_centers: centers,
        cell_jacobians: jac,
        incomplete_targets: rhs_parts.iter().filter(|p| p.1).count(),
    })
}

fn corner_points(n: usize) -> Vec<Vec<f64>> {
    (0..1usize << n)
        .map(|mask| (0..n).map(|i| ((mask >> i) & 1) as f64).collect())
        .collect()
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ScanOptions {
    /// Radius of the balls tested for injectivity.
    pub radius: f64,
    /// Probe points per ball, taken on the sphere of half the radius.
    pub probes: usize,
    /// Newton starts per ball.
    pub starts: usize,
    /// `lip`-ratio drop over two halvings that counts as degenerate.
    pub collapse: f64,
    pub newton: NewtonOptions,
}

impl Default for ScanOptions {
    fn default() -> Self {
        Self {
            radius: 0.05,
            probes: 6,
            starts: 17,
            collapse: 0.3,
            newton: NewtonOptions::default(),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FlagReason {
    /// Some probe value has several preimages in the ball.
    Multiplicity,
    /// `l_f(x,r)/r` collapses as `r → 0`.
    Degenerate,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct FlaggedPoint {
    pub point: Vec<f64>,
    pub reason: FlagReason,
    pub multiplicity: usize,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct BranchScan {
    pub map: String,
    pub lo: Vec<f64>,
    pub hi: Vec<f64>,
    pub points_per_axis: usize,
    pub scanned: usize,
    pub flagged: Vec<FlaggedPoint>,
}

/// Flags grid points of `[lo, hi]` near which `f` fails to be injective or
/// has degenerate infinitesimal dilatation.
pub fn local_injectivity_scan(
    f: &SmoothMapModel,
    lo: &[f64],
    hi: &[f64],
    points_per_axis: usize,
    opts: &ScanOptions,
) -> Result<BranchScan, QrError> {
    let n = f.domain.dim();
    if lo.len() != n || hi.len() != n || points_per_axis < 2 {
        return Err(QrError::Options("grid needs matching bounds and two points per axis".into()));
    }
    let g = points_per_axis;
    let grid: Vec<Vec<f64>> = (0..g.pow(n as u32))
        .map(|mut k| {
            (0..n)
                .map(|i| {
                    let j = k % g;
                    k /= g;
                    lo[i] + j as f64 * (hi[i] - lo[i]) / (g - 1) as f64
                })
                .collect()
        })
        .collect();
    let sphere = SphereOptions {
        parallel: false,
        ..Default::default()
    };
    let dom = f.domain.as_ref();
    let tgt = f.target.as_ref();
    let flags: Vec<Option<FlaggedPoint>> = grid
        .par_iter()
        .map(|x| -> Result<Option<FlaggedPoint>, QrError> {
            let ball = Region::Ball {
                center: x.clone(),
                radius: opts.radius,
            };
            let starts = ball.starts(dom, opts.starts);
            let probes = cc_sphere_sample(dom, x, 0.5 * opts.radius, opts.probes, &sphere)?;
            let mut worst = 0;
            for p in &probes.points {
                let res = multiplicity_with_starts(f, &f.eval(p), &starts, &ball, &opts.newton);
                worst = worst.max(res.count);
            }
            if worst > 1 {
                return Ok(Some(FlaggedPoint {
                    point: x.clone(),
                    reason: FlagReason::Multiplicity,
                    multiplicity: worst,
                }));
            }
            let fx = f.eval(x);
            let mut ratios = Vec::new();
            for r in [opts.radius, 0.5 * opts.radius, 0.25 * opts.radius] {
                let s = cc_sphere_sample(dom, x, r, 8, &sphere)?;
                let inf = s
                    .points
                    .iter()
                    .map(|p| tgt.distance(&fx, &f.eval(p)))
                    .fold(f64::INFINITY, f64::min);
                ratios.push(inf / r);
            }
            let collapsed = !(ratios[2] > opts.collapse * ratios[0]) || ratios[2] <= 10.0 * tgt.relative_noise();
            Ok(collapsed.then(|| FlaggedPoint {
                point: x.clone(),
                reason: FlagReason::Degenerate,
                multiplicity: worst,
            }))
        })
        .collect::<Result<_, _>>()?;
    Ok(BranchScan {
        map: f.name.clone(),
        lo: lo.to_vec(),
        hi: hi.to_vec(),
        points_per_axis: g,
        scanned: grid.len(),
        flagged: flags.into_iter().flatten().collect(),
    })
}

//! Dilatation and Lipschitz profiles on a radius ladder.

use serde::{Deserialize, Serialize};

use crate::metric::{cc_sphere_sample, SphereOptions};

use super::{QrError, SmoothMapModel};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ProfileOptions {
    /// Sphere samples per radius.
    pub samples: usize,
    /// Inner spheres, as fractions of the radius, that stand in for the ball interior.
    pub interior: Vec<f64>,
    /// Number of smallest radii used for the limit estimates (0: half the ladder).
    pub tail: usize,
    pub sphere: SphereOptions,
}

impl Default for ProfileOptions {
    fn default() -> Self {
        Self {
            samples: 64,
            interior: vec![0.25, 0.5, 0.75],
            tail: 0,
            sphere: SphereOptions::default(),
        }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct DilatationProfile {
    pub map: String,
    pub center: Vec<f64>,
    pub radii: Vec<f64>,
    /// `L_f(x,r)`: sup over the ball.
    pub big_l: Vec<f64>,
    /// `L'_f(x,r)`: sup over the sphere.
    pub big_l_sphere: Vec<f64>,
    /// `l_f(x,r)`: inf over the sphere.
    pub small_l: Vec<f64>,
    pub h: Vec<f64>,
    pub h_sphere: Vec<f64>,
    /// Radii where `l_f` is below the distance noise floor; `h` is infinite there.
    pub degenerate: Vec<bool>,
    /// Limit estimates: max of the tail.
    pub h_limit: f64,
    pub h_sphere_limit: f64,
    /// Sphere points actually used per radius.
    pub sphere_points: Vec<usize>,
}

impl DilatationProfile {
    pub fn any_degenerate(&self) -> bool {
        self.degenerate.iter().any(|&d| d)
    }
}

/// Smallest `count` entries of the ladder (0 means half, rounded up).
pub fn tail(values: &[f64], count: usize) -> &[f64] {
    let c = if count == 0 { values.len().div_ceil(2) } else { count.min(values.len()) };
    &values[values.len() - c..]
}

/// `L_f`, `L'_f`, `l_f`, `H_f`, `H'_f` on the ladder `r0·2^{−i}`, `i < k`.
pub fn dilatation_profile(
    f: &SmoothMapModel,
    x: &[f64],
    r0: f64,
    k: usize,
    opts: &ProfileOptions,
) -> Result<DilatationProfile, QrError> {
    if k == 0 || opts.samples == 0 {
        return Err(QrError::Options("need at least one radius and one sample".into()));
    }
    let fx = f.eval(x);
    let dom = f.domain.as_ref();
    let tgt = f.target.as_ref();
    let mut out = DilatationProfile {
        map: f.name.clone(),
        center: x.to_vec(),
        radii: Vec::new(),
        big_l: Vec::new(),
        big_l_sphere: Vec::new(),
        small_l: Vec::new(),
        h: Vec::new(),
        h_sphere: Vec::new(),
        degenerate: Vec::new(),
        h_limit: 0.0,
        h_sphere_limit: 0.0,
        sphere_points: Vec::new(),
    };
    for i in 0..k {
        let r = r0 * 0.5f64.powi(i as i32);
        let s = cc_sphere_sample(dom, x, r, opts.samples, &opts.sphere)?;
        if s.points.is_empty() {
            return Err(crate::metric::MetricError::EmptySphere(r).into());
        }
        let image: Vec<f64> = s.points.iter().map(|p| tgt.distance(&fx, &f.eval(p))).collect();
        let sup = image.iter().copied().fold(0.0, f64::max);
        let inf = image.iter().copied().fold(f64::INFINITY, f64::min);
        let mut ball = sup;
        for &frac in &opts.interior {
            let inner = cc_sphere_sample(dom, x, frac * r, opts.samples.div_ceil(2), &opts.sphere)?;
            for p in &inner.points {
                ball = ball.max(tgt.distance(&fx, &f.eval(p)));
            }
        }
        let floor = 10.0 * tgt.relative_noise() * sup.max(f64::MIN_POSITIVE);
        let degenerate = inf <= floor;
        out.radii.push(r);
        out.big_l.push(ball);
        out.big_l_sphere.push(sup);
        out.small_l.push(inf);
        out.h.push(if degenerate { f64::INFINITY } else { ball / inf });
        out.h_sphere.push(if degenerate { f64::INFINITY } else { sup / inf });
        out.degenerate.push(degenerate);
        out.sphere_points.push(s.points.len());
    }
    out.h_limit = tail(&out.h, opts.tail).iter().copied().fold(0.0, f64::max);
    out.h_sphere_limit = tail(&out.h_sphere, opts.tail).iter().copied().fold(0.0, f64::max);
    Ok(out)
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct LipProfile {
    pub map: String,
    pub center: Vec<f64>,
    pub radii: Vec<f64>,
    /// `L_f(x,r)/r`.
    pub ratios: Vec<f64>,
    /// `Lip f(x)`: max of the ratio over the tail.
    pub lip_upper: f64,
    /// `lip f(x)`: min of the ratio over the tail.
    pub lip_lower: f64,
}

/// `Lip f(x)` and `lip f(x)` from `L_f(x,r)/r` on the ladder.
pub fn lip_profile(f: &SmoothMapModel, x: &[f64], r0: f64, k: usize, opts: &ProfileOptions) -> Result<LipProfile, QrError> {
    let p = dilatation_profile(f, x, r0, k, opts)?;
    let ratios: Vec<f64> = p.big_l.iter().zip(&p.radii).map(|(l, r)| l / r).collect();
    let t = tail(&ratios, opts.tail);
    Ok(LipProfile {
        map: p.map,
        center: p.center,
        lip_upper: t.iter().copied().fold(0.0, f64::max),
        lip_lower: t.iter().copied().fold(f64::INFINITY, f64::min),
        radii: p.radii,
        ratios,
    })
}

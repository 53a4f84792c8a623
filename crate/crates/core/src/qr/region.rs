//! Domain regions for multiplicity counts and area-formula checks.

use serde::{Deserialize, Serialize};

use crate::metric::{cc_sphere_sample, SphereOptions};
use crate::space::SrSpace;
use crate::util::halton;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum Region {
    /// Coordinate box.
    Box { lo: Vec<f64>, hi: Vec<f64> },
    /// `r_min ≤ |(x_1, x_2)| ≤ r_max`, remaining coordinates in `[lo, hi]`.
    Annulus { r_min: f64, r_max: f64, lo: Vec<f64>, hi: Vec<f64> },
    /// Closed CC ball of the domain.
    Ball { center: Vec<f64>, radius: f64 },
}

impl Region {
    pub fn dim(&self) -> usize {
        match self {
            Region::Box { lo, .. } => lo.len(),
            Region::Annulus { lo, .. } => lo.len() + 2,
            Region::Ball { center, .. } => center.len(),
        }
    }

    pub fn contains(&self, space: &dyn SrSpace, x: &[f64]) -> bool {
        match self {
            Region::Box { lo, hi } => x.iter().zip(lo.iter().zip(hi)).all(|(v, (a, b))| *v >= *a && *v <= *b),
            Region::Annulus { r_min, r_max, lo, hi } => {
                let r = x[0].hypot(x[1]);
                r >= *r_min
                    && r <= *r_max
                    && x[2..].iter().zip(lo.iter().zip(hi)).all(|(v, (a, b))| *v >= *a && *v <= *b)
            }
            Region::Ball { center, radius } => space.distance(center, x) <= *radius,
        }
    }

    /// Lebesgue measure, when it has a closed form.
    pub fn volume(&self) -> Option<f64> {
        let side = |lo: &[f64], hi: &[f64]| lo.iter().zip(hi).map(|(a, b)| b - a).product::<f64>();
        match self {
            Region::Box { lo, hi } => Some(side(lo, hi)),
            Region::Annulus { r_min, r_max, lo, hi } => {
                Some(std::f64::consts::PI * (r_max * r_max - r_min * r_min) * side(lo, hi))
            }
            Region::Ball { .. } => None,
        }
    }

    /// Coordinate bounding box; CC balls have none in closed form.
    pub fn bounds(&self) -> Option<(Vec<f64>, Vec<f64>)> {
        match self {
            Region::Box { lo, hi } => Some((lo.clone(), hi.clone())),
            Region::Annulus { r_max, lo, hi, .. } => {
                let mut l = vec![-r_max, -r_max];
                let mut h = vec![*r_max, *r_max];
                l.extend(lo);
                h.extend(hi);
                Some((l, h))
            }
            Region::Ball { .. } => None,
        }
    }

    /// Maps a point of the unit cube to the region, uniformly for boxes and annuli.
    pub fn from_unit(&self, u: &[f64]) -> Option<Vec<f64>> {
        match self {
            Region::Box { lo, hi } => Some((0..lo.len()).map(|i| lo[i] + u[i] * (hi[i] - lo[i])).collect()),
            Region::Annulus { r_min, r_max, lo, hi } => {
                let r = (r_min * r_min + u[0] * (r_max * r_max - r_min * r_min)).sqrt();
                let phi = std::f64::consts::TAU * u[1];
                let mut x = vec![r * phi.cos(), r * phi.sin()];
                x.extend((0..lo.len()).map(|i| lo[i] + u[i + 2] * (hi[i] - lo[i])));
                Some(x)
            }
            Region::Ball { .. } => None,
        }
    }

    /// Spread-out Newton starts inside the region.
    pub fn starts(&self, space: &dyn SrSpace, count: usize) -> Vec<Vec<f64>> {
        match self {
            Region::Ball { center, radius } => {
                let opts = SphereOptions {
                    parallel: false,
                    ..Default::default()
                };
                let per = count.saturating_sub(1).div_ceil(2).max(1);
                let mut out = vec![center.clone()];
                for frac in [1.0 / 3.0, 2.0 / 3.0] {
                    if let Ok(s) = cc_sphere_sample(space, center, frac * radius, per, &opts) {
                        out.extend(s.points);
                    }
                }
                out
            }
            _ => (0..count as u64)
                .filter_map(|i| self.from_unit(&halton(i + 1, self.dim())))
                .collect(),
        }
    }
}

use serde::{Deserialize, Serialize};

use super::ModulusError;

pub const DEFAULT_LENGTH_FLOOR: f64 = 1e-6;

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct CurveFamily {
    pub curves: Vec<Vec<Vec<f64>>>,
    /// Length of each curve.
    pub lengths: Vec<f64>,
    pub lo: Vec<f64>,
    pub hi: Vec<f64>,
    /// Curves dropped for being shorter than the floor.
    pub dropped: usize,
}

fn polyline_length(c: &[Vec<f64>]) -> f64 {
    c.windows(2).map(|w| crate::util::euclidean_distance(&w[0], &w[1])).sum()
}

impl CurveFamily {
    /// Keeps curves of length at least `floor`; vertices must lie in `[lo, hi]`.
    pub fn new(curves: Vec<Vec<Vec<f64>>>, lo: Vec<f64>, hi: Vec<f64>, floor: f64) -> Result<Self, ModulusError> {
        let d = lo.len();
        if d == 0 || hi.len() != d || lo.iter().zip(&hi).any(|(a, b)| !(a < b)) {
            return Err(ModulusError::InvalidFamily("chart bounds must satisfy lo < hi".into()));
        }
        let slack = 1e-12 * lo.iter().zip(&hi).map(|(a, b)| b - a).fold(0.0, f64::max);
        let mut kept = Vec::new();
        let mut lengths = Vec::new();
        let mut dropped = 0;
        for (k, c) in curves.into_iter().enumerate() {
            for v in &c {
                if v.len() != d {
                    return Err(ModulusError::InvalidFamily(format!("curve {k} has a vertex of dimension {}", v.len())));
                }
                if v.iter().zip(lo.iter().zip(&hi)).any(|(x, (a, b))| !(*x >= a - slack && *x <= b + slack)) {
                    return Err(ModulusError::InvalidFamily(format!("curve {k} leaves the chart bounds")));
                }
            }
            let l = polyline_length(&c);
            if c.len() < 2 || !(l >= floor) {
                dropped += 1;
                continue;
            }
            kept.push(c);
            lengths.push(l);
        }
        if kept.is_empty() {
            return Err(ModulusError::EmptyFamily { floor });
        }
        Ok(Self {
            curves: kept,
            lengths,
            lo,
            hi,
            dropped,
        })
    }

    pub fn dim(&self) -> usize {
        self.lo.len()
    }

    pub fn len(&self) -> usize {
        self.curves.len()
    }

    pub fn is_empty(&self) -> bool {
        self.curves.is_empty()
    }

    /// `count` horizontal segments `y = (i + ½)h/count` across `[0,w]×[0,h]`.
    pub fn rectangle(w: f64, h: f64, count: usize) -> Result<Self, ModulusError> {
        let curves = (0..count)
            .map(|i| {
                let y = (i as f64 + 0.5) * h / count as f64;
                vec![vec![0.0, y], vec![w, y]]
            })
            .collect();
        Self::new(curves, vec![0.0, 0.0], vec![w, h], DEFAULT_LENGTH_FLOOR)
    }

    /// Radial segments `r ∈ [r_min, r_max]` at `angles` evenly spaced angles and
    /// `levels` heights in `[t_min, t_max]`; horizontal in the Heisenberg group.
    pub fn radial(r_min: f64, r_max: f64, t_min: f64, t_max: f64, angles: usize, levels: usize) -> Result<Self, ModulusError> {
        let mut curves = Vec::with_capacity(angles * levels);
        for j in 0..levels {
            let t = t_min + (j as f64 + 0.5) * (t_max - t_min) / levels as f64;
            for a in 0..angles {
                let phi = std::f64::consts::TAU * (a as f64 + 0.5) / angles as f64;
                let (s, c) = phi.sin_cos();
                curves.push(vec![vec![r_min * c, r_min * s, t], vec![r_max * c, r_max * s, t]]);
            }
        }
        Self::new(curves, vec![-r_max, -r_max, t_min], vec![r_max, r_max, t_max], DEFAULT_LENGTH_FLOOR)
    }

    /// Reads `curve_id, x_1, …, x_d` rows; a non-numeric first row is a header.
    /// Bounds default to the vertices' bounding box.
    pub fn from_csv(text: &str, bounds: Option<(Vec<f64>, Vec<f64>)>, floor: f64) -> Result<Self, ModulusError> {
        let mut rdr = csv::ReaderBuilder::new()
            .has_headers(false)
            .trim(csv::Trim::All)
            .from_reader(text.as_bytes());
        let mut curves: Vec<Vec<Vec<f64>>> = Vec::new();
        let mut ids: Vec<String> = Vec::new();
        for (row, rec) in rdr.records().enumerate() {
            let rec = rec?;
            if rec.len() < 2 {
                return Err(ModulusError::InvalidFamily(format!("row {} has no coordinates", row + 1)));
            }
            let coords: Result<Vec<f64>, _> = rec.iter().skip(1).map(|s| s.parse::<f64>()).collect();
            let coords = match coords {
                Ok(c) => c,
                Err(_) if row == 0 => continue,
                Err(_) => return Err(ModulusError::InvalidFamily(format!("row {} is not numeric", row + 1))),
            };
            let id = rec[0].to_string();
            if ids.last() != Some(&id) {
                ids.push(id);
                curves.push(Vec::new());
            }
            curves.last_mut().expect("pushed above").push(coords);
        }
        if curves.is_empty() {
            return Err(ModulusError::EmptyFamily { floor });
        }
        let (lo, hi) = match bounds {
            Some(b) => b,
            None => {
                let d = curves[0][0].len();
                let mut lo = vec![f64::INFINITY; d];
                let mut hi = vec![f64::NEG_INFINITY; d];
                for v in curves.iter().flatten() {
                    for i in 0..d.min(v.len()) {
                        lo[i] = lo[i].min(v[i]);
                        hi[i] = hi[i].max(v[i]);
                    }
                }
                // Flat directions get a unit-width slab.
                for i in 0..d {
                    if !(lo[i] < hi[i]) {
                        lo[i] -= 0.5;
                        hi[i] += 0.5;
                    }
                }
                (lo, hi)
            }
        };
        Self::new(curves, lo, hi, floor)
    }

    /// Images of the curves under `f`, each segment subdivided `subdivisions` times.
    pub fn map_through(
        &self,
        f: &dyn Fn(&[f64]) -> Vec<f64>,
        subdivisions: usize,
        lo: Vec<f64>,
        hi: Vec<f64>,
    ) -> Result<Self, ModulusError> {
        let s = subdivisions.max(1);
        let curves = self
            .curves
            .iter()
            .map(|c| {
                let mut out = vec![f(&c[0])];
                for w in c.windows(2) {
                    for k in 1..=s {
                        let t = k as f64 / s as f64;
                        let p: Vec<f64> = w[0].iter().zip(&w[1]).map(|(a, b)| a + t * (b - a)).collect();
                        out.push(f(&p));
                    }
                }
                out
            })
            .collect();
        Self::new(curves, lo, hi, DEFAULT_LENGTH_FLOOR)
    }

    /// Bounding box of all vertices.
    pub fn vertex_bounds(&self) -> (Vec<f64>, Vec<f64>) {
        let d = self.dim();
        let mut lo = vec![f64::INFINITY; d];
        let mut hi = vec![f64::NEG_INFINITY; d];
        for v in self.curves.iter().flatten() {
            for i in 0..d {
                lo[i] = lo[i].min(v[i]);
                hi[i] = hi[i].max(v[i]);
            }
        }
        (lo, hi)
    }
}

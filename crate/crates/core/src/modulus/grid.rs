use std::fmt::Write;

use serde::{Deserialize, Serialize};

use super::{CurveFamily, ModulusError};

/// Piecewise-constant density on a uniform grid; cell `k` has multi-index
/// `(k mod s_0, (k / s_0) mod s_1, …)`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DensityGrid {
    pub lo: Vec<f64>,
    pub hi: Vec<f64>,
    pub shape: Vec<usize>,
    pub values: Vec<f64>,
}

/// Sparse row of cell lengths for one curve.
pub(crate) type Incidence = Vec<(usize, f64)>;

impl DensityGrid {
    pub fn zeros(lo: Vec<f64>, hi: Vec<f64>, shape: Vec<usize>) -> Result<Self, ModulusError> {
        if lo.len() != shape.len() || hi.len() != shape.len() || shape.iter().any(|&s| s == 0) {
            return Err(ModulusError::InvalidGrid("bounds and shape must agree and be nonempty".into()));
        }
        if lo.iter().zip(&hi).any(|(a, b)| !(a < b)) {
            return Err(ModulusError::InvalidGrid("bounds must satisfy lo < hi".into()));
        }
        let cells = shape.iter().product();
        Ok(Self {
            lo,
            hi,
            shape,
            values: vec![0.0; cells],
        })
    }

    pub fn dim(&self) -> usize {
        self.shape.len()
    }

    pub fn cells(&self) -> usize {
        self.values.len()
    }

    pub fn spacing(&self, i: usize) -> f64 {
        (self.hi[i] - self.lo[i]) / self.shape[i] as f64
    }

    pub fn cell_volume(&self) -> f64 {
        (0..self.dim()).map(|i| self.spacing(i)).product()
    }

    pub fn cell_of(&self, x: &[f64]) -> Option<usize> {
        let mut k = 0;
        for i in (0..self.dim()).rev() {
            let t = (x[i] - self.lo[i]) / self.spacing(i);
            if !(t >= -1e-9 && t <= self.shape[i] as f64 + 1e-9) {
                return None;
            }
            let j = (t.floor().max(0.0) as usize).min(self.shape[i] - 1);
            k = k * self.shape[i] + j;
        }
        Some(k)
    }

    pub fn cell_lo(&self, mut k: usize) -> Vec<f64> {
        (0..self.dim())
            .map(|i| {
                let j = k % self.shape[i];
                k /= self.shape[i];
                self.lo[i] + j as f64 * self.spacing(i)
            })
            .collect()
    }

    /// Density at `x`, zero outside the grid.
    pub fn value_at(&self, x: &[f64]) -> f64 {
        self.cell_of(x).map_or(0.0, |k| self.values[k])
    }

    /// `Σ ρ^p μ(cell)`.
    pub fn energy(&self, p: f64) -> f64 {
        self.cell_volume() * self.values.iter().map(|v| v.powf(p)).sum::<f64>()
    }

    /// Exact lengths of the intersections of each curve with each cell.
    pub(crate) fn incidence(&self, family: &CurveFamily) -> Result<Vec<Incidence>, ModulusError> {
        if family.dim() != self.dim() {
            return Err(ModulusError::InvalidGrid("grid and family dimensions differ".into()));
        }
        let d = self.dim();
        let mut rows = Vec::with_capacity(family.len());
        for c in &family.curves {
            let mut row: Vec<(usize, f64)> = Vec::new();
            for w in c.windows(2) {
                let (a, b) = (&w[0], &w[1]);
                let len = crate::util::euclidean_distance(a, b);
                if len == 0.0 {
                    continue;
                }
                // Parameters where the segment crosses grid planes.
                let mut ts = vec![0.0, 1.0];
                for i in 0..d {
                    let h = self.spacing(i);
                    let (u, v) = ((a[i] - self.lo[i]) / h, (b[i] - self.lo[i]) / h);
                    if (v - u).abs() < 1e-15 {
                        continue;
                    }
                    let (m0, m1) = (u.min(v).ceil() as i64, u.max(v).floor() as i64);
                    for m in m0..=m1 {
                        let t = (m as f64 - u) / (v - u);
                        if t > 0.0 && t < 1.0 {
                            ts.push(t);
                        }
                    }
                }
                ts.sort_by(|x, y| x.total_cmp(y));
                for pair in ts.windows(2) {
                    let dt = pair[1] - pair[0];
                    if dt <= 1e-15 {
                        continue;
                    }
                    let mid: Vec<f64> = (0..d).map(|i| a[i] + 0.5 * (pair[0] + pair[1]) * (b[i] - a[i])).collect();
                    if let Some(k) = self.cell_of(&mid) {
                        match row.iter_mut().find(|e| e.0 == k) {
                            Some(e) => e.1 += dt * len,
                            None => row.push((k, dt * len)),
                        }
                    }
                }
            }
            rows.push(row);
        }
        Ok(rows)
    }

    /// `∫_γ ρ ds` for every curve of the family.
    pub fn line_integrals(&self, family: &CurveFamily) -> Result<Vec<f64>, ModulusError> {
        Ok(self
            .incidence(family)?
            .iter()
            .map(|row| row.iter().map(|&(k, l)| self.values[k] * l).sum())
            .collect())
    }

    /// Heatmap of the first two axes; further axes are summed over.
    pub fn to_svg(&self, title: &str) -> String {
        let (nx, ny) = (self.shape[0], self.shape.get(1).copied().unwrap_or(1));
        let mut plane = vec![0.0; nx * ny];
        for (k, v) in self.values.iter().enumerate() {
            let (i, j) = (k % nx, (k / nx) % ny);
            plane[j * nx + i] += v;
        }
        let max = plane.iter().copied().fold(0.0, f64::max).max(f64::MIN_POSITIVE);
        let size = 480.0;
        let (cw, ch) = (size / nx as f64, size / ny as f64);
        let mut s = String::new();
        let _ = writeln!(
            s,
            r#"<svg xmlns="http://www.w3.org/2000/svg" width="{w}" height="{h}" viewBox="0 0 {w} {h}">"#,
            w = size + 40.0,
            h = size + 60.0
        );
        let _ = writeln!(s, r#"<text x="20" y="24" font-family="sans-serif" font-size="14">{}</text>"#, escape(title));
        for j in 0..ny {
            for i in 0..nx {
                let v = plane[j * nx + i] / max;
                let shade = (255.0 * (1.0 - v)).round() as u8;
                let _ = writeln!(
                    s,
                    r#"<rect x="{:.2}" y="{:.2}" width="{:.2}" height="{:.2}" fill="rgb(255,{shade},{shade})"/>"#,
                    20.0 + i as f64 * cw,
                    40.0 + (ny - 1 - j) as f64 * ch,
                    cw,
                    ch
                );
            }
        }
        s.push_str("</svg>\n");
        s
    }
}

pub(crate) fn escape(t: &str) -> String {
    t.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

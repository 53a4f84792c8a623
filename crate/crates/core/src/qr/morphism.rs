//! Graded morphisms and the blow-up fit of Pansu differentials.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::algebra::{dilate_coords, CarnotAlgebra};
use crate::util::sphere_directions;

use super::{QrError, SmoothMapModel};

/// Layer-preserving linear map between Carnot algebras, determined by its
/// first-layer block.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct GradedMorphism {
    source_layers: Vec<usize>,
    target_layers: Vec<usize>,
    matrix: DMatrix<f64>,
    /// Largest `|A[e_i,e_j] − [Ae_i, Ae_j]|` over basis pairs.
    compatibility: f64,
}

impl GradedMorphism {
    /// Extends a first-layer block to all layers by `A[e_i, b] = [Ae_i, Ab]`.
    pub fn from_first_layer(source: &CarnotAlgebra, target: &CarnotAlgebra, block: DMatrix<f64>) -> Result<Self, QrError> {
        let (n, n2) = (source.dim(), target.dim());
        if block.nrows() != target.rank() || block.ncols() != source.rank() {
            return Err(QrError::Morphism(format!(
                "first-layer block must be {}x{}",
                target.rank(),
                source.rank()
            )));
        }
        if source.step() < target.step() && target.layers()[source.step()..].iter().any(|&d| d > 0) {
            // Fine: higher target layers simply receive nothing.
        }
        let mut a = DMatrix::zeros(n2, n);
        a.view_mut((0, 0), (target.rank(), source.rank())).copy_from(&block);
        for k in 2..=source.step() {
            let src = source.layer_range(k);
            if k > target.step() {
                continue;
            }
            let tgt = target.layer_range(k);
            let prev = source.layer_range(k - 1);
            let mut cols_b = Vec::new();
            let mut cols_c = Vec::new();
            for i in source.layer_range(1) {
                for b in prev.clone() {
                    let mut ei = vec![0.0; n];
                    ei[i] = 1.0;
                    let mut eb = vec![0.0; n];
                    eb[b] = 1.0;
                    let br = source.bracket(&ei, &eb);
                    if br.iter().all(|v| v.abs() < 1e-15) {
                        continue;
                    }
                    let ai: Vec<f64> = a.column(i).iter().copied().collect();
                    let ab: Vec<f64> = a.column(b).iter().copied().collect();
                    let img = target.bracket(&ai, &ab);
                    cols_b.push(DVector::from_iterator(src.len(), src.clone().map(|s| br[s])));
                    cols_c.push(DVector::from_iterator(tgt.len(), tgt.clone().map(|t| img[t])));
                }
            }
            if cols_b.is_empty() {
                continue;
            }
            let bm = DMatrix::from_columns(&cols_b);
            let cm = DMatrix::from_columns(&cols_c);
            let pinv = bm
                .pseudo_inverse(1e-12)
                .map_err(|e| QrError::Morphism(e.to_string()))?;
            let ak = cm * pinv;
            a.view_mut((tgt.start, src.start), (tgt.len(), src.len())).copy_from(&ak);
        }
        let mut m = Self {
            source_layers: source.layers().to_vec(),
            target_layers: target.layers().to_vec(),
            matrix: a,
            compatibility: 0.0,
        };
        m.compatibility = m.bracket_defect(source, target);
        Ok(m)
    }

    pub fn identity(algebra: &CarnotAlgebra) -> Self {
        Self::from_first_layer(algebra, algebra, DMatrix::identity(algebra.rank(), algebra.rank()))
            .expect("identity is a morphism")
    }

    fn bracket_defect(&self, source: &CarnotAlgebra, target: &CarnotAlgebra) -> f64 {
        let n = source.dim();
        let mut worst = 0.0f64;
        for i in 0..n {
            for j in (i + 1)..n {
                let mut ei = vec![0.0; n];
                ei[i] = 1.0;
                let mut ej = vec![0.0; n];
                ej[j] = 1.0;
                let lhs = self.apply(&source.bracket(&ei, &ej));
                let rhs = target.bracket(&self.apply(&ei), &self.apply(&ej));
                for (a, b) in lhs.iter().zip(&rhs) {
                    worst = worst.max((a - b).abs());
                }
            }
        }
        worst
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.matrix
    }

    pub fn first_layer(&self) -> DMatrix<f64> {
        self.matrix
            .view((0, 0), (self.target_layers[0], self.source_layers[0]))
            .into_owned()
    }

    /// Block mapping source layer `k` to target layer `k` (1-based).
    pub fn layer_block(&self, k: usize) -> DMatrix<f64> {
        let offset = |layers: &[usize]| layers[..k - 1].iter().sum::<usize>();
        let (r0, c0) = (offset(&self.target_layers), offset(&self.source_layers));
        let rows = self.target_layers.get(k - 1).copied().unwrap_or(0);
        self.matrix.view((r0, c0), (rows, self.source_layers[k - 1])).into_owned()
    }

    pub fn compatibility_residual(&self) -> f64 {
        self.compatibility
    }

    pub fn apply(&self, v: &[f64]) -> Vec<f64> {
        (&self.matrix * DVector::from_column_slice(v)).iter().copied().collect()
    }

    /// `self ∘ other`.
    pub fn compose(&self, other: &GradedMorphism) -> Result<GradedMorphism, QrError> {
        if other.target_layers != self.source_layers {
            return Err(QrError::Morphism("layer structures do not match".into()));
        }
        Ok(GradedMorphism {
            source_layers: other.source_layers.clone(),
            target_layers: self.target_layers.clone(),
            matrix: &self.matrix * &other.matrix,
            compatibility: self.compatibility.max(other.compatibility),
        })
    }

    /// Largest coordinate defect of `A∘δ_λ = δ'_λ∘A` on the basis.
    pub fn dilation_defect(&self, lambda: f64) -> f64 {
        let ws = weights_of(&self.source_layers);
        let wt = weights_of(&self.target_layers);
        let n = ws.len();
        let mut worst = 0.0f64;
        for i in 0..n {
            let mut e = vec![0.0; n];
            e[i] = 1.0;
            let lhs = self.apply(&dilate_coords(&ws, lambda, &e));
            let rhs = dilate_coords(&wt, lambda, &self.apply(&e));
            for (a, b) in lhs.iter().zip(&rhs) {
                worst = worst.max((a - b).abs());
            }
        }
        worst
    }
}

fn weights_of(layers: &[usize]) -> Vec<u32> {
    layers
        .iter()
        .enumerate()
        .flat_map(|(k, &d)| std::iter::repeat_n(k as u32 + 1, d))
        .collect()
}

/// Default number of first-layer directions for the norms.
pub const NORM_SAMPLES: usize = 4096;

/// `(‖A‖, ‖A‖_s)`: max and min of `|A v|` over unit vectors of the first layer.
pub fn morphism_norms(a: &GradedMorphism) -> (f64, f64) {
    let m = a.first_layer();
    let r = m.ncols();
    if r == 1 {
        let v = m.column(0).norm();
        return (v, v);
    }
    let dirs = sphere_directions(r, NORM_SAMPLES);
    let mut hi = 0.0f64;
    let mut lo = f64::INFINITY;
    for d in dirs {
        let v = (&m * DVector::from_vec(d)).norm();
        hi = hi.max(v);
        lo = lo.min(v);
    }
    (hi, lo)
}

/// Lebesgue scaling factor of `A`: product of `|det|` of the layer blocks.
pub fn morphism_jacobian(a: &GradedMorphism) -> f64 {
    let mut j = 1.0;
    for k in 1..=a.source_layers.len() {
        let b = a.layer_block(k);
        if b.nrows() != b.ncols() {
            return 0.0;
        }
        j *= b.determinant().abs();
    }
    j
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PansuOptions {
    pub eps: Vec<f64>,
    pub samples: usize,
    /// Residuals below this count as exact.
    pub floor: f64,
}

impl Default for PansuOptions {
    fn default() -> Self {
        Self {
            eps: (0..6).map(|i| 0.1 * 0.5f64.powi(i)).collect(),
            samples: 64,
            floor: 1e-9,
        }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct PansuFit {
    pub point: Vec<f64>,
    pub eps: Vec<f64>,
    /// Fit residual `max_j |A v_j − f^{o,ε}(v_j)|_∞` per scale.
    pub residuals: Vec<f64>,
    pub decreasing: bool,
    /// Differential fitted at the smallest scale; absent when residuals do not decrease.
    pub morphism: Option<GradedMorphism>,
}

impl PansuFit {
    /// Ratios `res(ε_i) / res(ε_{i+1})` along the ladder.
    pub fn decay_ratios(&self) -> Vec<f64> {
        self.residuals.windows(2).map(|w| w[0] / w[1]).collect()
    }
}

/// Fits the Pansu differential of `f` at `o` from blow-ups
/// `f^{o,ε}(v) = δ_{1/ε}(f(o)⁻¹ f(o δ_ε v))`.
pub fn pansu_differential(f: &SmoothMapModel, o: &[f64], opts: &PansuOptions) -> Result<PansuFit, QrError> {
    let src = f
        .domain
        .group()
        .ok_or_else(|| QrError::Unsupported("Pansu fit needs a Carnot group domain".into()))?;
    let tgt = f
        .target
        .group()
        .ok_or_else(|| QrError::Unsupported("Pansu fit needs a Carnot group target".into()))?;
    if o.len() != src.dim() {
        return Err(QrError::Dimension(format!("point must have {} coordinates", src.dim())));
    }
    if opts.eps.is_empty() || opts.samples < src.rank() {
        return Err(QrError::Options("need scales and at least rank-many samples".into()));
    }
    let (n, r, r2) = (src.dim(), src.rank(), tgt.rank());
    let norm_src = src.default_norm();
    // Samples on the homogeneous unit sphere.
    let vs: Vec<Vec<f64>> = sphere_directions(n, opts.samples)
        .into_iter()
        .map(|d| {
            let s = norm_src.eval(&d);
            dilate_coords(src.weights(), 1.0 / s, &d)
        })
        .collect();
    let fo = f.eval(o);
    let fo_inv: Vec<f64> = fo.iter().map(|v| -v).collect();

    let mut residuals = Vec::new();
    let mut last = None;
    for &eps in &opts.eps {
        let ws: Vec<Vec<f64>> = vs
            .iter()
            .map(|v| {
                let x = src.mul(o, &dilate_coords(src.weights(), eps, v));
                dilate_coords(tgt.weights(), 1.0 / eps, &tgt.mul(&fo_inv, &f.eval(&x)))
            })
            .collect();
        // Least squares M: rows of W1 = V1 Mᵀ.
        let v1 = DMatrix::from_fn(vs.len(), r, |j, i| vs[j][i]);
        let w1 = DMatrix::from_fn(vs.len(), r2, |j, i| ws[j][i]);
        let mt = v1
            .svd(true, true)
            .solve(&w1, 1e-12)
            .map_err(|e| QrError::Morphism(e.to_string()))?;
        let a = GradedMorphism::from_first_layer(src, tgt, mt.transpose())?;
        // Coordinate error in the target chart: first order in ε for smooth maps.
        let res = vs
            .iter()
            .zip(&ws)
            .map(|(v, w)| {
                let av = a.apply(v);
                av.iter().zip(w).fold(0.0f64, |m, (p, q)| m.max((p - q).abs()))
            })
            .fold(0.0, f64::max);
        residuals.push(res);
        last = Some(a);
    }
    let decreasing = residuals
        .windows(2)
        .all(|w| w[1] < w[0] || w[1] <= opts.floor);
    Ok(PansuFit {
        point: o.to_vec(),
        eps: opts.eps.clone(),
        residuals,
        decreasing,
        morphism: if decreasing { last } else { None },
    })
}

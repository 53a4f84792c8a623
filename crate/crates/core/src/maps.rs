//! Catalogue of example maps with exact auxiliary data.
//!
//! Names: `identity`, `translation(g_1,…,g_n)`, `dilation(λ)`,
//! `automorphism(a,b,c,d|e)` (Heisenberg) or `automorphism(m_11,…,m_nn)`
//! (Euclidean), and `winding`. A suffix `@space` picks the space; the default
//! is `heisenberg1`, e.g. `dilation(2)@euclidean(2)`.
//!
//! Heisenberg convention: `X = ∂x − (y/2)∂t`, `Y = ∂y + (x/2)∂t`, group law
//! `(x,y,t)(x',y',t') = (x+x', y+y', t+t'+½(xy'−yx'))`.

use std::fmt;
use std::sync::Arc;

use nalgebra::DMatrix;
use thiserror::Error;

use crate::algebra::dilate_coords;
use crate::metric::DistanceOptions;
use crate::space::{resolve_space, SrSpace};
use crate::util::{halton, parse_floats, split_call};

pub type Evaluator = Arc<dyn Fn(&[f64]) -> Vec<f64> + Send + Sync>;
pub type PreimageFn = Arc<dyn Fn(&[f64]) -> Vec<Vec<f64>> + Send + Sync>;
/// First-layer block of the Pansu differential at a point, `None` where undefined.
pub type DifferentialFn = Arc<dyn Fn(&[f64]) -> Option<DMatrix<f64>> + Send + Sync>;
pub type LocusDistance = Arc<dyn Fn(&[f64]) -> f64 + Send + Sync>;

#[derive(Debug, Error)]
pub enum MapError {
    #[error("unknown map {0:?}")]
    Unknown(String),
    #[error("invalid map descriptor: {0}")]
    InvalidDescriptor(String),
    #[error("cannot compose: {0}")]
    Composition(String),
    #[error("found only {found} of {requested} probe points outside the excluded locus")]
    InsufficientPoints { found: usize, requested: usize },
}

#[derive(Clone)]
pub struct MapDescriptor {
    pub name: String,
    pub domain: Arc<dyn SrSpace>,
    pub target: Arc<dyn SrSpace>,
    eval: Evaluator,
    preimages: Option<PreimageFn>,
    differential: Option<DifferentialFn>,
    branch_distance: LocusDistance,
    /// Human-readable description of the expected branch set.
    pub branch_locus: String,
    /// Default region for probes and scans.
    pub probe_box: (Vec<f64>, Vec<f64>),
}

impl fmt::Debug for MapDescriptor {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("MapDescriptor")
            .field("name", &self.name)
            .field("domain", &self.domain.name())
            .field("target", &self.target.name())
            .field("preimages", &self.preimages.is_some())
            .field("differential", &self.differential.is_some())
            .field("branch_locus", &self.branch_locus)
            .finish()
    }
}

impl MapDescriptor {
    /// A map without auxiliary data; probes default to `[-1, 1]^n`.
    pub fn new(name: &str, domain: Arc<dyn SrSpace>, target: Arc<dyn SrSpace>, eval: Evaluator) -> Self {
        let n = domain.dim();
        Self {
            name: name.into(),
            domain,
            target,
            eval,
            preimages: None,
            differential: None,
            branch_distance: Arc::new(|_| f64::INFINITY),
            branch_locus: "none".into(),
            probe_box: (vec![-1.0; n], vec![1.0; n]),
        }
    }

    pub fn with_preimages(mut self, p: PreimageFn) -> Self {
        self.preimages = Some(p);
        self
    }

    pub fn with_differential(mut self, d: DifferentialFn) -> Self {
        self.differential = Some(d);
        self
    }

    pub fn with_branch_locus(mut self, description: &str, distance: LocusDistance) -> Self {
        self.branch_locus = description.into();
        self.branch_distance = distance;
        self
    }

    pub fn eval(&self, x: &[f64]) -> Vec<f64> {
        (self.eval)(x)
    }

    pub fn evaluator(&self) -> Evaluator {
        self.eval.clone()
    }

    pub fn has_preimages(&self) -> bool {
        self.preimages.is_some()
    }

    /// Exact preimages of `y` when the catalogue knows them.
    pub fn preimages(&self, y: &[f64]) -> Option<Vec<Vec<f64>>> {
        self.preimages.as_ref().map(|p| p(y))
    }

    pub fn known_differential(&self, x: &[f64]) -> Option<DMatrix<f64>> {
        self.differential.as_ref().and_then(|d| d(x))
    }

    /// Distance-like function to the declared branch locus (`∞` when there is none).
    pub fn branch_distance(&self, x: &[f64]) -> f64 {
        (self.branch_distance)(x)
    }
}

fn group_of(space: &Arc<dyn SrSpace>, what: &str) -> Result<crate::algebra::CarnotAlgebra, MapError> {
    space
        .group()
        .cloned()
        .ok_or_else(|| MapError::InvalidDescriptor(format!("{what} needs a group structure on {}", space.name())))
}

/// Looks up a catalogue map.
pub fn builtin(spec: &str) -> Result<MapDescriptor, MapError> {
    let (map_part, space_part) = match spec.rsplit_once('@') {
        Some((m, s)) => (m.trim(), s.trim()),
        None => (spec.trim(), "heisenberg1"),
    };
    let space = resolve_space(space_part, &DistanceOptions::default())
        .map_err(|e| MapError::InvalidDescriptor(e.to_string()))?;
    let n = space.dim();
    let r = space.rank();
    let (head, arg) = split_call(map_part).ok_or_else(|| MapError::Unknown(spec.into()))?;
    let floats = |a: Option<&str>| -> Result<Vec<f64>, MapError> {
        a.and_then(parse_floats)
            .ok_or_else(|| MapError::InvalidDescriptor(format!("cannot parse arguments of {spec:?}")))
    };
    let d = match (head, arg) {
        ("identity", None) => MapDescriptor::new(spec, space.clone(), space.clone(), Arc::new(|x| x.to_vec()))
            .with_preimages(Arc::new(|y| vec![y.to_vec()]))
            .with_differential(Arc::new(move |_| Some(DMatrix::identity(r, r)))),
        ("translation", a) => {
            let g = floats(a)?;
            if g.len() != n {
                return Err(MapError::InvalidDescriptor(format!("translation needs {n} coordinates")));
            }
            let alg = group_of(&space, "translation")?;
            let ginv: Vec<f64> = g.iter().map(|v| -v).collect();
            let alg2 = alg.clone();
            MapDescriptor::new(spec, space.clone(), space.clone(), Arc::new(move |x| alg.mul(&g, x)))
                .with_preimages(Arc::new(move |y| vec![alg2.mul(&ginv, y)]))
                .with_differential(Arc::new(move |_| Some(DMatrix::identity(r, r))))
        }
        ("dilation", a) => {
            let v = floats(a)?;
            let lambda = match v.as_slice() {
                [l] if *l > 0.0 => *l,
                _ => return Err(MapError::InvalidDescriptor("dilation needs one positive factor".into())),
            };
            let w = space.weights().to_vec();
            let w2 = w.clone();
            MapDescriptor::new(spec, space.clone(), space.clone(), Arc::new(move |x| dilate_coords(&w, lambda, x)))
                .with_preimages(Arc::new(move |y| vec![dilate_coords(&w2, 1.0 / lambda, y)]))
                .with_differential(Arc::new(move |_| Some(DMatrix::identity(r, r) * lambda)))
        }
        ("automorphism", Some(a)) => automorphism(spec, space.clone(), a)?,
        ("winding", None) => {
            if space.name() != "heisenberg1" {
                return Err(MapError::InvalidDescriptor("winding is defined on heisenberg1 only".into()));
            }
            winding(spec, space.clone())
        }
        _ => return Err(MapError::Unknown(spec.into())),
    };
    Ok(d)
}

fn automorphism(spec: &str, space: Arc<dyn SrSpace>, arg: &str) -> Result<MapDescriptor, MapError> {
    let bad = |m: &str| MapError::InvalidDescriptor(format!("{spec}: {m}"));
    let alg = group_of(&space, "automorphism")?;
    let n = alg.dim();
    let r = alg.rank();
    let (block_txt, upper_txt) = match arg.split_once('|') {
        Some((b, u)) => (b, Some(u)),
        None => (arg, None),
    };
    let block = parse_floats(block_txt).ok_or_else(|| bad("cannot parse block"))?;
    if block.len() != r * r {
        return Err(bad(&format!("first-layer block needs {} entries", r * r)));
    }
    let m = DMatrix::from_row_slice(r, r, &block);
    // Induced higher layers; compared against any declared values.
    let full = crate::qr::GradedMorphism::from_first_layer(&alg, &alg, m.clone())
        .map_err(|e| bad(&e.to_string()))?;
    if full.compatibility_residual() > 1e-10 {
        return Err(bad("block is not compatible with brackets"));
    }
    if let Some(u) = upper_txt {
        let declared = parse_floats(u).ok_or_else(|| bad("cannot parse higher layers"))?;
        let induced: Vec<f64> = (r..n).map(|i| full.matrix()[(i, i)]).collect();
        let diag_only = (r..n).all(|i| (r..n).all(|j| i == j || full.matrix()[(i, j)].abs() < 1e-12));
        if declared.len() != n - r || !diag_only {
            return Err(bad("higher layers must be listed as the diagonal of the induced map"));
        }
        for (d, e) in declared.iter().zip(&induced) {
            if (d - e).abs() > 1e-12 * (1.0 + e.abs()) {
                return Err(bad(&format!("higher-layer entry {d} violates bracket compatibility (expected {e})")));
            }
        }
    } else if n > r {
        return Err(bad("higher-layer entries missing (use a|b syntax)"));
    }
    let mat = full.matrix().clone();
    let inv = mat
        .clone()
        .try_inverse()
        .ok_or_else(|| bad("block is singular"))?;
    let apply = |a: &DMatrix<f64>, x: &[f64]| -> Vec<f64> { (a * nalgebra::DVector::from_column_slice(x)).iter().copied().collect() };
    let m1 = mat.clone();
    Ok(
        MapDescriptor::new(spec, space.clone(), space, Arc::new(move |x| apply(&m1, x)))
            .with_preimages(Arc::new(move |y| vec![apply(&inv, y)]))
            .with_differential(Arc::new(move |_| Some(m.clone()))),
    )
}

/// `(r, φ, t) ↦ (r/2, 2φ, t/2)` in cylindrical coordinates.
fn winding(spec: &str, space: Arc<dyn SrSpace>) -> MapDescriptor {
    let eval = |x: &[f64]| -> Vec<f64> {
        let r = x[0].hypot(x[1]);
        if r == 0.0 {
            return vec![0.0, 0.0, 0.5 * x[2]];
        }
        // z²/(2|z|) with z = x + iy
        vec![(x[0] * x[0] - x[1] * x[1]) / (2.0 * r), x[0] * x[1] / r, 0.5 * x[2]]
    };
    let pre = |y: &[f64]| -> Vec<Vec<f64>> {
        let rr = y[0].hypot(y[1]);
        let t = 2.0 * y[2];
        if rr == 0.0 {
            return vec![vec![0.0, 0.0, t]];
        }
        let phi = 0.5 * y[1].atan2(y[0]);
        let r = 2.0 * rr;
        let (s, c) = phi.sin_cos();
        vec![vec![r * c, r * s, t], vec![-r * c, -r * s, t]]
    };
    let diff = |x: &[f64]| -> Option<DMatrix<f64>> {
        let r = x[0].hypot(x[1]);
        if r == 0.0 {
            return None;
        }
        let (s, c) = (x[1] / r, x[0] / r);
        let rot = |c: f64, s: f64| DMatrix::from_row_slice(2, 2, &[c, -s, s, c]);
        let (s2, c2) = (2.0 * s * c, c * c - s * s);
        Some(rot(c2, s2) * DMatrix::from_row_slice(2, 2, &[0.5, 0.0, 0.0, 1.0]) * rot(c, -s))
    };
    MapDescriptor::new(spec, space.clone(), space, Arc::new(eval))
        .with_preimages(Arc::new(pre))
        .with_differential(Arc::new(diff))
        .with_branch_locus("t-axis", Arc::new(|x| x[0].hypot(x[1])))
}

/// `f ∘ g`.
pub fn compose(f: &MapDescriptor, g: &MapDescriptor) -> Result<MapDescriptor, MapError> {
    if g.target.name() != f.domain.name() || g.target.dim() != f.domain.dim() {
        return Err(MapError::Composition(format!(
            "target {} of {} differs from domain {} of {}",
            g.target.name(),
            g.name,
            f.domain.name(),
            f.name
        )));
    }
    let (fe, ge) = (f.eval.clone(), g.eval.clone());
    let name = format!("compose({},{})", f.name, g.name);
    let mut out = MapDescriptor::new(&name, g.domain.clone(), f.target.clone(), Arc::new(move |x| fe(&ge(x))));
    if let (Some(fp), Some(gp)) = (f.preimages.clone(), g.preimages.clone()) {
        out = out.with_preimages(Arc::new(move |y| fp(y).iter().flat_map(|m| gp(m)).collect()));
    }
    if let (Some(fd), Some(gd)) = (f.differential.clone(), g.differential.clone()) {
        let ge = g.eval.clone();
        out = out.with_differential(Arc::new(move |x| Some(fd(&ge(x))? * gd(x)?)));
    }
    let (fb, gb, ge) = (f.branch_distance.clone(), g.branch_distance.clone(), g.eval.clone());
    out = out.with_branch_locus(
        &format!("{} ∪ preimage of ({})", g.branch_locus, f.branch_locus),
        Arc::new(move |x| gb(x).min(fb(&ge(x)))),
    );
    out.probe_box = g.probe_box.clone();
    Ok(out)
}

/// Low-discrepancy points of the probe box at branch distance ≥ `exclusion`.
pub fn random_probe_points(d: &MapDescriptor, count: usize, exclusion: f64) -> Result<Vec<Vec<f64>>, MapError> {
    let (lo, hi) = &d.probe_box;
    let n = lo.len();
    let mut out = Vec::with_capacity(count);
    let budget = 1000 * count as u64 + 1000;
    let mut i = 0u64;
    while out.len() < count && i < budget {
        let u = halton(i, n);
        i += 1;
        let x: Vec<f64> = (0..n).map(|k| lo[k] + u[k] * (hi[k] - lo[k])).collect();
        if d.branch_distance(&x) >= exclusion {
            out.push(x);
        }
    }
    if out.len() < count {
        return Err(MapError::InsufficientPoints {
            found: out.len(),
            requested: count,
        });
    }
    Ok(out)
}

/// Names listed by the command line front end.
pub const CATALOG: &[&str] = &[
    "identity",
    "translation(g1,g2,g3)",
    "dilation(lambda)",
    "automorphism(a,b,c,d|e)",
    "winding",
    "identity@euclidean(2)",
    "dilation(lambda)@euclidean(2)",
];

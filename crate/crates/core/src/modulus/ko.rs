use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::qr::{NewtonOptions, Region, SmoothMapModel};
use crate::util::task_rng;

use super::solve::{modulus_p, ModulusOptions};
use super::{CurveFamily, DensityGrid, ModulusError};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct KoOptions {
    /// Monte Carlo points per cell where the test density is positive.
    pub samples_per_cell: usize,
    /// Segment subdivisions when mapping curves.
    pub subdivisions: usize,
    pub admissibility_tolerance: f64,
    pub newton: NewtonOptions,
    pub modulus: ModulusOptions,
    pub seed: u64,
}

impl Default for KoOptions {
    fn default() -> Self {
        Self {
            samples_per_cell: 2,
            subdivisions: 8,
            admissibility_tolerance: 1e-3,
            newton: NewtonOptions {
                starts: 16,
                ..Default::default()
            },
            modulus: ModulusOptions::default(),
            seed: 0,
        }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct KoReport {
    pub map: String,
    pub exponent: f64,
    /// `Mod_Q(Γ)` on the source grid.
    pub modulus: f64,
    /// `∫ N(y, f, Ω) ρ^Q dy`.
    pub image_integral: f64,
    /// `Mod_Q(Γ) / ∫ N ρ^Q`.
    pub k: f64,
    pub min_image_integral: f64,
    pub cells_sampled: usize,
    pub incomplete_targets: usize,
    pub source_shape: Vec<usize>,
    pub image_shape: Vec<usize>,
}

/// Implied constant of `Mod_Q(Γ) ≤ K ∫ N(y,f,Ω) ρ^Q` for a density `rho`
/// admissible for `f(Γ)`.
pub fn ko_check(
    f: &SmoothMapModel,
    family: &CurveFamily,
    omega: &Region,
    rho: &DensityGrid,
    source_shape: &[usize],
    q: f64,
    opts: &KoOptions,
) -> Result<KoReport, ModulusError> {
    let image = family.map_through(&|x| f.eval(x), opts.subdivisions, rho.lo.clone(), rho.hi.clone())?;
    let ints = rho.line_integrals(&image)?;
    let min_int = ints.iter().copied().fold(f64::INFINITY, f64::min);
    let violators: Vec<usize> = ints
        .iter()
        .enumerate()
        .filter(|(_, v)| **v < 1.0 - opts.admissibility_tolerance)
        .map(|(i, _)| i)
        .collect();
    if !violators.is_empty() {
        return Err(ModulusError::NotAdmissible { violators, worst: min_int });
    }
    let modulus = modulus_p(family, source_shape, q, &opts.modulus)?.value;

    let starts = omega.starts(f.domain.as_ref(), opts.newton.starts);
    let mu = rho.cell_volume();
    // Cells whose share of the energy is negligible are skipped.
    let floor = 1e-12 * rho.energy(q);
    let cells: Vec<usize> = (0..rho.cells())
        .filter(|&k| rho.values[k] > 0.0 && mu * rho.values[k].powf(q) > floor)
        .collect();
    let spacing: Vec<f64> = (0..rho.dim()).map(|i| rho.spacing(i)).collect();
    let parts: Vec<(f64, usize)> = cells
        .par_iter()
        .map(|&k| {
            let mut rng = task_rng(opts.seed, k as u64);
            let lo = rho.cell_lo(k);
            let mut total = 0.0;
            let mut incomplete = 0;
            for _ in 0..opts.samples_per_cell {
                let y: Vec<f64> = lo.iter().zip(&spacing).map(|(a, h)| a + h * rng.random::<f64>()).collect();
                let res = crate::qr::multiplicity_with_starts(f, &y, &starts, omega, &opts.newton);
                if res.incomplete {
                    incomplete += 1;
                }
                total += res.count as f64;
            }
            (mu * rho.values[k].powf(q) * total / opts.samples_per_cell.max(1) as f64, incomplete)
        })
        .collect();
    let image_integral: f64 = parts.iter().map(|p| p.0).sum();
    Ok(KoReport {
        map: f.name.clone(),
        exponent: q,
        modulus,
        image_integral,
        k: modulus / image_integral,
        min_image_integral: min_int,
        cells_sampled: cells.len(),
        incomplete_targets: parts.iter().map(|p| p.1).sum(),
        source_shape: source_shape.to_vec(),
        image_shape: rho.shape.clone(),
    })
}

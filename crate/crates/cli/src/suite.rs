//! The acceptance battery behind `carnot-qr suite`.
//!
//! The JSON report holds only seed-determined values; wall-clock timings go to
//! the terminal summary and a separate CSV.

use std::fmt::Write;
use std::time::{Duration, Instant};

use carnot_qr::algebra::check_group_laws;
use carnot_qr::frame::{blowup_frame, nilpotent_approximation};
use carnot_qr::maps::{builtin, MapDescriptor};
use carnot_qr::metric::{ball_box_report, cc_distance, heisenberg_distance, DistanceOptions};
use carnot_qr::modulus::{modulus_exhaustive, modulus_p, CurveFamily, ModulusOptions};
use carnot_qr::qr::{
    area_formula_check, dilatation_profile, jacobian_volume_ratio, local_injectivity_scan, morphism_jacobian,
    morphism_norms, multiplicity_count, pansu_differential, tail, AreaOptions, GradedMorphism, JacobianOptions,
    NewtonOptions, PansuOptions, ProfileOptions, Region, ScanOptions,
};
use carnot_qr::space::CarnotSpace;
use carnot_qr::util::task_rng;
use carnot_qr::{CarnotAlgebra, HorizontalFrame};
use nalgebra::DMatrix;
use rand::Rng;
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use crate::commands::ko_pipeline;
use crate::config::{Command, RunConfig};
use crate::{Artifact, CliError};

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct CriterionResult {
    pub id: u32,
    pub name: String,
    pub passed: bool,
    pub measured: Value,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct SuiteReport {
    pub seed: u64,
    pub criteria: Vec<CriterionResult>,
    pub all_passed: bool,
}

/// Runtime budget of each criterion, in seconds.
pub const BUDGETS: [(u32, u64); 13] = [
    (1, 5),
    (2, 10),
    (3, 300),
    (4, 600),
    (5, 120),
    (6, 900),
    (7, 900),
    (8, 900),
    (9, 900),
    (10, 1200),
    (11, 600),
    (12, 600),
    (13, 60),
];

fn criterion(id: u32, name: &str, passed: bool, measured: Value) -> CriterionResult {
    CriterionResult {
        id,
        name: name.into(),
        passed,
        measured,
    }
}

fn laws(seed: u64) -> Result<CriterionResult, CliError> {
    let h1 = CarnotAlgebra::heisenberg();
    let engel = CarnotAlgebra::engel();
    let a = check_group_laws(&h1, 1000, seed);
    let b = check_group_laws(&engel, 1000, seed.wrapping_add(1));
    let passed = a.worst() <= 1e-12
        && b.worst() <= 1e-12
        && h1.homogeneous_dimension() == 4
        && engel.homogeneous_dimension() == 7
        && h1.verify_structure().is_valid()
        && engel.verify_structure().is_valid();
    Ok(criterion(1, "group laws on h1 and Engel", passed, json!({ "heisenberg1": a, "engel": b })))
}

fn tangent_cone() -> Result<CriterionResult, CliError> {
    let frame = HorizontalFrame::perturbed_heisenberg();
    let na = nilpotent_approximation(&frame, &[0.0; 3])?;
    let h1 = CarnotAlgebra::heisenberg();
    let mut exact = na.algebra.layers() == h1.layers();
    for i in 0..3 {
        for j in 0..3 {
            for k in 0..3 {
                exact &= na.algebra.constant(i, j, k) == h1.constant(i, j, k);
            }
        }
    }
    let eps = [1.0, 0.5, 0.25, 0.125];
    let mut dist = Vec::new();
    for &e in &eps {
        dist.push(blowup_frame(&frame, &[0.0; 3], e)?.max_coefficient_distance(&na.limit_frame));
    }
    let quadratic = dist.windows(2).all(|w| w[1] <= w[0] / 4.0 + 1e-15);
    Ok(criterion(
        2,
        "tangent cone of the perturbed Heisenberg frame",
        exact && quadratic,
        json!({ "constants_exact": exact, "eps": eps, "coefficient_distance": dist }),
    ))
}

fn ball_box(seed: u64) -> Result<CriterionResult, CliError> {
    let space = CarnotSpace::heisenberg();
    let rep = ball_box_report(&space, &[0.0; 3], 1.0, 5, 1_000_000, seed)?;
    let passed = (rep.fitted_slope - 4.0).abs() <= 0.2;
    Ok(criterion(3, "ball-box slope on h1", passed, serde_json::to_value(&rep)?))
}

fn distance_laws(seed: u64) -> Result<CriterionResult, CliError> {
    let frame = HorizontalFrame::heisenberg();
    let alg = CarnotAlgebra::heisenberg();
    let opts = DistanceOptions {
        starts: 4,
        seed,
        ..Default::default()
    };
    let mut rng = task_rng(seed, 4);
    let (mut worst_h, mut worst_l, mut worst_exact) = (0.0f64, 0.0f64, 0.0f64);
    let mut unconverged = 0;
    for _ in 0..50 {
        let q: Vec<f64> = (0..3).map(|_| rng.random_range(-1.0..=1.0)).collect();
        let g: Vec<f64> = (0..3).map(|_| rng.random_range(-1.0..=1.0)).collect();
        let q2 = vec![2.0 * q[0], 2.0 * q[1], 4.0 * q[2]];
        let d = cc_distance(&frame, &[0.0; 3], &q, &opts)?;
        let d2 = cc_distance(&frame, &[0.0; 3], &q2, &opts)?;
        let dl = cc_distance(&frame, &g, &alg.mul(&g, &q), &opts)?;
        unconverged += [&d, &d2, &dl].iter().filter(|r| !r.converged).count();
        worst_h = worst_h.max((d2.value / d.value - 2.0).abs() / 2.0);
        worst_l = worst_l.max((dl.value - d.value).abs() / d.value);
        worst_exact = worst_exact.max((d.value - heisenberg_distance(&[0.0; 3], &q)).abs() / d.value);
    }
    Ok(criterion(
        4,
        "distance homogeneity and left invariance (solver)",
        worst_h <= 0.02 && worst_l <= 0.02,
        json!({
            "pairs": 50,
            "max_homogeneity_defect": worst_h,
            "max_invariance_defect": worst_l,
            "max_error_vs_closed_form": worst_exact,
            "unconverged_solves": unconverged,
        }),
    ))
}

fn modulus_oracle(seed: u64) -> Result<CriterionResult, CliError> {
    let opts = ModulusOptions::default();
    let mut rect = Vec::new();
    let mut ok = true;
    for (w, h) in [(1.0, 1.0), (2.0, 1.0), (1.0, 3.0)] {
        let v = modulus_p(&CurveFamily::rectangle(w, h, 1000)?, &[16, 16], 2.0, &opts)?.value;
        let err = (v - h / w).abs() / (h / w);
        ok &= err <= 0.05;
        rect.push(json!({ "width": w, "height": h, "value": v, "relative_error": err }));
    }
    let mut rng = task_rng(seed, 5);
    let mut gaps = Vec::new();
    for _ in 0..4 {
        let curves: Vec<Vec<Vec<f64>>> = (0..20)
            .map(|_| (0..3).map(|_| vec![rng.random::<f64>(), rng.random::<f64>()]).collect())
            .collect();
        let fam = CurveFamily::new(curves, vec![0.0, 0.0], vec![1.0, 1.0], 1e-6)?;
        let pg = modulus_p(&fam, &[8, 8], 2.0, &opts)?.value;
        let ex = modulus_exhaustive(&fam, &[8, 8], 2.0, 100_000)?.value;
        let gap = (pg - ex).abs() / ex;
        ok &= gap <= 1e-3;
        gaps.push(json!({ "projected_gradient": pg, "exhaustive": ex, "relative_gap": gap }));
    }
    Ok(criterion(5, "modulus oracles", ok, json!({ "rectangles": rect, "random_families": gaps })))
}

/// Seeded points of the map's probe box at least `exclusion` from its branch locus.
fn seeded_points(f: &MapDescriptor, count: usize, exclusion: f64, rng: &mut impl Rng) -> Vec<Vec<f64>> {
    let (lo, hi) = &f.probe_box;
    let mut out = Vec::with_capacity(count);
    while out.len() < count {
        let x: Vec<f64> = lo.iter().zip(hi).map(|(a, b)| a + (b - a) * rng.random::<f64>()).collect();
        if f.branch_distance(&x) >= exclusion {
            out.push(x);
        }
    }
    out
}

const MAPS: [&str; 5] = [
    "identity",
    "translation(0.3,-0.2,0.1)",
    "dilation(2)",
    "automorphism(2,0,0,3|6)",
    "winding",
];

#[derive(Serialize)]
struct PointCheck {
    point: Vec<f64>,
    norm: f64,
    co_norm: f64,
    lip: f64,
    lip_lower: f64,
    h: f64,
    h_sphere: f64,
    residual_decay: Vec<f64>,
}

/// Pansu fits and dilatation profiles shared by criteria 6, 8 and 9.
fn map_battery(seed: u64) -> Result<Vec<(String, Vec<PointCheck>)>, CliError> {
    let mut rng = task_rng(seed, 6);
    let mut out = Vec::new();
    for name in MAPS {
        let f = builtin(name)?;
        let mut checks = Vec::new();
        for x in seeded_points(&f, 10, 0.2, &mut rng) {
            let fit = pansu_differential(&f, &x, &PansuOptions::default())?;
            let (norm, co_norm) = fit.morphism.as_ref().map_or((f64::NAN, f64::NAN), morphism_norms);
            let prof = dilatation_profile(&f, &x, 0.1, 6, &ProfileOptions::default())?;
            let ratios: Vec<f64> = prof.big_l.iter().zip(&prof.radii).map(|(l, r)| l / r).collect();
            let t = tail(&ratios, 0);
            checks.push(PointCheck {
                point: x,
                norm,
                co_norm,
                lip: t.iter().copied().fold(0.0, f64::max),
                lip_lower: t.iter().copied().fold(f64::INFINITY, f64::min),
                h: prof.h_limit,
                h_sphere: prof.h_sphere_limit,
                residual_decay: fit.decay_ratios(),
            });
        }
        out.push((name.to_string(), checks));
    }
    Ok(out)
}

fn lip_criteria(battery: &[(String, Vec<PointCheck>)]) -> [CriterionResult; 3] {
    let (mut c6, mut c8, mut c9) = (true, true, true);
    let mut rows = Vec::new();
    for (name, checks) in battery {
        let mut worst_lip = 0.0f64;
        let mut worst_lip_lower = 0.0f64;
        let mut worst_h_ratio = 0.0f64;
        let mut worst_h_gap = 0.0f64;
        for c in checks {
            let e = (c.lip - c.norm).abs() / c.norm;
            worst_lip = if e.is_nan() { f64::INFINITY } else { worst_lip.max(e) };
            worst_lip_lower = worst_lip_lower.max((c.lip - c.lip_lower).abs() / c.lip);
            worst_h_ratio = worst_h_ratio.max((c.norm / c.co_norm) / c.h);
            worst_h_gap = worst_h_gap.max((c.h - c.h_sphere).abs() / c.h);
        }
        c6 &= worst_lip <= 0.03;
        c8 &= worst_h_ratio <= 1.1;
        c9 &= worst_h_gap <= 0.1;
        rows.push(json!({
            "map": name,
            "max_lip_vs_norm": worst_lip,
            "max_lip_spread": worst_lip_lower,
            "max_norm_ratio_over_h": worst_h_ratio,
            "max_h_vs_h_sphere": worst_h_gap,
            "points": checks,
        }));
    }
    let all = Value::Array(rows);
    let pick = |key: &str| -> Value {
        Value::Array(
            all.as_array()
                .expect("array")
                .iter()
                .map(|r| json!({ "map": r["map"], key: r[key] }))
                .collect(),
        )
    };
    [
        criterion(6, "Lip f = |Df| at random points", c6, all.clone()),
        criterion(8, "|Df|/|Df|_s <= 1.1 H_f", c8, pick("max_norm_ratio_over_h")),
        criterion(9, "H_f and H'_f agree within 10%", c9, pick("max_h_vs_h_sphere")),
    ]
}

fn jacobians(seed: u64) -> Result<CriterionResult, CliError> {
    let h1 = CarnotAlgebra::heisenberg();
    let known = GradedMorphism::from_first_layer(&h1, &h1, DMatrix::from_row_slice(2, 2, &[2.0, 0.0, 0.0, 3.0]))?;
    let exact = morphism_jacobian(&known);
    let mut ok = exact == 36.0;
    let mut rng = task_rng(seed, 7);
    let opts = JacobianOptions::default();
    let mut rows = Vec::new();
    for name in ["automorphism(2,0,0,3|6)", "winding"] {
        let f = builtin(name)?;
        for (i, x) in seeded_points(&f, 5, 0.2, &mut rng).into_iter().enumerate() {
            let fit = pansu_differential(&f, &x, &PansuOptions::default())?;
            let j_morph = fit.morphism.as_ref().map_or(f64::NAN, morphism_jacobian);
            let est = jacobian_volume_ratio(&f, &x, &[0.1, 0.05], seed.wrapping_add(100 + i as u64), &opts)?;
            let err = (est.extrapolated - j_morph).abs() / j_morph;
            ok &= err <= 0.1 && !est.unreliable;
            rows.push(json!({
                "map": name,
                "point": x,
                "morphism_jacobian": j_morph,
                "volume_ratio": est.extrapolated,
                "ratios": est.ratios,
                "relative_error": err,
            }));
        }
    }
    Ok(criterion(
        7,
        "Jacobian of the differential vs volume ratio",
        ok,
        json!({ "automorphism_morphism_jacobian": exact, "points": rows }),
    ))
}

fn branch_locus() -> Result<CriterionResult, CliError> {
    let f = builtin("winding")?;
    let scan = local_injectivity_scan(&f, &[-1.0; 3], &[1.0; 3], 17, &ScanOptions::default())?;
    let radial: Vec<f64> = scan.flagged.iter().map(|p| p.point[0].hypot(p.point[1])).collect();
    // Cells of side 0.125 around a grid point meet the axis within half a diagonal.
    let cell_reach = 0.0625 * std::f64::consts::SQRT_2;
    let on_axis = radial.iter().filter(|r| **r <= 1e-12).count();
    let far = radial.iter().filter(|r| **r > 0.2).count();
    let passed = !radial.is_empty() && radial.iter().all(|r| *r <= cell_reach) && far == 0;
    Ok(criterion(
        10,
        "branch scan flags only the t-axis",
        passed,
        json!({
            "grid_points": scan.scanned,
            "flagged": radial.len(),
            "flagged_on_axis": on_axis,
            "axis_grid_points": 17,
            "false_positives_beyond_0.2": far,
            "max_flagged_radius": radial.iter().copied().fold(0.0, f64::max),
        }),
    ))
}

fn area_formula(seed: u64) -> Result<CriterionResult, CliError> {
    let f = builtin("winding")?;
    let region = Region::Annulus {
        r_min: 0.4,
        r_max: 1.0,
        lo: vec![-0.5],
        hi: vec![0.5],
    };
    let test = Region::Annulus {
        r_min: 0.25,
        r_max: 0.45,
        lo: vec![-0.2],
        hi: vec![0.2],
    };
    let (lo, hi) = test.bounds().expect("annulus has bounds");
    let tgt = f.target.clone();
    let t2 = test.clone();
    let u = move |y: &[f64]| if t2.contains(tgt.as_ref(), y) { 1.0 } else { 0.0 };
    let chk = area_formula_check(
        &f,
        &region,
        &u,
        &lo,
        &hi,
        &AreaOptions {
            seed,
            ..Default::default()
        },
    )?;
    let mut rng = task_rng(seed, 11);
    let mut counts = Vec::new();
    let mut exact_counts = Vec::new();
    for _ in 0..100 {
        let v: Vec<f64> = (0..3).map(|_| rng.random::<f64>()).collect();
        let y = test.from_unit(&v).expect("annulus parametrisation");
        counts.push(multiplicity_count(&f, &y, &region, &NewtonOptions::default())?.count);
        let exact = f.preimages(&y).unwrap_or_default();
        exact_counts.push(exact.iter().filter(|x| region.contains(f.domain.as_ref(), x)).count());
    }
    let all_two = counts.iter().all(|&c| c == 2);
    Ok(criterion(
        11,
        "area formula and multiplicity for the winding map",
        chk.gap <= 0.1 && all_two,
        json!({
            "lhs": chk.lhs,
            "rhs": chk.rhs,
            "gap": chk.gap,
            "lhs_std_error": chk.lhs_std_error,
            "rhs_std_error": chk.rhs_std_error,
            "targets": 100,
            "targets_with_multiplicity_2": counts.iter().filter(|&&c| c == 2).count(),
            "exact_preimage_counts_equal": counts == exact_counts,
        }),
    ))
}

fn ko_sanity(seed: u64) -> Result<CriterionResult, CliError> {
    let mut rows = Vec::new();
    let mut ok = true;
    let fam = CurveFamily::rectangle(1.0, 1.0, 64)?;
    let omega = Region::Box {
        lo: vec![-0.5; 2],
        hi: vec![1.5; 2],
    };
    for (name, side) in [("identity@euclidean(2)", 1.0), ("dilation(2)@euclidean(2)", 2.0)] {
        let f = builtin(name)?;
        let bounds = (vec![0.0, 0.0], vec![side, side]);
        let rep = ko_pipeline(&f, &fam, &omega, &[16, 16], 2.0, Some(bounds), seed)?;
        ok &= (rep.k - 1.0).abs() <= 0.1;
        rows.push(json!({ "map": name, "k": rep.k, "modulus": rep.modulus, "image_integral": rep.image_integral }));
    }
    let f = builtin("winding")?;
    let omega = Region::Annulus {
        r_min: 0.15,
        r_max: 1.3,
        lo: vec![-0.8],
        hi: vec![0.8],
    };
    let mut ks = Vec::new();
    let mut ladder = Vec::new();
    for s in [1usize, 2, 4] {
        let fam = CurveFamily::radial(0.4, 1.0, -0.5, 0.5, 32 * s, 8 * s)?;
        let shape = [8 * s, 8 * s, 4 * s];
        let bounds = (vec![-0.5, -0.5, -0.25], vec![0.5, 0.5, 0.25]);
        let rep = ko_pipeline(&f, &fam, &omega, &shape, 4.0, Some(bounds), seed)?;
        ks.push(rep.k);
        ladder.push(json!({ "grid": shape, "curves": fam.len(), "k": rep.k, "modulus": rep.modulus, "image_integral": rep.image_integral }));
    }
    let (lo, hi) = ks.iter().fold((f64::INFINITY, 0.0f64), |(l, h), k| (l.min(*k), h.max(*k)));
    let spread = hi / lo - 1.0;
    ok &= lo > 0.0 && hi.is_finite() && spread <= 0.15;
    Ok(criterion(
        12,
        "K_O sanity: conformal maps and winding stability",
        ok,
        json!({ "conformal": rows, "winding_ladder": ladder, "winding_spread": spread }),
    ))
}

fn determinism(seed: u64) -> Result<CriterionResult, CliError> {
    let cfg = RunConfig {
        command: Some(Command::Dilatation),
        map: "winding".into(),
        seed,
        ..Default::default()
    };
    let a = crate::json_document(&cfg, &crate::commands::dispatch(&cfg)?)?;
    let b = crate::json_document(&cfg, &crate::commands::dispatch(&cfg)?)?;
    Ok(criterion(
        13,
        "determinism",
        a == b,
        json!({ "repeated_dilatation_run_identical": a == b, "bytes": a.len() }),
    ))
}

fn record(
    out: &mut Vec<CriterionResult>,
    times: &mut Vec<(u32, Duration)>,
    id: u32,
    name: &str,
    f: impl FnOnce() -> Result<CriterionResult, CliError>,
) {
    let t = Instant::now();
    let r = f().unwrap_or_else(|e| criterion(id, name, false, json!({ "error": e.to_string() })));
    times.push((id, t.elapsed()));
    out.push(r);
}

/// Runs criteria 1–13 with the given seed.
pub fn run_suite(seed: u64) -> (SuiteReport, Vec<(u32, Duration)>) {
    let mut c = Vec::new();
    let mut t = Vec::new();
    record(&mut c, &mut t, 1, "group laws on h1 and Engel", || laws(seed));
    record(&mut c, &mut t, 2, "tangent cone of the perturbed Heisenberg frame", tangent_cone);
    record(&mut c, &mut t, 3, "ball-box slope on h1", || ball_box(seed));
    record(&mut c, &mut t, 4, "distance homogeneity and left invariance (solver)", || distance_laws(seed));
    record(&mut c, &mut t, 5, "modulus oracles", || modulus_oracle(seed));
    let start = Instant::now();
    match map_battery(seed) {
        Ok(b) => {
            let [c6, c8, c9] = lip_criteria(&b);
            let spent = start.elapsed();
            c.push(c6);
            t.push((6, spent));
            record(&mut c, &mut t, 7, "Jacobian of the differential vs volume ratio", || jacobians(seed));
            c.push(c8);
            t.push((8, Duration::ZERO));
            c.push(c9);
            t.push((9, Duration::ZERO));
        }
        Err(e) => {
            for (id, name) in [(6, "Lip f = |Df|"), (8, "|Df|/|Df|_s <= 1.1 H_f"), (9, "H_f vs H'_f")] {
                c.push(criterion(id, name, false, json!({ "error": e.to_string() })));
                t.push((id, start.elapsed()));
            }
            record(&mut c, &mut t, 7, "Jacobian of the differential vs volume ratio", || jacobians(seed));
        }
    }
    c.sort_by_key(|r| r.id);
    record(&mut c, &mut t, 10, "branch scan flags only the t-axis", branch_locus);
    record(&mut c, &mut t, 11, "area formula and multiplicity for the winding map", || area_formula(seed));
    record(&mut c, &mut t, 12, "K_O sanity", || ko_sanity(seed));
    record(&mut c, &mut t, 13, "determinism", || determinism(seed));
    t.sort_by_key(|x| x.0);
    let all_passed = c.iter().all(|r| r.passed);
    (
        SuiteReport {
            seed,
            criteria: c,
            all_passed,
        },
        t,
    )
}

pub fn suite_artifact(seed: u64) -> Result<Artifact, CliError> {
    let (report, times) = run_suite(seed);
    let mut out = Artifact::default();
    let mut table = String::from("criterion  result  seconds  budget  name\n");
    let mut timing_csv = String::from("criterion,seconds,budget_seconds\n");
    for r in &report.criteria {
        let secs = times.iter().find(|t| t.0 == r.id).map_or(0.0, |t| t.1.as_secs_f64());
        let budget = BUDGETS.iter().find(|b| b.0 == r.id).map_or(0, |b| b.1);
        let _ = writeln!(
            table,
            "{:>9}  {:<6}  {:>7.1}  {:>6}  {}",
            r.id,
            if r.passed { "pass" } else { "FAIL" },
            secs,
            budget,
            r.name
        );
        let _ = writeln!(timing_csv, "{},{secs:.3},{budget}", r.id);
        if !r.passed {
            out.flags.push(format!("criterion {} failed: {}", r.id, r.name));
        }
    }
    out.summary = table;
    out.extra_files.push(("suite-timings.csv".into(), timing_csv));
    out.result = serde_json::to_value(&report)?;
    Ok(out)
}

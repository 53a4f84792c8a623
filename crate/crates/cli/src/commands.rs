//! One function per subcommand.

use std::fmt::Write;
use std::path::Path;

use carnot_qr::algebra::{check_group_laws, CarnotAlgebra};
use carnot_qr::frame::nilpotent_approximation;
use carnot_qr::maps::{builtin, random_probe_points, MapDescriptor};
use carnot_qr::metric::{ball_box_report, cc_distance, heisenberg_distance, DistanceOptions};
use carnot_qr::modulus::{ko_check, modulus_p, CurveFamily, KoOptions, ModulusOptions, DEFAULT_LENGTH_FLOOR};
use carnot_qr::qr::{
    area_formula_check, dilatation_profile, jacobian_volume_ratio, local_injectivity_scan, morphism_norms,
    pansu_differential, AreaOptions, JacobianOptions, PansuOptions, ProfileOptions, Region, ScanOptions,
};
use carnot_qr::space::resolve_space;
use carnot_qr::HorizontalFrame;
use serde_json::json;

use crate::config::{Command, RunConfig};
use crate::plot::{emit_plot, Plot};
use crate::{Artifact, CliError};

pub fn dispatch(cfg: &RunConfig) -> Result<Artifact, CliError> {
    match cfg.command()? {
        Command::AlgebraVerify => algebra_verify(cfg),
        Command::Growth => growth(cfg),
        Command::Dist => dist(cfg),
        Command::BallBox => ball_box(cfg),
        Command::Modulus => modulus(cfg),
        Command::Dilatation => dilatation(cfg),
        Command::Pansu => pansu(cfg),
        Command::Jacobian => jacobian(cfg),
        Command::AreaCheck => area_check(cfg),
        Command::KoCheck => ko(cfg),
        Command::BranchScan => branch_scan(cfg),
        Command::Suite => crate::suite::suite_artifact(cfg.seed),
    }
}

fn config_error(field: &str, message: impl Into<String>) -> CliError {
    CliError::Config {
        field: field.into(),
        message: message.into(),
    }
}

fn read(path: &Path) -> Result<String, CliError> {
    std::fs::read_to_string(path).map_err(|e| CliError::Io {
        path: path.to_path_buf(),
        source: e,
    })
}

/// Builtin algebra name, or a TOML definition file.
pub fn resolve_algebra(spec: &str) -> Result<CarnotAlgebra, CliError> {
    let path = Path::new(spec);
    if path.is_file() {
        return Ok(CarnotAlgebra::parse_definition(&read(path)?)?);
    }
    Ok(CarnotAlgebra::builtin(spec)?)
}

fn point_or(cfg: &RunConfig, n: usize, default: Vec<f64>) -> Result<Vec<f64>, CliError> {
    let p = cfg.point.clone().unwrap_or(default);
    if p.len() != n {
        return Err(config_error("point", format!("expected {n} coordinates, got {}", p.len())));
    }
    Ok(p)
}

fn load_map(cfg: &RunConfig) -> Result<MapDescriptor, CliError> {
    builtin(&cfg.map).map_err(|e| config_error("map", e.to_string()))
}

/// `--point`, else the first probe point at distance 0.2 from the branch locus.
fn map_point(cfg: &RunConfig, f: &MapDescriptor) -> Result<Vec<f64>, CliError> {
    let default = random_probe_points(f, 1, 0.2)?.remove(0);
    point_or(cfg, f.domain.dim(), default)
}

fn csv_table(header: &[&str], rows: &[Vec<f64>]) -> String {
    let mut s = header.join(",");
    s.push('\n');
    for r in rows {
        let line: Vec<String> = r.iter().map(|v| v.to_string()).collect();
        s.push_str(&line.join(","));
        s.push('\n');
    }
    s
}

fn svg(plot: Plot, out: &mut Artifact, suffix: &str) {
    if let Some(doc) = emit_plot(&plot) {
        out.svgs.push((suffix.into(), doc));
    }
}

fn algebra_verify(cfg: &RunConfig) -> Result<Artifact, CliError> {
    let alg = resolve_algebra(&cfg.frame)?;
    let report = alg.verify_structure();
    let laws = check_group_laws(&alg, cfg.samples.unwrap_or(1000), cfg.seed);
    let mut out = Artifact::default();
    if !report.is_valid() {
        out.flags.push(format!("structure constants violate {} axioms", report.violations.len()));
    }
    if laws.worst() > 1e-12 {
        out.flags.push(format!("group law defect {:.3e} exceeds 1e-12", laws.worst()));
    }
    out.summary = format!(
        "{}: layers {:?}, Q = {}, worst law defect {:.3e}",
        cfg.frame,
        alg.layers(),
        alg.homogeneous_dimension(),
        laws.worst()
    );
    out.result = json!({ "layers": alg.layers(), "homogeneous_dimension": alg.homogeneous_dimension(), "structure": report, "laws": laws });
    Ok(out)
}

fn growth(cfg: &RunConfig) -> Result<Artifact, CliError> {
    let frame = HorizontalFrame::resolve(&cfg.frame)?;
    let p = point_or(cfg, frame.dim(), vec![0.0; frame.dim()])?;
    let na = nilpotent_approximation(&frame, &p)?;
    let mut out = Artifact::default();
    if !na.equiregular {
        out.flags.push("growth vector changes near the point".into());
    }
    out.summary = format!(
        "{} at {:?}: growth {:?}, Q = {}, equiregular {}",
        cfg.frame, p, na.growth.growth, na.growth.q, na.equiregular
    );
    out.result = json!({
        "growth": na.growth,
        "equiregular": na.equiregular,
        "tangent_algebra": {
            "layers": na.algebra.layers(),
            "structure_constants": na.algebra.nonzero_constants(),
        },
    });
    Ok(out)
}

fn dist(cfg: &RunConfig) -> Result<Artifact, CliError> {
    let frame = HorizontalFrame::resolve(&cfg.frame)?;
    let n = frame.dim();
    let p = point_or(cfg, n, vec![0.0; n])?;
    let q = cfg.target.clone().ok_or_else(|| config_error("target", "dist needs --target"))?;
    if q.len() != n {
        return Err(config_error("target", format!("expected {n} coordinates")));
    }
    let opts = DistanceOptions {
        seed: cfg.seed,
        ..Default::default()
    };
    let res = cc_distance(&frame, &p, &q, &opts)?;
    let exact = (frame == HorizontalFrame::heisenberg()).then(|| heisenberg_distance(&p, &q));
    let mut out = Artifact::default();
    if !res.converged {
        out.flags.push(format!("distance solve did not converge (endpoint error {:.2e})", res.endpoint_error));
    }
    out.summary = format!("d = {:.6} (endpoint error {:.2e}, converged {})", res.value, res.endpoint_error, res.converged);
    if let Some(e) = exact {
        let _ = write!(out.summary, "; closed form {e:.6}");
    }
    out.result = json!({ "from": p, "to": q, "distance": res, "closed_form": exact });
    Ok(out)
}

fn ball_box(cfg: &RunConfig) -> Result<Artifact, CliError> {
    let space = resolve_space(&cfg.frame, &DistanceOptions::default())?;
    let n = space.dim();
    let p = point_or(cfg, n, vec![0.0; n])?;
    let rep = ball_box_report(space.as_ref(), &p, cfg.r0, cfg.ladder, cfg.samples.unwrap_or(100_000), cfg.seed)?;
    let mut out = Artifact::default();
    out.summary = format!("fitted slope {:.4}, Q = {}", rep.fitted_slope, rep.q_expected);
    out.csv = Some(rep.to_csv()?);
    svg(
        Plot::log_log("Ball volume vs radius", "r", "Vol B(p,r)", rep.radii.clone(), rep.volumes.clone()),
        &mut out,
        "",
    );
    out.result = serde_json::to_value(&rep)?;
    Ok(out)
}

fn load_family(cfg: &RunConfig) -> Result<CurveFamily, CliError> {
    match &cfg.family {
        Some(path) => Ok(CurveFamily::from_csv(&read(path)?, None, DEFAULT_LENGTH_FLOOR)?),
        None => Ok(CurveFamily::rectangle(1.0, 1.0, 1000)?),
    }
}

fn grid_shape(cfg: &RunConfig, dim: usize, default: usize) -> Result<Vec<usize>, CliError> {
    match &cfg.grid {
        None => Ok(vec![default; dim]),
        Some(g) if g.len() == 1 => Ok(vec![g[0]; dim]),
        Some(g) if g.len() == dim => Ok(g.clone()),
        Some(_) => Err(config_error("grid", format!("expected 1 or {dim} entries"))),
    }
}

fn modulus(cfg: &RunConfig) -> Result<Artifact, CliError> {
    let fam = load_family(cfg)?;
    let shape = grid_shape(cfg, fam.dim(), 16)?;
    let p = cfg.p.unwrap_or(2.0);
    let res = modulus_p(&fam, &shape, p, &ModulusOptions::default())?;
    let mut out = Artifact::default();
    if res.worst_violation > 1e-3 {
        out.flags.push(format!("density violates admissibility by {:.2e}", res.worst_violation));
    }
    out.summary = format!("Mod_{p} = {:.6} over {} curves on grid {:?}", res.value, res.curves, shape);
    let rows: Vec<Vec<f64>> = (0..res.rho.cells())
        .map(|k| {
            let mut r = res.rho.cell_lo(k);
            r.push(res.rho.values[k]);
            r
        })
        .collect();
    let mut header: Vec<String> = (0..fam.dim()).map(|i| format!("cell_lo_{i}")).collect();
    header.push("rho".into());
    out.csv = Some(csv_table(&header.iter().map(String::as_str).collect::<Vec<_>>(), &rows));
    out.svgs.push((String::new(), res.rho.to_svg(&format!("optimal density, Mod_{p} = {:.5}", res.value))));
    out.result = serde_json::to_value(&res)?;
    Ok(out)
}

fn dilatation(cfg: &RunConfig) -> Result<Artifact, CliError> {
    let f = load_map(cfg)?;
    let x = map_point(cfg, &f)?;
    let opts = ProfileOptions {
        samples: cfg.samples.unwrap_or(64),
        ..Default::default()
    };
    let prof = dilatation_profile(&f, &x, cfg.r0, cfg.ladder, &opts)?;
    let mut out = Artifact::default();
    if prof.any_degenerate() {
        out.flags.push("l_f vanishes on part of the ladder".into());
    }
    out.summary = format!("H_f = {:.4}, H'_f = {:.4} at {:?}", prof.h_limit, prof.h_sphere_limit, x);
    let rows: Vec<Vec<f64>> = (0..prof.radii.len())
        .map(|i| vec![prof.radii[i], prof.big_l[i], prof.big_l_sphere[i], prof.small_l[i], prof.h[i], prof.h_sphere[i]])
        .collect();
    out.csv = Some(csv_table(&["radius", "L", "L_sphere", "l", "H", "H_sphere"], &rows));
    svg(Plot::semi_log("Dilatation H_f(x,r)", "r", "H_f", prof.radii.clone(), prof.h.clone()), &mut out, "");
    out.result = serde_json::to_value(&prof)?;
    Ok(out)
}

fn pansu(cfg: &RunConfig) -> Result<Artifact, CliError> {
    let f = load_map(cfg)?;
    let x = map_point(cfg, &f)?;
    let opts = PansuOptions {
        eps: cfg.radii(),
        samples: cfg.samples.unwrap_or(64),
        ..Default::default()
    };
    let fit = pansu_differential(&f, &x, &opts)?;
    let mut out = Artifact::default();
    if !fit.decreasing {
        out.flags.push("blow-up residuals do not decrease: no differential".into());
    }
    let norms = fit.morphism.as_ref().map(morphism_norms);
    out.summary = format!("residuals {:?}; norms {:?}", fit.residuals, norms);
    let rows: Vec<Vec<f64>> = fit.eps.iter().zip(&fit.residuals).map(|(e, r)| vec![*e, *r]).collect();
    out.csv = Some(csv_table(&["eps", "residual"], &rows));
    svg(Plot::log_log("Blow-up residual", "eps", "residual", fit.eps.clone(), fit.residuals.clone()), &mut out, "");
    out.result = json!({
        "fit": fit,
        "norm": norms.map(|n| n.0),
        "co_norm": norms.map(|n| n.1),
        "jacobian": fit.morphism.as_ref().map(carnot_qr::qr::morphism_jacobian),
    });
    Ok(out)
}

fn jacobian(cfg: &RunConfig) -> Result<Artifact, CliError> {
    let f = load_map(cfg)?;
    let x = map_point(cfg, &f)?;
    let opts = JacobianOptions {
        samples: cfg.samples.unwrap_or(20_000),
        ..Default::default()
    };
    let est = jacobian_volume_ratio(&f, &x, &cfg.radii(), cfg.seed, &opts)?;
    let mut out = Artifact::default();
    if est.unreliable {
        out.flags.push(format!("preimage solves failed: {:?}", est.root_failures));
    }
    out.summary = format!("J_f ≈ {:.5} ± {:.5}", est.extrapolated, est.error_bar);
    let rows: Vec<Vec<f64>> = (0..est.radii.len())
        .map(|i| vec![est.radii[i], est.image_volumes[i], est.ball_volumes[i], est.ratios[i], est.std_errors[i]])
        .collect();
    out.csv = Some(csv_table(&["radius", "image_volume", "ball_volume", "ratio", "std_error"], &rows));
    svg(Plot::semi_log("Volume ratio", "r", "ratio", est.radii.clone(), est.ratios.clone()), &mut out, "");
    out.result = serde_json::to_value(&est)?;
    Ok(out)
}

/// Default domain region and test-function support for a map's dimension.
fn default_regions(n: usize) -> (Region, Region) {
    if n == 3 {
        (
            Region::Annulus {
                r_min: 0.4,
                r_max: 1.0,
                lo: vec![-0.5],
                hi: vec![0.5],
            },
            Region::Annulus {
                r_min: 0.25,
                r_max: 0.45,
                lo: vec![-0.2],
                hi: vec![0.2],
            },
        )
    } else {
        (
            Region::Box {
                lo: vec![-1.0; n],
                hi: vec![1.0; n],
            },
            Region::Box {
                lo: vec![-0.5; n],
                hi: vec![0.5; n],
            },
        )
    }
}

fn area_check(cfg: &RunConfig) -> Result<Artifact, CliError> {
    let f = load_map(cfg)?;
    let (ra, ru) = default_regions(f.domain.dim());
    let region = cfg.region.clone().unwrap_or(ra);
    let test = cfg.test_region.clone().unwrap_or(ru);
    let (lo, hi) = test
        .bounds()
        .ok_or_else(|| config_error("test_region", "needs a box or annulus"))?;
    let tgt = f.target.clone();
    let u = move |y: &[f64]| if test.contains(tgt.as_ref(), y) { 1.0 } else { 0.0 };
    let opts = AreaOptions {
        seed: cfg.seed,
        ..Default::default()
    };
    let chk = area_formula_check(&f, &region, &u, &lo, &hi, &opts)?;
    let mut out = Artifact::default();
    if chk.incomplete_targets > 0 {
        out.flags.push(format!("{} targets without any converged preimage solve", chk.incomplete_targets));
    }
    out.summary = format!("lhs {:.5}, rhs {:.5}, gap {:.3}", chk.lhs, chk.rhs, chk.gap);
    out.result = serde_json::to_value(&chk)?;
    Ok(out)
}

/// Curve family for `ko-check` when none is given: radial horizontal
/// segments around the t-axis in dimension 3, a rectangle family otherwise.
fn default_family(n: usize) -> Result<(CurveFamily, Region), CliError> {
    if n == 3 {
        let fam = CurveFamily::radial(0.4, 1.0, -0.5, 0.5, 32, 8)?;
        let omega = Region::Annulus {
            r_min: 0.15,
            r_max: 1.3,
            lo: vec![-0.8],
            hi: vec![0.8],
        };
        Ok((fam, omega))
    } else {
        let fam = CurveFamily::rectangle(1.0, 1.0, 64)?;
        let omega = Region::Box {
            lo: vec![-0.5; 2],
            hi: vec![1.5; 2],
        };
        Ok((fam, omega))
    }
}

/// Image bounds: the image family's vertex box, padded by 2% per side.
fn padded_bounds(fam: &CurveFamily) -> (Vec<f64>, Vec<f64>) {
    let (mut lo, mut hi) = fam.vertex_bounds();
    for i in 0..lo.len() {
        let pad = 0.02 * (hi[i] - lo[i]).max(1e-6);
        lo[i] -= pad;
        hi[i] += pad;
    }
    (lo, hi)
}

pub(crate) fn ko_pipeline(
    f: &MapDescriptor,
    fam: &CurveFamily,
    omega: &Region,
    shape: &[usize],
    q: f64,
    image_bounds: Option<(Vec<f64>, Vec<f64>)>,
    seed: u64,
) -> Result<carnot_qr::modulus::KoReport, CliError> {
    let opts = KoOptions {
        seed,
        ..Default::default()
    };
    let eval = |x: &[f64]| f.eval(x);
    let (lo, hi) = match image_bounds {
        Some(b) => b,
        None => {
            let raw = fam.map_through(&eval, opts.subdivisions, vec![-1e300; fam.dim()], vec![1e300; fam.dim()])?;
            padded_bounds(&raw)
        }
    };
    let image = fam.map_through(&eval, opts.subdivisions, lo, hi)?;
    let rho = modulus_p(&image, shape, q, &opts.modulus)?.rho;
    Ok(ko_check(f, fam, omega, &rho, shape, q, &opts)?)
}

fn ko(cfg: &RunConfig) -> Result<Artifact, CliError> {
    let f = load_map(cfg)?;
    let n = f.domain.dim();
    let (dfam, domega) = default_family(n)?;
    let fam = match &cfg.family {
        Some(_) => load_family(cfg)?,
        None => dfam,
    };
    let omega = cfg.region.clone().unwrap_or(domega);
    let shape = grid_shape(cfg, n, 8)?;
    let q = cfg.p.unwrap_or(f.domain.homogeneous_dimension() as f64);
    let rep = ko_pipeline(&f, &fam, &omega, &shape, q, cfg.image_bounds.clone(), cfg.seed)?;
    let mut out = Artifact::default();
    if rep.incomplete_targets > 0 {
        out.flags.push(format!("{} multiplicity counts without converged solves", rep.incomplete_targets));
    }
    out.summary = format!("Mod_Q = {:.5}, ∫Nρ^Q = {:.5}, implied K = {:.4}", rep.modulus, rep.image_integral, rep.k);
    out.result = serde_json::to_value(&rep)?;
    Ok(out)
}

fn branch_scan(cfg: &RunConfig) -> Result<Artifact, CliError> {
    let f = load_map(cfg)?;
    let g = cfg.grid.as_ref().map_or(17, |g| g[0]);
    let (lo, hi) = f.probe_box.clone();
    let scan = local_injectivity_scan(&f, &lo, &hi, g, &ScanOptions::default())?;
    let mut out = Artifact::default();
    out.summary = format!("{} of {} grid points flagged (expected locus: {})", scan.flagged.len(), scan.scanned, f.branch_locus);
    let rows: Vec<Vec<f64>> = scan
        .flagged
        .iter()
        .map(|p| {
            let mut r = p.point.clone();
            r.push(p.multiplicity as f64);
            r
        })
        .collect();
    let mut header: Vec<String> = (0..lo.len()).map(|i| format!("x{i}")).collect();
    header.push("multiplicity".into());
    out.csv = Some(csv_table(&header.iter().map(String::as_str).collect::<Vec<_>>(), &rows));
    out.result = json!({ "scan": scan, "expected_locus": f.branch_locus });
    Ok(out)
}

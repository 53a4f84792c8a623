use carnot_qr::modulus::{modulus_exhaustive, modulus_p, CurveFamily, DensityGrid, ModulusOptions};

fn opts() -> ModulusOptions {
    ModulusOptions::default()
}

#[test]
fn rectangle_modulus_is_height_over_width() {
    for (w, h) in [(1.0, 2.0), (3.0, 1.0)] {
        let v = modulus_p(&CurveFamily::rectangle(w, h, 400).unwrap(), &[12, 12], 2.0, &opts()).unwrap();
        assert!((v.value - h / w).abs() < 0.05 * h / w, "{w}x{h}: {}", v.value);
        assert!(v.worst_violation < 1e-6);
    }
}

#[test]
fn conformal_invariance_under_scaling() {
    let fam = CurveFamily::rectangle(1.0, 1.0, 50).unwrap();
    let scaled = CurveFamily::new(
        fam.curves.iter().map(|c| c.iter().map(|v| vec![3.0 * v[0], 3.0 * v[1]]).collect()).collect(),
        vec![0.0, 0.0],
        vec![3.0, 3.0],
        1e-6,
    )
    .unwrap();
    let a = modulus_p(&fam, &[10, 10], 2.0, &opts()).unwrap().value;
    let b = modulus_p(&scaled, &[10, 10], 2.0, &opts()).unwrap().value;
    assert!((a - b).abs() < 1e-6 * a, "{a} {b}");
}

#[test]
fn subfamilies_have_smaller_modulus() {
    let full = CurveFamily::rectangle(1.0, 1.0, 40).unwrap();
    let half = CurveFamily::new(full.curves[..20].to_vec(), full.lo.clone(), full.hi.clone(), 1e-6).unwrap();
    let a = modulus_p(&full, &[8, 8], 2.0, &opts()).unwrap().value;
    let b = modulus_p(&half, &[8, 8], 2.0, &opts()).unwrap().value;
    assert!(b <= a + 1e-9);
}

#[test]
fn projected_gradient_matches_exhaustive_solver() {
    let curves = vec![
        vec![vec![0.1, 0.1], vec![0.9, 0.3], vec![0.5, 0.9]],
        vec![vec![0.2, 0.8], vec![0.8, 0.8]],
        vec![vec![0.05, 0.5], vec![0.95, 0.45]],
        vec![vec![0.3, 0.05], vec![0.35, 0.95]],
    ];
    let fam = CurveFamily::new(curves, vec![0.0, 0.0], vec![1.0, 1.0], 1e-6).unwrap();
    for p in [2.0, 3.0] {
        let pg = modulus_p(&fam, &[8, 8], p, &opts()).unwrap().value;
        let ex = modulus_exhaustive(&fam, &[8, 8], p, 100_000).unwrap().value;
        assert!((pg - ex).abs() <= 1e-3 * ex, "p={p}: {pg} vs {ex}");
    }
}

#[test]
fn optimal_density_is_admissible() {
    let fam = CurveFamily::rectangle(2.0, 1.0, 30).unwrap();
    let r = modulus_p(&fam, &[8, 8], 2.0, &opts()).unwrap();
    let ints = r.rho.line_integrals(&fam).unwrap();
    assert!(ints.iter().all(|v| *v >= 1.0 - 1e-9));
    assert!((r.rho.energy(2.0) - r.value).abs() < 1e-9 * r.value);
}

#[test]
fn constant_density_line_integral_is_length() {
    let mut g = DensityGrid::zeros(vec![0.0, 0.0], vec![1.0, 1.0], vec![4, 4]).unwrap();
    g.values.iter_mut().for_each(|v| *v = 2.0);
    let fam = CurveFamily::new(vec![vec![vec![0.1, 0.1], vec![0.7, 0.9]]], g.lo.clone(), g.hi.clone(), 1e-6).unwrap();
    assert!((g.line_integrals(&fam).unwrap()[0] - 2.0).abs() < 1e-12);
}

#[test]
fn csv_families_group_rows_by_id() {
    let text = "curve,x,y\n0,0,0.5\n0,1,0.5\n1,0.5,0\n1,0.5,1\n";
    let fam = CurveFamily::from_csv(text, None, 1e-6).unwrap();
    assert_eq!(fam.len(), 2);
    assert_eq!(fam.curves[1][1], vec![0.5, 1.0]);
    assert!(CurveFamily::from_csv("id,x\n0,0\n0,1\n", None, 1e-6).is_ok());
    assert!(CurveFamily::from_csv("0,1\n0,x\n", None, 1e-6).is_err());
}

#[test]
fn degenerate_curves_are_dropped() {
    let fam = CurveFamily::new(
        vec![vec![vec![0.2, 0.2], vec![0.2, 0.2]], vec![vec![0.0, 0.0], vec![1.0, 1.0]]],
        vec![0.0, 0.0],
        vec![1.0, 1.0],
        1e-6,
    )
    .unwrap();
    assert_eq!(fam.len(), 1);
    assert_eq!(fam.dropped, 1);
}

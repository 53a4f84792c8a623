use carnot_qr::metric::{
    ball_box_report, ball_volume, cc_distance, cc_sphere_sample, heisenberg_distance, DistanceOptions, SphereOptions,
};
use carnot_qr::space::CarnotSpace;
use carnot_qr::{CarnotAlgebra, HorizontalFrame, SrSpace};

#[test]
fn solver_agrees_with_closed_form() {
    let frame = HorizontalFrame::heisenberg();
    let opts = DistanceOptions::default();
    for q in [[1.0, 0.0, 0.0], [0.3, -0.4, 0.2], [0.0, 0.0, 0.5], [-0.7, 0.1, -0.3]] {
        let exact = heisenberg_distance(&[0.0; 3], &q);
        let d = cc_distance(&frame, &[0.0; 3], &q, &opts).unwrap();
        assert!((d.value - exact).abs() <= 5e-3 * exact, "{q:?}: {} vs {exact}", d.value);
    }
}

#[test]
fn closed_form_vertical_and_horizontal_values() {
    assert!((heisenberg_distance(&[0.0; 3], &[0.6, -0.8, 0.0]) - 1.0).abs() < 1e-12);
    // The shortest loop enclosing area t is a circle: d(0, (0,0,t)) = √(4π t).
    let t: f64 = 0.25;
    let d = heisenberg_distance(&[0.0; 3], &[0.0, 0.0, t]);
    assert!((d - (4.0 * std::f64::consts::PI * t).sqrt()).abs() < 1e-9, "{d}");
}

#[test]
fn closed_form_is_homogeneous_and_left_invariant() {
    let g = CarnotAlgebra::heisenberg();
    let p = [0.2, -0.5, 0.9];
    let q = [0.4, 0.3, -0.1];
    let d = heisenberg_distance(&p, &q);
    let h = [1.5, -2.0, 0.7];
    assert!((heisenberg_distance(&g.mul(&h, &p), &g.mul(&h, &q)) - d).abs() < 1e-12);
    let dil = |x: &[f64]| [3.0 * x[0], 3.0 * x[1], 9.0 * x[2]];
    assert!((heisenberg_distance(&dil(&p), &dil(&q)) - 3.0 * d).abs() < 1e-11);
}

#[test]
fn sphere_points_lie_on_the_sphere() {
    let space = CarnotSpace::heisenberg();
    let s = cc_sphere_sample(&space, &[0.1, 0.2, 0.3], 0.25, 40, &SphereOptions::default()).unwrap();
    assert_eq!(s.points.len(), 40);
    for p in &s.points {
        assert!((space.distance(&[0.1, 0.2, 0.3], p) - 0.25).abs() < 1e-9);
    }
}

#[test]
fn ball_volume_scales_with_homogeneous_dimension() {
    let space = CarnotSpace::heisenberg();
    let a = ball_volume(&space, &[0.0; 3], 1.0, 200_000, 3, 0).unwrap();
    let b = ball_volume(&space, &[0.5, 0.5, 0.5], 0.5, 200_000, 3, 1).unwrap();
    let ratio = a.volume / b.volume;
    assert!((ratio - 16.0).abs() < 16.0 * 0.03, "{ratio}");
}

#[test]
fn ball_box_report_is_seed_deterministic() {
    let space = CarnotSpace::heisenberg();
    let a = ball_box_report(&space, &[0.0; 3], 1.0, 3, 20_000, 5).unwrap();
    let b = ball_box_report(&space, &[0.0; 3], 1.0, 3, 20_000, 5).unwrap();
    assert_eq!(a.volumes, b.volumes);
    assert_eq!(a.q_expected, 4);
    assert!((a.fitted_slope - 4.0).abs() < 0.3);
}

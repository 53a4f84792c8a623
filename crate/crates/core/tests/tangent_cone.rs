use carnot_qr::frame::{blowup_frame, nilpotent_approximation, PrivilegedFrame};
use carnot_qr::{CarnotAlgebra, HorizontalFrame, Poly, PolyVectorField};

#[test]
fn heisenberg_is_its_own_tangent_cone() {
    let na = nilpotent_approximation(&HorizontalFrame::heisenberg(), &[0.0; 3]).unwrap();
    assert_eq!(na.algebra.constant(0, 1, 2), 1.0);
    assert_eq!(na.limit_frame, HorizontalFrame::heisenberg());
    assert!(na.equiregular);
    let x = [0.4, -0.1, 0.7];
    assert_eq!(na.chart.to_privileged(&x), x.to_vec());
}

#[test]
fn perturbed_heisenberg_truncates_to_h1() {
    let frame = HorizontalFrame::perturbed_heisenberg();
    let na = nilpotent_approximation(&frame, &[0.0; 3]).unwrap();
    assert_eq!(na.algebra.layers(), &[2, 1]);
    let h1 = CarnotAlgebra::heisenberg();
    for i in 0..3 {
        for j in 0..3 {
            for k in 0..3 {
                assert_eq!(na.algebra.constant(i, j, k), h1.constant(i, j, k));
            }
        }
    }
    assert_eq!(na.algebra.homogeneous_dimension(), na.growth.q);
}

#[test]
fn perturbed_blowup_converges_quadratically() {
    let frame = HorizontalFrame::perturbed_heisenberg();
    let limit = nilpotent_approximation(&frame, &[0.0; 3]).unwrap().limit_frame;
    let d: Vec<f64> = [1.0, 0.5, 0.25, 0.125]
        .iter()
        .map(|&e| blowup_frame(&frame, &[0.0; 3], e).unwrap().max_coefficient_distance(&limit))
        .collect();
    for w in d.windows(2) {
        assert!(w[1] <= w[0] / 4.0 + 1e-15, "{d:?}");
    }
}

#[test]
fn blowup_semigroup_law() {
    let frame = HorizontalFrame::engel();
    let pf = PrivilegedFrame::at(&frame, &[0.2, -0.1, 0.3, 0.0]).unwrap();
    let a = pf.blowup(0.3).unwrap().blowup(0.5).unwrap();
    let b = pf.blowup(0.15).unwrap();
    assert!(a.frame.max_coefficient_distance(&b.frame) < 1e-14);
}

#[test]
fn engel_tangent_cone_is_normalized() {
    let na = nilpotent_approximation(&HorizontalFrame::engel(), &[0.0; 4]).unwrap();
    assert_eq!(na.algebra.layers(), &[2, 1, 1]);
    assert_eq!(na.algebra.homogeneous_dimension(), 7);
    assert_eq!(na.algebra.constant(0, 1, 2), 1.0);
    assert_eq!(na.algebra.constant(0, 2, 3), 1.0);
    assert!(na.algebra.verify_structure().is_valid());
}

#[test]
fn engel_away_from_origin_and_heisenberg_translates() {
    let na = nilpotent_approximation(&HorizontalFrame::engel(), &[0.5, 0.2, -0.3, 0.1]).unwrap();
    assert_eq!(na.algebra.layers(), &[2, 1, 1]);
    let h = HorizontalFrame::heisenberg();
    let o = [0.7, -0.4, 1.1];
    let b = blowup_frame(&h, &o, 0.37).unwrap();
    assert!(b.max_coefficient_distance(&h) < 1e-12);
}

#[test]
fn non_homogeneous_frame_gets_corrected_coordinates() {
    let n = 4;
    let x1 = PolyVectorField::new(vec![
        Poly::constant(n, 1.0),
        Poly::zero(n),
        Poly::zero(n),
        Poly::var(n, 1).scale(0.5),
    ]);
    let x2 = PolyVectorField::new(vec![
        Poly::zero(n),
        Poly::constant(n, 1.0),
        Poly::var(n, 0),
        Poly::var(n, 0).pow(2),
    ]);
    let frame = HorizontalFrame::new(vec![x1, x2]).unwrap();
    let na = nilpotent_approximation(&frame, &[0.0; 4]).unwrap();
    assert_eq!(na.algebra.layers(), &[2, 1, 1]);
    assert!(na.algebra.verify_structure().is_valid());
}

#[test]
fn left_invariant_frames_are_their_own_cones() {
    for name in ["engel", "filiform(5)", "heisenberg(2)"] {
        let alg = CarnotAlgebra::builtin(name).unwrap();
        let frame = HorizontalFrame::left_invariant(&alg);
        let na = nilpotent_approximation(&frame, &vec![0.0; alg.dim()]).unwrap();
        assert_eq!(na.algebra.layers(), alg.layers(), "{name}");
        assert_eq!(na.algebra.homogeneous_dimension(), alg.homogeneous_dimension());
    }
}

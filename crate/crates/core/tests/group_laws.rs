use carnot_qr::algebra::{check_group_laws, dilate_coords};
use carnot_qr::CarnotAlgebra;
use proptest::prelude::*;

fn coords(n: usize) -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(-2.0..2.0f64, n)
}

fn close(a: &[f64], b: &[f64]) -> bool {
    let scale = 1.0 + a.iter().chain(b).fold(0.0f64, |m, v| m.max(v.abs()));
    a.iter().zip(b).all(|(x, y)| (x - y).abs() <= 1e-12 * scale)
}

proptest! {
    #[test]
    fn engel_product_is_associative(x in coords(4), y in coords(4), z in coords(4)) {
        let g = CarnotAlgebra::engel();
        prop_assert!(close(&g.mul(&g.mul(&x, &y), &z), &g.mul(&x, &g.mul(&y, &z))));
    }

    #[test]
    fn filiform_inverse_is_negation(x in coords(5)) {
        let g = CarnotAlgebra::filiform(5);
        let neg: Vec<f64> = x.iter().map(|v| -v).collect();
        prop_assert!(close(&g.mul(&x, &neg), &[0.0; 5]));
    }

    #[test]
    fn dilations_are_automorphisms(x in coords(3), y in coords(3), l in 0.1..4.0f64) {
        let g = CarnotAlgebra::heisenberg();
        let w = g.weights().to_vec();
        let lhs = dilate_coords(&w, l, &g.mul(&x, &y));
        let rhs = g.mul(&dilate_coords(&w, l, &x), &dilate_coords(&w, l, &y));
        prop_assert!(close(&lhs, &rhs));
    }
}

#[test]
fn heisenberg_law_matches_convention() {
    let g = CarnotAlgebra::heisenberg();
    let p = g.mul(&[1.0, 2.0, 3.0], &[-0.5, 4.0, 1.0]);
    // t + t' + (x y' − y x')/2
    assert!((p[2] - (4.0 + 0.5 * (4.0 + 1.0))).abs() < 1e-15);
}

#[test]
fn law_reports_are_tight() {
    for (alg, q) in [(CarnotAlgebra::heisenberg(), 4), (CarnotAlgebra::engel(), 7), (CarnotAlgebra::filiform(6), 16)] {
        let rep = check_group_laws(&alg, 300, 11);
        assert!(rep.worst() <= 1e-12, "{rep:?}");
        assert_eq!(rep.homogeneous_dimension, q);
    }
}

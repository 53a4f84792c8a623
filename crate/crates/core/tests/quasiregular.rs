use carnot_qr::maps::{builtin, compose};
use carnot_qr::qr::{
    dilatation_profile, lip_profile, morphism_jacobian, morphism_norms, multiplicity_count, pansu_differential,
    GradedMorphism, NewtonOptions, PansuOptions, ProfileOptions, Region,
};
use carnot_qr::CarnotAlgebra;
use nalgebra::DMatrix;

fn block(a: f64, b: f64, c: f64, d: f64) -> DMatrix<f64> {
    DMatrix::from_row_slice(2, 2, &[a, b, c, d])
}

#[test]
fn morphism_of_diagonal_block() {
    let h1 = CarnotAlgebra::heisenberg();
    let m = GradedMorphism::from_first_layer(&h1, &h1, block(2.0, 0.0, 0.0, 3.0)).unwrap();
    assert_eq!(m.layer_block(2)[(0, 0)], 6.0);
    assert_eq!(morphism_jacobian(&m), 36.0);
    let (hi, lo) = morphism_norms(&m);
    assert!((hi - 3.0).abs() < 1e-12 && (lo - 2.0).abs() < 1e-12);
    assert!(m.dilation_defect(0.3) < 1e-14);
}

#[test]
fn rotation_norms_are_one() {
    let h1 = CarnotAlgebra::heisenberg();
    let (c, s) = (0.6, 0.8);
    let m = GradedMorphism::from_first_layer(&h1, &h1, block(c, -s, s, c)).unwrap();
    let (hi, lo) = morphism_norms(&m);
    assert!((hi - 1.0).abs() < 1e-12 && (lo - 1.0).abs() < 1e-12);
}

#[test]
fn translation_has_identity_differential() {
    let f = builtin("translation(0.5,-1,2)").unwrap();
    let fit = pansu_differential(&f, &[0.1, 0.2, 0.3], &PansuOptions::default()).unwrap();
    let a = fit.morphism.unwrap().first_layer();
    assert!((a - DMatrix::identity(2, 2)).abs().max() < 1e-8);
}

#[test]
fn winding_residuals_decay_at_first_order() {
    let f = builtin("winding").unwrap();
    let fit = pansu_differential(&f, &[0.6, 0.3, 0.2], &PansuOptions::default()).unwrap();
    let ratios = fit.decay_ratios();
    assert!(ratios.iter().all(|r| *r >= 1.95), "{ratios:?}");
    let total: f64 = ratios.iter().product();
    assert!(total >= 2f64.powi(ratios.len() as i32 - 1));
    let known = f.known_differential(&[0.6, 0.3, 0.2]).unwrap();
    assert!((fit.morphism.unwrap().first_layer() - known).abs().max() < 1e-3);
}

#[test]
fn chain_rule_for_automorphisms() {
    let a = builtin("automorphism(1,1,0,2|2)").unwrap();
    let b = builtin("automorphism(0,-1,1,0|1)").unwrap();
    let ab = compose(&a, &b).unwrap();
    let x = [0.3, -0.2, 0.4];
    let o = PansuOptions::default();
    let da = pansu_differential(&a, &b.eval(&x), &o).unwrap().morphism.unwrap();
    let db = pansu_differential(&b, &x, &o).unwrap().morphism.unwrap();
    let dab = pansu_differential(&ab, &x, &o).unwrap().morphism.unwrap();
    let prod = da.compose(&db).unwrap();
    assert!((prod.matrix() - dab.matrix()).abs().max() < 1e-7);
}

#[test]
fn identity_profile_is_flat() {
    let f = builtin("identity").unwrap();
    let p = dilatation_profile(&f, &[0.2, 0.1, -0.3], 0.1, 4, &ProfileOptions::default()).unwrap();
    assert!(p.h.iter().all(|h| (h - 1.0).abs() < 0.05));
    let l = lip_profile(&f, &[0.2, 0.1, -0.3], 0.1, 4, &ProfileOptions::default()).unwrap();
    assert!((l.lip_upper - 1.0).abs() < 1e-9 && (l.lip_lower - 1.0).abs() < 1e-9);
}

#[test]
fn winding_dilatation_is_two_off_axis() {
    let f = builtin("winding").unwrap();
    let p = dilatation_profile(&f, &[0.5, -0.4, 0.1], 0.1, 6, &ProfileOptions::default()).unwrap();
    assert!((p.h_limit - 2.0).abs() < 0.05, "{}", p.h_limit);
    assert!(p.h_sphere_limit <= p.h_limit + 1e-12);
}

#[test]
fn winding_preimages_round_trip() {
    let f = builtin("winding").unwrap();
    for y in [[0.3, 0.1, 0.2], [-0.2, 0.05, -0.4], [0.0, -0.35, 0.0]] {
        let pre = f.preimages(&y).unwrap();
        assert_eq!(pre.len(), 2);
        for x in pre {
            let fx = f.eval(&x);
            assert!(fx.iter().zip(&y).all(|(a, b)| (a - b).abs() < 1e-12));
        }
    }
}

#[test]
fn doubly_wound_map_has_four_preimages() {
    let w = builtin("winding").unwrap();
    let ww = compose(&w, &w).unwrap();
    let region = Region::Annulus {
        r_min: 0.6,
        r_max: 1.4,
        lo: vec![-1.0],
        hi: vec![1.0],
    };
    let y = [0.2, 0.1, 0.05];
    let m = multiplicity_count(&ww, &y, &region, &NewtonOptions::default()).unwrap();
    assert_eq!(m.count, 4, "{:?}", m.roots);
    assert_eq!(ww.preimages(&y).unwrap().len(), 4);
}

use finsler_core::curvature::s_curvature;
use finsler_core::homogeneous::{deng_wang_s, heisenberg_randers_data, isotropic_s_probe, LieAlgebraData};
use finsler_core::metric::{lookup, PhiProfile, TangentPoint};
use finsler_core::Error;
use proptest::prelude::*;

fn heis_unit_u() -> LieAlgebraData {
    LieAlgebraData::heisenberg(vec![1.0, 0.0, 0.0], 1.0, PhiProfile::randers(1.0)).unwrap()
}

#[test]
fn s_vanishes_along_plus_minus_u() {
    let d = heisenberg_randers_data().unwrap();
    let mu: Vec<f64> = d.u.iter().map(|v| -v).collect();
    assert_eq!(deng_wang_s(&d, &d.u).unwrap(), 0.0);
    assert_eq!(deng_wang_s(&d, &mu).unwrap(), 0.0);
    // |u| = 1 puts y = u on the boundary of the Randers profile
    let d = heis_unit_u();
    assert!(matches!(deng_wang_s(&d, &d.u), Err(Error::RegularityViolation { .. })));
}

#[test]
fn hand_value_on_unit_u() {
    let d = heis_unit_u();
    let s = deng_wang_s(&d, &[0.0, 1.0, 1.0]).unwrap();
    assert!((s + 2f64.sqrt()).abs() < 1e-12);
    assert_eq!(deng_wang_s(&d, &[0.0, 1.0, 0.0]).unwrap(), 0.0);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(100))]

    #[test]
    fn s_is_even_orthogonal_to_u(y2 in -1.0..1.0f64, y3 in -1.0..1.0f64) {
        prop_assume!(y2 * y2 + y3 * y3 > 1e-4);
        let y = [0.0, y2, y3];
        let d = heisenberg_randers_data().unwrap();
        let neg: Vec<f64> = y.iter().map(|v| -v).collect();
        let a = deng_wang_s(&d, &y).unwrap();
        let b = deng_wang_s(&d, &neg).unwrap();
        prop_assert!((a - b).abs() <= 1e-12 * (1.0 + a.abs()));
        let closed = -y2 * y3 / (y2 * y2 + y3 * y3).sqrt();
        prop_assert!((a - closed).abs() <= 1e-12);
    }

    #[test]
    fn s_is_one_homogeneous(y in prop::array::uniform3(-1.0..1.0f64), l in 0.1..5.0f64) {
        prop_assume!(y.iter().map(|v| v * v).sum::<f64>() > 1e-4);
        let d = heisenberg_randers_data().unwrap();
        let ly: Vec<f64> = y.iter().map(|v| l * v).collect();
        let a = deng_wang_s(&d, &y).unwrap();
        let b = deng_wang_s(&d, &ly).unwrap();
        prop_assert!((b - l * a).abs() <= 1e-12 * (1.0 + b.abs()));
    }
}

#[test]
fn jacobi_gate() {
    let phi = PhiProfile::randers(1.0);
    let bad = LieAlgebraData::new(
        3,
        &[(0, 1, 2, 1.0), (1, 2, 0, 1.0), (2, 0, 1, 1.0), (0, 2, 0, 1.0)],
        vec![],
        vec![0, 1, 2],
        vec![1.0, 0.0, 0.0, 0.0, 1.0, 0.0, 0.0, 0.0, 1.0],
        vec![0.0; 3],
        1.0,
        phi.clone(),
    );
    assert!(matches!(bad, Err(Error::InvalidLieAlgebra(_))));
    // so(3) itself satisfies Jacobi
    let so3 = LieAlgebraData::new(
        3,
        &[(0, 1, 2, 1.0), (1, 2, 0, 1.0), (2, 0, 1, 1.0)],
        vec![],
        vec![0, 1, 2],
        vec![1.0, 0.0, 0.0, 0.0, 1.0, 0.0, 0.0, 0.0, 1.0],
        vec![0.0; 3],
        1.0,
        phi,
    )
    .unwrap();
    assert_eq!(so3.jacobi_residual(), 0.0);
}

#[test]
fn closed_form_matches_pipeline_at_origin() {
    let m = lookup("HEIS_RANDERS").unwrap();
    let d = heisenberg_randers_data().unwrap();
    for y in [[0.0, 1.0, 1.0], [0.3, -0.8, 0.5], [-0.2, 0.4, 0.9], [0.0, 0.0, 1.0]] {
        let at = TangentPoint::new(vec![0.0; 3], y.to_vec()).unwrap();
        let pipe = s_curvature(&m, &at).unwrap();
        let closed = deng_wang_s(&d, &y).unwrap();
        assert!((pipe - closed).abs() <= 1e-3, "{y:?}: {pipe} vs {closed}");
    }
}

#[test]
fn probe_gives_zero_isotropic_coefficient() {
    let d = heisenberg_randers_data().unwrap();
    let r = isotropic_s_probe(&d, 200, 3).unwrap();
    assert_eq!(r.s_at_u, 0.0);
    assert_eq!(r.s_at_minus_u, 0.0);
    assert_eq!(r.c, 0.0);
    assert!(r.fit_residual > 1e-3);
    let zero_u = LieAlgebraData::heisenberg(vec![0.0; 3], 1.0, PhiProfile::randers(1.0)).unwrap();
    let r = isotropic_s_probe(&zero_u, 50, 3).unwrap();
    assert_eq!(r.c, 0.0);
    assert!(r.fit_residual < 1e-14 && r.fit_c.abs() < 1e-14);
}

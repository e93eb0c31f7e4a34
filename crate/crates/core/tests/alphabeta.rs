use finsler_core::alphabeta::{
    beta_covariants, cheng_isotropic_s_check, li_shen_j_check, parallel_beta_berwald_check, q_delta_phi,
    randers_type_fit, xi, xi_scan, ABState,
};
use finsler_core::metric::{catalog, lookup, MetricVariant, PhiProfile};
use finsler_core::Error;
use nalgebra::DMatrix;
use proptest::prelude::*;

fn state(s: f64, b2: f64, n: usize, phi: &PhiProfile) -> ABState {
    ABState {
        s,
        b2,
        n,
        phi: phi.clone(),
    }
}

#[test]
fn riemannian_profile_has_zero_phi() {
    let one = PhiProfile::unit();
    for k in 0..=40 {
        let s = -0.9 + 1.8 * k as f64 / 40.0;
        for n in 2..=4 {
            let (q, _, phi) = q_delta_phi(&state(s, 0.81, n, &one)).unwrap();
            assert_eq!(q, 0.0);
            assert_eq!(phi, 0.0);
        }
    }
}

#[test]
fn xi_is_not_constant_on_catalog_profiles() {
    for m in catalog() {
        let Some(ab) = m.ab_view() else { continue };
        let phi = ab.phi();
        for p in m.sample_points(3, 5) {
            let b2 = ab.b_squared(&p.x).unwrap();
            if b2 < 1e-4 {
                continue;
            }
            let scan = xi_scan(&phi, b2, m.n, 81).unwrap();
            let dev = scan.deviation_from_zero(&phi, b2, m.n).unwrap();
            assert!(dev > 1e-3, "{} at b2 = {b2}: {dev}", m.name);
        }
    }
}

#[test]
fn randers_hand_values() {
    let phi = PhiProfile::randers(1.0);
    let (q, d, p) = q_delta_phi(&state(0.0, 0.25, 2, &phi)).unwrap();
    let x = xi(&state(0.0, 0.25, 2, &phi)).unwrap();
    for (a, b) in [(q, 1.0), (d, 1.0), (p, -3.0), (x, -0.75)] {
        assert!((a - b).abs() < 1e-12);
    }
    let (q, d, p) = q_delta_phi(&state(0.2, 0.25, 2, &phi)).unwrap();
    let x = xi(&state(0.2, 0.25, 2, &phi)).unwrap();
    for (a, b) in [(q, 1.0), (d, 1.2), (p, -3.6), (x, -1.125)] {
        assert!((a - b).abs() < 1e-12);
    }
}

/// `b_{i;j} = db_i/dx^j - b_m Gamma^m_ij` with Christoffel symbols from
/// central differences of `a_ij`.
fn b_cov_fd(m: &finsler_core::MetricModel, x: &[f64]) -> Vec<f64> {
    let ab = m.ab_view().unwrap();
    let n = m.n;
    let h = 1e-5;
    let shifted = |k: usize, s: f64| {
        let mut z = x.to_vec();
        z[k] += s;
        z
    };
    let da: Vec<Vec<f64>> = (0..n)
        .map(|k| {
            let (p, q) = (ab.a(&shifted(k, h)).unwrap(), ab.a(&shifted(k, -h)).unwrap());
            p.iter().zip(&q).map(|(u, v)| (u - v) / (2.0 * h)).collect()
        })
        .collect();
    let db: Vec<Vec<f64>> = (0..n)
        .map(|k| {
            let (p, q) = (ab.b(&shifted(k, h)).unwrap(), ab.b(&shifted(k, -h)).unwrap());
            p.iter().zip(&q).map(|(u, v)| (u - v) / (2.0 * h)).collect()
        })
        .collect();
    let a = ab.a(x).unwrap();
    let b = ab.b(x).unwrap();
    let ainv = DMatrix::from_row_slice(n, n, &a).try_inverse().unwrap();
    let mut out = vec![0.0; n * n];
    for i in 0..n {
        for j in 0..n {
            let mut acc = db[j][i];
            for mm in 0..n {
                let mut gamma = 0.0;
                for l in 0..n {
                    gamma += 0.5 * ainv[(mm, l)] * (da[i][l * n + j] + da[j][l * n + i] - da[l][i * n + j]);
                }
                acc -= b[mm] * gamma;
            }
            out[i * n + j] = acc;
        }
    }
    out
}

#[test]
fn beta_covariants_split_and_match_fd() {
    for m in catalog() {
        if matches!(m.variant, MetricVariant::Homogeneous { .. }) {
            continue;
        }
        let Some(ab) = m.ab_view() else { continue };
        let n = m.n;
        for p in m.sample_points(10, 6) {
            let bc = beta_covariants(&ab, &p.x).unwrap();
            for i in 0..n {
                for j in 0..n {
                    let q = i * n + j;
                    assert_eq!(bc.r[q] + bc.s_anti[q], bc.b_cov[q], "{}", m.name);
                }
            }
            let oracle = b_cov_fd(&m, &p.x);
            for (u, v) in bc.b_cov.iter().zip(&oracle) {
                assert!((u - v).abs() <= 1e-6 * (1.0 + u.abs()), "{}: {u} vs {v}", m.name);
            }
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(100))]

    #[test]
    fn randers_type_profiles_are_detected(c1 in 0.2..3.0f64, c2 in -0.5..2.0f64, c3 in -1.0..1.0f64) {
        let phi = PhiProfile::sqrt_linear(c1, c2, c3, 1.0);
        let fit = randers_type_fit(&phi).unwrap();
        prop_assert!(fit.is_some());
        let (a, b, c) = fit.unwrap();
        prop_assert!((a - c1).abs() < 1e-9 && (b - c2).abs() < 1e-7 && (c - c3).abs() < 1e-9);
    }

    #[test]
    fn quadratic_profiles_are_not_randers_type(k in 0.05..2.0f64, e in -0.5..0.5f64) {
        let phi = PhiProfile::polynomial(vec![1.0, e, k], 1.0);
        prop_assert!(randers_type_fit(&phi).unwrap().is_none());
    }
}

#[test]
fn criteria_agree_with_tensors() {
    for name in ["AB_QUAD", "AB_QUAD_SHEAR"] {
        let m = lookup(name).unwrap();
        let c = cheng_isotropic_s_check(&m, 10, 7).unwrap();
        let l = li_shen_j_check(&m, 10, 7).unwrap();
        let p = parallel_beta_berwald_check(&m, 10, 7).unwrap();
        assert!(c.agrees && l.agrees && p.agrees, "{name}");
    }
    let rp = lookup("RAND_PAR").unwrap();
    let p = parallel_beta_berwald_check(&rp, 10, 7).unwrap();
    assert!(p.verdict && p.agrees);
    assert!(matches!(cheng_isotropic_s_check(&rp, 2, 7), Err(Error::RandersTypeInput { .. })));
    assert!(matches!(li_shen_j_check(&rp, 2, 7), Err(Error::RandersTypeInput { .. })));
}

#[test]
fn isotropic_s_and_e_hold_together() {
    use finsler_core::alphabeta::isotropic_s_e_equivalence_probe;
    for m in catalog() {
        if m.ab_view().is_none() || matches!(m.variant, MetricVariant::Homogeneous { .. }) {
            continue;
        }
        let p = isotropic_s_e_equivalence_probe(&m, 6, 8).unwrap();
        assert!(p.equivalent, "{}: {p:?}", m.name);
        if p.s_holds {
            assert!(p.max_c_deviation <= 1e-3, "{}: {p:?}", m.name);
        }
        if m.name.starts_with("FUNK") {
            assert!(p.s_holds && p.c_s.iter().all(|c| (c - 0.5).abs() <= 1e-3), "{}: {p:?}", m.name);
        }
    }
}

mod common;

use finsler_core::curvature::{
    analyze, c_reducibility_residual, curvature_sample, identity_eiilj_residual, identity_second_i_residual,
    landsberg_reducibility_residual, tau_gradient_residual, Connection, CurvatureOptions, CurvatureSample,
};
use finsler_core::metric::{catalog, lookup};
use finsler_core::TangentPoint;

fn max_abs(v: &[f64]) -> f64 {
    v.iter().fold(0.0, |m, x| m.max(x.abs()))
}

fn quick() -> CurvatureOptions {
    CurvatureOptions::without_sigma()
}

#[test]
fn funk_values_match_the_fd_oracle() {
    for (name, count) in [("FUNK_2", 3), ("FUNK_3", 2)] {
        let m = lookup(name).unwrap();
        let n = m.n as f64;
        for p in m.sample_points(count, 21) {
            let f = m.evaluate_f(&p).unwrap();
            let mut u = vec![0.0; m.n];
            u[usize::from(p.y[0].abs() > 0.5)] = 1.0;
            let k_fd = common::flag_curvature_fd(&m, &p.x, &p.y, &u);
            let s_fd = common::s_curvature_fd(&m, &p);
            let c_fd = common::isotropic_berwald_c_fd(&m, &p);
            assert!((k_fd + 0.25).abs() < 1e-3, "{name} K oracle {k_fd}");
            assert!((s_fd - (n + 1.0) / 2.0 * f).abs() < 1e-3, "{name} S oracle {s_fd}");
            assert!((c_fd - 0.5).abs() < 1e-3, "{name} c oracle {c_fd}");

            let smp = curvature_sample(&m, &p, &CurvatureOptions::default()).unwrap();
            assert!((smp.flag_curvature(&u).unwrap() - k_fd).abs() < 1e-4);
            assert!((smp.s.unwrap() - s_fd).abs() < 1e-4);
            assert!((smp.isotropic_berwald_fit().c - c_fd).abs() < 1e-4);
        }
    }
}

#[test]
fn riemannian_curvature_matches_the_fd_oracle() {
    for (name, k) in [("SPHERE_2", 1.0), ("POINCARE_2", -1.0)] {
        let m = lookup(name).unwrap();
        for p in m.sample_points(3, 8) {
            let u = [-p.y[1], p.y[0]];
            let k_fd = common::flag_curvature_fd(&m, &p.x, &p.y, &u);
            assert!((k_fd - k).abs() < 1e-4, "{name}: {k_fd}");
            let smp = curvature_sample(&m, &p, &quick()).unwrap();
            assert!((smp.flag_curvature(&u).unwrap() - k).abs() < 1e-8);
        }
    }
}

#[test]
fn spray_matches_the_fd_oracle_on_catalog() {
    for m in catalog() {
        for p in m.sample_points(5, 31) {
            let a = curvature_sample(&m, &p, &quick()).unwrap().spray;
            let b = common::spray_fd(&m, &p.x, &p.y);
            let scale = 1.0 + max_abs(&a);
            for (u, v) in a.iter().zip(&b) {
                assert!((u - v).abs() <= 1e-6 * scale, "{}: {u} vs {v}", m.name);
            }
        }
    }
}

fn scales(a: &[f64], b: &[f64], factor: f64) -> bool {
    let scale = max_abs(a).max(1e-300);
    a.iter().zip(b).all(|(u, v)| (v - factor * u).abs() <= 1e-9 * factor * scale + 1e-12)
}

#[test]
fn homogeneity_degrees() {
    let lambda: f64 = 2.0;
    for m in catalog() {
        for p in m.sample_points(5, 12) {
            let a = curvature_sample(&m, &p, &quick()).unwrap();
            let b = curvature_sample(&m, &p.scaled(lambda), &quick()).unwrap();
            let checks: [(&str, &[f64], &[f64], i32); 11] = [
                ("g", &a.g, &b.g, 0),
                ("C", &a.c, &b.c, -1),
                ("I", &a.i, &b.i, -1),
                ("h", &a.h, &b.h, 0),
                ("G", &a.spray, &b.spray, 2),
                ("N", &a.nonlinear, &b.nonlinear, 1),
                ("B", &a.b, &b.b, -1),
                ("E", &a.e, &b.e, -1),
                ("L", &a.l, &b.l, 0),
                ("J", &a.j, &b.j, 0),
                ("R", &a.r, &b.r, 2),
            ];
            for (name, u, v, d) in checks {
                assert!(scales(u, v, lambda.powi(d)), "{} {name}", m.name);
            }
        }
    }
}

#[test]
fn s_curvature_is_one_homogeneous() {
    for name in ["FUNK_2", "AB_QUAD_SHEAR", "HEIS_RANDERS"] {
        let m = lookup(name).unwrap();
        let p = &m.sample_points(1, 3)[0];
        let a = curvature_sample(&m, p, &CurvatureOptions::default()).unwrap().s.unwrap();
        let b = curvature_sample(&m, &p.scaled(2.0), &CurvatureOptions::default()).unwrap().s.unwrap();
        assert!((b - 2.0 * a).abs() <= 1e-9 * (1.0 + a.abs()), "{name}: {a} {b}");
    }
}

fn contract_last(t: &[f64], y: &[f64]) -> Vec<f64> {
    let n = y.len();
    t.chunks(n).map(|row| row.iter().zip(y).map(|(a, b)| a * b).sum()).collect()
}

#[test]
fn contractions_with_y_vanish() {
    for m in catalog() {
        for p in m.sample_points(50, 13) {
            let s: CurvatureSample = curvature_sample(&m, &p, &quick()).unwrap();
            let y = &p.y;
            for (name, t) in [("C", &s.c), ("L", &s.l), ("E", &s.e), ("B", &s.b), ("h", &s.h), ("R", &s.r)] {
                let r = max_abs(&contract_last(t, y));
                assert!(r <= 1e-8 * (1.0 + max_abs(t)), "{} {name}: {r}", m.name);
            }
        }
    }
}

#[test]
fn two_routes_agree() {
    for m in catalog() {
        for p in m.sample_points(10, 14) {
            let a = analyze(&m, &p, &quick()).unwrap();
            assert!(a.sample.j_route_gap() <= 1e-6, "{} J", m.name);
            let e = a.e_from_divergence();
            let gap = e.iter().zip(&a.sample.e).fold(0.0f64, |w, (u, v)| w.max((u - v).abs()));
            assert!(gap <= 1e-6, "{} E: {gap}", m.name);
        }
    }
}

#[test]
fn deicke_at_sample_level() {
    for m in catalog() {
        let (mut c_max, mut i_max) = (0.0f64, 0.0f64);
        for p in m.sample_points(50, 15) {
            let s = curvature_sample(&m, &p, &quick()).unwrap();
            // I is a trace of C
            assert!(s.norm_i() <= (m.n as f64).sqrt() * s.norm_c() * (1.0 + 1e-9) + 1e-300);
            c_max = c_max.max(s.norm_c());
            i_max = i_max.max(s.norm_i());
        }
        let c_small = c_max <= 1e-8;
        let i_small = i_max <= 1e-7;
        assert_eq!(c_small, i_small, "{}: |C| {c_max} |I| {i_max}", m.name);
        assert_eq!(c_small, m.is_riemannian_variant() || m.name.starts_with("EUCLID"), "{}", m.name);
    }
}

#[test]
fn identities_hold_on_catalog() {
    for m in catalog() {
        for p in m.sample_points(5, 16) {
            let e7 = max_abs(&identity_eiilj_residual(&m, &p).unwrap());
            let e2nd = max_abs(&identity_second_i_residual(&m, &p).unwrap());
            assert!(e7 <= 1e-4 && e2nd <= 1e-4, "{}: {e7} {e2nd}", m.name);
        }
    }
}

#[test]
fn connection_choice_does_not_change_identity_residuals() {
    let m = lookup("FUNK_2").unwrap();
    for p in m.sample_points(3, 17) {
        let opts = CurvatureOptions {
            connection: Connection::Chern,
            ..CurvatureOptions::default()
        };
        let a = analyze(&m, &p, &opts).unwrap();
        assert!(max_abs(&a.eiilj_residual().unwrap()) <= 1e-8);
        assert!(max_abs(&a.second_i_residual().unwrap()) <= 1e-8);
    }
}

#[test]
fn randers_entries_are_c_and_landsberg_reducible() {
    for m in catalog().into_iter().filter(|m| m.is_randers()) {
        for p in m.sample_points(20, 18) {
            let c = c_reducibility_residual(&m, &p).unwrap();
            let l = landsberg_reducibility_residual(&m, &p).unwrap();
            assert!(c <= 1e-6 && l <= 1e-6, "{}: {c} {l}", m.name);
        }
    }
}

#[test]
fn distortion_gradient_is_mean_cartan() {
    for name in ["FUNK_2", "AB_QUAD", "FUNK_SPH_2"] {
        let m = lookup(name).unwrap();
        for p in m.sample_points(3, 19) {
            assert!(tau_gradient_residual(&m, &p).unwrap() <= 1e-8, "{name}");
        }
    }
}

#[test]
fn outside_chart_is_an_error() {
    let m = lookup("FUNK_2").unwrap();
    let at = TangentPoint::new(vec![0.85, 0.0], vec![1.0, 0.0]).unwrap();
    assert!(curvature_sample(&m, &at, &quick()).is_err());
}

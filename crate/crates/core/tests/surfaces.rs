use finsler_core::curvature::{curvature_sample, CurvatureOptions};
use finsler_core::metric::catalog;
use finsler_core::surface::{surface_scalars, BerwaldFrame};

fn surfaces() -> Vec<finsler_core::MetricModel> {
    catalog().into_iter().filter(|m| m.n == 2).collect()
}

#[test]
fn frame_is_complete() {
    for m in surfaces() {
        for p in m.sample_points(50, 11) {
            let g = m.fundamental_tensor(&p.x, &p.y).unwrap();
            let f = m.evaluate_f(&p).unwrap();
            let fr = BerwaldFrame::from_tensor(&g, f, &p.y).unwrap();
            assert!(fr.residual(&g) <= 1e-10, "{}", m.name);
            assert!(fr.orientation() > 0.0);
        }
    }
}

#[test]
fn decomposition_relations_hold() {
    let mut names = Vec::new();
    for m in surfaces() {
        names.push(m.name.clone());
        for p in m.sample_points(20, 12) {
            let s = curvature_sample(&m, &p, &CurvatureOptions::without_sigma()).unwrap();
            let fr = BerwaldFrame::from_sample(&s).unwrap();
            let a = surface_scalars(&s, &fr).unwrap();
            assert!(a.residual <= 1e-6, "{} fit {}", m.name, a.residual);
            assert!(a.e_residual <= 1e-6, "{} trace {}", m.name, a.e_residual);
            assert!(a.j_residual <= 1e-6, "{} contraction {}", m.name, a.j_residual);
            assert!(a.frame_residual <= 1e-6, "{} frame {}", m.name, a.frame_residual);
            // |I| = F ||C|| in two dimensions
            assert!((a.i_main.abs() - s.f * s.norm_c()).abs() <= 1e-9 * (1.0 + a.i_main.abs()));
            let b = surface_scalars(&s, &fr.flipped()).unwrap();
            assert_eq!(a.mu.is_some(), b.mu.is_some());
            if let (Some(x), Some(y)) = (a.mu, b.mu) {
                assert!((x - y).abs() <= 1e-9 * (1.0 + x.abs()));
            }
            assert!((a.lambda - b.lambda).abs() <= 1e-9 * (1.0 + a.lambda.abs()));
            assert!((a.max_residual() - b.max_residual()).abs() <= 1e-9);
        }
    }
    assert!(names.len() >= 6, "{names:?}");
}

#[test]
fn funk_lambda_is_half_over_f() {
    let m = catalog().into_iter().find(|m| m.name == "FUNK_2").unwrap();
    for p in m.sample_points(10, 13) {
        let s = curvature_sample(&m, &p, &CurvatureOptions::without_sigma()).unwrap();
        let a = surface_scalars(&s, &BerwaldFrame::from_sample(&s).unwrap()).unwrap();
        assert!((a.lambda - 0.5 / s.f).abs() <= 1e-4, "{} vs {}", a.lambda, 0.5 / s.f);
    }
}

use finsler_core::metric::{catalog, MetricVariant};
use finsler_core::TangentPoint;
use nalgebra::DMatrix;

#[test]
fn f_is_positively_homogeneous() {
    for m in catalog() {
        for p in m.sample_points(30, 2) {
            let f = m.evaluate_f(&p).unwrap();
            for lambda in [0.5, 2.0, 7.0] {
                let fl = m.evaluate_f(&p.scaled(lambda)).unwrap();
                assert!((fl - lambda * f).abs() <= 1e-12 * lambda * f, "{} at {lambda}", m.name);
            }
        }
    }
}

#[test]
fn fundamental_tensor_is_positive_definite() {
    for m in catalog() {
        for p in m.sample_points(50, 4) {
            let g = m.fundamental_tensor(&p.x, &p.y).unwrap();
            let eig = DMatrix::from_row_slice(m.n, m.n, &g).symmetric_eigenvalues();
            assert!(eig.min() > 0.0, "{}: {eig}", m.name);
        }
    }
}

#[test]
fn randers_split_matches_alpha_plus_beta() {
    for m in catalog().into_iter().filter(|m| m.is_randers()) {
        let eps = match &m.variant {
            MetricVariant::Randers { eps, .. } => *eps,
            _ => 1.0,
        };
        let ab = m.ab_view().unwrap();
        for p in m.sample_points(30, 6) {
            let a = ab.a(&p.x).unwrap();
            let b = ab.b(&p.x).unwrap();
            let n = m.n;
            let mut a2 = 0.0;
            let mut beta = 0.0;
            for i in 0..n {
                beta += b[i] * p.y[i];
                for j in 0..n {
                    a2 += a[i * n + j] * p.y[i] * p.y[j];
                }
            }
            let f = m.evaluate_f(&p).unwrap();
            let split = a2.sqrt() + eps * beta;
            assert!((f - split).abs() <= 1e-12 * f, "{}: {f} vs {split}", m.name);
            let (al, be) = m.alpha_beta_values(&p).unwrap().unwrap();
            assert!((al + be - f).abs() <= 1e-12 * f);
        }
    }
}

#[test]
fn samples_are_reproducible_and_inside() {
    for m in catalog() {
        let a = m.sample_points(10, 99);
        assert_eq!(a, m.sample_points(10, 99));
        assert_ne!(a, m.sample_points(10, 100));
        assert!(a.iter().all(|p: &TangentPoint| m.domain.contains(&p.x)));
    }
}

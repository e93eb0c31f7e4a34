//! Finite-difference route to the curvature quantities, sharing no code with
//! the jet pipeline beyond evaluating `F`.
#![allow(dead_code)]

use finsler_core::field::{fd_partial_with, FdOptions, ScalarField};
use finsler_core::metric::MetricModel;
use finsler_core::quadrature::volume_form_sigma;
use finsler_core::{MultiIndex, Result, Scalar, TangentPoint};
use nalgebra::DMatrix;

fn fd<F: ScalarField>(field: &F, x: &[f64], y: &[f64], xi: &[usize], yi: &[usize]) -> f64 {
    let n = x.len();
    let mut xo = vec![0u8; n];
    let mut yo = vec![0u8; n];
    for &k in xi {
        xo[k] += 1;
    }
    for &k in yi {
        yo[k] += 1;
    }
    fd_partial_with(field, x, y, &MultiIndex::new(xo, yo), &FdOptions::default()).unwrap()
}

fn plain(v: &[impl Scalar]) -> Vec<f64> {
    v.iter().map(Scalar::value).collect()
}

pub fn g_fd(metric: &MetricModel, x: &[f64], y: &[f64]) -> Vec<f64> {
    let n = metric.n;
    let f2 = metric.f2_field();
    let mut g = vec![0.0; n * n];
    for a in 0..n {
        for b in 0..n {
            g[a * n + b] = 0.5 * fd(&f2, x, y, &[], &[a, b]);
        }
    }
    g
}

/// `G^i = 1/4 g^il (y^k d2F2/dx^k dy^l - dF2/dx^l)`.
pub fn spray_fd(metric: &MetricModel, x: &[f64], y: &[f64]) -> Vec<f64> {
    let n = metric.n;
    let f2 = metric.f2_field();
    let g = DMatrix::from_row_slice(n, n, &g_fd(metric, x, y)).try_inverse().unwrap();
    let bracket: Vec<f64> = (0..n)
        .map(|l| (0..n).map(|k| y[k] * fd(&f2, x, y, &[k], &[l])).sum::<f64>() - fd(&f2, x, y, &[l], &[]))
        .collect();
    (0..n).map(|i| 0.25 * (0..n).map(|l| g[(i, l)] * bracket[l]).sum::<f64>()).collect()
}

/// One spray component as a field; only meaningful over `f64`.
pub struct SprayField<'a>(pub &'a MetricModel, pub usize);

impl ScalarField for SprayField<'_> {
    fn dim(&self) -> usize {
        self.0.n
    }
    fn eval<T: Scalar>(&self, x: &[T], y: &[T]) -> Result<T> {
        let v = spray_fd(self.0, &plain(x), &plain(y))[self.1];
        Ok(x[0].lift(v))
    }
}

/// `R^i_k = 2 dG^i/dx^k - y^j d2G^i/dx^j dy^k + 2 G^j d2G^i/dy^j dy^k - dG^i/dy^j dG^j/dy^k`.
pub fn riemann_fd(metric: &MetricModel, x: &[f64], y: &[f64]) -> Vec<f64> {
    let n = metric.n;
    let g = spray_fd(metric, x, y);
    let fields: Vec<SprayField> = (0..n).map(|i| SprayField(metric, i)).collect();
    let nl: Vec<f64> = (0..n * n).map(|ij| fd(&fields[ij / n], x, y, &[], &[ij % n])).collect();
    let mut r = vec![0.0; n * n];
    for i in 0..n {
        for k in 0..n {
            let mut acc = 2.0 * fd(&fields[i], x, y, &[k], &[]);
            for j in 0..n {
                acc -= y[j] * fd(&fields[i], x, y, &[j], &[k]);
                acc += 2.0 * g[j] * fd(&fields[i], x, y, &[], &[j, k]);
                acc -= nl[i * n + j] * nl[j * n + k];
            }
            r[i * n + k] = acc;
        }
    }
    r
}

pub fn flag_curvature_fd(metric: &MetricModel, x: &[f64], y: &[f64], u: &[f64]) -> f64 {
    let n = metric.n;
    let g = g_fd(metric, x, y);
    let r = riemann_fd(metric, x, y);
    let gp = |a: &[f64], b: &[f64]| (0..n * n).map(|q| g[q] * a[q / n] * b[q % n]).sum::<f64>();
    let ru: Vec<f64> = (0..n).map(|i| (0..n).map(|k| r[i * n + k] * u[k]).sum()).collect();
    gp(u, &ru) / (gp(y, y) * gp(u, u) - gp(y, u).powi(2))
}

struct LnSigma<'a>(&'a MetricModel);

impl ScalarField for LnSigma<'_> {
    fn dim(&self) -> usize {
        self.0.n
    }
    fn eval<T: Scalar>(&self, x: &[T], _y: &[T]) -> Result<T> {
        Ok(x[0].lift(volume_form_sigma(self.0, &plain(x))?.ln()))
    }
}

/// `S = dG^m/dy^m - y^m d(ln sigma)/dx^m`.
pub fn s_curvature_fd(metric: &MetricModel, at: &TangentPoint) -> f64 {
    let n = metric.n;
    let (x, y) = (&at.x, &at.y);
    let ls = LnSigma(metric);
    let zero = vec![0.0; n];
    let mut s = 0.0;
    for m in 0..n {
        s += fd(&SprayField(metric, m), x, y, &[], &[m]);
        s -= y[m] * fd(&ls, x, &zero, &[m], &[]);
    }
    s
}

/// Least-squares `c` in `B = c F^-1 {h_jk hh^i_l + h_kl hh^i_j + h_lj hh^i_k + 2F C_jkl l^i}`,
/// with `B` and `C` from finite differences.
pub fn isotropic_berwald_c_fd(metric: &MetricModel, at: &TangentPoint) -> f64 {
    let n = metric.n;
    let (x, y) = (&at.x, &at.y);
    let f = metric.evaluate_f(at).unwrap();
    let f2 = metric.f2_field();
    let g = g_fd(metric, x, y);
    let ell: Vec<f64> = y.iter().map(|v| v / f).collect();
    let ell_low: Vec<f64> = (0..n).map(|a| (0..n).map(|b| g[a * n + b] * ell[b]).sum()).collect();
    let h: Vec<f64> = (0..n * n).map(|q| g[q] - ell_low[q / n] * ell_low[q % n]).collect();
    let hh = |i: usize, j: usize| f64::from(u8::from(i == j)) - ell[i] * ell_low[j];
    let sorted = |mut v: [usize; 3]| {
        v.sort_unstable();
        v
    };
    let mut b_cache = std::collections::HashMap::new();
    let mut c_cache = std::collections::HashMap::new();
    let (mut num, mut den) = (0.0, 0.0);
    for i in 0..n {
        let gi = SprayField(metric, i);
        for j in 0..n {
            for k in 0..n {
                for l in 0..n {
                    let key = sorted([j, k, l]);
                    let b = *b_cache.entry((i, key)).or_insert_with(|| fd(&gi, x, y, &[], &key));
                    let c = *c_cache.entry(key).or_insert_with(|| 0.25 * fd(&f2, x, y, &[], &key));
                    let t = (h[j * n + k] * hh(i, l) + h[k * n + l] * hh(i, j) + h[l * n + j] * hh(i, k)
                        + 2.0 * f * c * ell[i])
                        / f;
                    num += b * t;
                    den += t * t;
                }
            }
        }
    }
    num / den
}

//! Finsler surfaces in the Berwald frame.
//!
//! On a surface every tensor that is orthogonal to `y` in each slot has a
//! single frame component along `m`, so the Cartan torsion collapses to the
//! main scalar and the Berwald curvature to two scalars `mu`, `lambda`.

use crate::curvature::{curvature_sample, dot, max_abs, CurvatureOptions, CurvatureSample};
use crate::error::{Error, Result};
use crate::metric::{MetricModel, TangentPoint};

/// `(l, m)` with `l = y / F` and `m` the `g_y`-unit normal with
/// `det(l, m) > 0`.
#[derive(Debug, Clone, PartialEq)]
pub struct BerwaldFrame {
    pub ell: [f64; 2],
    pub m: [f64; 2],
    pub ell_low: [f64; 2],
    pub m_low: [f64; 2],
}

impl BerwaldFrame {
    /// Frame built from `g_y` and `F` at a tangent point.
    pub fn from_tensor(g: &[f64], f: f64, y: &[f64]) -> Result<Self> {
        if y.len() != 2 || g.len() != 4 {
            return Err(Error::Dimension {
                expected: 2,
                actual: y.len(),
            });
        }
        let ell = [y[0] / f, y[1] / f];
        let ell_low = lower(g, &ell);
        let raw = [-ell_low[1], ell_low[0]];
        let norm = dot(&lower(g, &raw), &raw).sqrt();
        if !(norm > 0.0) {
            return Err(Error::NonConvex {
                min_eigenvalue: 0.0,
                witness: TangentPoint::new(vec![0.0; 2], y.to_vec())?,
            });
        }
        let m = [raw[0] / norm, raw[1] / norm];
        Ok(Self {
            ell,
            m,
            ell_low,
            m_low: lower(g, &m),
        })
    }

    pub fn from_sample(s: &CurvatureSample) -> Result<Self> {
        Self::from_tensor(&s.g, s.f, &s.at.y)
    }

    /// The same frame with `m` replaced by `-m`.
    pub fn flipped(&self) -> Self {
        Self {
            m: [-self.m[0], -self.m[1]],
            m_low: [-self.m_low[0], -self.m_low[1]],
            ..self.clone()
        }
    }

    /// Max deviation from `g(l,l) = g(m,m) = 1`, `g(l,m) = 0` and
    /// `g = l (x) l + m (x) m`.
    pub fn residual(&self, g: &[f64]) -> f64 {
        let mut worst = (dot(&self.ell_low, &self.ell) - 1.0)
            .abs()
            .max((dot(&self.m_low, &self.m) - 1.0).abs())
            .max(dot(&self.ell_low, &self.m).abs());
        for a in 0..2 {
            for b in 0..2 {
                let rebuilt = self.ell_low[a] * self.ell_low[b] + self.m_low[a] * self.m_low[b];
                worst = worst.max((g[a * 2 + b] - rebuilt).abs());
            }
        }
        worst
    }

    pub fn orientation(&self) -> f64 {
        self.ell[0] * self.m[1] - self.ell[1] * self.m[0]
    }
}

fn lower(g: &[f64], v: &[f64]) -> [f64; 2] {
    [g[0] * v[0] + g[1] * v[1], g[2] * v[0] + g[3] * v[1]]
}

fn require_surface(metric: &MetricModel) -> Result<()> {
    if metric.n != 2 {
        return Err(Error::Dimension {
            expected: 2,
            actual: metric.n,
        });
    }
    Ok(())
}

pub fn berwald_frame(metric: &MetricModel, at: &TangentPoint) -> Result<BerwaldFrame> {
    require_surface(metric)?;
    metric.check_point(at)?;
    let f = metric.evaluate_f(at)?;
    let g = metric.fundamental_tensor(&at.x, &at.y)?;
    BerwaldFrame::from_tensor(&g, f, &at.y)
}

/// `F C(m, m, m)`.
pub fn main_scalar_in_frame(s: &CurvatureSample, frame: &BerwaldFrame) -> f64 {
    let m = &frame.m;
    let mut acc = 0.0;
    for i in 0..2 {
        for j in 0..2 {
            for k in 0..2 {
                acc += s.c[(i * 2 + j) * 2 + k] * m[i] * m[j] * m[k];
            }
        }
    }
    s.f * acc
}

pub fn main_scalar(metric: &MetricModel, at: &TangentPoint) -> Result<f64> {
    require_surface(metric)?;
    let s = curvature_sample(metric, at, &CurvatureOptions::without_sigma())?;
    Ok(main_scalar_in_frame(&s, &BerwaldFrame::from_sample(&s)?))
}

/// Scalars of `B^i_jkl = mu C_jkl l^i + lambda (h^i_j h_kl + h^i_k h_jl + h^i_l h_jk)`.
#[derive(Debug, Clone, PartialEq)]
pub struct SurfaceScalars {
    pub i_main: f64,
    /// `None` when `C` vanishes and `mu` is unidentifiable.
    pub mu: Option<f64>,
    pub lambda: f64,
    /// Max entry of `B` minus the fitted decomposition, times `F`.
    pub residual: f64,
    /// Max entry of `E_jk - 3/2 lambda h_jk`, times `F`.
    pub e_residual: f64,
    /// Max entry of `J_l + mu/2 F I_l`.
    pub j_residual: f64,
    /// Max entry of `B` minus `F^-1 (mu I l^i + 3 F lambda m^i) m_j m_k m_l`, times `F`.
    pub frame_residual: f64,
}

impl SurfaceScalars {
    pub fn max_residual(&self) -> f64 {
        self.residual.max(self.e_residual).max(self.j_residual).max(self.frame_residual)
    }
}

/// `F ||C||` below this makes `mu` unidentifiable.
pub const DEGENERATE_C: f64 = 1e-9;

fn templates(s: &CurvatureSample, frame: &BerwaldFrame) -> (Vec<f64>, Vec<f64>) {
    let ell = &frame.ell;
    let h = &s.h;
    let hh = |i: usize, j: usize| (if i == j { 1.0 } else { 0.0 }) - ell[i] * frame.ell_low[j];
    let mut t_mu = Vec::with_capacity(16);
    let mut t_lambda = Vec::with_capacity(16);
    for i in 0..2 {
        for j in 0..2 {
            for k in 0..2 {
                for l in 0..2 {
                    t_mu.push(s.c[(j * 2 + k) * 2 + l] * ell[i]);
                    t_lambda.push(hh(i, j) * h[k * 2 + l] + hh(i, k) * h[j * 2 + l] + hh(i, l) * h[j * 2 + k]);
                }
            }
        }
    }
    (t_mu, t_lambda)
}

/// Fits `mu`, `lambda` in the given frame and checks the trace and
/// `y`-contraction consequences.
pub fn surface_scalars(s: &CurvatureSample, frame: &BerwaldFrame) -> Result<SurfaceScalars> {
    if s.n != 2 {
        return Err(Error::Dimension {
            expected: 2,
            actual: s.n,
        });
    }
    let f = s.f;
    let i_main = main_scalar_in_frame(s, frame);
    let (t_mu, t_lambda) = templates(s, frame);
    let degenerate = f * s.norm_c() <= DEGENERATE_C;
    let (mu, lambda) = if degenerate {
        let tt = dot(&t_lambda, &t_lambda);
        (None, dot(&s.b, &t_lambda) / tt)
    } else {
        let a11 = dot(&t_mu, &t_mu);
        let a12 = dot(&t_mu, &t_lambda);
        let a22 = dot(&t_lambda, &t_lambda);
        let r1 = dot(&s.b, &t_mu);
        let r2 = dot(&s.b, &t_lambda);
        let det = a11 * a22 - a12 * a12;
        if !(det.abs() > 1e-14 * a11 * a22) {
            return Err(Error::FitDegenerate("mu and lambda templates are parallel".into()));
        }
        (Some((r1 * a22 - r2 * a12) / det), (a11 * r2 - a12 * r1) / det)
    };
    let mu_v = mu.unwrap_or(0.0);
    let residual = max_abs((0..16).map(|q| s.b[q] - mu_v * t_mu[q] - lambda * t_lambda[q])) * f;
    let e_residual = max_abs((0..4).map(|q| s.e[q] - 1.5 * lambda * s.h[q])) * f;
    let j_residual = max_abs((0..2).map(|q| s.j[q] + 0.5 * mu_v * f * s.i[q]));
    let (ell, m, ml) = (&frame.ell, &frame.m, &frame.m_low);
    let mut frame_residual: f64 = 0.0;
    for i in 0..2 {
        let head = (mu_v * i_main * ell[i] + 3.0 * f * lambda * m[i]) / f;
        for j in 0..2 {
            for k in 0..2 {
                for l in 0..2 {
                    let q = ((i * 2 + j) * 2 + k) * 2 + l;
                    let v = head * ml[j] * ml[k] * ml[l];
                    frame_residual = frame_residual.max((s.b[q] - v).abs() * f);
                }
            }
        }
    }
    Ok(SurfaceScalars {
        i_main,
        mu,
        lambda,
        residual,
        e_residual,
        j_residual,
        frame_residual,
    })
}

/// `mu`, `lambda` and all residuals at one tangent point of a surface.
pub fn decomposition_check(metric: &MetricModel, at: &TangentPoint) -> Result<SurfaceScalars> {
    require_surface(metric)?;
    let s = curvature_sample(metric, at, &CurvatureOptions::without_sigma())?;
    surface_scalars(&s, &BerwaldFrame::from_sample(&s)?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::metric::lookup;

    fn tp(x: &[f64], y: &[f64]) -> TangentPoint {
        TangentPoint::new(x.to_vec(), y.to_vec()).unwrap()
    }

    #[test]
    fn euclid_frame() {
        let m = lookup("EUCLID_2").unwrap();
        let fr = berwald_frame(&m, &tp(&[0.1, 0.2], &[1.0, 0.0])).unwrap();
        assert!((fr.ell[0] - 1.0).abs() < 1e-14 && fr.ell[1].abs() < 1e-14);
        assert!(fr.m[0].abs() < 1e-14 && (fr.m[1] - 1.0).abs() < 1e-14);
    }

    #[test]
    fn sphere_frame_at_origin() {
        let m = lookup("SPHERE_2").unwrap();
        let fr = berwald_frame(&m, &tp(&[0.0, 0.0], &[1.0, 0.0])).unwrap();
        assert!((fr.ell[0] - 0.5).abs() < 1e-12 && fr.ell[1].abs() < 1e-12);
        assert!((fr.m[1] - 0.5).abs() < 1e-12);
    }

    #[test]
    fn mink_rand_frame_by_gram_schmidt() {
        let m = lookup("MINK_RAND").unwrap();
        let at = tp(&[0.0, 0.0], &[0.0, 1.0]);
        let fr = berwald_frame(&m, &at).unwrap();
        let g = m.fundamental_tensor(&at.x, &at.y).unwrap();
        assert!(fr.residual(&g) < 1e-10);
        // Gram-Schmidt of e1 against l
        let gp = |u: &[f64], v: &[f64]| g[0] * u[0] * v[0] + g[1] * (u[0] * v[1] + u[1] * v[0]) + g[3] * u[1] * v[1];
        let e1 = [1.0, 0.0];
        let k = gp(&e1, &fr.ell);
        let w = [e1[0] - k * fr.ell[0], e1[1] - k * fr.ell[1]];
        let nw = gp(&w, &w).sqrt();
        let w = [w[0] / nw, w[1] / nw];
        let sign = (fr.ell[0] * w[1] - fr.ell[1] * w[0]).signum();
        assert!((sign * w[0] - fr.m[0]).abs() < 1e-10);
        assert!((sign * w[1] - fr.m[1]).abs() < 1e-10);
    }

    #[test]
    fn main_scalar_vanishes_on_riemannian() {
        for name in ["EUCLID_2", "SPHERE_2", "POINCARE_2"] {
            let m = lookup(name).unwrap();
            let i = main_scalar(&m, &tp(&[0.1, -0.2], &[0.3, 0.7])).unwrap();
            assert!(i.abs() < 1e-10, "{name}: {i}");
        }
    }

    #[test]
    fn main_scalar_matches_cartan_norm() {
        let m = lookup("MINK_RAND").unwrap();
        let at = tp(&[0.0, 0.0], &[0.6, 0.8]);
        let s = curvature_sample(&m, &at, &CurvatureOptions::without_sigma()).unwrap();
        let i = main_scalar_in_frame(&s, &BerwaldFrame::from_sample(&s).unwrap());
        assert!(i.abs() > 0.01);
        assert!((i.abs() - s.f * s.norm_c()).abs() < 1e-10);
    }

    #[test]
    fn euclid_is_degenerate() {
        let m = lookup("EUCLID_2").unwrap();
        let r = decomposition_check(&m, &tp(&[0.0, 0.0], &[1.0, 2.0])).unwrap();
        assert_eq!(r.mu, None);
        assert_eq!(r.lambda, 0.0);
        assert_eq!(r.max_residual(), 0.0);
    }

    #[test]
    fn minkowski_has_zero_scalars() {
        let m = lookup("MINK_RAND").unwrap();
        let r = decomposition_check(&m, &tp(&[0.2, 0.1], &[0.3, -1.0])).unwrap();
        assert!(r.mu.unwrap().abs() < 1e-9);
        assert!(r.lambda.abs() < 1e-9);
        assert!(r.residual <= 1e-9);
    }

    #[test]
    fn funk_lambda() {
        let m = lookup("FUNK_2").unwrap();
        let at = tp(&[0.3, -0.1], &[0.4, 0.9]);
        let f = m.evaluate_f(&at).unwrap();
        let r = decomposition_check(&m, &at).unwrap();
        assert!((r.lambda - 0.5 / f).abs() < 1e-4, "{} vs {}", r.lambda, 0.5 / f);
        assert!(r.max_residual() < 1e-6, "{r:?}");
    }

    #[test]
    fn flip_invariance() {
        let m = lookup("FUNK_SPH_2").unwrap();
        let at = tp(&[-0.2, 0.3], &[1.0, 0.2]);
        let s = curvature_sample(&m, &at, &CurvatureOptions::without_sigma()).unwrap();
        let fr = BerwaldFrame::from_sample(&s).unwrap();
        let a = surface_scalars(&s, &fr).unwrap();
        let b = surface_scalars(&s, &fr.flipped()).unwrap();
        assert!((a.i_main + b.i_main).abs() < 1e-14);
        assert!((a.mu.unwrap() - b.mu.unwrap()).abs() < 1e-12);
        assert!((a.lambda - b.lambda).abs() < 1e-12);
        assert!((a.frame_residual - b.frame_residual).abs() < 1e-12);
        assert!(fr.flipped().orientation() < 0.0);
    }

    #[test]
    fn rejects_higher_dimension() {
        let m = lookup("EUCLID_3").unwrap();
        let at = tp(&[0.0; 3], &[1.0, 0.0, 0.0]);
        assert!(matches!(berwald_frame(&m, &at), Err(Error::Dimension { .. })));
    }
}

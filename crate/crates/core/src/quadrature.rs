//! Gauss-Legendre rules on the unit sphere and the volume form `sigma_F`.

use std::f64::consts::PI;

use crate::error::{Error, Result};
use crate::jet::{Jet, JetShape, JetSpace, Scalar};
use crate::metric::MetricModel;

/// Gauss-Legendre nodes and weights on `[-1, 1]`.
pub fn gauss_legendre(m: usize) -> (Vec<f64>, Vec<f64>) {
    let mut x = vec![0.0; m];
    let mut w = vec![0.0; m];
    for i in 0..m.div_ceil(2) {
        // Tricomi initial guess, then Newton on P_m
        let mut z = (PI * (i as f64 + 0.75) / (m as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (mut p0, mut p1) = (1.0, z);
            for k in 2..=m {
                let p2 = ((2 * k - 1) as f64 * z * p1 - (k - 1) as f64 * p0) / k as f64;
                p0 = p1;
                p1 = p2;
            }
            let p = if m == 0 { 1.0 } else if m == 1 { z } else { p1 };
            let pm1 = if m == 1 { 1.0 } else { p0 };
            dp = m as f64 * (z * p - pm1) / (z * z - 1.0);
            let dz = p / dp;
            z -= dz;
            if dz.abs() < 1e-16 {
                break;
            }
        }
        x[i] = -z;
        x[m - 1 - i] = z;
        let wi = 2.0 / ((1.0 - z * z) * dp * dp);
        w[i] = wi;
        w[m - 1 - i] = wi;
    }
    (x, w)
}

/// Product rule on `S^(n-1)` in hyperspherical angles.
#[derive(Debug, Clone)]
pub struct SphereRule {
    pub points: Vec<Vec<f64>>,
    pub weights: Vec<f64>,
}

/// Product Gauss-Legendre rule with `m` nodes per angle on the unit sphere
/// of `R^n`.
pub fn sphere_rule(n: usize, m: usize) -> SphereRule {
    assert!(n >= 2);
    let (gx, gw) = gauss_legendre(m);
    // polar angles in [0, pi], last angle in [0, 2 pi]
    let polar: Vec<(f64, f64)> = gx
        .iter()
        .zip(&gw)
        .map(|(&t, &w)| (PI / 2.0 * (t + 1.0), PI / 2.0 * w))
        .collect();
    let azim: Vec<(f64, f64)> = gx
        .iter()
        .zip(&gw)
        .map(|(&t, &w)| (PI * (t + 1.0), PI * w))
        .collect();
    let mut points = Vec::new();
    let mut weights = Vec::new();
    let mut idx = vec![0usize; n - 1];
    loop {
        let mut p = vec![0.0; n];
        let mut w = 1.0;
        let mut prod_sin = 1.0;
        for k in 0..n - 1 {
            let (ang, wk) = if k == n - 2 {
                azim[idx[k]]
            } else {
                polar[idx[k]]
            };
            p[k] = prod_sin * ang.cos();
            w *= wk * ang.sin().powi((n - 2 - k) as i32);
            prod_sin *= ang.sin();
        }
        p[n - 1] = prod_sin;
        points.push(p);
        weights.push(w);
        let mut k = 0;
        loop {
            if k == n - 1 {
                return SphereRule { points, weights };
            }
            idx[k] += 1;
            if idx[k] < m {
                break;
            }
            idx[k] = 0;
            k += 1;
        }
    }
}

/// Nodes per angle used for the volume form.
pub fn nodes_per_angle(n: usize) -> usize {
    if n <= 3 {
        64
    } else {
        32
    }
}

/// Volume of the Euclidean unit ball in `R^n`.
pub fn unit_ball_volume(n: usize) -> f64 {
    match n {
        0 => 1.0,
        1 => 2.0,
        _ => 2.0 * PI / n as f64 * unit_ball_volume(n - 2),
    }
}

/// `ln sigma_F` expanded in the base coordinates.
#[derive(Debug, Clone)]
pub struct SigmaJet {
    /// Jet over `(n, 0)` variables.
    pub ln_sigma: Jet,
    pub sigma: f64,
    /// Relative difference between the full and the half-resolution rule.
    pub error: f64,
}

fn indicatrix_volume(metric: &MetricModel, xs: &[Jet], rule: &SphereRule) -> Result<Jet> {
    let n = metric.n;
    let frozen = metric.freeze_x(xs)?;
    let mut acc = xs[0].lift(0.0);
    for (p, &w) in rule.points.iter().zip(&rule.weights) {
        let f = frozen.f(p)?;
        // r(theta)^n with r = 1/F
        let r_n = f.powi(-(n as i32))?;
        acc += &(r_n * w);
    }
    Ok(acc / n as f64)
}

/// Taylor expansion of `ln sigma_F` at `x` up to order `max_x`, computed by
/// spherical quadrature carried out directly on jets. The node count starts
/// at [`nodes_per_angle`] and doubles until the rule agrees with the previous
/// one to `1e-8`.
pub fn ln_sigma_jet(metric: &MetricModel, x: &[f64], max_x: usize) -> Result<SigmaJet> {
    let n = metric.n;
    let space = JetSpace::get(JetShape::new(n, 0, max_x, 0));
    let xs: Vec<Jet> = x
        .iter()
        .enumerate()
        .map(|(i, &v)| Jet::x_var(&space, i, v))
        .collect();
    let mut m = nodes_per_angle(n);
    let mut coarse = indicatrix_volume(metric, &xs, &sphere_rule(n, m / 2))?;
    loop {
        let fine = indicatrix_volume(metric, &xs, &sphere_rule(n, m))?;
        let v0 = fine.value();
        if !(v0 > 0.0) || !fine.is_finite() {
            return Err(Error::QuadratureFailure { estimate: f64::NAN });
        }
        let error = fine
            .coefficients()
            .iter()
            .zip(coarse.coefficients())
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max)
            / v0;
        if error <= 1e-8 {
            return finish(fine, error, n);
        }
        if m >= max_nodes_per_angle(n) {
            return Err(Error::QuadratureFailure { estimate: error });
        }
        coarse = fine;
        m *= 2;
    }
}

/// Cap for the node doubling.
pub fn max_nodes_per_angle(n: usize) -> usize {
    match n {
        2 => 1024,
        3 => 256,
        _ => 64,
    }
}

fn finish(fine: Jet, error: f64, n: usize) -> Result<SigmaJet> {
    let ln_vol = fine.try_ln()?;
    let ln_sigma = -ln_vol + unit_ball_volume(n).ln();
    Ok(SigmaJet {
        sigma: ln_sigma.value().exp(),
        ln_sigma,
        error,
    })
}

/// `sigma_F(x) = Vol(B^n) / Vol{y : F(x, y) < 1}`.
pub fn volume_form_sigma(metric: &MetricModel, x: &[f64]) -> Result<f64> {
    if x.len() != metric.n {
        return Err(Error::Dimension {
            expected: metric.n,
            actual: x.len(),
        });
    }
    if !metric.domain.contains(x) {
        return Err(Error::OutsideChart {
            metric: metric.name.clone(),
        });
    }
    Ok(ln_sigma_jet(metric, x, 0)?.sigma)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn legendre_rule_integrates_polynomials() {
        let (x, w) = gauss_legendre(8);
        let s: f64 = w.iter().sum();
        assert!((s - 2.0).abs() < 1e-14);
        // x^14 integrates to 2/15
        let i: f64 = x.iter().zip(&w).map(|(x, w)| w * x.powi(14)).sum();
        assert!((i - 2.0 / 15.0).abs() < 1e-14);
        let (x, _) = gauss_legendre(5);
        assert!(x[2].abs() < 1e-15);
    }

    #[test]
    fn sphere_areas() {
        let area = |n: usize| sphere_rule(n, 12).weights.iter().sum::<f64>();
        assert!((area(2) - 2.0 * PI).abs() < 1e-12);
        assert!((area(3) - 4.0 * PI).abs() < 1e-12);
        assert!((area(4) - 2.0 * PI * PI).abs() < 1e-12);
        for p in sphere_rule(4, 4).points {
            let r: f64 = p.iter().map(|v| v * v).sum();
            assert!((r - 1.0).abs() < 1e-14);
        }
    }

    #[test]
    fn ball_volumes() {
        assert!((unit_ball_volume(2) - PI).abs() < 1e-15);
        assert!((unit_ball_volume(3) - 4.0 * PI / 3.0).abs() < 1e-15);
        assert!((unit_ball_volume(4) - PI * PI / 2.0).abs() < 1e-15);
    }
}

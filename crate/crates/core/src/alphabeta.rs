//! Closed-form machinery of (alpha, beta)-metrics: `Q`, `Delta`, `Phi`,
//! `Xi`, the covariant derivative of `beta`, and the curvature criteria
//! built on them.

use rayon::prelude::*;

use crate::curvature::{analyze, CurvatureOptions};
use crate::error::{Error, Result};
use crate::jet::{Jet, JetShape, JetSpace, MultiIndex, Scalar};
use crate::metric::{AbView, MetricModel, PhiProfile};

/// Inputs of the scalar functions at one `s`.
#[derive(Debug, Clone, PartialEq)]
pub struct ABState {
    pub s: f64,
    /// `b^2 = ||beta||_alpha^2`.
    pub b2: f64,
    pub n: usize,
    pub phi: PhiProfile,
}

/// `Q, Q', Q''` at `s`.
pub fn q_derivatives(phi: &PhiProfile, s: f64) -> Result<[f64; 3]> {
    let space = JetSpace::get(JetShape::new(0, 1, 0, 3));
    let sv = Jet::y_var(&space, 0, s);
    let p = phi.eval(&sv)?;
    let p1 = p.dy(0);
    let den = &p - &sv.mul_ref(&p1);
    if !(den.value() > 0.0) {
        return Err(Error::RegularityViolation { s, b0: phi.b0 });
    }
    let q = p1 * den.try_recip()?;
    let d = |k: u8| q.partial(&MultiIndex::new(vec![], vec![k]));
    Ok([d(0), d(1), d(2)])
}

/// `(Q, Delta, Phi)` with
/// `Q = phi' / (phi - s phi')`,
/// `Delta = 1 + s Q + (b^2 - s^2) Q'`,
/// `Phi = -(n Delta + 1 + s Q)(Q - s Q') - (b^2 - s^2)(1 + s Q) Q''`.
pub fn q_delta_phi(st: &ABState) -> Result<(f64, f64, f64)> {
    let s = st.s;
    if s.abs() >= st.phi.b0 {
        return Err(Error::RegularityViolation { s, b0: st.phi.b0 });
    }
    let [q, q1, q2] = q_derivatives(&st.phi, s)?;
    let w = st.b2 - s * s;
    let n = st.n as f64;
    let delta = 1.0 + s * q + w * q1;
    let phi_cap = -(n * delta + 1.0 + s * q) * (q - s * q1) - w * (1.0 + s * q) * q2;
    Ok((q, delta, phi_cap))
}

/// `Xi = (b^2 Q + s) Phi / Delta^2`.
pub fn xi(st: &ABState) -> Result<f64> {
    let (q, delta, phi_cap) = q_delta_phi(st)?;
    Ok((st.b2 * q + st.s) * phi_cap / (delta * delta))
}

/// `Xi` sampled on a uniform grid of `(-b + eps, b - eps)`.
#[derive(Debug, Clone, PartialEq)]
pub struct XiScan {
    pub s: Vec<f64>,
    pub xi: Vec<f64>,
    pub min: f64,
    pub max: f64,
}

impl XiScan {
    pub fn spread(&self) -> f64 {
        self.max - self.min
    }

    /// Largest `|Xi(s) - Xi(0)|` over the grid.
    pub fn deviation_from_zero(&self, phi: &PhiProfile, b2: f64, n: usize) -> Result<f64> {
        let x0 = xi(&ABState {
            s: 0.0,
            b2,
            n,
            phi: phi.clone(),
        })?;
        Ok(self.xi.iter().fold(0.0, |m, v| m.max((v - x0).abs())))
    }
}

pub fn xi_scan(phi: &PhiProfile, b2: f64, n: usize, points: usize) -> Result<XiScan> {
    let b = b2.sqrt();
    let eps = 1e-3 * b;
    let points = points.max(2);
    let mut s_grid = Vec::with_capacity(points);
    let mut vals = Vec::with_capacity(points);
    for k in 0..points {
        let s = if b == 0.0 {
            0.0
        } else {
            -b + eps + (2.0 * (b - eps)) * k as f64 / (points - 1) as f64
        };
        let v = xi(&ABState {
            s,
            b2,
            n,
            phi: phi.clone(),
        })?;
        s_grid.push(s);
        vals.push(v);
    }
    let min = vals.iter().copied().fold(f64::INFINITY, f64::min);
    let max = vals.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    Ok(XiScan {
        s: s_grid,
        xi: vals,
        min,
        max,
    })
}

/// Covariant derivative of `beta` with respect to `alpha` and its parts.
/// Matrices are row-major: `r[i*n + j] = r_ij`.
#[derive(Debug, Clone, PartialEq)]
pub struct BetaCovariants {
    /// `b_{i;j}`.
    pub b_cov: Vec<f64>,
    pub r: Vec<f64>,
    pub s_anti: Vec<f64>,
    /// `s_i = b^j s_ji`.
    pub s_vec: Vec<f64>,
    /// `b^i = a^im b_m`.
    pub b_raised: Vec<f64>,
    pub b_lower: Vec<f64>,
    pub a: Vec<f64>,
    pub b2: f64,
}

/// `b_{i;j} = db_i/dx^j - b_m Gamma^m_ij` with the Christoffel symbols of
/// `alpha`, split into symmetric and antisymmetric parts.
pub fn beta_covariants(ab: &AbView<'_>, x: &[f64]) -> Result<BetaCovariants> {
    let n = x.len();
    let space = JetSpace::get(JetShape::new(n, 0, 1, 0));
    let xs: Vec<Jet> = x.iter().enumerate().map(|(i, &v)| Jet::x_var(&space, i, v)).collect();
    let a = ab.a(&xs)?;
    let b = ab.b(&xs)?;
    let av: Vec<f64> = a.iter().map(Jet::value).collect();
    let bv: Vec<f64> = b.iter().map(Jet::value).collect();
    let am = nalgebra::DMatrix::from_row_slice(n, n, &av);
    let ainv = am
        .clone()
        .cholesky()
        .ok_or_else(|| Error::InvalidArgument("alpha is not positive definite".into()))?
        .inverse();
    let da = |i: usize, j: usize, k: usize| a[i * n + j].dx(k).value();
    // Gamma_lij = (d_j a_li + d_i a_lj - d_l a_ij) / 2
    let mut gamma = vec![0.0; n * n * n];
    for m in 0..n {
        for i in 0..n {
            for j in 0..n {
                let mut acc = 0.0;
                for l in 0..n {
                    acc += ainv[(m, l)] * 0.5 * (da(l, i, j) + da(l, j, i) - da(i, j, l));
                }
                gamma[(m * n + i) * n + j] = acc;
            }
        }
    }
    let mut b_cov = vec![0.0; n * n];
    for i in 0..n {
        for j in 0..n {
            let mut v = b[i].dx(j).value();
            for m in 0..n {
                v -= bv[m] * gamma[(m * n + i) * n + j];
            }
            b_cov[i * n + j] = v;
        }
    }
    let r: Vec<f64> = (0..n * n)
        .map(|ij| 0.5 * (b_cov[ij] + b_cov[(ij % n) * n + ij / n]))
        .collect();
    let s_anti: Vec<f64> = (0..n * n)
        .map(|ij| 0.5 * (b_cov[ij] - b_cov[(ij % n) * n + ij / n]))
        .collect();
    let b_raised: Vec<f64> = (0..n).map(|i| (0..n).map(|m| ainv[(i, m)] * bv[m]).sum()).collect();
    let s_vec = (0..n)
        .map(|i| (0..n).map(|j| b_raised[j] * s_anti[j * n + i]).sum())
        .collect();
    let b2 = bv.iter().zip(&b_raised).map(|(x, y)| x * y).sum();
    Ok(BetaCovariants {
        b_cov,
        r,
        s_anti,
        s_vec,
        b_raised,
        b_lower: bv,
        a: av,
        b2,
    })
}

/// Fits `phi(s) = c1 sqrt(1 + c2 s^2) + c3 s` through five nodes. Returns
/// the coefficients when the profile has that form.
pub fn randers_type_fit(phi: &PhiProfile) -> Result<Option<(f64, f64, f64)>> {
    let h = phi.b0.min(1.0) * 0.8;
    let t = [h * 0.5, h];
    let p = |s: f64| phi.eval(&s);
    let p0 = p(0.0)?;
    if !(p0 > 0.0) {
        return Ok(None);
    }
    let mut even = [0.0; 2];
    let mut odd = [0.0; 2];
    for (k, &s) in t.iter().enumerate() {
        let (a, b) = (p(s)?, p(-s)?);
        even[k] = 0.5 * (a + b);
        odd[k] = 0.5 * (a - b);
    }
    let c1 = p0;
    let c3 = odd[0] / t[0];
    // even^2 = c1^2 (1 + c2 s^2) is linear in s^2
    let c2 = (even[0] * even[0] / (c1 * c1) - 1.0) / (t[0] * t[0]);
    let tol = 1e-10 * (1.0 + c1.abs() + c3.abs());
    let odd_ok = (odd[1] - c3 * t[1]).abs() <= tol;
    let rad = 1.0 + c2 * t[1] * t[1];
    let even_ok = rad > 0.0 && (even[1] - c1 * rad.sqrt()).abs() <= tol;
    Ok((odd_ok && even_ok).then_some((c1, c2, c3)))
}

/// Errors with [`Error::RandersTypeInput`] for Randers-type profiles.
pub fn require_non_randers(phi: &PhiProfile) -> Result<()> {
    match randers_type_fit(phi)? {
        Some((c1, c2, c3)) => Err(Error::RandersTypeInput { c1, c2, c3 }),
        None => Ok(()),
    }
}

fn view(metric: &MetricModel) -> Result<AbView<'_>> {
    metric
        .ab_view()
        .ok_or_else(|| Error::InvalidArgument(format!("`{}` is not an (alpha, beta)-metric", metric.name)))
}

fn max_abs(v: &[f64]) -> f64 {
    v.iter().fold(0.0, |m, x| m.max(x.abs()))
}

/// Isotropic S-curvature criterion `r_ij = 0, s_i = 0` for non-Randers
/// profiles, compared against `S` from the curvature pipeline.
#[derive(Debug, Clone, PartialEq)]
pub struct ChengReport {
    pub verdict: bool,
    pub max_r: f64,
    pub max_s_vec: f64,
    /// Largest `|S|` over the samples.
    pub max_s_curvature: f64,
    /// `verdict` iff `max |S| <= 1e-4`.
    pub agrees: bool,
    pub samples: usize,
}

pub fn cheng_isotropic_s_check(metric: &MetricModel, samples: usize, seed: u64) -> Result<ChengReport> {
    let ab = view(metric)?;
    require_non_randers(&ab.phi())?;
    let rows: Vec<(f64, f64, f64)> = metric
        .sample_points(samples, seed)
        .par_iter()
        .map(|p| {
            let bc = beta_covariants(&ab, &p.x)?;
            let s = analyze(metric, p, &CurvatureOptions::default())?.sample.s.unwrap_or(0.0);
            Ok((max_abs(&bc.r), max_abs(&bc.s_vec), s.abs()))
        })
        .collect::<Result<_>>()?;
    let max_r = rows.iter().map(|r| r.0).fold(0.0, f64::max);
    let max_s_vec = rows.iter().map(|r| r.1).fold(0.0, f64::max);
    let max_s_curvature = rows.iter().map(|r| r.2).fold(0.0, f64::max);
    let verdict = max_r <= 1e-8 && max_s_vec <= 1e-8;
    Ok(ChengReport {
        verdict,
        max_r,
        max_s_vec,
        max_s_curvature,
        agrees: verdict == (max_s_curvature <= 1e-4),
        samples,
    })
}

/// Fit of `Phi = lambda Delta^(3/2) / sqrt(b^2 - s^2)` over an `s`-grid.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PhiCondition {
    pub lambda: f64,
    pub residual: f64,
}

pub fn phi_condition(phi: &PhiProfile, b2: f64, n: usize) -> Result<PhiCondition> {
    let b = b2.sqrt();
    if b == 0.0 {
        return Err(Error::FitDegenerate("b = 0".into()));
    }
    let m = 41;
    let mut rows = Vec::with_capacity(m);
    for k in 0..m {
        let s = (-b + 2.0 * b * (k as f64 + 0.5) / m as f64) * 0.99;
        let (_, delta, phi_cap) = q_delta_phi(&ABState {
            s,
            b2,
            n,
            phi: phi.clone(),
        })?;
        rows.push((phi_cap, delta.powf(1.5) / (b2 - s * s).sqrt()));
    }
    let tt: f64 = rows.iter().map(|r| r.1 * r.1).sum();
    let lambda = rows.iter().map(|r| r.0 * r.1).sum::<f64>() / tt;
    let residual = rows.iter().fold(0.0f64, |w, r| w.max((r.0 - lambda * r.1).abs()));
    Ok(PhiCondition { lambda, residual })
}

#[derive(Debug, Clone, PartialEq)]
pub struct LiShenReport {
    pub verdict: bool,
    /// Fitted `k(x)` per sample.
    pub k: Vec<f64>,
    pub max_fit_residual: f64,
    pub max_s_anti: f64,
    /// Profile diagnostic at the first sample's `b^2`.
    pub phi_condition: Option<PhiCondition>,
    pub max_j: f64,
    /// `verdict` iff `max ||J|| <= 1e-5`.
    pub agrees: bool,
    pub samples: usize,
}

/// Vanishing mean Landsberg criterion `r_ij = k (b^2 a_ij - b_i b_j)`,
/// `s_ij = 0` for non-Randers profiles, compared against `J` from the
/// curvature pipeline.
pub fn li_shen_j_check(metric: &MetricModel, samples: usize, seed: u64) -> Result<LiShenReport> {
    let ab = view(metric)?;
    let phi = ab.phi();
    require_non_randers(&phi)?;
    let n = metric.n;
    let points = metric.sample_points(samples, seed);
    let rows: Vec<(f64, f64, f64, f64, f64)> = points
        .par_iter()
        .map(|p| {
            let bc = beta_covariants(&ab, &p.x)?;
            let t: Vec<f64> = (0..n * n)
                .map(|ij| bc.b2 * bc.a[ij] - bc.b_lower[ij / n] * bc.b_lower[ij % n])
                .collect();
            let tt: f64 = t.iter().map(|v| v * v).sum();
            let k = if tt > 0.0 {
                bc.r.iter().zip(&t).map(|(a, b)| a * b).sum::<f64>() / tt
            } else {
                0.0
            };
            let res = bc.r.iter().zip(&t).fold(0.0f64, |w, (r, t)| w.max((r - k * t).abs()));
            let smp = analyze(metric, p, &CurvatureOptions::without_sigma())?.sample;
            Ok((k, res, max_abs(&bc.s_anti), smp.norm_j(), bc.b2))
        })
        .collect::<Result<_>>()?;
    let k: Vec<f64> = rows.iter().map(|r| r.0).collect();
    let max_fit_residual = rows.iter().map(|r| r.1).fold(0.0, f64::max);
    let max_s_anti = rows.iter().map(|r| r.2).fold(0.0, f64::max);
    let max_j = rows.iter().map(|r| r.3).fold(0.0, f64::max);
    let phi_cond = match rows.first() {
        Some(r) if r.4 > 0.0 => Some(phi_condition(&phi, r.4, n)?),
        _ => None,
    };
    let k_nonzero = k.iter().any(|v| v.abs() > 1e-8);
    let phi_ok = !k_nonzero || phi_cond.is_some_and(|c| c.residual <= 1e-6);
    let verdict = max_fit_residual <= 1e-7 && max_s_anti <= 1e-8 && phi_ok;
    Ok(LiShenReport {
        verdict,
        k,
        max_fit_residual,
        max_s_anti,
        phi_condition: phi_cond,
        max_j,
        agrees: verdict == (max_j <= 1e-5),
        samples,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct ParallelBetaReport {
    pub verdict: bool,
    pub max_r: f64,
    pub max_s_anti: f64,
    /// Largest `F ||B||`.
    pub max_b: f64,
    /// `verdict` iff `max F ||B|| <= 1e-6`.
    pub agrees: bool,
    pub samples: usize,
}

/// Berwald criterion: `beta` parallel, i.e. `r = 0` and `s_ij = 0`.
pub fn parallel_beta_berwald_check(metric: &MetricModel, samples: usize, seed: u64) -> Result<ParallelBetaReport> {
    let ab = view(metric)?;
    let rows: Vec<(f64, f64, f64)> = metric
        .sample_points(samples, seed)
        .par_iter()
        .map(|p| {
            let bc = beta_covariants(&ab, &p.x)?;
            let smp = analyze(metric, p, &CurvatureOptions::without_sigma())?.sample;
            Ok((max_abs(&bc.r), max_abs(&bc.s_anti), smp.f * smp.norm_b()))
        })
        .collect::<Result<_>>()?;
    let max_r = rows.iter().map(|r| r.0).fold(0.0, f64::max);
    let max_s_anti = rows.iter().map(|r| r.1).fold(0.0, f64::max);
    let max_b = rows.iter().map(|r| r.2).fold(0.0, f64::max);
    let verdict = max_r <= 1e-8 && max_s_anti <= 1e-8;
    Ok(ParallelBetaReport {
        verdict,
        max_r,
        max_s_anti,
        max_b,
        agrees: verdict == (max_b <= 1e-6),
        samples,
    })
}

/// Outcome of fitting isotropic S and isotropic E forms at sampled points.
#[derive(Debug, Clone, PartialEq)]
pub struct SEProbe {
    pub c_s: Vec<f64>,
    pub c_e: Vec<f64>,
    pub s_residual: f64,
    pub e_residual: f64,
    pub s_holds: bool,
    pub e_holds: bool,
    /// Largest `|c_S - c_E|` at the sampled points.
    pub max_c_deviation: f64,
    pub equivalent: bool,
}

/// Fits `S = (n+1) c F` and `E = (n+1)/2 c F^-1 h` pointwise with threshold
/// `1e-4` and reports whether both hold or both fail.
pub fn isotropic_s_e_equivalence_probe(metric: &MetricModel, samples: usize, seed: u64) -> Result<SEProbe> {
    let ab = view(metric)?;
    let rows: Vec<(f64, f64, f64, f64)> = metric
        .sample_points(samples, seed)
        .par_iter()
        .map(|p| {
            let b = ab.b_squared(&p.x)?.sqrt();
            ab.phi().check_regular_on(b)?;
            let a = analyze(metric, p, &CurvatureOptions::default())?;
            let sf = a.s_fit()?;
            let s_val = a.sample.s.unwrap_or(0.0);
            // isotropic S: no 1-form part and the Hessian fit holds
            let s_res = sf.residual.max(max_abs(&sf.eta) * a.sample.f).max(
                (s_val - (metric.n as f64 + 1.0) * sf.c * a.sample.f).abs(),
            );
            let ef = a.sample.isotropic_e_fit();
            Ok((sf.c, s_res, ef.c, ef.residual))
        })
        .collect::<Result<_>>()?;
    let c_s: Vec<f64> = rows.iter().map(|r| r.0).collect();
    let c_e: Vec<f64> = rows.iter().map(|r| r.2).collect();
    let s_residual = rows.iter().map(|r| r.1).fold(0.0, f64::max);
    let e_residual = rows.iter().map(|r| r.3).fold(0.0, f64::max);
    let s_holds = s_residual <= 1e-4;
    let e_holds = e_residual <= 1e-4;
    let max_c_deviation = c_s.iter().zip(&c_e).fold(0.0f64, |m, (a, b)| m.max((a - b).abs()));
    Ok(SEProbe {
        c_s,
        c_e,
        s_residual,
        e_residual,
        s_holds,
        e_holds,
        max_c_deviation,
        equivalent: s_holds == e_holds,
    })
}

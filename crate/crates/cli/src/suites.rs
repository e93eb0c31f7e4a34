//! Identity suites: each check reports its largest residual over seeded
//! samples against a fixed tolerance.

use std::fmt;
use std::str::FromStr;

use finsler_core::alphabeta::{
    cheng_isotropic_s_check, isotropic_s_e_equivalence_probe, li_shen_j_check, parallel_beta_berwald_check,
    randers_type_fit, xi_scan,
};
use finsler_core::curvature::{analyze, curvature_sample, s_curvature, CurvatureOptions};
use finsler_core::homogeneous::{deng_wang_s, isotropic_s_probe};
use finsler_core::metric::MetricVariant;
use finsler_core::surface::{surface_scalars, BerwaldFrame};
use finsler_core::{MetricModel, TangentPoint};
use rayon::prelude::*;
use serde::Serialize;

use crate::report::{num, MetricInfo, SCHEMA};
use crate::AppError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum Suite {
    Eiilj,
    Eq9,
    CReducible,
    Surface,
    ABeta,
    DengWang,
}

pub const ALL: [Suite; 6] = [
    Suite::Eiilj,
    Suite::Eq9,
    Suite::CReducible,
    Suite::Surface,
    Suite::ABeta,
    Suite::DengWang,
];

impl Suite {
    pub fn name(self) -> &'static str {
        match self {
            Suite::Eiilj => "eiilj",
            Suite::Eq9 => "eq9",
            Suite::CReducible => "creducible",
            Suite::Surface => "surface",
            Suite::ABeta => "abeta",
            Suite::DengWang => "dengwang",
        }
    }

    /// `None` when the suite applies, otherwise the reason it does not.
    pub fn inapplicable(self, m: &MetricModel) -> Option<String> {
        match self {
            Suite::Eiilj | Suite::Eq9 => None,
            Suite::CReducible => match m.ab_view() {
                Some(ab) if matches!(randers_type_fit(&ab.phi()), Ok(Some(_))) => None,
                _ => Some("needs a Randers-type metric".into()),
            },
            Suite::Surface => (m.n != 2).then(|| format!("needs n = 2, metric has n = {}", m.n)),
            Suite::ABeta => m.ab_view().is_none().then(|| "needs an (alpha, beta)-metric".into()),
            Suite::DengWang => {
                (!matches!(m.variant, MetricVariant::Homogeneous { .. })).then(|| "needs a homogeneous metric".into())
            }
        }
    }
}

impl fmt::Display for Suite {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Suite {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        ALL.iter()
            .copied()
            .find(|x| x.name() == s)
            .ok_or_else(|| format!("unknown suite `{s}`"))
    }
}

#[derive(Debug, Clone, Serialize, PartialEq)]
pub struct Check {
    pub name: String,
    pub residual: String,
    pub tol: String,
    pub pass: bool,
    #[serde(skip)]
    pub value: f64,
}

fn check(name: &str, value: f64, tol: f64) -> Check {
    Check {
        name: name.into(),
        residual: num(value),
        tol: num(tol),
        pass: value <= tol,
        value,
    }
}

/// A yes/no consistency check; residual 0 when it holds, 1 otherwise.
fn flag(name: &str, holds: bool) -> Check {
    check(name, if holds { 0.0 } else { 1.0 }, 0.0)
}

#[derive(Debug, Clone, Serialize, PartialEq)]
pub struct SuiteResult {
    pub suite: &'static str,
    pub pass: bool,
    pub checks: Vec<Check>,
}

#[derive(Debug, Clone, Serialize, PartialEq)]
pub struct SuiteReport {
    pub schema: u32,
    pub command: &'static str,
    pub metric: MetricInfo,
    pub samples: usize,
    pub seed: u64,
    pub pass: bool,
    pub suites: Vec<SuiteResult>,
}

fn max_over(points: &[TangentPoint], f: impl Fn(&TangentPoint) -> finsler_core::Result<f64> + Sync + Send) -> finsler_core::Result<f64> {
    let v: Vec<f64> = points.par_iter().map(f).collect::<finsler_core::Result<_>>()?;
    Ok(v.into_iter().fold(0.0, f64::max))
}

fn max_abs(v: &[f64]) -> f64 {
    v.iter().fold(0.0, |m, x| m.max(x.abs()))
}

/// Parses `all` or a comma-separated list.
pub fn parse_list(s: &str) -> Result<Vec<Suite>, String> {
    if s.trim() == "all" {
        return Ok(Vec::new());
    }
    let mut out: Vec<Suite> = s
        .split(',')
        .map(|t| t.trim().parse())
        .collect::<Result<_, _>>()?;
    out.sort();
    out.dedup();
    Ok(out)
}

/// Runs the requested suites; an empty request means every applicable one.
pub fn run_identity_suite(metric: &MetricModel, suites: &[Suite], samples: usize, seed: u64) -> Result<SuiteReport, AppError> {
    let chosen: Vec<Suite> = if suites.is_empty() {
        ALL.iter().copied().filter(|s| s.inapplicable(metric).is_none()).collect()
    } else {
        for s in suites {
            if let Some(reason) = s.inapplicable(metric) {
                return Err(AppError::InapplicableSuite {
                    suite: s.name().into(),
                    reason,
                });
            }
        }
        suites.to_vec()
    };
    let points = metric.sample_points(samples, seed);
    let mut results = Vec::with_capacity(chosen.len());
    for s in chosen {
        let checks = run_one(s, metric, &points, samples, seed)?;
        results.push(SuiteResult {
            suite: s.name(),
            pass: checks.iter().all(|c| c.pass),
            checks,
        });
    }
    Ok(SuiteReport {
        schema: SCHEMA,
        command: "identities",
        metric: MetricInfo::of(metric),
        samples,
        seed,
        pass: results.iter().all(|r| r.pass),
        suites: results,
    })
}

fn run_one(s: Suite, m: &MetricModel, points: &[TangentPoint], samples: usize, seed: u64) -> finsler_core::Result<Vec<Check>> {
    let full = CurvatureOptions::default();
    let plain = CurvatureOptions::without_sigma();
    Ok(match s {
        Suite::Eiilj => vec![check(
            "J_dot + I.R - S_combination",
            max_over(points, |p| Ok(max_abs(&analyze(m, p, &full)?.eiilj_residual()?)))?,
            1e-4,
        )],
        Suite::Eq9 => vec![check(
            "I_ddot + R.I - g^-1 S_combination",
            max_over(points, |p| Ok(max_abs(&analyze(m, p, &full)?.second_i_residual()?)))?,
            1e-4,
        )],
        Suite::CReducible => vec![
            check(
                "C reducibility",
                max_over(points, |p| Ok(curvature_sample(m, p, &plain)?.c_reducibility_residual()))?,
                1e-6,
            ),
            check(
                "L reducibility",
                max_over(points, |p| Ok(curvature_sample(m, p, &plain)?.landsberg_reducibility_residual()))?,
                1e-6,
            ),
        ],
        Suite::Surface => {
            let rows: Vec<(f64, f64, f64, f64, f64)> = points
                .par_iter()
                .map(|p| {
                    let smp = curvature_sample(m, p, &plain)?;
                    let fr = BerwaldFrame::from_sample(&smp)?;
                    let sc = surface_scalars(&smp, &fr)?;
                    Ok((fr.residual(&smp.g), sc.residual, sc.e_residual, sc.j_residual, sc.frame_residual))
                })
                .collect::<finsler_core::Result<_>>()?;
            let mx = |f: fn(&(f64, f64, f64, f64, f64)) -> f64| rows.iter().map(f).fold(0.0, f64::max);
            vec![
                check("frame completeness", mx(|r| r.0), 1e-10),
                check("Berwald decomposition fit", mx(|r| r.1), 1e-6),
                check("E trace", mx(|r| r.2), 1e-6),
                check("J contraction", mx(|r| r.3), 1e-6),
                check("frame form", mx(|r| r.4), 1e-6),
            ]
        }
        Suite::ABeta => abeta_checks(m, samples, seed)?,
        Suite::DengWang => dengwang_checks(m, samples, seed)?,
    })
}

fn abeta_checks(m: &MetricModel, samples: usize, seed: u64) -> finsler_core::Result<Vec<Check>> {
    let ab = m.ab_view().expect("applicability checked");
    let phi = ab.phi();
    let mut out = Vec::new();
    let par = parallel_beta_berwald_check(m, samples, seed)?;
    out.push(flag("parallel beta <=> B = 0", par.agrees));
    if randers_type_fit(&phi)?.is_none() {
        out.push(flag("Cheng criterion <=> S = 0", cheng_isotropic_s_check(m, samples, seed)?.agrees));
        out.push(flag("Li-Shen criterion <=> J = 0", li_shen_j_check(m, samples, seed)?.agrees));
    }
    let se = isotropic_s_e_equivalence_probe(m, samples, seed)?;
    out.push(flag("isotropic S <=> isotropic E", se.equivalent));
    let b2 = m
        .sample_points(samples, seed)
        .iter()
        .map(|p| ab.b_squared(&p.x))
        .collect::<finsler_core::Result<Vec<_>>>()?
        .into_iter()
        .fold(0.0, f64::max);
    let b = b2.sqrt();
    let constant_profile = [-0.5 * b, 0.0, 0.5 * b]
        .iter()
        .all(|&s| phi.derivatives(s, 1).is_ok_and(|d| d[1] == 0.0));
    if b2 > 1e-4 && !constant_profile {
        let dev = xi_scan(&phi, b2, m.n, 81)?.deviation_from_zero(&phi, b2, m.n)?;
        out.push(Check {
            name: "Xi variation (lower bound)".into(),
            residual: num(dev),
            tol: num(1e-3),
            pass: dev > 1e-3,
            value: dev,
        });
    }
    Ok(out)
}

fn dengwang_checks(m: &MetricModel, samples: usize, seed: u64) -> finsler_core::Result<Vec<Check>> {
    let MetricVariant::Homogeneous { data } = &m.variant else {
        unreachable!("applicability checked")
    };
    let mut out = Vec::new();
    let at_u = if data.alpha(&data.u) > 0.0 {
        let mu: Vec<f64> = data.u.iter().map(|v| -v).collect();
        deng_wang_s(data, &data.u)?.abs().max(deng_wang_s(data, &mu)?.abs())
    } else {
        0.0
    };
    out.push(check("S(+-u)", at_u, 0.0));
    let origin = vec![0.0; m.n];
    let dirs: Vec<Vec<f64>> = m.sample_points(samples.clamp(1, 3), seed).into_iter().map(|p| p.y).collect();
    let gap = dirs
        .par_iter()
        .map(|y| {
            let at = TangentPoint::new(origin.clone(), y.clone())?;
            Ok((s_curvature(m, &at)? - deng_wang_s(data, y)?).abs())
        })
        .collect::<finsler_core::Result<Vec<f64>>>()?
        .into_iter()
        .fold(0.0, f64::max);
    out.push(check("closed form vs pipeline at origin", gap, 1e-3));
    let probe = isotropic_s_probe(data, 200, seed)?;
    out.push(check("isotropic coefficient c", probe.c.abs(), 0.0));
    Ok(out)
}

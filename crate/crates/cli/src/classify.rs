//! Classification of a metric against the curvature classes.

use finsler_core::curvature::{analyze, CurvatureOptions};
use finsler_core::{MetricModel, Result};
use rayon::prelude::*;
use serde::Serialize;

use crate::report::{num, MetricInfo, SCHEMA};

/// Per-point evidence, all scale-free.
#[derive(Debug, Clone, PartialEq)]
struct PointEvidence {
    c: f64,
    b: f64,
    l: f64,
    j: f64,
    e: f64,
    s_c: f64,
    s_eta: f64,
    s_residual: f64,
    e_c: f64,
    e_residual: f64,
    ib_c: f64,
    ib_residual: f64,
    k: Vec<f64>,
}

fn evidence(metric: &MetricModel, at: &finsler_core::TangentPoint) -> Result<PointEvidence> {
    let a = analyze(metric, at, &CurvatureOptions::default())?;
    let s = &a.sample;
    let f = s.f;
    let sf = a.s_fit()?;
    let s_val = s.s.unwrap_or(0.0);
    let n1 = metric.n as f64 + 1.0;
    let s_eta = sf.eta.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let s_residual = sf.residual.max((s_val - n1 * sf.c * f).abs());
    let ef = s.isotropic_e_fit();
    let ib = s.isotropic_berwald_fit();
    let k = (0..metric.n)
        .filter_map(|i| {
            let mut u = vec![0.0; metric.n];
            u[i] = 1.0;
            s.flag_curvature(&u).ok()
        })
        .collect();
    Ok(PointEvidence {
        c: f * s.norm_c(),
        b: f * s.norm_b(),
        l: s.norm_l(),
        j: s.norm_j(),
        e: f * s.norm_e(),
        s_c: sf.c,
        s_eta,
        s_residual,
        e_c: ef.c,
        e_residual: ef.residual,
        ib_c: ib.c,
        ib_residual: ib.residual,
        k,
    })
}

#[derive(Debug, Clone, Serialize, PartialEq)]
pub struct Verdict {
    pub verdict: bool,
    /// Largest norm over the samples.
    pub max_norm: String,
}

#[derive(Debug, Clone, Serialize, PartialEq)]
pub struct FitVerdict {
    pub verdict: bool,
    pub c_min: String,
    pub c_max: String,
    pub residual: String,
}

#[derive(Debug, Clone, Serialize, PartialEq)]
pub struct SVerdict {
    pub verdict: bool,
    pub c_min: String,
    pub c_max: String,
    /// Largest `|eta_i|`.
    pub eta: String,
    pub residual: String,
}

#[derive(Debug, Clone, Serialize, PartialEq)]
pub struct Classes {
    pub riemannian: Verdict,
    pub berwald: Verdict,
    pub landsberg: Verdict,
    pub weakly_landsberg: Verdict,
    pub weakly_berwald: Verdict,
    #[serde(rename = "isotropic_S")]
    pub isotropic_s: SVerdict,
    #[serde(rename = "isotropic_E")]
    pub isotropic_e: FitVerdict,
    pub isotropic_berwald: FitVerdict,
}

#[derive(Debug, Clone, Serialize, PartialEq)]
pub struct FlagSummary {
    pub min: String,
    pub max: String,
    pub flags: usize,
}

#[derive(Debug, Clone, Serialize, PartialEq)]
pub struct ClassificationReport {
    pub schema: u32,
    pub command: &'static str,
    pub metric: MetricInfo,
    pub samples: usize,
    pub seed: u64,
    pub tol: String,
    pub classes: Classes,
    pub flag_curvature: FlagSummary,
}

fn max_of(rows: &[PointEvidence], f: impl Fn(&PointEvidence) -> f64) -> f64 {
    rows.iter().map(f).fold(0.0, f64::max)
}

fn range_of(rows: &[PointEvidence], f: impl Fn(&PointEvidence) -> f64) -> (f64, f64) {
    rows.iter()
        .map(f)
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), v| (lo.min(v), hi.max(v)))
}

fn verdict(holds: bool, v: f64) -> Verdict {
    Verdict {
        verdict: holds,
        max_norm: num(v),
    }
}

/// Samples the metric and assigns every class. A class implied by a
/// stronger one is set whenever the stronger one holds, so the lattice
/// `riemannian => berwald => landsberg => weakly_landsberg` and
/// `berwald => weakly_berwald` holds in every report.
pub fn classify(metric: &MetricModel, samples: usize, seed: u64, tol: f64) -> Result<ClassificationReport> {
    let points = metric.sample_points(samples, seed);
    let rows: Vec<PointEvidence> = points
        .par_iter()
        .map(|p| evidence(metric, p))
        .collect::<Result<_>>()?;
    let c = max_of(&rows, |r| r.c);
    let b = max_of(&rows, |r| r.b);
    let l = max_of(&rows, |r| r.l);
    let j = max_of(&rows, |r| r.j);
    let e = max_of(&rows, |r| r.e);
    let riemannian = c <= tol;
    let berwald = riemannian || b <= tol;
    let landsberg = berwald || l <= tol;
    let weakly_landsberg = landsberg || j <= tol;
    let weakly_berwald = berwald || e <= tol;
    let s_res = max_of(&rows, |r| r.s_residual);
    let s_eta = max_of(&rows, |r| r.s_eta);
    let (s_lo, s_hi) = range_of(&rows, |r| r.s_c);
    let e_res = max_of(&rows, |r| r.e_residual);
    let (e_lo, e_hi) = range_of(&rows, |r| r.e_c);
    let ib_res = max_of(&rows, |r| r.ib_residual);
    let (ib_lo, ib_hi) = range_of(&rows, |r| r.ib_c);
    let ks: Vec<f64> = rows.iter().flat_map(|r| r.k.iter().copied()).collect();
    let (k_lo, k_hi) = ks
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| (lo.min(v), hi.max(v)));
    let report = ClassificationReport {
        schema: SCHEMA,
        command: "classify",
        metric: MetricInfo::of(metric),
        samples,
        seed,
        tol: num(tol),
        classes: Classes {
            riemannian: verdict(riemannian, c),
            berwald: verdict(berwald, b),
            landsberg: verdict(landsberg, l),
            weakly_landsberg: verdict(weakly_landsberg, j),
            weakly_berwald: verdict(weakly_berwald, e),
            isotropic_s: SVerdict {
                verdict: s_res <= tol && s_eta <= tol,
                c_min: num(s_lo),
                c_max: num(s_hi),
                eta: num(s_eta),
                residual: num(s_res),
            },
            isotropic_e: FitVerdict {
                verdict: e_res <= tol,
                c_min: num(e_lo),
                c_max: num(e_hi),
                residual: num(e_res),
            },
            isotropic_berwald: FitVerdict {
                verdict: ib_res <= tol,
                c_min: num(ib_lo),
                c_max: num(ib_hi),
                residual: num(ib_res),
            },
        },
        flag_curvature: FlagSummary {
            min: num(k_lo),
            max: num(k_hi),
            flags: ks.len(),
        },
    };
    assert_lattice(&report.classes);
    Ok(report)
}

/// Panics if an implication between classes is violated.
pub fn assert_lattice(c: &Classes) {
    let implies = |a: bool, b: bool, what: &str| assert!(!a || b, "class lattice violated: {what}");
    implies(c.riemannian.verdict, c.berwald.verdict, "riemannian => berwald");
    implies(c.berwald.verdict, c.landsberg.verdict, "berwald => landsberg");
    implies(c.landsberg.verdict, c.weakly_landsberg.verdict, "landsberg => weakly_landsberg");
    implies(c.berwald.verdict, c.weakly_berwald.verdict, "berwald => weakly_berwald");
}

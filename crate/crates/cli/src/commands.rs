//! Point evaluations and geodesic traces.

use finsler_core::curvature::{analyze, CurvatureOptions};
use finsler_core::flow::{integrate_geodesic, track_scalars, FlowTrace, SERIES};
use finsler_core::surface::main_scalar;
use finsler_core::{MetricModel, TangentPoint};
use serde::Serialize;

use crate::report::{nums, MetricInfo, SCHEMA};
use crate::AppError;

/// Names accepted by `curvature --quantity`.
pub const QUANTITIES: [&str; 21] = [
    "F", "g", "g_inv", "h", "C", "I", "G", "N", "B", "E", "L", "J", "R", "K", "S", "sigma", "tau", "f",
    "f_tilde", "main_scalar", "Ric",
];

/// A parsed `--at` argument: `x=..;y=..` with an optional `u=..` for flags.
#[derive(Debug, Clone, PartialEq)]
pub struct At {
    pub x: Vec<f64>,
    pub y: Vec<f64>,
    pub u: Option<Vec<f64>>,
}

fn parse_vec(s: &str) -> Result<Vec<f64>, String> {
    s.split(',')
        .map(|t| t.trim().parse::<f64>().map_err(|_| format!("`{t}` is not a number")))
        .collect()
}

impl std::str::FromStr for At {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        let (mut x, mut y, mut u) = (None, None, None);
        for part in s.split(';').map(str::trim).filter(|p| !p.is_empty()) {
            let (k, v) = part
                .split_once('=')
                .ok_or_else(|| format!("expected key=values in `{part}`"))?;
            let slot = match k.trim() {
                "x" => &mut x,
                "y" => &mut y,
                "u" => &mut u,
                other => return Err(format!("unknown key `{other}` (use x, y, u)")),
            };
            *slot = Some(parse_vec(v)?);
        }
        Ok(At {
            x: x.ok_or("missing x=")?,
            y: y.ok_or("missing y=")?,
            u,
        })
    }
}

#[derive(Debug, Clone, Serialize, PartialEq)]
pub struct QuantityReport {
    pub schema: u32,
    pub command: &'static str,
    pub metric: MetricInfo,
    pub quantity: String,
    pub x: Vec<String>,
    pub y: Vec<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub u: Option<Vec<String>>,
    /// Dimensions of `values`, row-major; empty for a scalar.
    pub shape: Vec<usize>,
    pub values: Vec<String>,
}

/// Evaluates one named quantity at a tangent point.
pub fn evaluate_quantity(metric: &MetricModel, at: &At, quantity: &str) -> Result<QuantityReport, AppError> {
    let n = metric.n;
    let tp = TangentPoint::new(at.x.clone(), at.y.clone())?;
    let needs_sigma = matches!(quantity, "S" | "sigma" | "tau");
    let opts = if needs_sigma {
        CurvatureOptions::default()
    } else {
        CurvatureOptions::without_sigma()
    };
    let scalar = |v: f64| (vec![], vec![v]);
    let (shape, values): (Vec<usize>, Vec<f64>) = match quantity {
        "main_scalar" => scalar(main_scalar(metric, &tp)?),
        q if QUANTITIES.contains(&q) => {
            let a = analyze(metric, &tp, &opts)?;
            let s = &a.sample;
            match q {
                "F" => scalar(s.f),
                "g" => (vec![n, n], s.g.clone()),
                "g_inv" => (vec![n, n], s.g_inv.clone()),
                "h" => (vec![n, n], s.h.clone()),
                "C" => (vec![n, n, n], s.c.clone()),
                "I" => (vec![n], s.i.clone()),
                "G" => (vec![n], s.spray.clone()),
                "N" => (vec![n, n], s.nonlinear.clone()),
                "B" => (vec![n, n, n, n], s.b.clone()),
                "E" => (vec![n, n], s.e.clone()),
                "L" => (vec![n, n, n], s.l.clone()),
                "J" => (vec![n], s.j.clone()),
                "R" => (vec![n, n], s.r.clone()),
                "Ric" => scalar((0..n).map(|i| s.r[i * n + i]).sum()),
                "K" => {
                    let u = at.u.as_ref().ok_or_else(|| AppError::Usage("K needs a flag: add u=.. to --at".into()))?;
                    scalar(s.flag_curvature(u)?)
                }
                "S" => scalar(s.s.expect("sigma requested")),
                "sigma" => scalar(s.sigma.expect("sigma requested")),
                "tau" => scalar(s.tau.expect("sigma requested")),
                "f" => scalar(a.f_value()),
                "f_tilde" => scalar(a.f_tilde()),
                _ => unreachable!(),
            }
        }
        other => {
            return Err(AppError::Usage(format!(
                "unknown quantity `{other}`; known: {}",
                QUANTITIES.join(", ")
            )))
        }
    };
    Ok(QuantityReport {
        schema: SCHEMA,
        command: "curvature",
        metric: MetricInfo::of(metric),
        quantity: quantity.to_string(),
        x: nums(&at.x),
        y: nums(&at.y),
        u: at.u.as_deref().map(nums),
        shape,
        values: nums(&values),
    })
}

/// Maps `--track` names onto trace series.
pub fn series_name(s: &str) -> Result<&'static str, String> {
    let t = s.trim();
    let canonical = match t {
        "ftilde" => "f_tilde",
        "J" | "j" => "J_norm",
        "Psi" => "psi",
        other => other,
    };
    SERIES
        .iter()
        .copied()
        .find(|x| *x == canonical)
        .ok_or_else(|| format!("unknown series `{t}`; known: {}", SERIES.join(", ")))
}

#[derive(Debug, Clone, Serialize, PartialEq)]
pub struct FlowSummary {
    pub schema: u32,
    pub command: &'static str,
    pub metric: MetricInfo,
    pub nodes: usize,
    pub t_end: String,
    pub boundary_exit: bool,
    pub speed_drift: String,
    pub tracked: Vec<String>,
}

/// Integrates, tracks the chosen series and returns the trace with a
/// summary.
pub fn run_flow(
    metric: &MetricModel,
    x0: &[f64],
    y0: &[f64],
    t_max: f64,
    tol: f64,
    track: &[&str],
) -> Result<(FlowTrace, FlowSummary), AppError> {
    let trace = integrate_geodesic(metric, x0, y0, t_max, tol)?;
    let mut trace = if track.is_empty() {
        trace
    } else {
        track_scalars(metric, &trace)?
    };
    trace.tracked.retain(|k, _| track.contains(&k.as_str()));
    let drift = trace.speed_drift(metric)?;
    let summary = FlowSummary {
        schema: SCHEMA,
        command: "flow",
        metric: MetricInfo::of(metric),
        nodes: trace.len(),
        t_end: crate::report::num(*trace.times.last().unwrap_or(&0.0)),
        boundary_exit: trace.boundary_exit,
        speed_drift: crate::report::num(drift),
        tracked: trace.tracked.keys().cloned().collect(),
    };
    Ok((trace, summary))
}

#[cfg(test)]
mod tests {
    use super::*;
    use finsler_core::metric::lookup;

    #[test]
    fn parses_at() {
        let a: At = "x=0.1, -0.2; y=1,0;u=0,1".parse().unwrap();
        assert_eq!(a.x, vec![0.1, -0.2]);
        assert_eq!(a.u, Some(vec![0.0, 1.0]));
        assert!("x=1;z=2".parse::<At>().is_err());
        assert!("y=1,2".parse::<At>().is_err());
    }

    #[test]
    fn funk_flag_curvature() {
        let m = lookup("FUNK_2").unwrap();
        let at: At = "x=0.1,0.2;y=1,0;u=0,1".parse().unwrap();
        let r = evaluate_quantity(&m, &at, "K").unwrap();
        let k: f64 = r.values[0].parse().unwrap();
        assert!((k + 0.25).abs() < 1e-6);
        assert!(r.shape.is_empty());
        let b = evaluate_quantity(&m, &at, "B").unwrap();
        assert_eq!(b.shape, vec![2, 2, 2, 2]);
        assert_eq!(b.values.len(), 16);
    }

    #[test]
    fn flow_keeps_only_tracked_series() {
        let m = lookup("FUNK_2").unwrap();
        let (tr, s) = run_flow(&m, &[0.0, 0.0], &[0.1, 0.0], 0.2, 1e-10, &["psi", "f"]).unwrap();
        assert_eq!(s.tracked, vec!["f".to_string(), "psi".to_string()]);
        assert_eq!(tr.len(), 21);
        assert_eq!(series_name("ftilde"), Ok("f_tilde"));
        assert!(series_name("nope").is_err());
    }
}

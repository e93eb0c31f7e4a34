//! Geodesics, linear parallel transport and scalar series along geodesics.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use rayon::prelude::*;

use crate::curvature::{analyze, spray, spray_and_connection, CurvatureOptions};
use crate::error::{Error, Result};
use crate::metric::{MetricModel, TangentPoint};

/// Spacing of the output grid.
pub const GRID_STEP: f64 = 1e-2;

#[derive(Debug, Clone, PartialEq)]
pub struct GeodesicState {
    pub t: f64,
    pub x: Vec<f64>,
    pub y: Vec<f64>,
    pub f0: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FlowTrace {
    pub metric: String,
    pub times: Vec<f64>,
    pub states: Vec<GeodesicState>,
    /// Named series, one value per node.
    pub tracked: BTreeMap<String, Vec<f64>>,
    /// Set when the geodesic left the chart before `t_max`; the trace then
    /// stops at the last node inside.
    pub boundary_exit: bool,
    pub f0: f64,
    pub tol: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FlowOptions {
    pub tol: f64,
    pub grid: f64,
    pub max_steps: usize,
}

impl Default for FlowOptions {
    fn default() -> Self {
        Self {
            tol: 1e-10,
            grid: GRID_STEP,
            max_steps: 1_000_000,
        }
    }
}

// Dormand-Prince 5(4)
const A: [[f64; 6]; 7] = [
    [0.0; 6],
    [1.0 / 5.0, 0.0, 0.0, 0.0, 0.0, 0.0],
    [3.0 / 40.0, 9.0 / 40.0, 0.0, 0.0, 0.0, 0.0],
    [44.0 / 45.0, -56.0 / 15.0, 32.0 / 9.0, 0.0, 0.0, 0.0],
    [19372.0 / 6561.0, -25360.0 / 2187.0, 64448.0 / 6561.0, -212.0 / 729.0, 0.0, 0.0],
    [9017.0 / 3168.0, -355.0 / 33.0, 46732.0 / 5247.0, 49.0 / 176.0, -5103.0 / 18656.0, 0.0],
    [35.0 / 384.0, 0.0, 500.0 / 1113.0, 125.0 / 192.0, -2187.0 / 6784.0, 11.0 / 84.0],
];
const B5: [f64; 7] = [35.0 / 384.0, 0.0, 500.0 / 1113.0, 125.0 / 192.0, -2187.0 / 6784.0, 11.0 / 84.0, 0.0];
const B4: [f64; 7] = [
    5179.0 / 57600.0,
    0.0,
    7571.0 / 16695.0,
    393.0 / 640.0,
    -92097.0 / 339200.0,
    187.0 / 2100.0,
    1.0 / 40.0,
];

struct Solution {
    times: Vec<f64>,
    states: Vec<Vec<f64>>,
    exited: bool,
}

fn dp45_step<R>(rhs: &R, z: &[f64], k1: &[f64], h: f64) -> Result<(Vec<f64>, Vec<f64>, Vec<f64>)>
where
    R: Fn(&[f64]) -> Result<Vec<f64>>,
{
    let d = z.len();
    let mut k: Vec<Vec<f64>> = Vec::with_capacity(7);
    k.push(k1.to_vec());
    for s in 1..7 {
        let zs: Vec<f64> = (0..d)
            .map(|i| z[i] + h * (0..s).map(|r| A[s][r] * k[r][i]).sum::<f64>())
            .collect();
        k.push(rhs(&zs)?);
    }
    let z5: Vec<f64> = (0..d).map(|i| z[i] + h * (0..7).map(|s| B5[s] * k[s][i]).sum::<f64>()).collect();
    let err: Vec<f64> = (0..d)
        .map(|i| h * (0..7).map(|s| (B5[s] - B4[s]) * k[s][i]).sum::<f64>())
        .collect();
    // FSAL: the last stage is the derivative at z5
    let k7 = k.pop().unwrap_or_default();
    Ok((z5, err, k7))
}

/// Autonomous ODE solve with adaptive steps that land on every grid node.
fn solve<R, I>(rhs: R, inside: I, z0: Vec<f64>, t_max: f64, opts: &FlowOptions) -> Result<Solution>
where
    R: Fn(&[f64]) -> Result<Vec<f64>>,
    I: Fn(&[f64]) -> bool,
{
    if !(t_max > 0.0) || !(opts.tol > 0.0) || !(opts.grid > 0.0) {
        return Err(Error::InvalidArgument("t_max, tol and grid must be positive".into()));
    }
    let nodes = (t_max / opts.grid - 1e-9).ceil() as usize;
    let mut times = vec![0.0];
    let mut states = vec![z0.clone()];
    let mut z = z0;
    let mut k1 = rhs(&z)?;
    let mut t = 0.0;
    let mut h = opts.grid.min(0.01 * opts.tol.powf(0.2).max(1e-3));
    let mut err_prev: f64 = 1.0;
    let mut steps = 0usize;
    for node in 1..=nodes {
        let target = (node as f64 * opts.grid).min(t_max);
        while t < target {
            steps += 1;
            if steps > opts.max_steps {
                return Err(Error::IntegrationFailure {
                    t,
                    reason: "step budget exhausted".into(),
                });
            }
            let remaining = target - t;
            let landing = h >= remaining;
            let step = if landing { remaining } else { h };
            let (z5, err, k7) = match dp45_step(&rhs, &z, &k1, step) {
                Ok(v) => v,
                Err(_) => {
                    h = step * 0.25;
                    if h < 1e-14 {
                        return Err(Error::IntegrationFailure {
                            t,
                            reason: "step underflow".into(),
                        });
                    }
                    continue;
                }
            };
            let e = err
                .iter()
                .zip(&z)
                .zip(&z5)
                .map(|((e, a), b)| e.abs() / (opts.tol * (1.0 + a.abs().max(b.abs()))))
                .fold(0.0, f64::max);
            if e <= 1.0 && z5.iter().all(|v| v.is_finite()) {
                let e = e.max(1e-10);
                // PI control
                let factor = (0.9 * e.powf(-0.7 / 5.0) * err_prev.powf(0.4 / 5.0)).clamp(0.2, 5.0);
                if !landing || step >= h {
                    h = step * factor;
                }
                err_prev = e;
                t = if landing { target } else { t + step };
                z = z5;
                k1 = k7;
            } else {
                let factor = if e.is_finite() {
                    (0.9 * e.powf(-0.2)).clamp(0.1, 0.9)
                } else {
                    0.25
                };
                h = step * factor;
                if h < 1e-14 {
                    return Err(Error::IntegrationFailure {
                        t,
                        reason: "step underflow".into(),
                    });
                }
            }
        }
        if !inside(&z) {
            return Ok(Solution {
                times,
                states,
                exited: true,
            });
        }
        times.push(target);
        states.push(z.clone());
    }
    Ok(Solution {
        times,
        states,
        exited: false,
    })
}

fn geodesic_rhs(metric: &MetricModel) -> impl Fn(&[f64]) -> Result<Vec<f64>> + '_ {
    let n = metric.n;
    move |z: &[f64]| {
        let (x, y) = z.split_at(n);
        let g = spray(metric, x, y)?;
        let mut out = y.to_vec();
        out.extend(g.iter().map(|v| -2.0 * v));
        Ok(out)
    }
}

fn check_start(metric: &MetricModel, x0: &[f64], y0: &[f64]) -> Result<TangentPoint> {
    let at = TangentPoint::new(x0.to_vec(), y0.to_vec())?;
    metric.check_point(&at)?;
    Ok(at)
}

/// Solves `x' = y`, `y' = -2 G(x, y)` on `[0, t_max]`.
pub fn integrate_geodesic(metric: &MetricModel, x0: &[f64], y0: &[f64], t_max: f64, tol: f64) -> Result<FlowTrace> {
    integrate_geodesic_with(
        metric,
        x0,
        y0,
        t_max,
        &FlowOptions {
            tol,
            ..FlowOptions::default()
        },
    )
}

pub fn integrate_geodesic_with(
    metric: &MetricModel,
    x0: &[f64],
    y0: &[f64],
    t_max: f64,
    opts: &FlowOptions,
) -> Result<FlowTrace> {
    let at = check_start(metric, x0, y0)?;
    let n = metric.n;
    let f0 = metric.evaluate_f(&at)?;
    let mut z0 = x0.to_vec();
    z0.extend_from_slice(y0);
    let sol = solve(geodesic_rhs(metric), |z| metric.domain.contains(&z[..n]), z0, t_max, opts)?;
    let states = sol
        .times
        .iter()
        .zip(&sol.states)
        .map(|(&t, z)| GeodesicState {
            t,
            x: z[..n].to_vec(),
            y: z[n..].to_vec(),
            f0,
        })
        .collect();
    Ok(FlowTrace {
        metric: metric.name.clone(),
        times: sol.times,
        states,
        tracked: BTreeMap::new(),
        boundary_exit: sol.exited,
        f0,
        tol: opts.tol,
    })
}

impl FlowTrace {
    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn series(&self, name: &str) -> Option<&[f64]> {
        self.tracked.get(name).map(Vec::as_slice)
    }

    /// `max |F(x, y) - F0| / F0` over the nodes.
    pub fn speed_drift(&self, metric: &MetricModel) -> Result<f64> {
        let mut worst: f64 = 0.0;
        for s in &self.states {
            let f = metric.f(&s.x, &s.y)?;
            worst = worst.max((f - self.f0).abs() / self.f0);
        }
        Ok(worst)
    }

    /// Tab-separated table with a header row: `t`, `x1..xn`, `y1..yn`, then
    /// every tracked series in name order.
    pub fn to_table(&self) -> String {
        let n = self.states.first().map_or(0, |s| s.x.len());
        let mut out = String::from("t");
        for i in 1..=n {
            let _ = write!(out, "\tx{i}");
        }
        for i in 1..=n {
            let _ = write!(out, "\ty{i}");
        }
        for name in self.tracked.keys() {
            let _ = write!(out, "\t{name}");
        }
        out.push('\n');
        for (k, s) in self.states.iter().enumerate() {
            let _ = write!(out, "{}", s.t);
            for v in s.x.iter().chain(&s.y) {
                let _ = write!(out, "\t{v}");
            }
            for series in self.tracked.values() {
                let _ = write!(out, "\t{}", series[k]);
            }
            out.push('\n');
        }
        out
    }
}

/// A vector field along a geodesic.
#[derive(Debug, Clone, PartialEq)]
pub struct Transport {
    pub times: Vec<f64>,
    pub vectors: Vec<Vec<f64>>,
    /// Max of `|U' + N(x, x') U| / |U|` with `U'` from five-point differences.
    pub ode_residual: f64,
    /// `max - min` of `g_x'(U, U)` relative to its initial value.
    pub norm_drift: f64,
}

/// Solves `U' + N(x, x') U = 0` jointly with the geodesic of `trace`.
pub fn parallel_transport(metric: &MetricModel, trace: &FlowTrace, u0: &[f64]) -> Result<Transport> {
    let n = metric.n;
    if u0.len() != n {
        return Err(Error::Dimension {
            expected: n,
            actual: u0.len(),
        });
    }
    let (Some(first), Some(&t_end)) = (trace.states.first(), trace.times.last()) else {
        return Err(Error::InvalidArgument("empty trace".into()));
    };
    if !(t_end > 0.0) {
        return Err(Error::InvalidArgument("trace has a single node".into()));
    }
    let rhs = |z: &[f64]| -> Result<Vec<f64>> {
        let (x, rest) = z.split_at(n);
        let (y, u) = rest.split_at(n);
        let (g, nl) = spray_and_connection(metric, x, y)?;
        let mut out = y.to_vec();
        out.extend(g.iter().map(|v| -2.0 * v));
        for i in 0..n {
            out.push(-(0..n).map(|j| nl[i * n + j] * u[j]).sum::<f64>());
        }
        Ok(out)
    };
    let mut z0 = first.x.clone();
    z0.extend_from_slice(&first.y);
    z0.extend_from_slice(u0);
    let opts = FlowOptions {
        tol: trace.tol,
        ..FlowOptions::default()
    };
    let sol = solve(rhs, |z| metric.domain.contains(&z[..n]), z0, t_end, &opts)?;
    let vectors: Vec<Vec<f64>> = sol.states.iter().map(|z| z[2 * n..].to_vec()).collect();
    let norms: Vec<f64> = sol
        .states
        .iter()
        .map(|z| {
            let g = metric.fundamental_tensor(&z[..n], &z[n..2 * n])?;
            let u = &z[2 * n..];
            Ok((0..n * n).map(|ab| g[ab] * u[ab / n] * u[ab % n]).sum::<f64>())
        })
        .collect::<Result<_>>()?;
    let (lo, hi) = norms.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), &v| (a.min(v), b.max(v)));
    let norm_drift = if norms[0] > 0.0 { (hi - lo) / norms[0] } else { hi - lo };
    let mut ode_residual: f64 = 0.0;
    let ts = &sol.times;
    for k in 2..ts.len().saturating_sub(2) {
        let h = ts[k + 1] - ts[k];
        let uniform = (-2..2).all(|d: isize| {
            let a = (k as isize + d) as usize;
            ((ts[a + 1] - ts[a]) - h).abs() < 1e-12
        });
        if !uniform {
            continue;
        }
        let z = &sol.states[k];
        let (_, nl) = spray_and_connection(metric, &z[..n], &z[n..2 * n])?;
        let u = &vectors[k];
        let size = u.iter().map(|v| v * v).sum::<f64>().sqrt().max(1e-300);
        for i in 0..n {
            let du = (vectors[k - 2][i] - 8.0 * vectors[k - 1][i] + 8.0 * vectors[k + 1][i] - vectors[k + 2][i]) / (12.0 * h);
            let r = du + (0..n).map(|j| nl[i * n + j] * u[j]).sum::<f64>();
            ode_residual = ode_residual.max(r.abs() / size);
        }
    }
    Ok(Transport {
        times: sol.times,
        vectors,
        ode_residual,
        norm_drift,
    })
}

/// Names of the series filled by [`track_scalars`].
pub const SERIES: [&str; 6] = ["F", "J_norm", "R_II", "f", "f_tilde", "psi"];

/// Fills `psi = ||I||`, `f = F^2 g(I, I)`, `f_tilde`, `F`, `J_norm = ||J||`
/// and `R_II = R^i_m I^m I_i` at every node.
pub fn track_scalars(metric: &MetricModel, trace: &FlowTrace) -> Result<FlowTrace> {
    let opts = CurvatureOptions::without_sigma();
    let rows: Vec<[f64; 6]> = trace
        .states
        .par_iter()
        .map(|s| {
            let at = TangentPoint::new(s.x.clone(), s.y.clone())?;
            let pa = analyze(metric, &at, &opts)?;
            let smp = &pa.sample;
            let n = smp.n;
            let i_up: Vec<f64> = (0..n)
                .map(|a| (0..n).map(|b| smp.g_inv[a * n + b] * smp.i[b]).sum())
                .collect();
            let mut r_ii = 0.0;
            for a in 0..n {
                for m in 0..n {
                    r_ii += smp.r[a * n + m] * i_up[m] * smp.i[a];
                }
            }
            Ok([smp.f, smp.norm_j(), r_ii, pa.f_value(), pa.f_tilde(), smp.norm_i()])
        })
        .collect::<Result<_>>()?;
    let mut out = trace.clone();
    for (c, name) in SERIES.iter().enumerate() {
        out.tracked.insert((*name).to_string(), rows.iter().map(|r| r[c]).collect());
    }
    Ok(out)
}

fn require_series<'a>(trace: &'a FlowTrace, name: &str) -> Result<&'a [f64]> {
    trace
        .series(name)
        .ok_or_else(|| Error::InvalidArgument(format!("trace has no `{name}` series; run track_scalars first")))
}

/// First derivative at interior node `k` from three possibly uneven nodes.
fn d1(t: &[f64], v: &[f64], k: usize) -> f64 {
    let (hm, hp) = (t[k] - t[k - 1], t[k + 1] - t[k]);
    (hm * hm * (v[k + 1] - v[k]) + hp * hp * (v[k] - v[k - 1])) / (hm * hp * (hm + hp))
}

fn d2(t: &[f64], v: &[f64], k: usize) -> f64 {
    let (hm, hp) = (t[k] - t[k - 1], t[k + 1] - t[k]);
    2.0 * ((v[k + 1] - v[k]) / hp - (v[k] - v[k - 1]) / hm) / (hm + hp)
}

/// `Psi'` at every node: central where `Psi > 0`, one-sided elsewhere.
pub fn psi_derivative(trace: &FlowTrace) -> Result<Vec<f64>> {
    let psi = require_series(trace, "psi")?;
    let t = &trace.times;
    let len = t.len();
    if len < 2 {
        return Ok(vec![0.0; len]);
    }
    Ok((0..len)
        .map(|k| {
            if k == 0 || (psi[k] == 0.0 && k + 1 < len) {
                (psi[k + 1] - psi[k]) / (t[k + 1] - t[k])
            } else if k + 1 == len {
                (psi[k] - psi[k - 1]) / (t[k] - t[k - 1])
            } else {
                d1(t, psi, k)
            }
        })
        .collect())
}

/// `max (|Psi'| - ||J||)` over interior nodes.
pub fn psi_rate_excess(trace: &FlowTrace) -> Result<f64> {
    let dpsi = psi_derivative(trace)?;
    let j = require_series(trace, "J_norm")?;
    Ok((1..dpsi.len().saturating_sub(1))
        .map(|k| dpsi[k].abs() - j[k])
        .fold(f64::NEG_INFINITY, f64::max))
}

/// `max - min` of a tracked series.
pub fn series_spread(trace: &FlowTrace, name: &str) -> Result<f64> {
    let v = require_series(trace, name)?;
    let (lo, hi) = v.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), &x| (a.min(x), b.max(x)));
    Ok(if v.is_empty() { 0.0 } else { hi - lo })
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConvexityProbe {
    /// Largest flag curvature over the flags checked along the trace.
    pub k_max: f64,
    /// `K <= 0` held on every checked flag.
    pub hypothesis_holds: bool,
    /// `max |[Psi^2]'' - 2(-R^i_m I^m I_i + ||J||^2)|`.
    pub max_gap: f64,
    /// `max (0, 2||J||^2 - [Psi^2]'', 2 Psi'^2 - [Psi^2]'')`.
    pub max_violation: f64,
    pub nodes: usize,
}

/// Compares second differences of `Psi^2` with the curvature expression
/// node-wise and checks `[Psi^2]'' >= 2 ||J||^2 >= 2 Psi'^2`.
pub fn convexity_probe(metric: &MetricModel, trace: &FlowTrace) -> Result<ConvexityProbe> {
    let tracked;
    let trace = if trace.tracked.contains_key("psi") {
        trace
    } else {
        tracked = track_scalars(metric, trace)?;
        &tracked
    };
    let n = metric.n;
    let mut k_max = f64::NEG_INFINITY;
    for s in &trace.states {
        let at = TangentPoint::new(s.x.clone(), s.y.clone())?;
        let smp = analyze(metric, &at, &CurvatureOptions::without_sigma())?.sample;
        for e in 0..n {
            let mut u = vec![0.0; n];
            u[e] = 1.0;
            if let Ok(k) = smp.flag_curvature(&u) {
                k_max = k_max.max(k);
            }
        }
    }
    let psi = require_series(trace, "psi")?;
    let j = require_series(trace, "J_norm")?;
    let r_ii = require_series(trace, "R_II")?;
    let t = &trace.times;
    let p2: Vec<f64> = psi.iter().map(|v| v * v).collect();
    let dpsi = psi_derivative(trace)?;
    let mut max_gap: f64 = 0.0;
    let mut max_violation: f64 = 0.0;
    let mut nodes = 0;
    for k in 1..t.len().saturating_sub(1) {
        let lhs = d2(t, &p2, k);
        let rhs = 2.0 * (-r_ii[k] + j[k] * j[k]);
        max_gap = max_gap.max((lhs - rhs).abs());
        max_violation = max_violation
            .max(2.0 * j[k] * j[k] - lhs)
            .max(2.0 * dpsi[k] * dpsi[k] - lhs);
        nodes += 1;
    }
    Ok(ConvexityProbe {
        k_max,
        hypothesis_holds: k_max <= 1e-9,
        max_gap,
        max_violation,
        nodes,
    })
}

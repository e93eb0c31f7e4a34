//! Curvature tensors, horizontal derivatives and the S/J identities at a
//! tangent point, propagated through the jet of `F^2`.

use std::sync::Arc;

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::field::{fd_partial_with, jet_eval, FdOptions, ScalarField};
use crate::jet::{invert_matrix, Jet, JetSpace, MultiIndex};
use crate::metric::{min_eigenvalue, MetricModel, TangentPoint};
use crate::quadrature::ln_sigma_jet;

/// Connection used for the horizontal covariant derivative `|`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Connection {
    #[default]
    Berwald,
    Chern,
}

impl std::str::FromStr for Connection {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "berwald" => Ok(Connection::Berwald),
            "chern" => Ok(Connection::Chern),
            _ => Err(Error::InvalidArgument(format!("unknown connection `{s}`"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CurvatureOptions {
    pub connection: Connection,
    /// Compare the jet inputs of `g` and `G` against finite differences.
    pub cross_check: bool,
    /// Compute `sigma_F`, `S` and `tau` (needs the volume quadrature).
    pub with_sigma: bool,
}

impl Default for CurvatureOptions {
    fn default() -> Self {
        Self {
            connection: Connection::Berwald,
            cross_check: false,
            with_sigma: true,
        }
    }
}

impl CurvatureOptions {
    /// Everything except the volume form.
    pub fn without_sigma() -> Self {
        Self {
            with_sigma: false,
            ..Self::default()
        }
    }
}

/// All tensors at one tangent point. Arrays are row-major with indices in
/// the order they are written: `C[(i*n + j)*n + k] = C_ijk`,
/// `B[((i*n + j)*n + k)*n + l] = B^i_jkl`, `R[i*n + k] = R^i_k`,
/// `N[i*n + j] = N^i_j`.
#[derive(Debug, Clone, PartialEq)]
pub struct CurvatureSample {
    pub n: usize,
    pub at: TangentPoint,
    pub f: f64,
    pub g: Vec<f64>,
    pub g_inv: Vec<f64>,
    pub c: Vec<f64>,
    pub i: Vec<f64>,
    pub h: Vec<f64>,
    pub spray: Vec<f64>,
    pub nonlinear: Vec<f64>,
    pub b: Vec<f64>,
    pub e: Vec<f64>,
    pub l: Vec<f64>,
    /// `J_i = g^jk L_ijk`.
    pub j: Vec<f64>,
    /// `J_i` from the rate-of-change formula in `I`, `G`, `N`.
    pub j_rate: Vec<f64>,
    pub r: Vec<f64>,
    pub s: Option<f64>,
    pub sigma: Option<f64>,
    pub tau: Option<f64>,
}

/// A flag `span{y, u}` at a tangent point.
#[derive(Debug, Clone, PartialEq)]
pub struct Flag {
    pub pole: TangentPoint,
    pub u: Vec<f64>,
}

/// One-parameter fit `T ~ c * template` with its residual.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Fit {
    pub c: f64,
    /// Max entry of the difference, multiplied by `F` to make it scale-free.
    pub residual: f64,
}

/// Pointwise fit `S = (n+1) c F + eta_i y^i`.
#[derive(Debug, Clone, PartialEq)]
pub struct SFit {
    pub c: f64,
    pub eta: Vec<f64>,
    pub residual: f64,
}

fn values(v: &[Jet]) -> Vec<f64> {
    v.iter().map(Jet::value).collect()
}

pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub(crate) fn max_abs(v: impl IntoIterator<Item = f64>) -> f64 {
    v.into_iter().fold(0.0, |m, x| m.max(x.abs()))
}

struct Jets {
    n: usize,
    ys: Vec<Jet>,
    g: Vec<Jet>,
    ginv: Vec<Jet>,
    c: Vec<Jet>,
    i_low: Vec<Jet>,
    spray: Vec<Jet>,
    nl: Vec<Jet>,
    berwald: Vec<Jet>,
}

fn zero(space: &Arc<JetSpace>) -> Jet {
    Jet::constant(space, 0.0)
}

/// `g`, `g^-1` and `G` from the jet of `F^2`.
fn spray_jets(f2: &Jet, ys: &[Jet], n: usize) -> Result<(Vec<Jet>, Vec<Jet>, Vec<Jet>)> {
    let space = f2.space().clone();
    let f2y: Vec<Jet> = (0..n).map(|i| f2.dy(i)).collect();
    let mut g: Vec<Jet> = Vec::with_capacity(n * n);
    for i in 0..n {
        for j in 0..n {
            if j < i {
                let t: Jet = g[j * n + i].clone();
                g.push(t);
            } else {
                g.push(f2y[i].dy(j) * 0.5);
            }
        }
    }
    let ginv = invert_matrix(&g, n)?;
    let mut bracket = Vec::with_capacity(n);
    for l in 0..n {
        let mut acc = -f2.dx(l);
        for (k, yk) in ys.iter().enumerate() {
            acc.add_product(&f2y[l].dx(k), yk);
        }
        bracket.push(acc);
    }
    let spray = (0..n)
        .map(|i| {
            let mut acc = zero(&space);
            for (l, b) in bracket.iter().enumerate() {
                acc.add_product(&ginv[i * n + l], b);
            }
            acc * 0.25
        })
        .collect();
    Ok((g, ginv, spray))
}

impl Jets {
    fn build(metric: &MetricModel, x: &[f64], y: &[f64], max_x: usize, max_y: usize) -> Result<(Self, Jet)> {
        let n = metric.n;
        let f2 = jet_eval(&metric.f2_field(), x, y, max_x, max_y)?;
        let space = f2.space().clone();
        let ys: Vec<Jet> = (0..n).map(|i| Jet::y_var(&space, i, y[i])).collect();
        let (g, ginv, spray) = spray_jets(&f2, &ys, n)?;
        let mut c = Vec::with_capacity(n * n * n);
        for i in 0..n {
            for j in 0..n {
                for k in 0..n {
                    c.push(g[i * n + j].dy(k) * 0.5);
                }
            }
        }
        let i_low = (0..n)
            .map(|i| {
                let mut acc = zero(&space);
                for j in 0..n {
                    for k in 0..n {
                        acc.add_product(&ginv[j * n + k], &c[(i * n + j) * n + k]);
                    }
                }
                acc
            })
            .collect();
        let nl: Vec<Jet> = (0..n * n).map(|ij| spray[ij / n].dy(ij % n)).collect();
        let berwald = (0..n * n * n).map(|ijk| nl[ijk / n].dy(ijk % n)).collect();
        Ok((
            Self {
                n,
                ys,
                g,
                ginv,
                c,
                i_low,
                spray,
                nl,
                berwald,
            },
            f2,
        ))
    }

    /// `delta_p f = d_x^p f - N^m_p d_y^m f`, as a jet.
    fn delta_jet(&self, f: &Jet, p: usize) -> Jet {
        let mut acc = f.dx(p);
        for m in 0..self.n {
            acc -= &self.nl[m * self.n + p].mul_ref(&f.dy(m));
        }
        acc
    }

    fn delta(&self, f: &Jet, p: usize) -> f64 {
        let mut acc = f.dx(p).value();
        for m in 0..self.n {
            acc -= self.nl[m * self.n + p].value() * f.dy(m).value();
        }
        acc
    }

    /// Chern connection `1/2 g^il (delta_j g_lk + delta_k g_jl - delta_l g_jk)`.
    fn chern(&self) -> Vec<Jet> {
        let n = self.n;
        let space = self.g[0].space().clone();
        // dg[(p*n + a)*n + b] = delta_p g_ab
        let mut dg: Vec<Option<Jet>> = vec![None; n * n * n];
        for p in 0..n {
            for a in 0..n {
                for b in a..n {
                    let d = self.delta_jet(&self.g[a * n + b], p);
                    dg[(p * n + b) * n + a] = Some(d.clone());
                    dg[(p * n + a) * n + b] = Some(d);
                }
            }
        }
        let dg: Vec<Jet> = dg.into_iter().map(Option::unwrap).collect();
        let mut out = Vec::with_capacity(n * n * n);
        for i in 0..n {
            for j in 0..n {
                for k in 0..n {
                    let mut acc = zero(&space);
                    for l in 0..n {
                        let t = &(&dg[(j * n + l) * n + k] + &dg[(k * n + j) * n + l]) - &dg[(l * n + j) * n + k];
                        acc.add_product(&self.ginv[i * n + l], &t);
                    }
                    out.push(acc * 0.5);
                }
            }
        }
        out
    }
}

/// Per-point state: the [`CurvatureSample`] together with the jets needed
/// for horizontal derivatives and the identity residuals.
pub struct PointAnalysis {
    pub sample: CurvatureSample,
    pub connection: Connection,
    jets: Jets,
    f2: Jet,
    j_rate: Vec<Jet>,
    s_jet: Option<Jet>,
    gamma: Vec<Jet>,
}

impl std::fmt::Debug for PointAnalysis {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("PointAnalysis")
            .field("sample", &self.sample)
            .field("connection", &self.connection)
            .finish_non_exhaustive()
    }
}

fn cross_check(metric: &MetricModel, at: &TangentPoint, f2: &Jet) -> Result<()> {
    let n = metric.n;
    let field = metric.f2_field();
    let scale = f2.value().abs();
    let mut idxs = Vec::new();
    for i in 0..n {
        for j in i..n {
            idxs.push(("g", MultiIndex::fiber(n, &[i, j])));
        }
        let mut xi = vec![0u8; n];
        xi[i] = 1;
        idxs.push(("dF2/dx", MultiIndex::new(xi.clone(), vec![0; n])));
        for j in 0..n {
            let mut yj = vec![0u8; n];
            yj[j] = 1;
            idxs.push(("d2F2/dxdy", MultiIndex::new(xi.clone(), yj)));
        }
    }
    for (name, idx) in idxs {
        let jet = f2.partial(&idx);
        let fd = fd_partial_with(&field, &at.x, &at.y, &idx, &FdOptions::default())?;
        if (jet - fd).abs() > 1e-6 * (jet.abs() + 1e-3 * scale) {
            return Err(Error::EngineDisagreement {
                quantity: format!("{name} {idx}"),
                jet,
                fd,
            });
        }
    }
    Ok(())
}

/// Runs the full pipeline at `at`.
pub fn analyze(metric: &MetricModel, at: &TangentPoint, opts: &CurvatureOptions) -> Result<PointAnalysis> {
    metric.check_point(at)?;
    let n = metric.n;
    let (jets, f2) = Jets::build(metric, &at.x, &at.y, 2, 5)?;
    if opts.cross_check {
        cross_check(metric, at, &f2)?;
    }
    let space = f2.space().clone();
    let g = values(&jets.g);
    let min_eig = min_eigenvalue(&g, n);
    if !(min_eig > 0.0) {
        return Err(Error::NonConvex {
            min_eigenvalue: min_eig,
            witness: at.clone(),
        });
    }
    let f = f2.value().sqrt();
    let g_inv = values(&jets.ginv);
    let c = values(&jets.c);
    let i = values(&jets.i_low);
    let y = &at.y;
    let ell: Vec<f64> = y.iter().map(|v| v / f).collect();
    let ell_low: Vec<f64> = (0..n).map(|a| dot(&g[a * n..(a + 1) * n], &ell)).collect();
    let h: Vec<f64> = (0..n * n).map(|ab| g[ab] - ell_low[ab / n] * ell_low[ab % n]).collect();
    let spray = values(&jets.spray);
    let nonlinear = values(&jets.nl);
    let gamma_b = values(&jets.berwald);
    let b: Vec<f64> = (0..n * n * n * n).map(|q| jets.berwald[q / n].dy(q % n).value()).collect();
    let e: Vec<f64> = (0..n * n)
        .map(|ij| 0.5 * (0..n).map(|m| b[((m * n + m) * n) * n + ij]).sum::<f64>())
        .collect();
    let y_low: Vec<f64> = ell_low.iter().map(|v| v * f).collect();
    let l: Vec<f64> = (0..n * n * n)
        .map(|ijk| -0.5 * (0..n).map(|m| y_low[m] * b[m * n * n * n + ijk]).sum::<f64>())
        .collect();
    let j: Vec<f64> = (0..n)
        .map(|a| {
            let mut acc = 0.0;
            for p in 0..n {
                for q in 0..n {
                    acc += g_inv[p * n + q] * l[(a * n + p) * n + q];
                }
            }
            acc
        })
        .collect();
    // J_i = y^m dI_i/dx^m - I_m dG^m/dy^i - 2 G^m dI_i/dy^m
    let j_rate_jets: Vec<Jet> = (0..n)
        .map(|a| {
            let ia = &jets.i_low[a];
            let mut acc = zero(&space);
            for m in 0..n {
                acc.add_product(&jets.ys[m], &ia.dx(m));
                acc -= &jets.i_low[m].mul_ref(&jets.nl[m * n + a]);
                acc -= &(jets.spray[m].mul_ref(&ia.dy(m)) * 2.0);
            }
            acc
        })
        .collect();
    // R^i_k = 2 dG^i/dx^k - y^j d2G^i/dx^j dy^k + 2 G^j d2G^i/dy^j dy^k
    //         - dG^i/dy^j dG^j/dy^k
    let mut r = vec![0.0; n * n];
    for a in 0..n {
        for k in 0..n {
            let mut acc = 2.0 * jets.spray[a].dx(k).value();
            for m in 0..n {
                acc -= y[m] * jets.nl[a * n + k].dx(m).value();
                acc += 2.0 * spray[m] * gamma_b[(a * n + m) * n + k];
                acc -= nonlinear[a * n + m] * nonlinear[m * n + k];
            }
            r[a * n + k] = acc;
        }
    }
    let (s_jet, s, sigma, tau) = if opts.with_sigma {
        let sj = ln_sigma_jet(metric, &at.x, 2)?;
        let ln_sigma = sj.ln_sigma.embed_base(&space);
        let mut s = zero(&space);
        for m in 0..n {
            s += &jets.nl[m * n + m];
            s -= &jets.ys[m].mul_ref(&ln_sigma.dx(m));
        }
        let det = DMatrix::from_row_slice(n, n, &g).determinant();
        let tau = 0.5 * det.ln() - sj.ln_sigma.value();
        let sv = s.value();
        (Some(s), Some(sv), Some(sj.sigma), Some(tau))
    } else {
        (None, None, None, None)
    };
    let gamma = match opts.connection {
        Connection::Berwald => jets.berwald.clone(),
        Connection::Chern => jets.chern(),
    };
    let sample = CurvatureSample {
        n,
        at: at.clone(),
        f,
        g,
        g_inv,
        c,
        i,
        h,
        spray,
        nonlinear,
        b,
        e,
        l,
        j,
        j_rate: values(&j_rate_jets),
        r,
        s,
        sigma,
        tau,
    };
    Ok(PointAnalysis {
        sample,
        connection: opts.connection,
        jets,
        f2,
        j_rate: j_rate_jets,
        s_jet,
        gamma,
    })
}

/// The curvature tensors at one point.
pub fn curvature_sample(metric: &MetricModel, at: &TangentPoint, opts: &CurvatureOptions) -> Result<CurvatureSample> {
    Ok(analyze(metric, at, opts)?.sample)
}

impl PointAnalysis {
    fn n(&self) -> usize {
        self.sample.n
    }

    fn gamma_value(&self, i: usize, j: usize, k: usize) -> f64 {
        let n = self.n();
        self.gamma[(i * n + j) * n + k].value()
    }

    fn s_jet(&self) -> Result<&Jet> {
        self.s_jet
            .as_ref()
            .ok_or_else(|| Error::InvalidArgument("S-curvature was not computed".into()))
    }

    /// `f = F^2 g^ij I_i I_j`, zero-homogeneous in `y`.
    fn f_jet(&self) -> Jet {
        let n = self.n();
        let space = self.f2.space().clone();
        let mut acc = zero(&space);
        for a in 0..n {
            for b in 0..n {
                let t = self.jets.i_low[a].mul_ref(&self.jets.i_low[b]);
                acc.add_product(&self.jets.ginv[a * n + b], &t);
            }
        }
        acc.mul_ref(&self.f2)
    }

    pub fn f_value(&self) -> f64 {
        self.f_jet().value()
    }

    /// `F^2 g^ij (df/dy^i)(df/dy^j)`.
    pub fn f_tilde(&self) -> f64 {
        let n = self.n();
        let fj = self.f_jet();
        let d: Vec<f64> = (0..n).map(|a| fj.dy(a).value()).collect();
        let g_inv = &self.sample.g_inv;
        let mut acc = 0.0;
        for a in 0..n {
            for b in 0..n {
                acc += g_inv[a * n + b] * d[a] * d[b];
            }
        }
        self.f2.value() * acc
    }

    /// Connection coefficients `Gamma^i_jk` of the chosen connection.
    pub fn connection_coefficients(&self) -> Vec<f64> {
        values(&self.gamma)
    }

    /// `y^m V_{k|m}` for a covector given by jets.
    fn covector_h_along_y(&self, v: &[Jet]) -> Vec<f64> {
        let n = self.n();
        let y = &self.sample.at.y;
        let vv = values(v);
        (0..n)
            .map(|k| {
                let mut acc = 0.0;
                for m in 0..n {
                    let mut t = self.jets.delta(&v[k], m);
                    for l in 0..n {
                        t -= vv[l] * self.gamma_value(l, k, m);
                    }
                    acc += y[m] * t;
                }
                acc
            })
            .collect()
    }

    /// `J_{k|m} y^m`.
    pub fn j_dot(&self) -> Vec<f64> {
        self.covector_h_along_y(&self.j_rate)
    }

    /// `S_{.k|m} y^m - S_{|k}`.
    pub fn s_combination(&self) -> Result<Vec<f64>> {
        let s = self.s_jet()?;
        let n = self.n();
        let sk: Vec<Jet> = (0..n).map(|k| s.dy(k)).collect();
        let along = self.covector_h_along_y(&sk);
        Ok((0..n).map(|k| along[k] - self.jets.delta(s, k)).collect())
    }

    /// `J_{k|m} y^m + I_m R^m_k - (S_{.k|m} y^m - S_{|k})`.
    pub fn eiilj_residual(&self) -> Result<Vec<f64>> {
        let n = self.n();
        let jd = self.j_dot();
        let sc = self.s_combination()?;
        let smp = &self.sample;
        Ok((0..n)
            .map(|k| {
                let ir: f64 = (0..n).map(|m| smp.i[m] * smp.r[m * n + k]).sum();
                jd[k] + ir - sc[k]
            })
            .collect())
    }

    /// `I^i_{|p|q} y^p y^q + R^i_m I^m - g^ik (S_{.k|m} y^m - S_{|k})`.
    pub fn second_i_residual(&self) -> Result<Vec<f64>> {
        let n = self.n();
        let sc = self.s_combination()?;
        let space = self.jets.g[0].space().clone();
        let j = &self.jets;
        let i_up: Vec<Jet> = (0..n)
            .map(|a| {
                let mut acc = zero(&space);
                for b in 0..n {
                    acc.add_product(&j.ginv[a * n + b], &j.i_low[b]);
                }
                acc
            })
            .collect();
        // V^i = I^i_{|p} y^p as a jet
        let v: Vec<Jet> = (0..n)
            .map(|a| {
                let mut acc = zero(&space);
                for p in 0..n {
                    let mut t = j.delta_jet(&i_up[a], p);
                    for m in 0..n {
                        t.add_product(&i_up[m], &self.gamma[(a * n + m) * n + p]);
                    }
                    acc.add_product(&t, &j.ys[p]);
                }
                acc
            })
            .collect();
        let vv = values(&v);
        let y = &self.sample.at.y;
        let smp = &self.sample;
        let i_up_v = values(&i_up);
        Ok((0..n)
            .map(|a| {
                let mut lhs = 0.0;
                for q in 0..n {
                    let mut t = j.delta(&v[a], q);
                    for m in 0..n {
                        t += vv[m] * self.gamma_value(a, m, q);
                    }
                    lhs += y[q] * t;
                }
                for m in 0..n {
                    lhs += smp.r[a * n + m] * i_up_v[m];
                }
                let rhs: f64 = (0..n).map(|k| smp.g_inv[a * n + k] * sc[k]).sum();
                lhs - rhs
            })
            .collect())
    }

    /// `I_{i|p} y^p`, equal to `J_i`.
    pub fn i_dot(&self) -> Vec<f64> {
        self.covector_h_along_y(&self.jets.i_low)
    }

    /// Horizontal derivative `delta_p f` of a scalar field.
    pub fn horizontal_derivative<F: ScalarField>(&self, field: &F, p: usize) -> Result<f64> {
        let at = &self.sample.at;
        let fj = jet_eval(field, &at.x, &at.y, 1, 1)?;
        let n = self.n();
        let mut acc = fj.dx(p).value();
        for m in 0..n {
            acc -= self.sample.nonlinear[m * n + p] * fj.dy(m).value();
        }
        Ok(acc)
    }

    /// `V^i_{|p} = delta_p V^i + V^m Gamma^i_mp` for a vector field given by
    /// its components.
    pub fn vector_h_derivative<F: ScalarField>(&self, fields: &[F], p: usize) -> Result<Vec<f64>> {
        let n = self.n();
        if fields.len() != n {
            return Err(Error::Dimension {
                expected: n,
                actual: fields.len(),
            });
        }
        let at = &self.sample.at;
        let vals: Vec<f64> = fields
            .iter()
            .map(|f| Ok(jet_eval(f, &at.x, &at.y, 0, 0)?.value()))
            .collect::<Result<_>>()?;
        (0..n)
            .map(|a| {
                let mut t = self.horizontal_derivative(&fields[a], p)?;
                for m in 0..n {
                    t += vals[m] * self.gamma_value(a, m, p);
                }
                Ok(t)
            })
            .collect()
    }
}

impl CurvatureSample {
    fn idx3(&self, i: usize, j: usize, k: usize) -> usize {
        (i * self.n + j) * self.n + k
    }

    pub fn ell(&self) -> Vec<f64> {
        self.at.y.iter().map(|v| v / self.f).collect()
    }

    pub fn ell_low(&self) -> Vec<f64> {
        let n = self.n;
        let ell = self.ell();
        (0..n).map(|a| dot(&self.g[a * n..(a + 1) * n], &ell)).collect()
    }

    /// `g_y(u, v)`.
    pub fn g_product(&self, u: &[f64], v: &[f64]) -> f64 {
        let n = self.n;
        let mut acc = 0.0;
        for a in 0..n {
            for b in 0..n {
                acc += self.g[a * n + b] * u[a] * v[b];
            }
        }
        acc
    }

    /// Flag curvature of `span{y, u}`.
    pub fn flag_curvature(&self, u: &[f64]) -> Result<f64> {
        let n = self.n;
        if u.len() != n {
            return Err(Error::Dimension {
                expected: n,
                actual: u.len(),
            });
        }
        let y = &self.at.y;
        let ru: Vec<f64> = (0..n).map(|a| dot(&self.r[a * n..(a + 1) * n], u)).collect();
        let den = self.g_product(y, y) * self.g_product(u, u) - self.g_product(y, u).powi(2);
        if !(den > 1e-14 * self.g_product(y, y) * self.g_product(u, u)) {
            return Err(Error::InvalidArgument("flag is degenerate: u is parallel to y".into()));
        }
        Ok(self.g_product(u, &ru) / den)
    }

    /// Norm of a tensor in a `g_y`-orthonormal frame. `upper[k]` marks the
    /// contravariant slots.
    pub fn g_norm(&self, t: &[f64], upper: &[bool]) -> f64 {
        let n = self.n;
        let g = DMatrix::from_row_slice(n, n, &self.g);
        let Some(ch) = g.cholesky() else {
            return f64::NAN;
        };
        let l = ch.l();
        // lower slots transform with L^-T, upper slots with L^T
        let lt = l.transpose();
        let lit = l.try_inverse().map(|m| m.transpose()).unwrap_or(lt.clone());
        let mut cur = t.to_vec();
        let rank = upper.len();
        for (slot, &up) in upper.iter().enumerate() {
            let m = if up { &lt } else { &lit };
            let stride = n.pow((rank - 1 - slot) as u32);
            let mut next = vec![0.0; cur.len()];
            for (q, out) in next.iter_mut().enumerate() {
                let a = (q / stride) % n;
                let base = q - a * stride;
                let mut acc = 0.0;
                for i in 0..n {
                    // lower: T_a = sum_i E_ia T_i with E = L^-T; upper: T^a = sum_i (L^T)_ai T^i
                    let coef = if up { m[(a, i)] } else { m[(i, a)] };
                    acc += coef * cur[base + i * stride];
                }
                *out = acc;
            }
            cur = next;
        }
        cur.iter().map(|v| v * v).sum::<f64>().sqrt()
    }

    pub fn norm_c(&self) -> f64 {
        self.g_norm(&self.c, &[false; 3])
    }
    pub fn norm_i(&self) -> f64 {
        self.g_norm(&self.i, &[false])
    }
    pub fn norm_b(&self) -> f64 {
        self.g_norm(&self.b, &[true, false, false, false])
    }
    pub fn norm_e(&self) -> f64 {
        self.g_norm(&self.e, &[false; 2])
    }
    pub fn norm_l(&self) -> f64 {
        self.g_norm(&self.l, &[false; 3])
    }
    pub fn norm_j(&self) -> f64 {
        self.g_norm(&self.j, &[false])
    }

    /// Max entry of `C_ijk - (I_i h_jk + I_j h_ik + I_k h_ij) / (n+1)`.
    pub fn c_reducibility_residual(&self) -> f64 {
        self.reducibility(&self.c, &self.i)
    }

    /// The same with `(L, J)` in place of `(C, I)`.
    pub fn landsberg_reducibility_residual(&self) -> f64 {
        self.reducibility(&self.l, &self.j)
    }

    fn reducibility(&self, t: &[f64], v: &[f64]) -> f64 {
        let n = self.n;
        let k1 = 1.0 / (n as f64 + 1.0);
        let h = &self.h;
        let mut worst: f64 = 0.0;
        for i in 0..n {
            for j in 0..n {
                for k in 0..n {
                    let m = k1 * (v[i] * h[j * n + k] + v[j] * h[i * n + k] + v[k] * h[i * n + j]);
                    worst = worst.max((t[self.idx3(i, j, k)] - m).abs());
                }
            }
        }
        worst
    }

    /// `F^-1 {h_jk hh^i_l + h_kl hh^i_j + h_lj hh^i_k + 2F C_jkl l^i}` with
    /// `hh^i_j = delta^i_j - l^i l_j`.
    pub fn isotropic_berwald_template(&self) -> Vec<f64> {
        let n = self.n;
        let f = self.f;
        let ell = self.ell();
        let ell_low = self.ell_low();
        let hh = |i: usize, j: usize| (if i == j { 1.0 } else { 0.0 }) - ell[i] * ell_low[j];
        let h = &self.h;
        let mut out = Vec::with_capacity(n * n * n * n);
        for i in 0..n {
            for j in 0..n {
                for k in 0..n {
                    for l in 0..n {
                        let v = h[j * n + k] * hh(i, l)
                            + h[k * n + l] * hh(i, j)
                            + h[l * n + j] * hh(i, k)
                            + 2.0 * f * self.c[self.idx3(j, k, l)] * ell[i];
                        out.push(v / f);
                    }
                }
            }
        }
        out
    }

    /// Least-squares `c` in `B = c * template`.
    pub fn isotropic_berwald_fit(&self) -> Fit {
        fit_scalar(&self.b, &self.isotropic_berwald_template(), self.f)
    }

    /// Least-squares `c` in `E = (n+1)/2 c F^-1 h`.
    pub fn isotropic_e_fit(&self) -> Fit {
        let k = (self.n as f64 + 1.0) / 2.0 / self.f;
        let t: Vec<f64> = self.h.iter().map(|v| v * k).collect();
        fit_scalar(&self.e, &t, self.f)
    }

    /// Two routes to `J` agree: max entry of the difference.
    pub fn j_route_gap(&self) -> f64 {
        max_abs(self.j.iter().zip(&self.j_rate).map(|(a, b)| a - b))
    }
}

fn fit_scalar(data: &[f64], template: &[f64], f: f64) -> Fit {
    let tt = dot(template, template);
    let c = if tt > 0.0 { dot(data, template) / tt } else { 0.0 };
    let residual = max_abs(data.iter().zip(template).map(|(d, t)| d - c * t)) * f;
    Fit { c, residual }
}

impl PointAnalysis {
    /// Pointwise `S = (n+1) c F + eta`: `c` from the fiber Hessian of `S`,
    /// which must equal `(n+1) c h / F`; then `eta_i = S_.i - (n+1) c l_i`.
    pub fn s_fit(&self) -> Result<SFit> {
        let s = self.s_jet()?;
        let smp = &self.sample;
        let n = self.n();
        let k = (n as f64 + 1.0) / smp.f;
        let hess: Vec<f64> = (0..n * n).map(|ij| s.dy(ij / n).dy(ij % n).value()).collect();
        let t: Vec<f64> = smp.h.iter().map(|v| v * k).collect();
        let fit = fit_scalar(&hess, &t, smp.f);
        let ell_low = smp.ell_low();
        let eta = (0..n)
            .map(|i| s.dy(i).value() - (n as f64 + 1.0) * fit.c * ell_low[i])
            .collect();
        Ok(SFit {
            c: fit.c,
            eta,
            residual: fit.residual,
        })
    }

    /// `E` from `1/2 d^2 (dG^m/dy^m) / dy^i dy^j`.
    pub fn e_from_divergence(&self) -> Vec<f64> {
        let n = self.n();
        let mut div = self.jets.nl[0].clone();
        for m in 1..n {
            div += &self.jets.nl[m * n + m];
        }
        (0..n * n).map(|ij| 0.5 * div.dy(ij / n).dy(ij % n).value()).collect()
    }
}

/// `G^i(x, y)` alone, from a low-order jet.
pub fn spray(metric: &MetricModel, x: &[f64], y: &[f64]) -> Result<Vec<f64>> {
    let n = metric.n;
    let f2 = jet_eval(&metric.f2_field(), x, y, 1, 2)?;
    let space = f2.space().clone();
    let ys: Vec<Jet> = (0..n).map(|i| Jet::y_var(&space, i, y[i])).collect();
    let (_, _, g) = spray_jets(&f2, &ys, n)?;
    Ok(values(&g))
}

/// `G^i` and `N^i_j`.
pub fn spray_and_connection(metric: &MetricModel, x: &[f64], y: &[f64]) -> Result<(Vec<f64>, Vec<f64>)> {
    let n = metric.n;
    let f2 = jet_eval(&metric.f2_field(), x, y, 1, 3)?;
    let space = f2.space().clone();
    let ys: Vec<Jet> = (0..n).map(|i| Jet::y_var(&space, i, y[i])).collect();
    let (_, _, g) = spray_jets(&f2, &ys, n)?;
    let nl = (0..n * n).map(|ij| g[ij / n].dy(ij % n).value()).collect();
    Ok((values(&g), nl))
}

/// Flag curvature `K(y, u)`.
pub fn flag_curvature(metric: &MetricModel, flag: &Flag) -> Result<f64> {
    curvature_sample(metric, &flag.pole, &CurvatureOptions::without_sigma())?.flag_curvature(&flag.u)
}

/// S-curvature at a point.
pub fn s_curvature(metric: &MetricModel, at: &TangentPoint) -> Result<f64> {
    Ok(curvature_sample(metric, at, &CurvatureOptions::default())?
        .s
        .expect("sigma requested"))
}

/// Distortion `tau = ln(sqrt(det g) / sigma_F)`.
pub fn distortion(metric: &MetricModel, at: &TangentPoint) -> Result<f64> {
    Ok(curvature_sample(metric, at, &CurvatureOptions::default())?
        .tau
        .expect("sigma requested"))
}

/// Max over `i` of `|d tau / dy^i - I_i|`, with the fiber gradient of
/// `tau` taken by fourth-order central differences.
pub fn tau_gradient_residual(metric: &MetricModel, at: &TangentPoint) -> Result<f64> {
    let n = metric.n;
    let i = curvature_sample(metric, at, &CurvatureOptions::without_sigma())?.i;
    let half_ln_det = |y: &[f64]| -> Result<f64> {
        let g = metric.fundamental_tensor(&at.x, y)?;
        Ok(0.5 * DMatrix::from_row_slice(n, n, &g).determinant().ln())
    };
    let h = 1e-3 * at.y.iter().map(|v| v * v).sum::<f64>().sqrt();
    let mut worst: f64 = 0.0;
    for k in 0..n {
        let at_step = |s: f64| {
            let mut y = at.y.clone();
            y[k] += s * h;
            half_ln_det(&y)
        };
        let d = (8.0 * (at_step(1.0)? - at_step(-1.0)?) - (at_step(2.0)? - at_step(-2.0)?)) / (12.0 * h);
        worst = worst.max((d - i[k]).abs());
    }
    Ok(worst)
}

/// `delta_p f` for a scalar field, with `N` from the metric.
pub fn horizontal_derivative<F: ScalarField>(metric: &MetricModel, field: &F, at: &TangentPoint, p: usize) -> Result<f64> {
    metric.check_point(at)?;
    let (_, nl) = spray_and_connection(metric, &at.x, &at.y)?;
    let fj = jet_eval(field, &at.x, &at.y, 1, 1)?;
    let n = metric.n;
    let mut acc = fj.dx(p).value();
    for m in 0..n {
        acc -= nl[m * n + p] * fj.dy(m).value();
    }
    Ok(acc)
}

/// `V^i_{|p}` of a vector field with the chosen connection.
pub fn berwald_h_derivative<F: ScalarField>(
    metric: &MetricModel,
    fields: &[F],
    at: &TangentPoint,
    p: usize,
    connection: Connection,
) -> Result<Vec<f64>> {
    let opts = CurvatureOptions {
        connection,
        ..CurvatureOptions::without_sigma()
    };
    analyze(metric, at, &opts)?.vector_h_derivative(fields, p)
}

/// Residual vector of the `J`/`S` identity at a point.
pub fn identity_eiilj_residual(metric: &MetricModel, at: &TangentPoint) -> Result<Vec<f64>> {
    analyze(metric, at, &CurvatureOptions::default())?.eiilj_residual()
}

/// Residual vector of the second-derivative form of the same identity.
pub fn identity_second_i_residual(metric: &MetricModel, at: &TangentPoint) -> Result<Vec<f64>> {
    analyze(metric, at, &CurvatureOptions::default())?.second_i_residual()
}

/// C-reducibility residual; defined for Randers-type metrics.
pub fn c_reducibility_residual(metric: &MetricModel, at: &TangentPoint) -> Result<f64> {
    Ok(curvature_sample(metric, at, &CurvatureOptions::without_sigma())?.c_reducibility_residual())
}

/// Landsberg analogue of the C-reducibility residual.
pub fn landsberg_reducibility_residual(metric: &MetricModel, at: &TangentPoint) -> Result<f64> {
    Ok(curvature_sample(metric, at, &CurvatureOptions::without_sigma())?.landsberg_reducibility_residual())
}

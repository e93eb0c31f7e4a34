//! Lie-algebra data of homogeneous (alpha, beta)-spaces, the reductive
//! bracket, the Deng-Wang S-curvature and the exponential-chart model.

use nalgebra::{DMatrix, DVector};

use crate::alphabeta::{q_delta_phi, ABState};
use crate::error::{Error, Result};
use crate::expr::{Expr, Var};
use crate::jet::Scalar;
use crate::metric::{Domain, MetricModel, MetricVariant, PhiKind, PhiProfile};
use crate::sampling::{cube_to_sphere, ShiftedHalton};

/// Validity radius of the second-order exponential chart.
pub const CHART_RADIUS_LIMIT: f64 = 0.2;

/// Reductive data `g = h + m` with an invariant inner product on `m`.
#[derive(Debug, Clone, PartialEq)]
pub struct LieAlgebraData {
    pub dim_g: usize,
    /// Nonzero structure constants `(i, j, k, c)`: `[e_i, e_j] = c e_k`,
    /// stored for both orders of `(i, j)`.
    terms: Vec<(usize, usize, usize, f64)>,
    pub h_indices: Vec<usize>,
    pub m_indices: Vec<usize>,
    /// Row-major `n x n` on `m`.
    pub inner_product: Vec<f64>,
    /// The vector of `m` dual to `beta`.
    pub u: Vec<f64>,
    pub kappa: f64,
    pub phi: PhiProfile,
}

impl LieAlgebraData {
    /// Builds and validates the data. `structure` lists `[e_i, e_j] = c e_k`
    /// with zero-based indices; antisymmetry is implied.
    #[allow(clippy::too_many_arguments)]
    pub fn new(
        dim_g: usize,
        structure: &[(usize, usize, usize, f64)],
        h_indices: Vec<usize>,
        m_indices: Vec<usize>,
        inner_product: Vec<f64>,
        u: Vec<f64>,
        kappa: f64,
        phi: PhiProfile,
    ) -> Result<Self> {
        let bad = |m: String| Error::InvalidLieAlgebra(m);
        let mut seen = vec![false; dim_g];
        for &i in h_indices.iter().chain(&m_indices) {
            if i >= dim_g || seen[i] {
                return Err(bad(format!("index {i} repeated or out of range")));
            }
            seen[i] = true;
        }
        if seen.iter().any(|s| !s) {
            return Err(bad("h and m must partition the basis".into()));
        }
        let n = m_indices.len();
        if inner_product.len() != n * n || u.len() != n {
            return Err(bad(format!("inner product and u must match dim m = {n}")));
        }
        let mut dense = vec![0.0; dim_g * dim_g * dim_g];
        let at = |i: usize, j: usize, k: usize| (i * dim_g + j) * dim_g + k;
        for &(i, j, k, c) in structure {
            if i >= dim_g || j >= dim_g || k >= dim_g {
                return Err(bad(format!("structure index out of range in ({i}, {j}, {k})")));
            }
            if i == j && c != 0.0 {
                return Err(bad(format!("[e{i}, e{i}] must vanish")));
            }
            let prev = dense[at(i, j, k)];
            if prev != 0.0 && prev != c {
                return Err(bad(format!("conflicting constants for [e{i}, e{j}]")));
            }
            dense[at(i, j, k)] = c;
            dense[at(j, i, k)] = -c;
        }
        let mut terms = Vec::new();
        for i in 0..dim_g {
            for j in 0..dim_g {
                for k in 0..dim_g {
                    let c = dense[at(i, j, k)];
                    if c != 0.0 {
                        terms.push((i, j, k, c));
                    }
                }
            }
        }
        let data = Self {
            dim_g,
            terms,
            h_indices,
            m_indices,
            inner_product,
            u,
            kappa,
            phi,
        };
        let jac = data.jacobi_residual();
        if jac > 1e-12 {
            return Err(bad(format!("Jacobi identity residual {jac:e}")));
        }
        for &a in &data.h_indices {
            for &b in &data.h_indices {
                let mut ea = vec![0.0; dim_g];
                let mut eb = vec![0.0; dim_g];
                ea[a] = 1.0;
                eb[b] = 1.0;
                let c = data.bracket(&ea, &eb);
                if data.m_indices.iter().any(|&k| c[k].abs() > 1e-12) {
                    return Err(bad(format!("h is not closed: [e{a}, e{b}] leaves h")));
                }
            }
        }
        let m = DMatrix::from_row_slice(n, n, &data.inner_product);
        if (&m - m.transpose()).amax() > 1e-12 || m.clone().cholesky().is_none() {
            return Err(bad("inner product must be symmetric positive definite".into()));
        }
        Ok(data)
    }

    /// The Heisenberg algebra `[e1, e2] = e3` with trivial isotropy.
    pub fn heisenberg(u: Vec<f64>, kappa: f64, phi: PhiProfile) -> Result<Self> {
        Self::new(
            3,
            &[(0, 1, 2, 1.0)],
            vec![],
            vec![0, 1, 2],
            identity(3),
            u,
            kappa,
            phi,
        )
    }

    /// The abelian algebra `R^n`.
    pub fn abelian(n: usize, u: Vec<f64>, kappa: f64, phi: PhiProfile) -> Result<Self> {
        Self::new(n, &[], vec![], (0..n).collect(), identity(n), u, kappa, phi)
    }

    /// `dim m`, the dimension of the homogeneous space.
    pub fn n(&self) -> usize {
        self.m_indices.len()
    }

    pub fn is_abelian(&self) -> bool {
        self.terms.is_empty()
    }

    /// Full bracket on `g`.
    pub fn bracket(&self, a: &[f64], b: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.dim_g];
        for &(i, j, k, c) in &self.terms {
            out[k] += c * a[i] * b[j];
        }
        out
    }

    fn bracket_t<T: Scalar>(&self, a: &[T], b: &[T]) -> Vec<T> {
        let zero = a[0].lift(0.0);
        let mut out = vec![zero; self.dim_g];
        for &(i, j, k, c) in &self.terms {
            out[k] = out[k].clone() + a[i].clone() * b[j].clone() * c;
        }
        out
    }

    pub fn embed_m(&self, v: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.dim_g];
        for (&k, &x) in self.m_indices.iter().zip(v) {
            out[k] = x;
        }
        out
    }

    pub fn project_m(&self, v: &[f64]) -> Vec<f64> {
        self.m_indices.iter().map(|&k| v[k]).collect()
    }

    /// Jacobi identity residual, max over basis triples.
    pub fn jacobi_residual(&self) -> f64 {
        let d = self.dim_g;
        let e = |i: usize| {
            let mut v = vec![0.0; d];
            v[i] = 1.0;
            v
        };
        let mut worst: f64 = 0.0;
        for i in 0..d {
            for j in 0..d {
                for k in 0..d {
                    let (a, b, c) = (e(i), e(j), e(k));
                    let t1 = self.bracket(&a, &self.bracket(&b, &c));
                    let t2 = self.bracket(&b, &self.bracket(&c, &a));
                    let t3 = self.bracket(&c, &self.bracket(&a, &b));
                    for l in 0..d {
                        worst = worst.max((t1[l] + t2[l] + t3[l]).abs());
                    }
                }
            }
        }
        worst
    }

    /// `<a, b>` on `m`.
    pub fn inner(&self, a: &[f64], b: &[f64]) -> f64 {
        let n = self.n();
        let mut acc = 0.0;
        for i in 0..n {
            for j in 0..n {
                acc += a[i] * self.inner_product[i * n + j] * b[j];
            }
        }
        acc
    }

    pub fn alpha(&self, y: &[f64]) -> f64 {
        self.inner(y, y).sqrt()
    }

    /// `||u||^2`.
    pub fn b_squared(&self) -> f64 {
        self.inner(&self.u, &self.u)
    }

    /// `F` at the origin.
    pub fn f_origin(&self, y: &[f64]) -> Result<f64> {
        let a = self.alpha(y);
        let s = self.inner(&self.u, y) / a;
        Ok(a * self.phi.eval(&s)?)
    }

    /// `a_ij(x)` and `b_i(x)` of the left-invariant metric in exponential
    /// coordinates, to second order in `x`.
    pub fn chart_alpha_beta<T: Scalar>(&self, x: &[T]) -> (Vec<T>, Vec<T>) {
        let n = self.n();
        let zero = x[0].lift(0.0);
        let mut xg = vec![zero.clone(); self.dim_g];
        for (&k, xi) in self.m_indices.iter().zip(x) {
            xg[k] = xi.clone();
        }
        // w_j = pr_m (I - ad_x / 2 + ad_x^2 / 6) e_j
        let frame: Vec<Vec<T>> = self
            .m_indices
            .iter()
            .map(|&kj| {
                let mut v = vec![zero.clone(); self.dim_g];
                v[kj] = x[0].lift(1.0);
                let ad1 = self.bracket_t(&xg, &v);
                let ad2 = self.bracket_t(&xg, &ad1);
                self.m_indices
                    .iter()
                    .map(|&k| v[k].clone() - ad1[k].clone() * 0.5 + ad2[k].clone() * (1.0 / 6.0))
                    .collect()
            })
            .collect();
        let mw: Vec<Vec<T>> = frame
            .iter()
            .map(|w| {
                (0..n)
                    .map(|p| {
                        let mut acc = zero.clone();
                        for q in 0..n {
                            let m = self.inner_product[p * n + q];
                            if m != 0.0 {
                                acc = acc + w[q].clone() * m;
                            }
                        }
                        acc
                    })
                    .collect()
            })
            .collect();
        let mut a = Vec::with_capacity(n * n);
        for wi in &frame {
            for mwj in &mw {
                let mut acc = zero.clone();
                for p in 0..n {
                    acc = acc + wi[p].clone() * mwj[p].clone();
                }
                a.push(acc);
            }
        }
        let b = mw
            .iter()
            .map(|mwi| {
                let mut acc = zero.clone();
                for p in 0..n {
                    if self.u[p] != 0.0 {
                        acc = acc + mwi[p].clone() * self.u[p];
                    }
                }
                acc
            })
            .collect();
        (a, b)
    }
}

fn identity(n: usize) -> Vec<f64> {
    (0..n * n)
        .map(|k| if k / n == k % n { 1.0 } else { 0.0 })
        .collect()
}

/// `[a, b]_m`: the bracket of two vectors of `m`, projected back onto `m`.
pub fn bracket_m(data: &LieAlgebraData, a: &[f64], b: &[f64]) -> Vec<f64> {
    data.project_m(&data.bracket(&data.embed_m(a), &data.embed_m(b)))
}

/// S-curvature of a homogeneous (alpha, beta)-metric at `y` in `m`:
/// `S = (1/alpha) Phi / (2 Delta^2) (kappa <[u,y]_m, y> + alpha Q <[u,y]_m, u>)`.
pub fn deng_wang_s(data: &LieAlgebraData, y: &[f64]) -> Result<f64> {
    if y.len() != data.n() {
        return Err(Error::Dimension {
            expected: data.n(),
            actual: y.len(),
        });
    }
    let alpha = data.alpha(y);
    if !(alpha > 1e-12) {
        return Err(Error::InvalidArgument("y must be nonzero".into()));
    }
    let s = data.inner(&data.u, y) / alpha;
    let b2 = data.b_squared();
    data.phi.check_regular(s, b2.sqrt())?;
    let (q, delta, phi_cap) = q_delta_phi(&ABState {
        s,
        b2,
        n: data.n(),
        phi: data.phi.clone(),
    })?;
    let uy = bracket_m(data, &data.u, y);
    let t1 = data.kappa * data.inner(&uy, y);
    let t2 = alpha * q * data.inner(&uy, &data.u);
    Ok(phi_cap / (2.0 * delta * delta) * (t1 + t2) / alpha)
}

/// Outcome of the isotropic-S argument for homogeneous metrics.
#[derive(Debug, Clone, PartialEq)]
pub struct IsotropicSReport {
    pub s_at_u: f64,
    pub s_at_minus_u: f64,
    /// `c` solved from `S(u)` and `S(-u)`.
    pub c: f64,
    /// `eta(u)` from the same pair.
    pub eta_u: f64,
    /// Least-squares fit `S = (n+1) c F + eta(y)` over sphere samples.
    pub fit_c: f64,
    pub fit_eta: Vec<f64>,
    pub fit_residual: f64,
    pub samples: usize,
}

/// Solves `c F(u) + eta(u) = S(u)`, `c F(-u) - eta(u) = S(-u)` and fits the
/// almost-isotropic form over seeded directions.
pub fn isotropic_s_probe(data: &LieAlgebraData, samples: usize, seed: u64) -> Result<IsotropicSReport> {
    let n = data.n();
    let u = data.u.clone();
    let (s_u, s_mu, c, eta_u) = if data.alpha(&u) == 0.0 {
        (0.0, 0.0, 0.0, 0.0)
    } else {
        let mu: Vec<f64> = u.iter().map(|v| -v).collect();
        let s_u = deng_wang_s(data, &u)?;
        let s_mu = deng_wang_s(data, &mu)?;
        let (fu, fmu) = (data.f_origin(&u)?, data.f_origin(&mu)?);
        let c = (s_u + s_mu) / (fu + fmu);
        (s_u, s_mu, c, s_u - c * fu)
    };
    let dirs: Vec<Vec<f64>> = ShiftedHalton::new(n, seed)
        .take(samples)
        .map(|p| cube_to_sphere(&p))
        .collect();
    let mut rows = Vec::with_capacity(samples * (n + 1));
    let mut rhs = Vec::with_capacity(samples);
    for y in &dirs {
        let f = data.f_origin(y)?;
        rows.push((n + 1) as f64 * f);
        rows.extend_from_slice(y);
        rhs.push(deng_wang_s(data, y)?);
    }
    let a = DMatrix::from_row_slice(samples, n + 1, &rows);
    let b = DVector::from_column_slice(&rhs);
    let sol = a
        .clone()
        .svd(true, true)
        .solve(&b, 1e-14)
        .map_err(|e| Error::FitDegenerate(e.to_string()))?;
    let resid = (&a * &sol - &b).amax();
    Ok(IsotropicSReport {
        s_at_u: s_u,
        s_at_minus_u: s_mu,
        c,
        eta_u,
        fit_c: sol[0],
        fit_eta: sol.iter().skip(1).copied().collect(),
        fit_residual: resid,
        samples,
    })
}

fn phi_expr(phi: &PhiProfile, s: Expr) -> Expr {
    let poly = |c: &[f64]| -> Expr {
        let mut acc = Expr::Const(*c.last().unwrap_or(&0.0));
        for &k in c.iter().rev().skip(1) {
            acc = Expr::Add(
                Box::new(Expr::Mul(Box::new(acc), Box::new(s.clone()))),
                Box::new(Expr::Const(k)),
            );
        }
        acc
    };
    match &phi.kind {
        PhiKind::Randers { eps } => poly(&[1.0, *eps]),
        PhiKind::Polynomial { coeffs } => poly(coeffs),
        PhiKind::Rational { num, den } => Expr::Div(Box::new(poly(num)), Box::new(poly(den))),
        PhiKind::SqrtLinear { c1, c2, c3 } => {
            let s2 = Expr::Mul(Box::new(s.clone()), Box::new(s.clone()));
            let root = Expr::Sqrt(Box::new(Expr::Add(
                Box::new(Expr::Const(1.0)),
                Box::new(Expr::Mul(Box::new(Expr::Const(*c2)), Box::new(s2))),
            )));
            Expr::Add(
                Box::new(Expr::Mul(Box::new(Expr::Const(*c1)), Box::new(root))),
                Box::new(Expr::Mul(Box::new(Expr::Const(*c3)), Box::new(s.clone()))),
            )
        }
    }
}

fn minkowski_norm(data: &LieAlgebraData) -> Expr {
    let n = data.n();
    let y = |i: usize| Expr::Var(Var::Y(i));
    let mut a2 = Expr::Const(0.0);
    let mut beta = Expr::Const(0.0);
    for i in 0..n {
        for j in 0..n {
            let m = data.inner_product[i * n + j];
            if m != 0.0 {
                let t = Expr::Mul(
                    Box::new(Expr::Const(m)),
                    Box::new(Expr::Mul(Box::new(y(i)), Box::new(y(j)))),
                );
                a2 = Expr::Add(Box::new(a2), Box::new(t));
            }
        }
        let ui = data.inner(&data.u, &data.embed_unit(i));
        if ui != 0.0 {
            let t = Expr::Mul(Box::new(Expr::Const(ui)), Box::new(y(i)));
            beta = Expr::Add(Box::new(beta), Box::new(t));
        }
    }
    let alpha = Expr::Sqrt(Box::new(a2));
    let s = Expr::Div(Box::new(beta), Box::new(alpha.clone()));
    Expr::Mul(Box::new(alpha), Box::new(phi_expr(&data.phi, s)))
}

impl LieAlgebraData {
    fn embed_unit(&self, i: usize) -> Vec<f64> {
        let mut v = vec![0.0; self.n()];
        v[i] = 1.0;
        v
    }
}

/// The left-invariant metric in exponential coordinates on the ball of the
/// given radius. Abelian data give a Minkowski model.
pub fn invariant_metric_field(data: &LieAlgebraData, radius: f64, name: &str) -> Result<MetricModel> {
    if radius > CHART_RADIUS_LIMIT {
        return Err(Error::ChartTooLarge {
            requested: radius,
            limit: CHART_RADIUS_LIMIT,
        });
    }
    let b = data.b_squared().sqrt();
    data.phi.check_regular_on(b)?;
    let n = data.n();
    if data.is_abelian() {
        return MetricModel::new(
            name,
            n,
            MetricVariant::Minkowski {
                norm: minkowski_norm(data),
            },
            Domain::Ball { radius },
        );
    }
    MetricModel::new(
        name,
        n,
        MetricVariant::Homogeneous { data: data.clone() },
        Domain::Ball { radius },
    )
}

/// Catalog data: Heisenberg, Randers profile, `u = e1 / 2`, `kappa = 1`.
pub fn heisenberg_randers_data() -> Result<LieAlgebraData> {
    LieAlgebraData::heisenberg(vec![0.5, 0.0, 0.0], 1.0, PhiProfile::randers(1.0))
}

pub(crate) fn heisenberg_randers_model() -> Result<MetricModel> {
    invariant_metric_field(&heisenberg_randers_data()?, CHART_RADIUS_LIMIT, "HEIS_RANDERS")
}

#[cfg(test)]
mod tests {
    use super::*;

    fn heis_literal() -> LieAlgebraData {
        LieAlgebraData::heisenberg(vec![1.0, 0.0, 0.0], 1.0, PhiProfile::randers(1.0)).unwrap()
    }

    #[test]
    fn heisenberg_bracket() {
        let d = heis_literal();
        assert_eq!(bracket_m(&d, &[1.0, 0.0, 0.0], &[0.0, 1.0, 0.0]), vec![0.0, 0.0, 1.0]);
        let v = [0.3, -0.2, 0.7];
        assert!(bracket_m(&d, &v, &v).iter().all(|c| *c == 0.0));
        assert_eq!(d.jacobi_residual(), 0.0);
    }

    #[test]
    fn rejects_invalid_data() {
        let phi = PhiProfile::randers(1.0);
        // so(3)-like constants with a wrong sign break Jacobi
        let bad = LieAlgebraData::new(
            3,
            &[(0, 1, 2, 1.0), (1, 2, 0, 1.0), (2, 0, 1, 1.0), (0, 2, 0, 1.0)],
            vec![],
            vec![0, 1, 2],
            identity(3),
            vec![0.0; 3],
            1.0,
            phi.clone(),
        );
        assert!(matches!(bad, Err(Error::InvalidLieAlgebra(_))));
        let not_pd = LieAlgebraData::new(
            2,
            &[],
            vec![],
            vec![0, 1],
            vec![1.0, 0.0, 0.0, -1.0],
            vec![0.0; 2],
            1.0,
            phi,
        );
        assert!(matches!(not_pd, Err(Error::InvalidLieAlgebra(_))));
    }

    #[test]
    fn hand_values_on_literal_data() {
        let d = heis_literal();
        let s = deng_wang_s(&d, &[0.0, 1.0, 1.0]).unwrap();
        assert!((s + 2f64.sqrt()).abs() < 1e-12);
        assert_eq!(deng_wang_s(&d, &[0.0, 1.0, 0.0]).unwrap(), 0.0);
    }

    #[test]
    fn vanishes_along_u() {
        let d = heisenberg_randers_data().unwrap();
        assert_eq!(deng_wang_s(&d, &d.u).unwrap(), 0.0);
        let mu: Vec<f64> = d.u.iter().map(|v| -v).collect();
        assert_eq!(deng_wang_s(&d, &mu).unwrap(), 0.0);
    }

    #[test]
    fn chart_is_exact_at_origin() {
        let d = heisenberg_randers_data().unwrap();
        let (a, b) = d.chart_alpha_beta(&[0.0, 0.0, 0.0]);
        assert_eq!(a, identity(3));
        assert_eq!(b, vec![0.5, 0.0, 0.0]);
    }

    #[test]
    fn chart_radius_limit() {
        let d = heisenberg_randers_data().unwrap();
        let e = invariant_metric_field(&d, 0.3, "H");
        assert!(matches!(e, Err(Error::ChartTooLarge { .. })));
    }

    #[test]
    fn abelian_gives_minkowski() {
        let d = LieAlgebraData::abelian(2, vec![0.3, 0.0], 1.0, PhiProfile::randers(1.0)).unwrap();
        let m = invariant_metric_field(&d, 0.2, "A").unwrap();
        assert!(matches!(m.variant, MetricVariant::Minkowski { .. }));
        let f = m.f(&[0.1, 0.0], &[1.0, 0.0]).unwrap();
        assert!((f - 1.3).abs() < 1e-15);
        let r = isotropic_s_probe(&d, 50, 1).unwrap();
        assert_eq!(r.c, 0.0);
        assert!(r.fit_c.abs() < 1e-14 && r.fit_residual < 1e-14);
    }
}

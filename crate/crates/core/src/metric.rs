//! Finsler metric models, the built-in catalog and convexity validation.

use std::fmt;

use nalgebra::{DMatrix, SymmetricEigen};

use crate::error::{Error, Result};
use crate::expr::Expr;
use crate::field::{jet_eval, ScalarField};
use crate::homogeneous::LieAlgebraData;
use crate::jet::{Jet, JetShape, JetSpace, MultiIndex, Scalar};
use crate::sampling::{cube_to_ball, cube_to_sphere, ShiftedHalton};

/// A chart point with a nonzero direction.
#[derive(Debug, Clone, PartialEq)]
pub struct TangentPoint {
    pub x: Vec<f64>,
    pub y: Vec<f64>,
}

impl TangentPoint {
    pub fn new(x: Vec<f64>, y: Vec<f64>) -> Result<Self> {
        if x.len() != y.len() {
            return Err(Error::Dimension {
                expected: x.len(),
                actual: y.len(),
            });
        }
        if !(2..=4).contains(&x.len()) {
            return Err(Error::InvalidArgument(format!(
                "dimension {} outside 2..=4",
                x.len()
            )));
        }
        let ny = y.iter().map(|v| v * v).sum::<f64>().sqrt();
        if ny <= 1e-12 || !ny.is_finite() {
            return Err(Error::InvalidArgument("direction y must be nonzero".into()));
        }
        Ok(Self { x, y })
    }

    pub fn n(&self) -> usize {
        self.x.len()
    }

    /// Same base point, direction scaled by `k`.
    pub fn scaled(&self, k: f64) -> Self {
        Self {
            x: self.x.clone(),
            y: self.y.iter().map(|v| v * k).collect(),
        }
    }
}

impl fmt::Display for TangentPoint {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "x={:?} y={:?}", self.x, self.y)
    }
}

/// Chart domain of a metric.
#[derive(Debug, Clone, PartialEq)]
pub enum Domain {
    Box { lo: Vec<f64>, hi: Vec<f64> },
    Ball { radius: f64 },
}

impl Domain {
    pub fn unit_box(n: usize) -> Self {
        Self::cube(n, 0.9)
    }

    pub fn cube(n: usize, half: f64) -> Self {
        Domain::Box {
            lo: vec![-half; n],
            hi: vec![half; n],
        }
    }

    pub fn contains(&self, x: &[f64]) -> bool {
        match self {
            Domain::Box { lo, hi } => x
                .iter()
                .zip(lo.iter().zip(hi))
                .all(|(v, (l, h))| *l <= *v && *v <= *h),
            Domain::Ball { radius } => x.iter().map(|v| v * v).sum::<f64>().sqrt() <= *radius,
        }
    }

    /// Image of a unit-cube point.
    pub fn map_unit(&self, u: &[f64]) -> Vec<f64> {
        match self {
            Domain::Box { lo, hi } => u
                .iter()
                .zip(lo.iter().zip(hi))
                .map(|(t, (l, h))| l + t * (h - l))
                .collect(),
            Domain::Ball { radius } => cube_to_ball(u, *radius),
        }
    }

    /// Largest distance of a domain point from the origin.
    pub fn extent(&self) -> f64 {
        match self {
            Domain::Box { lo, hi } => lo
                .iter()
                .zip(hi)
                .map(|(l, h)| l.abs().max(h.abs()).powi(2))
                .sum::<f64>()
                .sqrt(),
            Domain::Ball { radius } => *radius,
        }
    }
}

/// Shape of the profile `phi` of an (alpha, beta)-metric.
#[derive(Debug, Clone, PartialEq)]
pub enum PhiKind {
    /// `1 + eps * s`
    Randers { eps: f64 },
    /// `sum c_k s^k`
    Polynomial { coeffs: Vec<f64> },
    /// `P(s) / Q(s)`
    Rational { num: Vec<f64>, den: Vec<f64> },
    /// `c1 sqrt(1 + c2 s^2) + c3 s`; a Randers metric in disguise.
    SqrtLinear { c1: f64, c2: f64, c3: f64 },
}

/// Profile `phi(s)` with its regularity radius `b0`.
#[derive(Debug, Clone, PartialEq)]
pub struct PhiProfile {
    pub kind: PhiKind,
    pub b0: f64,
}

fn horner<T: Scalar>(c: &[f64], s: &T) -> T {
    let mut acc = s.lift(*c.last().unwrap_or(&0.0));
    for &k in c.iter().rev().skip(1) {
        acc = acc * s.clone() + k;
    }
    acc
}

impl PhiProfile {
    pub fn randers(eps: f64) -> Self {
        Self {
            kind: PhiKind::Randers { eps },
            b0: if eps == 0.0 { f64::INFINITY } else { 1.0 / eps.abs() },
        }
    }

    pub fn polynomial(coeffs: Vec<f64>, b0: f64) -> Self {
        Self {
            kind: PhiKind::Polynomial { coeffs },
            b0,
        }
    }

    pub fn rational(num: Vec<f64>, den: Vec<f64>, b0: f64) -> Self {
        Self {
            kind: PhiKind::Rational { num, den },
            b0,
        }
    }

    pub fn sqrt_linear(c1: f64, c2: f64, c3: f64, b0: f64) -> Self {
        Self {
            kind: PhiKind::SqrtLinear { c1, c2, c3 },
            b0,
        }
    }

    /// `phi = 1`, the Riemannian profile.
    pub fn unit() -> Self {
        Self::polynomial(vec![1.0], f64::INFINITY)
    }

    pub fn eval<T: Scalar>(&self, s: &T) -> Result<T> {
        match &self.kind {
            PhiKind::Randers { eps } => Ok(s.clone() * *eps + 1.0),
            PhiKind::Polynomial { coeffs } => Ok(horner(coeffs, s)),
            PhiKind::Rational { num, den } => Ok(horner(num, s) * horner(den, s).try_recip()?),
            PhiKind::SqrtLinear { c1, c2, c3 } => {
                let root = (s.clone() * s.clone() * *c2 + 1.0).try_sqrt()?;
                Ok(root * *c1 + s.clone() * *c3)
            }
        }
    }

    /// `[phi(s), phi'(s), ..., phi^(k)(s)]`.
    pub fn derivatives(&self, s: f64, k: usize) -> Result<Vec<f64>> {
        let space = JetSpace::get(JetShape::new(0, 1, 0, k));
        let v = self.eval(&Jet::y_var(&space, 0, s))?;
        Ok((0..=k)
            .map(|d| v.partial(&MultiIndex::new(vec![], vec![d as u8])))
            .collect())
    }

    /// Regularity inequalities at `s` for `b = ||beta||_alpha`.
    pub fn check_regular(&self, s: f64, b: f64) -> Result<()> {
        let bad = Error::RegularityViolation { s, b0: self.b0 };
        if s.abs() >= self.b0 {
            return Err(bad);
        }
        let d = self.derivatives(s, 2).map_err(|_| bad.clone())?;
        let (p, p1, p2) = (d[0], d[1], d[2]);
        let ok = p > 0.0 && p - s * p1 > 0.0 && p - s * p1 + (b * b - s * s) * p2 > 0.0;
        if ok {
            Ok(())
        } else {
            Err(bad)
        }
    }

    /// Regularity over the whole interval `|s| <= b`, scanned on a grid.
    pub fn check_regular_on(&self, b: f64) -> Result<()> {
        if b >= self.b0 {
            return Err(Error::RegularityViolation { s: b, b0: self.b0 });
        }
        let m = 200;
        for k in 0..=m {
            let s = -b + 2.0 * b * k as f64 / m as f64;
            self.check_regular(s, b)?;
        }
        Ok(())
    }
}

/// The Riemannian part of an (alpha, beta)-type metric: entries `a_ij(x)`.
#[derive(Debug, Clone, PartialEq)]
pub struct AlphaData {
    pub n: usize,
    /// Row-major `n x n`.
    pub a: Vec<Expr>,
}

impl AlphaData {
    pub fn euclidean(n: usize) -> Self {
        let a = (0..n * n)
            .map(|k| Expr::constant(if k / n == k % n { 1.0 } else { 0.0 }))
            .collect();
        Self { n, a }
    }

    /// Conformal metric `factor(x) * delta_ij`.
    pub fn conformal(n: usize, factor: &str) -> Result<Self> {
        let f = Expr::parse(factor)?;
        let a = (0..n * n)
            .map(|k| {
                if k / n == k % n {
                    f.clone()
                } else {
                    Expr::constant(0.0)
                }
            })
            .collect();
        Self::new(n, a)
    }

    pub fn new(n: usize, a: Vec<Expr>) -> Result<Self> {
        if a.len() != n * n {
            return Err(Error::Dimension {
                expected: n * n,
                actual: a.len(),
            });
        }
        for e in &a {
            let u = e.uses();
            if u.y {
                return Err(Error::Expr(format!("a_ij may depend on x only: `{e}`")));
            }
            if u.max_index > n {
                return Err(Error::Expr(format!("`{e}` refers past dimension {n}")));
            }
        }
        Ok(Self { n, a })
    }

    pub fn parse(n: usize, rows: &[&str]) -> Result<Self> {
        let a = rows.iter().map(|s| Expr::parse(s)).collect::<Result<Vec<_>>>()?;
        Self::new(n, a)
    }

    pub fn matrix<T: Scalar>(&self, x: &[T]) -> Result<Vec<T>> {
        self.a.iter().map(|e| e.eval(x, &[])).collect()
    }

    pub fn is_constant(&self) -> bool {
        self.a.iter().all(|e| e.as_constant().is_some())
    }
}

fn parse_form(n: usize, b: &[&str]) -> Result<Vec<Expr>> {
    let out = b.iter().map(|s| Expr::parse(s)).collect::<Result<Vec<_>>>()?;
    check_form(n, &out)?;
    Ok(out)
}

fn check_form(n: usize, b: &[Expr]) -> Result<()> {
    if b.len() != n {
        return Err(Error::Dimension {
            expected: n,
            actual: b.len(),
        });
    }
    for e in b {
        let u = e.uses();
        if u.y || u.max_index > n {
            return Err(Error::Expr(format!("b_i must be a function of x1..x{n}: `{e}`")));
        }
    }
    Ok(())
}

/// The kind-specific data of a metric.
#[derive(Debug, Clone, PartialEq)]
pub enum MetricVariant {
    Riemannian {
        a: AlphaData,
    },
    /// `F = alpha + eps * beta`
    Randers {
        alpha: AlphaData,
        b: Vec<Expr>,
        eps: f64,
    },
    /// `F = alpha * phi(beta / alpha)`
    AlphaBeta {
        alpha: AlphaData,
        b: Vec<Expr>,
        phi: PhiProfile,
    },
    /// `F = norm(y)`
    Minkowski {
        norm: Expr,
    },
    /// `F = profile(r, u, v)` with `r = |x|`, `u = |y|`, `v = <x, y>`
    Spherical {
        profile: Expr,
    },
    /// Left-invariant (alpha, beta)-metric in an exponential chart.
    Homogeneous {
        data: LieAlgebraData,
    },
}

impl MetricVariant {
    pub fn kind(&self) -> &'static str {
        match self {
            MetricVariant::Riemannian { .. } => "riemannian",
            MetricVariant::Randers { .. } => "randers",
            MetricVariant::AlphaBeta { .. } => "alphabeta",
            MetricVariant::Minkowski { .. } => "minkowski",
            MetricVariant::Spherical { .. } => "spherical",
            MetricVariant::Homogeneous { .. } => "homogeneous",
        }
    }
}

/// Read-only view of an (alpha, beta) structure.
#[derive(Debug, Clone)]
pub enum AbView<'a> {
    Coords {
        alpha: &'a AlphaData,
        b: &'a [Expr],
        phi: PhiProfile,
    },
    Homogeneous(&'a LieAlgebraData),
}

impl AbView<'_> {
    pub fn phi(&self) -> PhiProfile {
        match self {
            AbView::Coords { phi, .. } => phi.clone(),
            AbView::Homogeneous(d) => d.phi.clone(),
        }
    }

    /// `a_ij(x)`, row-major.
    pub fn a<T: Scalar>(&self, x: &[T]) -> Result<Vec<T>> {
        match self {
            AbView::Coords { alpha, .. } => alpha.matrix(x),
            AbView::Homogeneous(d) => Ok(d.chart_alpha_beta(x).0),
        }
    }

    /// `b_i(x)`.
    pub fn b<T: Scalar>(&self, x: &[T]) -> Result<Vec<T>> {
        match self {
            AbView::Coords { b, .. } => b.iter().map(|e| e.eval(x, &[])).collect(),
            AbView::Homogeneous(d) => Ok(d.chart_alpha_beta(x).1),
        }
    }

    /// `alpha(x, y)` and `beta(x, y)`.
    pub fn alpha_beta<T: Scalar>(&self, x: &[T], y: &[T]) -> Result<(T, T)> {
        let (a, b) = match self {
            AbView::Homogeneous(d) => d.chart_alpha_beta(x),
            _ => (self.a(x)?, self.b(x)?),
        };
        let n = y.len();
        let mut a2 = y[0].lift(0.0);
        for i in 0..n {
            for j in 0..n {
                a2 = a2 + a[i * n + j].clone() * y[i].clone() * y[j].clone();
            }
        }
        let mut beta = y[0].lift(0.0);
        for i in 0..n {
            beta = beta + b[i].clone() * y[i].clone();
        }
        Ok((a2.try_sqrt()?, beta))
    }

    /// `b^2 = a^ij b_i b_j` at `x`.
    pub fn b_squared(&self, x: &[f64]) -> Result<f64> {
        let a = self.a(x)?;
        let b = self.b(x)?;
        let n = b.len();
        let m = DMatrix::from_row_slice(n, n, &a);
        let inv = m
            .try_inverse()
            .ok_or_else(|| Error::InvalidArgument("alpha is singular".into()))?;
        let bv = nalgebra::DVector::from_column_slice(&b);
        Ok((bv.transpose() * inv * bv)[(0, 0)])
    }
}

/// An evaluable Finsler metric with its chart.
#[derive(Debug, Clone, PartialEq)]
pub struct MetricModel {
    pub name: String,
    pub n: usize,
    pub variant: MetricVariant,
    pub domain: Domain,
}

/// Result of a strong-convexity scan.
#[derive(Debug, Clone, PartialEq)]
pub struct ConvexityReport {
    pub min_eigenvalue: f64,
    pub witness: TangentPoint,
    pub samples: usize,
}

impl MetricModel {
    pub fn new(name: &str, n: usize, variant: MetricVariant, domain: Domain) -> Result<Self> {
        if !(2..=4).contains(&n) {
            return Err(Error::InvalidArgument(format!("dimension {n} outside 2..=4")));
        }
        match &variant {
            MetricVariant::Riemannian { a } => {
                if a.n != n {
                    return Err(Error::Dimension {
                        expected: n,
                        actual: a.n,
                    });
                }
            }
            MetricVariant::Randers { alpha, b, .. } | MetricVariant::AlphaBeta { alpha, b, .. } => {
                if alpha.n != n {
                    return Err(Error::Dimension {
                        expected: n,
                        actual: alpha.n,
                    });
                }
                check_form(n, b)?;
            }
            MetricVariant::Minkowski { norm } => {
                let u = norm.uses();
                if u.x || u.max_index > n {
                    return Err(Error::Expr(format!(
                        "Minkowski norm must depend on y1..y{n} only"
                    )));
                }
            }
            MetricVariant::Spherical { profile } => {
                let u = profile.uses();
                if u.max_index > 0 {
                    return Err(Error::Expr(
                        "spherical profile may use r, r2, u, v only".into(),
                    ));
                }
            }
            MetricVariant::Homogeneous { data } => {
                if data.n() != n {
                    return Err(Error::Dimension {
                        expected: n,
                        actual: data.n(),
                    });
                }
            }
        }
        if let Domain::Box { lo, hi } = &domain {
            if lo.len() != n || hi.len() != n {
                return Err(Error::Dimension {
                    expected: n,
                    actual: lo.len().min(hi.len()),
                });
            }
        }
        Ok(Self {
            name: name.to_string(),
            n,
            variant,
            domain,
        })
    }

    /// The (alpha, beta) structure, if the metric has one.
    pub fn ab_view(&self) -> Option<AbView<'_>> {
        match &self.variant {
            MetricVariant::Randers { alpha, b, eps } => Some(AbView::Coords {
                alpha,
                b,
                phi: PhiProfile::randers(*eps),
            }),
            MetricVariant::AlphaBeta { alpha, b, phi } => Some(AbView::Coords {
                alpha,
                b,
                phi: phi.clone(),
            }),
            MetricVariant::Homogeneous { data } => Some(AbView::Homogeneous(data)),
            _ => None,
        }
    }

    pub fn is_randers(&self) -> bool {
        match &self.variant {
            MetricVariant::Randers { .. } => true,
            MetricVariant::AlphaBeta { phi, .. } => matches!(phi.kind, PhiKind::Randers { .. }),
            MetricVariant::Homogeneous { data } => matches!(data.phi.kind, PhiKind::Randers { .. }),
            _ => false,
        }
    }

    /// Metrics that are Riemannian by construction.
    pub fn is_riemannian_variant(&self) -> bool {
        matches!(self.variant, MetricVariant::Riemannian { .. })
    }

    /// `F(x, y)` over any scalar type, without chart or regularity checks.
    pub fn f<T: Scalar>(&self, x: &[T], y: &[T]) -> Result<T> {
        match &self.variant {
            MetricVariant::Riemannian { .. } => self.f2(x, y)?.try_sqrt(),
            MetricVariant::Randers { eps, .. } => {
                let (a, b) = self.ab_view().unwrap().alpha_beta(x, y)?;
                Ok(a + b * *eps)
            }
            MetricVariant::AlphaBeta { phi, .. } => {
                let (a, b) = self.ab_view().unwrap().alpha_beta(x, y)?;
                let s = b * a.clone().try_recip()?;
                Ok(a * phi.eval(&s)?)
            }
            MetricVariant::Homogeneous { data } => {
                let (a, b) = AbView::Homogeneous(data).alpha_beta(x, y)?;
                let s = b * a.clone().try_recip()?;
                Ok(a * data.phi.eval(&s)?)
            }
            MetricVariant::Minkowski { norm } => norm.eval(x, y),
            MetricVariant::Spherical { profile } => profile.eval(x, y),
        }
    }

    /// `F^2(x, y)`.
    pub fn f2<T: Scalar>(&self, x: &[T], y: &[T]) -> Result<T> {
        match &self.variant {
            MetricVariant::Riemannian { a } => {
                let m = a.matrix(x)?;
                let n = self.n;
                let mut acc = y[0].lift(0.0);
                for i in 0..n {
                    let mut row = y[0].lift(0.0);
                    for j in 0..n {
                        row = row + m[i * n + j].clone() * y[j].clone();
                    }
                    acc = acc + row * y[i].clone();
                }
                Ok(acc)
            }
            _ => Ok(self.f(x, y)?.square()),
        }
    }

    /// Chart and regularity checks for a tangent point.
    pub fn check_point(&self, at: &TangentPoint) -> Result<()> {
        if at.n() != self.n {
            return Err(Error::Dimension {
                expected: self.n,
                actual: at.n(),
            });
        }
        if !self.domain.contains(&at.x) {
            return Err(Error::OutsideChart {
                metric: self.name.clone(),
            });
        }
        if let Some(ab) = self.ab_view() {
            let (a, b) = ab.alpha_beta(&at.x, &at.y)?;
            let s = b / a;
            let phi = ab.phi();
            if s.abs() >= phi.b0 {
                return Err(Error::RegularityViolation { s, b0: phi.b0 });
            }
        }
        Ok(())
    }

    pub fn evaluate_f(&self, at: &TangentPoint) -> Result<f64> {
        self.check_point(at)?;
        let v = self.f(&at.x, &at.y)?;
        if !(v > 0.0) {
            return Err(Error::Domain { op: "F", value: v });
        }
        Ok(v)
    }

    /// `alpha` and `beta` (scaled by the Randers `eps`) at a point of an
    /// (alpha, beta)-metric.
    pub fn alpha_beta_values(&self, at: &TangentPoint) -> Option<Result<(f64, f64)>> {
        let ab = self.ab_view()?;
        Some(ab.alpha_beta(&at.x, &at.y).map(|(a, b)| match &self.variant {
            MetricVariant::Randers { eps, .. } => (a, b * eps),
            _ => (a, b),
        }))
    }

    /// `F` as a [`ScalarField`].
    pub fn f_field(&self) -> MetricField<'_> {
        MetricField {
            metric: self,
            squared: false,
        }
    }

    /// `F^2` as a [`ScalarField`].
    pub fn f2_field(&self) -> MetricField<'_> {
        MetricField {
            metric: self,
            squared: true,
        }
    }

    /// Fundamental tensor `g_ij = 1/2 d^2 F^2 / dy^i dy^j` (row-major).
    pub fn fundamental_tensor(&self, x: &[f64], y: &[f64]) -> Result<Vec<f64>> {
        let n = self.n;
        let j = jet_eval(&self.f2_field(), x, y, 0, 2)?;
        let mut g = vec![0.0; n * n];
        for a in 0..n {
            for b in 0..n {
                g[a * n + b] = 0.5 * j.partial(&MultiIndex::fiber(n, &[a, b]));
            }
        }
        Ok(g)
    }

    /// Seeded low-discrepancy tangent points: base points in the chart,
    /// Euclidean-unit directions.
    pub fn sample_points(&self, count: usize, seed: u64) -> Vec<TangentPoint> {
        let n = self.n;
        ShiftedHalton::new(2 * n, seed)
            .take(count)
            .map(|u| TangentPoint {
                x: self.domain.map_unit(&u[..n]),
                y: cube_to_sphere(&u[n..]),
            })
            .collect()
    }

    /// Smallest eigenvalue of `g` over seeded samples. For (alpha, beta)
    /// metrics the regularity inequalities are also scanned over
    /// `|s| <= b(x)` at every sampled base point.
    pub fn check_strong_convexity(&self, samples: usize, seed: u64) -> Result<ConvexityReport> {
        if samples == 0 {
            return Err(Error::InvalidArgument("samples must be at least 1".into()));
        }
        let mut min = f64::INFINITY;
        let mut witness = None;
        for p in self.sample_points(samples, seed) {
            let e = min_eigenvalue(&self.fundamental_tensor(&p.x, &p.y)?, self.n);
            if e < min || witness.is_none() {
                min = e;
                witness = Some(p.clone());
            }
            if let Some(w) = self.regularity_witness(&p.x)? {
                let e = self
                    .fundamental_tensor(&w.x, &w.y)
                    .map(|g| min_eigenvalue(&g, self.n))
                    .unwrap_or(f64::NAN);
                return Err(Error::NonConvex {
                    min_eigenvalue: e,
                    witness: w,
                });
            }
        }
        let witness = witness.unwrap();
        if !(min > 1e-9) {
            return Err(Error::NonConvex {
                min_eigenvalue: min,
                witness,
            });
        }
        Ok(ConvexityReport {
            min_eigenvalue: min,
            witness,
            samples,
        })
    }

    // A direction at x where the profile leaves its regular range.
    fn regularity_witness(&self, x: &[f64]) -> Result<Option<TangentPoint>> {
        let Some(ab) = self.ab_view() else {
            return Ok(None);
        };
        let n = self.n;
        let a = DMatrix::from_row_slice(n, n, &ab.a(x)?);
        let bl = nalgebra::DVector::from_column_slice(&ab.b(x)?);
        let mut phi = ab.phi();
        if let MetricVariant::Randers { eps, .. } = &self.variant {
            // fold eps into beta: phi(s) = 1 + s over s = eps * beta / alpha
            phi = PhiProfile::randers(1.0);
            return self.regularity_scan(&a, &(bl * *eps), &phi, x);
        }
        self.regularity_scan(&a, &bl, &phi, x)
    }

    fn regularity_scan(
        &self,
        a: &DMatrix<f64>,
        bl: &nalgebra::DVector<f64>,
        phi: &PhiProfile,
        x: &[f64],
    ) -> Result<Option<TangentPoint>> {
        let n = self.n;
        let Some(ainv) = a.clone().try_inverse() else {
            return Err(Error::InvalidArgument("alpha is singular".into()));
        };
        let bs = &ainv * bl;
        let b = bl.dot(&bs).max(0.0).sqrt();
        if b == 0.0 {
            return Ok(None);
        }
        // alpha-unit vector along b^# and an alpha-unit vector orthogonal to it
        let e1 = &bs / b;
        let mut e2 = None;
        for k in 0..n {
            let mut v = nalgebra::DVector::zeros(n);
            v[k] = 1.0;
            let proj = (v.transpose() * a * &e1)[(0, 0)];
            let w = v - &e1 * proj;
            let nw = (w.transpose() * a * &w)[(0, 0)];
            if nw > 1e-8 {
                e2 = Some(w / nw.sqrt());
                break;
            }
        }
        let e2 = e2.unwrap();
        let m = 400;
        for k in 0..=m {
            let s = -b + 2.0 * b * k as f64 / m as f64;
            let s = s * (1.0 - 1e-9);
            if phi.check_regular(s, b).is_err() {
                let c = s / b;
                let y = &e1 * c + &e2 * (1.0 - c * c).max(0.0).sqrt();
                return Ok(Some(TangentPoint {
                    x: x.to_vec(),
                    y: y.iter().copied().collect(),
                }));
            }
        }
        Ok(None)
    }
}

/// A metric with its base point fixed; evaluates `F` at plain directions.
#[derive(Debug, Clone)]
pub enum Frozen<'a, T> {
    Quad { a: Vec<T> },
    Ab { a: Vec<T>, b: Vec<T>, phi: PhiProfile, randers: Option<f64> },
    Generic { metric: &'a MetricModel, x: Vec<T> },
}

impl<T: Scalar> Frozen<'_, T> {
    pub fn f(&self, y: &[f64]) -> Result<T> {
        let quad = |a: &[T]| -> T {
            let n = y.len();
            let mut acc = a[0].lift(0.0);
            for i in 0..n {
                for j in 0..n {
                    let k = y[i] * y[j];
                    if k != 0.0 {
                        acc = acc + a[i * n + j].clone() * k;
                    }
                }
            }
            acc
        };
        match self {
            Frozen::Quad { a } => quad(a).try_sqrt(),
            Frozen::Ab { a, b, phi, randers } => {
                let alpha = quad(a).try_sqrt()?;
                let mut beta = a[0].lift(0.0);
                for (bi, &yi) in b.iter().zip(y) {
                    beta = beta + bi.clone() * yi;
                }
                match randers {
                    Some(eps) => Ok(alpha + beta * *eps),
                    None => {
                        let s = beta * alpha.clone().try_recip()?;
                        Ok(alpha * phi.eval(&s)?)
                    }
                }
            }
            Frozen::Generic { metric, x } => {
                let ys: Vec<T> = y.iter().map(|&v| x[0].lift(v)).collect();
                metric.f(x, &ys)
            }
        }
    }
}

impl MetricModel {
    /// Precomputes the x-dependent parts of `F` at `x`.
    pub fn freeze_x<T: Scalar>(&self, x: &[T]) -> Result<Frozen<'_, T>> {
        Ok(match &self.variant {
            MetricVariant::Riemannian { a } => Frozen::Quad { a: a.matrix(x)? },
            MetricVariant::Randers { eps, .. } => {
                let ab = self.ab_view().unwrap();
                Frozen::Ab {
                    a: ab.a(x)?,
                    b: ab.b(x)?,
                    phi: ab.phi(),
                    randers: Some(*eps),
                }
            }
            MetricVariant::AlphaBeta { .. } | MetricVariant::Homogeneous { .. } => {
                let ab = self.ab_view().unwrap();
                Frozen::Ab {
                    a: ab.a(x)?,
                    b: ab.b(x)?,
                    phi: ab.phi(),
                    randers: None,
                }
            }
            _ => Frozen::Generic {
                metric: self,
                x: x.to_vec(),
            },
        })
    }
}

pub(crate) fn min_eigenvalue(g: &[f64], n: usize) -> f64 {
    let m = DMatrix::from_row_slice(n, n, g);
    let e = SymmetricEigen::new(m);
    e.eigenvalues.iter().copied().fold(f64::INFINITY, f64::min)
}

/// `F` or `F^2` of a metric as a scalar field.
#[derive(Debug, Clone, Copy)]
pub struct MetricField<'a> {
    metric: &'a MetricModel,
    squared: bool,
}

impl ScalarField for MetricField<'_> {
    fn dim(&self) -> usize {
        self.metric.n
    }
    fn eval<T: Scalar>(&self, x: &[T], y: &[T]) -> Result<T> {
        if self.squared {
            self.metric.f2(x, y)
        } else {
            self.metric.f(x, y)
        }
    }
}

fn funk_alpha(n: usize) -> Result<AlphaData> {
    let mut rows = Vec::new();
    for i in 0..n {
        for j in 0..n {
            let delta = if i == j { "(1 - r2) + " } else { "" };
            rows.push(format!("({delta}x{}*x{}) / (1 - r2)^2", i + 1, j + 1));
        }
    }
    let refs: Vec<&str> = rows.iter().map(String::as_str).collect();
    AlphaData::parse(n, &refs)
}

fn funk(n: usize) -> Result<MetricModel> {
    let b: Vec<String> = (0..n).map(|i| format!("x{} / (1 - r2)", i + 1)).collect();
    let refs: Vec<&str> = b.iter().map(String::as_str).collect();
    MetricModel::new(
        &format!("FUNK_{n}"),
        n,
        MetricVariant::Randers {
            alpha: funk_alpha(n)?,
            b: parse_form(n, &refs)?,
            eps: 1.0,
        },
        Domain::Ball { radius: 0.8 },
    )
}

fn build_catalog() -> Result<Vec<MetricModel>> {
    let euclid = |n: usize| {
        MetricModel::new(
            &format!("EUCLID_{n}"),
            n,
            MetricVariant::Minkowski {
                norm: Expr::parse("u")?,
            },
            Domain::unit_box(n),
        )
    };
    let mut out = vec![euclid(2)?, euclid(3)?];
    out.push(MetricModel::new(
        "SPHERE_2",
        2,
        MetricVariant::Riemannian {
            a: AlphaData::conformal(2, "4 / (1 + r2)^2")?,
        },
        Domain::unit_box(2),
    )?);
    out.push(MetricModel::new(
        "POINCARE_2",
        2,
        MetricVariant::Riemannian {
            a: AlphaData::conformal(2, "4 / (1 - r2)^2")?,
        },
        Domain::Ball { radius: 0.8 },
    )?);
    out.push(funk(2)?);
    out.push(funk(3)?);
    out.push(MetricModel::new(
        "MINK_RAND",
        2,
        MetricVariant::Randers {
            alpha: AlphaData::euclidean(2),
            b: parse_form(2, &["1", "0"])?,
            eps: 0.3,
        },
        Domain::unit_box(2),
    )?);
    out.push(MetricModel::new(
        "RAND_PAR",
        3,
        MetricVariant::Randers {
            alpha: AlphaData::euclidean(3),
            b: parse_form(3, &["0.2", "0.1", "-0.3"])?,
            eps: 1.0,
        },
        Domain::unit_box(3),
    )?);
    out.push(MetricModel::new(
        "RAND_PROD_3",
        3,
        MetricVariant::Randers {
            alpha: AlphaData::parse(
                3,
                &[
                    "1",
                    "0",
                    "0",
                    "0",
                    "4 / (1 - x2^2 - x3^2)^2",
                    "0",
                    "0",
                    "0",
                    "4 / (1 - x2^2 - x3^2)^2",
                ],
            )?,
            b: parse_form(3, &["0.4", "0", "0"])?,
            eps: 1.0,
        },
        Domain::cube(3, 0.6),
    )?);
    out.push(MetricModel::new(
        "AB_QUAD",
        3,
        MetricVariant::AlphaBeta {
            alpha: AlphaData::euclidean(3),
            b: parse_form(3, &["0.3", "0", "0"])?,
            phi: PhiProfile::polynomial(vec![1.0, 0.0, 1.0], 1.0),
        },
        Domain::unit_box(3),
    )?);
    out.push(MetricModel::new(
        "AB_QUAD_SHEAR",
        3,
        MetricVariant::AlphaBeta {
            alpha: AlphaData::euclidean(3),
            b: parse_form(3, &["x2", "0", "0"])?,
            phi: PhiProfile::polynomial(vec![1.0, 0.0, 1.0], 1.0),
        },
        Domain::unit_box(3),
    )?);
    out.push(crate::homogeneous::heisenberg_randers_model()?);
    out.push(MetricModel::new(
        "FUNK_SPH_2",
        2,
        MetricVariant::Spherical {
            profile: Expr::parse("(sqrt((1 - r2)*u^2 + v^2) + v) / (1 - r2)")?,
        },
        Domain::Ball { radius: 0.8 },
    )?);
    Ok(out)
}

/// The built-in named metrics.
pub fn catalog() -> Vec<MetricModel> {
    build_catalog().expect("catalog entries are well-formed")
}

/// Looks up a catalog entry by name.
pub fn lookup(name: &str) -> Option<MetricModel> {
    catalog().into_iter().find(|m| m.name == name)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn tp(x: &[f64], y: &[f64]) -> TangentPoint {
        TangentPoint::new(x.to_vec(), y.to_vec()).unwrap()
    }

    #[test]
    fn simple_values() {
        let e = lookup("EUCLID_2").unwrap();
        assert!(matches!(e.variant, MetricVariant::Minkowski { .. }));
        assert_relative_eq!(e.evaluate_f(&tp(&[0.0, 0.0], &[3.0, 4.0])).unwrap(), 5.0);
        let m = lookup("MINK_RAND").unwrap();
        assert_relative_eq!(
            m.evaluate_f(&tp(&[0.0, 0.0], &[1.0, 0.0])).unwrap(),
            1.3,
            max_relative = 1e-15
        );
        let f = lookup("FUNK_2").unwrap();
        assert!(matches!(f.variant, MetricVariant::Randers { .. }));
        assert_relative_eq!(f.evaluate_f(&tp(&[0.0, 0.0], &[1.0, 0.0])).unwrap(), 1.0);
    }

    #[test]
    fn funk_split_matches_closed_form() {
        let f = lookup("FUNK_2").unwrap();
        let s = lookup("FUNK_SPH_2").unwrap();
        for p in f.sample_points(20, 3) {
            let x = &p.x;
            let y = &p.y;
            let r2: f64 = x.iter().map(|v| v * v).sum();
            let xy: f64 = x.iter().zip(y).map(|(a, b)| a * b).sum();
            let yy: f64 = y.iter().map(|v| v * v).sum();
            let closed = (((1.0 - r2) * yy + xy * xy).sqrt() + xy) / (1.0 - r2);
            assert_relative_eq!(f.evaluate_f(&p).unwrap(), closed, max_relative = 1e-13);
            assert_relative_eq!(s.evaluate_f(&p).unwrap(), closed, max_relative = 1e-13);
        }
    }

    #[test]
    fn outside_chart_is_rejected() {
        let f = lookup("FUNK_2").unwrap();
        let e = f.evaluate_f(&tp(&[0.85, 0.0], &[1.0, 0.0]));
        assert!(matches!(e, Err(Error::OutsideChart { .. })));
    }

    #[test]
    fn regularity_violation_reported() {
        let m = MetricModel::new(
            "AB",
            2,
            MetricVariant::AlphaBeta {
                alpha: AlphaData::euclidean(2),
                b: parse_form(2, &["2", "0"]).unwrap(),
                phi: PhiProfile::polynomial(vec![1.0, 0.0, 1.0], 1.0),
            },
            Domain::unit_box(2),
        )
        .unwrap();
        let e = m.evaluate_f(&tp(&[0.0, 0.0], &[1.0, 0.0]));
        assert!(matches!(e, Err(Error::RegularityViolation { .. })));
    }

    #[test]
    fn convexity_of_catalog() {
        for m in catalog() {
            let r = m.check_strong_convexity(30, 1).unwrap();
            assert!(r.min_eigenvalue > 1e-9, "{}", m.name);
        }
        let e = lookup("EUCLID_3").unwrap().check_strong_convexity(5, 1).unwrap();
        assert_relative_eq!(e.min_eigenvalue, 1.0, max_relative = 1e-12);
    }

    #[test]
    fn over_strong_drift_is_non_convex() {
        let m = MetricModel::new(
            "BAD",
            2,
            MetricVariant::Randers {
                alpha: AlphaData::euclidean(2),
                b: parse_form(2, &["1", "0"]).unwrap(),
                eps: 1.5,
            },
            Domain::unit_box(2),
        )
        .unwrap();
        let e = m.check_strong_convexity(1, 1);
        assert!(matches!(e, Err(Error::NonConvex { .. })), "{e:?}");
    }

    #[test]
    fn phi_derivatives() {
        let p = PhiProfile::rational(vec![1.0, 1.0], vec![1.0, 0.0, 1.0], 0.5);
        let d = p.derivatives(0.2, 2).unwrap();
        // (1+s)/(1+s^2)
        let s: f64 = 0.2;
        let q = 1.0 + s * s;
        assert_relative_eq!(d[0], (1.0 + s) / q);
        assert_relative_eq!(d[1], (q - (1.0 + s) * 2.0 * s) / (q * q), max_relative = 1e-13);
    }
}

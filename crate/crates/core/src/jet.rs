//! Truncated multivariate Taylor arithmetic.
//!
//! A [`Jet`] holds the Taylor coefficients of a scalar function at a base
//! point of `R^(nx+ny)`. The variables are split into two groups, base
//! coordinates `x` and fiber coordinates `y`, and the expansion is truncated
//! separately in each group: monomials with total `x`-degree above `ox` or
//! total `y`-degree above `oy` are dropped. This matches how Finsler
//! quantities consume derivatives: a handful of base derivatives, many fiber
//! derivatives.
//!
//! Products are coefficient-wise convolutions through a precomputed table.
//! Univariate primitives (`1/u`, `sqrt`, `ln`, `exp`, real powers) are applied
//! by composing the nilpotent part `u - u(0)` with the primitive's Taylor
//! series, whose coefficients come from the usual recurrences.

use std::collections::HashMap;
use std::fmt;
use std::ops::{Add, AddAssign, Div, Mul, Neg, Sub, SubAssign};
use std::sync::{Arc, Mutex, OnceLock};

use crate::error::{Error, Result};

/// Upper bound on `nx + ny`.
pub const MAX_VARS: usize = 8;

type Exps = [u8; MAX_VARS];

/// Truncation shape of a jet space.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct JetShape {
    pub nx: usize,
    pub ny: usize,
    pub max_x: usize,
    pub max_y: usize,
}

impl JetShape {
    pub fn new(nx: usize, ny: usize, max_x: usize, max_y: usize) -> Self {
        assert!(nx + ny <= MAX_VARS, "at most {MAX_VARS} jet variables");
        Self {
            nx,
            ny,
            max_x,
            max_y,
        }
    }
}

/// Derivative orders of a mixed partial, split into base and fiber parts.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct MultiIndex {
    pub x: Vec<u8>,
    pub y: Vec<u8>,
}

impl MultiIndex {
    pub fn new(x: Vec<u8>, y: Vec<u8>) -> Self {
        Self { x, y }
    }

    pub fn zero(n: usize) -> Self {
        Self {
            x: vec![0; n],
            y: vec![0; n],
        }
    }

    /// Pure fiber derivative `d/dy^i d/dy^j ...`.
    pub fn fiber(n: usize, indices: &[usize]) -> Self {
        let mut m = Self::zero(n);
        for &i in indices {
            m.y[i] += 1;
        }
        m
    }

    pub fn x_order(&self) -> usize {
        self.x.iter().map(|&k| k as usize).sum()
    }

    pub fn y_order(&self) -> usize {
        self.y.iter().map(|&k| k as usize).sum()
    }

    pub fn order(&self) -> usize {
        self.x_order() + self.y_order()
    }

    /// `alpha!` of the multi-index.
    pub fn factorial(&self) -> f64 {
        self.x
            .iter()
            .chain(self.y.iter())
            .map(|&k| factorial(k as usize))
            .product()
    }
}

impl fmt::Display for MultiIndex {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "x{:?} y{:?}", self.x, self.y)
    }
}

pub(crate) fn factorial(k: usize) -> f64 {
    (1..=k).map(|i| i as f64).product()
}

/// Monomial basis and product tables for one [`JetShape`].
pub struct JetSpace {
    shape: JetShape,
    exps: Vec<Exps>,
    xdeg: Vec<u8>,
    ydeg: Vec<u8>,
    lookup: HashMap<Exps, usize>,
    // products grouped by the left factor: prod_start[a]..prod_start[a+1]
    prod_start: Vec<u32>,
    prod_pairs: Vec<(u32, u32)>,
    // shift[v][i] = index of exps[i] + e_v, if it is in the basis
    shift: Vec<Vec<Option<u32>>>,
}

impl fmt::Debug for JetSpace {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("JetSpace")
            .field("shape", &self.shape)
            .field("len", &self.exps.len())
            .finish()
    }
}

fn monomials(nvars: usize, max_deg: usize) -> Vec<Vec<u8>> {
    // graded order: all monomials of degree 0, then 1, ...
    let mut out = Vec::new();
    for deg in 0..=max_deg {
        let mut cur = vec![0u8; nvars];
        fill(&mut out, &mut cur, 0, deg);
    }
    out
}

fn fill(out: &mut Vec<Vec<u8>>, cur: &mut [u8], pos: usize, left: usize) {
    if pos == cur.len() {
        if left == 0 {
            out.push(cur.to_vec());
        }
        return;
    }
    if pos + 1 == cur.len() {
        cur[pos] = left as u8;
        out.push(cur.to_vec());
        cur[pos] = 0;
        return;
    }
    for k in (0..=left).rev() {
        cur[pos] = k as u8;
        fill(out, cur, pos + 1, left - k);
    }
    cur[pos] = 0;
}

impl JetSpace {
    fn build(shape: JetShape) -> Self {
        let JetShape {
            nx,
            ny,
            max_x,
            max_y,
        } = shape;
        let xm = monomials(nx, max_x);
        let ym = monomials(ny, max_y);
        let mut exps = Vec::with_capacity(xm.len() * ym.len());
        for a in &xm {
            for b in &ym {
                let mut e = [0u8; MAX_VARS];
                e[..nx].copy_from_slice(a);
                e[nx..nx + ny].copy_from_slice(b);
                exps.push(e);
            }
        }
        // order by total degree so that the constant term is first
        exps.sort_by_key(|e| e.iter().map(|&k| k as usize).sum::<usize>());
        let xdeg: Vec<u8> = exps.iter().map(|e| e[..nx].iter().sum()).collect();
        let ydeg: Vec<u8> = exps
            .iter()
            .map(|e| e[nx..nx + ny].iter().sum())
            .collect();
        let lookup: HashMap<Exps, usize> =
            exps.iter().enumerate().map(|(i, e)| (*e, i)).collect();

        let mut prod_start = Vec::with_capacity(exps.len() + 1);
        let mut prod_pairs = Vec::new();
        for (ia, ea) in exps.iter().enumerate() {
            prod_start.push(prod_pairs.len() as u32);
            for (ib, eb) in exps.iter().enumerate() {
                if (xdeg[ia] + xdeg[ib]) as usize > max_x || (ydeg[ia] + ydeg[ib]) as usize > max_y
                {
                    continue;
                }
                let mut ec = [0u8; MAX_VARS];
                for v in 0..nx + ny {
                    ec[v] = ea[v] + eb[v];
                }
                let ic = lookup[&ec];
                prod_pairs.push((ib as u32, ic as u32));
            }
        }
        prod_start.push(prod_pairs.len() as u32);

        let shift = (0..nx + ny)
            .map(|v| {
                exps.iter()
                    .map(|e| {
                        let mut s = *e;
                        s[v] += 1;
                        lookup.get(&s).map(|&i| i as u32)
                    })
                    .collect()
            })
            .collect();
        Self {
            shape,
            exps,
            xdeg,
            ydeg,
            lookup,
            prod_start,
            prod_pairs,
            shift,
        }
    }

    /// Shared space for `shape`; tables are built once per process.
    pub fn get(shape: JetShape) -> Arc<JetSpace> {
        static CACHE: OnceLock<Mutex<HashMap<JetShape, Arc<JetSpace>>>> = OnceLock::new();
        let cache = CACHE.get_or_init(|| Mutex::new(HashMap::new()));
        if let Some(s) = cache.lock().unwrap().get(&shape) {
            return s.clone();
        }
        let built = Arc::new(JetSpace::build(shape));
        cache
            .lock()
            .unwrap()
            .entry(shape)
            .or_insert(built)
            .clone()
    }

    pub fn shape(&self) -> JetShape {
        self.shape
    }

    pub fn len(&self) -> usize {
        self.exps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.exps.is_empty()
    }

    fn index_of(&self, idx: &MultiIndex) -> Option<usize> {
        let JetShape { nx, ny, .. } = self.shape;
        if idx.x.len() != nx || idx.y.len() != ny {
            return None;
        }
        let mut e = [0u8; MAX_VARS];
        e[..nx].copy_from_slice(&idx.x);
        e[nx..nx + ny].copy_from_slice(&idx.y);
        self.lookup.get(&e).copied()
    }
}

/// A truncated Taylor expansion.
///
/// `ox`/`oy` are the orders up to which the coefficients are valid; they drop
/// by one in the respective group on every differentiation. Coefficients
/// above the valid orders are kept at zero.
#[derive(Clone)]
pub struct Jet {
    space: Arc<JetSpace>,
    ox: u8,
    oy: u8,
    c: Vec<f64>,
}

impl fmt::Debug for Jet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "Jet(value={}, orders=({}, {}))",
            self.value(),
            self.ox,
            self.oy
        )
    }
}

impl Jet {
    pub fn constant(space: &Arc<JetSpace>, v: f64) -> Self {
        let mut c = vec![0.0; space.len()];
        c[0] = v;
        let s = space.shape;
        Self {
            space: space.clone(),
            ox: s.max_x as u8,
            oy: s.max_y as u8,
            c,
        }
    }

    /// Base coordinate `x^i` expanded at `x0`.
    pub fn x_var(space: &Arc<JetSpace>, i: usize, x0: f64) -> Self {
        assert!(i < space.shape.nx);
        Self::var(space, i, x0)
    }

    /// Fiber coordinate `y^i` expanded at `y0`.
    pub fn y_var(space: &Arc<JetSpace>, i: usize, y0: f64) -> Self {
        assert!(i < space.shape.ny);
        Self::var(space, space.shape.nx + i, y0)
    }

    fn var(space: &Arc<JetSpace>, v: usize, v0: f64) -> Self {
        let mut j = Self::constant(space, v0);
        if let Some(k) = space.shift[v][0] {
            j.c[k as usize] = 1.0;
        }
        j
    }

    pub fn space(&self) -> &Arc<JetSpace> {
        &self.space
    }

    pub fn orders(&self) -> (usize, usize) {
        (self.ox as usize, self.oy as usize)
    }

    pub fn value(&self) -> f64 {
        self.c[0]
    }

    pub fn coefficients(&self) -> &[f64] {
        &self.c
    }

    /// Taylor coefficient at `idx`; zero outside the valid orders.
    pub fn coefficient(&self, idx: &MultiIndex) -> f64 {
        if idx.x_order() > self.ox as usize || idx.y_order() > self.oy as usize {
            return 0.0;
        }
        self.space.index_of(idx).map_or(0.0, |i| self.c[i])
    }

    /// The true mixed partial derivative: `idx! * coefficient(idx)`.
    pub fn partial(&self, idx: &MultiIndex) -> f64 {
        self.coefficient(idx) * idx.factorial()
    }

    pub fn is_finite(&self) -> bool {
        self.c.iter().all(|v| v.is_finite())
    }

    fn truncate_to(&mut self, ox: u8, oy: u8) {
        self.ox = ox;
        self.oy = oy;
        let s = &self.space;
        for (i, v) in self.c.iter_mut().enumerate() {
            if s.xdeg[i] > ox || s.ydeg[i] > oy {
                *v = 0.0;
            }
        }
    }

    fn same_space(&self, other: &Jet) {
        debug_assert!(
            Arc::ptr_eq(&self.space, &other.space),
            "jets from different spaces"
        );
    }

    /// Partial derivative with respect to base coordinate `x^i`.
    pub fn dx(&self, i: usize) -> Jet {
        assert!(self.ox > 0, "x-derivative beyond truncation order");
        self.diff(i, self.ox - 1, self.oy)
    }

    /// Partial derivative with respect to fiber coordinate `y^i`.
    pub fn dy(&self, i: usize) -> Jet {
        assert!(self.oy > 0, "y-derivative beyond truncation order");
        self.diff(self.space.shape.nx + i, self.ox, self.oy - 1)
    }

    fn diff(&self, v: usize, ox: u8, oy: u8) -> Jet {
        let s = &self.space;
        let mut c = vec![0.0; s.len()];
        for (i, out) in c.iter_mut().enumerate() {
            if s.xdeg[i] > ox || s.ydeg[i] > oy {
                continue;
            }
            if let Some(k) = s.shift[v][i] {
                *out = (s.exps[i][v] as f64 + 1.0) * self.c[k as usize];
            }
        }
        Jet {
            space: s.clone(),
            ox,
            oy,
            c,
        }
    }

    /// Product into a fresh jet.
    pub fn mul_ref(&self, other: &Jet) -> Jet {
        self.same_space(other);
        let s = &self.space;
        let ox = self.ox.min(other.ox);
        let oy = self.oy.min(other.oy);
        let mut c = vec![0.0; s.len()];
        let b = &other.c;
        for (ia, &av) in self.c.iter().enumerate() {
            if av == 0.0 || s.xdeg[ia] > ox || s.ydeg[ia] > oy {
                continue;
            }
            let lo = s.prod_start[ia] as usize;
            let hi = s.prod_start[ia + 1] as usize;
            for &(ib, ic) in &s.prod_pairs[lo..hi] {
                let ic = ic as usize;
                if s.xdeg[ic] > ox || s.ydeg[ic] > oy {
                    continue;
                }
                c[ic] += av * b[ib as usize];
            }
        }
        Jet {
            space: s.clone(),
            ox,
            oy,
            c,
        }
    }

    fn zip(&self, other: &Jet, f: impl Fn(f64, f64) -> f64) -> Jet {
        self.same_space(other);
        let mut out = Jet {
            space: self.space.clone(),
            ox: self.ox.min(other.ox),
            oy: self.oy.min(other.oy),
            c: self.c.iter().zip(&other.c).map(|(&a, &b)| f(a, b)).collect(),
        };
        if out.ox != self.ox || out.oy != self.oy || out.ox != other.ox || out.oy != other.oy {
            out.truncate_to(out.ox, out.oy);
        }
        out
    }

    pub fn scale(&self, k: f64) -> Jet {
        let mut out = self.clone();
        out.c.iter_mut().for_each(|v| *v *= k);
        out
    }

    /// `f(u)` for a univariate `f` given its Taylor coefficients at `u(0)`.
    fn compose(&self, coeffs: &[f64]) -> Jet {
        let total = (self.ox + self.oy) as usize;
        let mut du = self.clone();
        du.c[0] = 0.0;
        // Horner in the nilpotent part
        let k_max = total.min(coeffs.len() - 1);
        let mut acc = Jet::constant(&self.space, coeffs[k_max]);
        acc.ox = self.ox;
        acc.oy = self.oy;
        for k in (0..k_max).rev() {
            acc = acc.mul_ref(&du);
            acc.c[0] += coeffs[k];
        }
        acc
    }

    fn total_order(&self) -> usize {
        (self.ox + self.oy) as usize
    }

    /// Real power `u^p` for `u(0) > 0`.
    pub fn powf(&self, p: f64) -> Result<Jet> {
        let u0 = self.value();
        if u0 <= 0.0 && self.total_order() > 0 || u0 < 0.0 {
            return Err(Error::Domain { op: "powf", value: u0 });
        }
        let n = self.total_order();
        let mut coeffs = Vec::with_capacity(n + 1);
        // binom(p, k) u0^(p-k)
        let mut binom = 1.0;
        for k in 0..=n {
            coeffs.push(binom * u0.powf(p - k as f64));
            binom *= (p - k as f64) / (k as f64 + 1.0);
        }
        Ok(self.compose(&coeffs))
    }
}

// ---------------------------------------------------------------------------
// Scalar abstraction shared by f64 and Jet
// ---------------------------------------------------------------------------

/// Number type the scalar fields are evaluated over.
///
/// Implemented by `f64` (plain evaluation, used by the finite-difference
/// engine) and by [`Jet`] (Taylor propagation).
pub trait Scalar:
    Clone
    + fmt::Debug
    + Add<Output = Self>
    + Sub<Output = Self>
    + Mul<Output = Self>
    + Div<Output = Self>
    + Neg<Output = Self>
    + Add<f64, Output = Self>
    + Sub<f64, Output = Self>
    + Mul<f64, Output = Self>
    + Div<f64, Output = Self>
{
    /// A constant of the same kind as `self`.
    fn lift(&self, v: f64) -> Self;
    fn value(&self) -> f64;
    fn try_sqrt(self) -> Result<Self>;
    fn try_ln(self) -> Result<Self>;
    fn exp(self) -> Self;
    fn try_recip(self) -> Result<Self>;

    fn powi(self, k: i32) -> Result<Self> {
        if k < 0 {
            return self.powi(-k)?.try_recip();
        }
        let mut acc = self.lift(1.0);
        let mut base = self;
        let mut e = k as u32;
        while e > 0 {
            if e & 1 == 1 {
                acc = acc * base.clone();
            }
            e >>= 1;
            if e > 0 {
                base = base.clone() * base;
            }
        }
        Ok(acc)
    }

    fn square(self) -> Self {
        self.clone() * self
    }
}

impl Scalar for f64 {
    fn lift(&self, v: f64) -> Self {
        v
    }
    fn value(&self) -> f64 {
        *self
    }
    fn try_sqrt(self) -> Result<Self> {
        if self < 0.0 {
            return Err(Error::Domain {
                op: "sqrt",
                value: self,
            });
        }
        Ok(self.sqrt())
    }
    fn try_ln(self) -> Result<Self> {
        if self <= 0.0 {
            return Err(Error::Domain { op: "ln", value: self });
        }
        Ok(self.ln())
    }
    fn exp(self) -> Self {
        f64::exp(self)
    }
    fn try_recip(self) -> Result<Self> {
        if self == 0.0 {
            return Err(Error::Domain {
                op: "recip",
                value: self,
            });
        }
        Ok(1.0 / self)
    }
}

impl Scalar for Jet {
    fn lift(&self, v: f64) -> Self {
        Jet::constant(&self.space, v)
    }
    fn value(&self) -> f64 {
        self.c[0]
    }
    fn try_sqrt(self) -> Result<Self> {
        let u0 = self.value();
        if u0 < 0.0 || (u0 == 0.0 && self.total_order() > 0) {
            return Err(Error::Domain { op: "sqrt", value: u0 });
        }
        self.powf(0.5)
    }
    fn try_ln(self) -> Result<Self> {
        let u0 = self.value();
        if u0 <= 0.0 {
            return Err(Error::Domain { op: "ln", value: u0 });
        }
        let n = self.total_order();
        let mut coeffs = vec![u0.ln()];
        for k in 1..=n {
            let sign = if k % 2 == 1 { 1.0 } else { -1.0 };
            coeffs.push(sign / (k as f64 * u0.powi(k as i32)));
        }
        Ok(self.compose(&coeffs))
    }
    fn exp(self) -> Self {
        let e0 = self.value().exp();
        let n = self.total_order();
        let coeffs: Vec<f64> = (0..=n).map(|k| e0 / factorial(k)).collect();
        self.compose(&coeffs)
    }
    fn try_recip(self) -> Result<Self> {
        let u0 = self.value();
        if u0 == 0.0 {
            return Err(Error::Domain {
                op: "recip",
                value: u0,
            });
        }
        let n = self.total_order();
        let mut coeffs = Vec::with_capacity(n + 1);
        let mut ck = 1.0 / u0;
        for _ in 0..=n {
            coeffs.push(ck);
            ck *= -1.0 / u0;
        }
        Ok(self.compose(&coeffs))
    }
}

// ---------------------------------------------------------------------------
// operators
// ---------------------------------------------------------------------------

impl Add for Jet {
    type Output = Jet;
    fn add(self, rhs: Jet) -> Jet {
        self.zip(&rhs, |a, b| a + b)
    }
}

impl<'a> Add<&'a Jet> for &'a Jet {
    type Output = Jet;
    fn add(self, rhs: &Jet) -> Jet {
        self.zip(rhs, |a, b| a + b)
    }
}

impl Sub for Jet {
    type Output = Jet;
    fn sub(self, rhs: Jet) -> Jet {
        self.zip(&rhs, |a, b| a - b)
    }
}

impl<'a> Sub<&'a Jet> for &'a Jet {
    type Output = Jet;
    fn sub(self, rhs: &Jet) -> Jet {
        self.zip(rhs, |a, b| a - b)
    }
}

impl Mul for Jet {
    type Output = Jet;
    fn mul(self, rhs: Jet) -> Jet {
        self.mul_ref(&rhs)
    }
}

impl<'a> Mul<&'a Jet> for &'a Jet {
    type Output = Jet;
    fn mul(self, rhs: &Jet) -> Jet {
        self.mul_ref(rhs)
    }
}

impl Div for Jet {
    type Output = Jet;
    fn div(self, rhs: Jet) -> Jet {
        match rhs.try_recip() {
            Ok(r) => self.mul_ref(&r),
            Err(_) => self.scale(f64::NAN),
        }
    }
}

impl Neg for Jet {
    type Output = Jet;
    fn neg(self) -> Jet {
        self.scale(-1.0)
    }
}

impl Add<f64> for Jet {
    type Output = Jet;
    fn add(mut self, rhs: f64) -> Jet {
        self.c[0] += rhs;
        self
    }
}

impl Sub<f64> for Jet {
    type Output = Jet;
    fn sub(mut self, rhs: f64) -> Jet {
        self.c[0] -= rhs;
        self
    }
}

impl Mul<f64> for Jet {
    type Output = Jet;
    fn mul(self, rhs: f64) -> Jet {
        self.scale(rhs)
    }
}

impl Div<f64> for Jet {
    type Output = Jet;
    fn div(self, rhs: f64) -> Jet {
        self.scale(1.0 / rhs)
    }
}

impl AddAssign<&Jet> for Jet {
    fn add_assign(&mut self, rhs: &Jet) {
        self.same_space(rhs);
        for (a, b) in self.c.iter_mut().zip(&rhs.c) {
            *a += b;
        }
        if rhs.ox < self.ox || rhs.oy < self.oy {
            let (ox, oy) = (self.ox.min(rhs.ox), self.oy.min(rhs.oy));
            self.truncate_to(ox, oy);
        }
    }
}

impl SubAssign<&Jet> for Jet {
    fn sub_assign(&mut self, rhs: &Jet) {
        self.same_space(rhs);
        for (a, b) in self.c.iter_mut().zip(&rhs.c) {
            *a -= b;
        }
        if rhs.ox < self.ox || rhs.oy < self.oy {
            let (ox, oy) = (self.ox.min(rhs.ox), self.oy.min(rhs.oy));
            self.truncate_to(ox, oy);
        }
    }
}

impl Jet {
    /// `self += a * b`, fused to avoid a temporary.
    pub fn add_product(&mut self, a: &Jet, b: &Jet) {
        let p = a.mul_ref(b);
        *self += &p;
    }

    /// Re-expands an `x`-only jet (no fiber variables) into `target`, whose
    /// base coordinates must coincide. The result is exact in `y`.
    pub fn embed_base(&self, target: &Arc<JetSpace>) -> Jet {
        let src = self.space.shape;
        let dst = target.shape;
        assert_eq!(src.nx, dst.nx, "base dimensions differ");
        assert_eq!(src.ny, 0, "embed_base expects a base-only jet");
        let ox = self.ox.min(dst.max_x as u8);
        let mut c = vec![0.0; target.len()];
        for (i, e) in self.space.exps.iter().enumerate() {
            if self.space.xdeg[i] > ox {
                continue;
            }
            if let Some(&k) = target.lookup.get(e) {
                c[k] = self.c[i];
            }
        }
        Jet {
            space: target.clone(),
            ox,
            oy: dst.max_y as u8,
            c,
        }
    }
}

/// Inverse of a symmetric matrix of jets (row-major, `n x n`) by Gauss-Jordan
/// elimination without pivoting; intended for positive-definite input.
pub fn invert_matrix(m: &[Jet], n: usize) -> Result<Vec<Jet>> {
    assert_eq!(m.len(), n * n);
    let space = m[0].space.clone();
    let mut a = m.to_vec();
    let mut inv: Vec<Jet> = (0..n * n)
        .map(|k| Jet::constant(&space, if k / n == k % n { 1.0 } else { 0.0 }))
        .collect();
    for col in 0..n {
        let piv = a[col * n + col].clone().try_recip()?;
        for k in 0..n {
            a[col * n + k] = a[col * n + k].mul_ref(&piv);
            inv[col * n + k] = inv[col * n + k].mul_ref(&piv);
        }
        for row in 0..n {
            if row == col {
                continue;
            }
            let factor = a[row * n + col].clone();
            if factor.c.iter().all(|&v| v == 0.0) {
                continue;
            }
            for k in 0..n {
                let t = factor.mul_ref(&a[col * n + k]);
                a[row * n + k] -= &t;
                let t = factor.mul_ref(&inv[col * n + k]);
                inv[row * n + k] -= &t;
            }
        }
    }
    Ok(inv)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn space(nx: usize, ny: usize, mx: usize, my: usize) -> Arc<JetSpace> {
        JetSpace::get(JetShape::new(nx, ny, mx, my))
    }

    #[test]
    fn basis_sizes() {
        // C(n+d, d) monomials per group
        assert_eq!(space(2, 2, 2, 5).len(), 6 * 21);
        assert_eq!(space(3, 3, 2, 5).len(), 10 * 56);
        assert_eq!(space(0, 1, 0, 5).len(), 6);
    }

    #[test]
    fn polynomial_coefficients() {
        let s = space(1, 2, 2, 3);
        let x = Jet::x_var(&s, 0, 0.5);
        let y1 = Jet::y_var(&s, 0, 1.0);
        let y2 = Jet::y_var(&s, 1, 2.0);
        // p = x^2 y1 y2
        let p = x.clone() * x * y1 * y2;
        assert_relative_eq!(p.value(), 0.5);
        let idx = MultiIndex::new(vec![2], vec![1, 1]);
        assert_relative_eq!(p.partial(&idx), 2.0);
        let idx = MultiIndex::new(vec![1], vec![0, 1]);
        // d/dx d/dy2 = 2 x y1 = 1
        assert_relative_eq!(p.partial(&idx), 1.0);
    }

    #[test]
    fn univariate_primitives_match_closed_forms() {
        let s = space(0, 1, 0, 5);
        let u = Jet::y_var(&s, 0, 0.7);
        let d = |j: &Jet, k: u8| j.partial(&MultiIndex::new(vec![], vec![k]));
        let r = u.clone().try_recip().unwrap();
        assert_relative_eq!(d(&r, 3), -6.0 / 0.7f64.powi(4), max_relative = 1e-12);
        let q = u.clone().try_sqrt().unwrap();
        // d^2 sqrt = -1/4 u^{-3/2}
        assert_relative_eq!(d(&q, 2), -0.25 * 0.7f64.powf(-1.5), max_relative = 1e-12);
        let l = u.clone().try_ln().unwrap();
        assert_relative_eq!(d(&l, 4), -6.0 / 0.7f64.powi(4), max_relative = 1e-12);
        let e = u.clone().exp();
        assert_relative_eq!(d(&e, 5), 0.7f64.exp(), max_relative = 1e-12);
    }

    #[test]
    fn derivative_lowers_order() {
        let s = space(1, 1, 2, 3);
        let x = Jet::x_var(&s, 0, 0.1);
        let y = Jet::y_var(&s, 0, 0.3);
        let f = (x * y).exp();
        let fx = f.dx(0);
        assert_eq!(fx.orders(), (1, 3));
        let fxy = fx.dy(0);
        assert_eq!(fxy.orders(), (1, 2));
        // d/dx d/dy exp(xy) = exp(xy)(1 + xy)
        let v = (0.03f64).exp() * 1.03;
        assert_relative_eq!(fxy.value(), v, max_relative = 1e-13);
    }

    #[test]
    fn sqrt_at_zero_is_a_domain_error() {
        let s = space(0, 1, 0, 2);
        let u = Jet::y_var(&s, 0, 0.0);
        assert!(matches!(u.try_sqrt(), Err(Error::Domain { .. })));
        assert!(matches!(
            Jet::constant(&s, -1.0).try_ln(),
            Err(Error::Domain { .. })
        ));
    }

    #[test]
    fn matrix_inverse_of_jets() {
        let s = space(1, 0, 3, 0);
        let x = Jet::x_var(&s, 0, 0.2);
        let one = Jet::constant(&s, 1.0);
        // [[1+x, x], [x, 2]]
        let m = vec![one.clone() + x.clone(), x.clone(), x.clone(), one.scale(2.0)];
        let inv = invert_matrix(&m, 2).unwrap();
        for i in 0..2 {
            for j in 0..2 {
                let mut acc = Jet::constant(&s, 0.0);
                for k in 0..2 {
                    acc.add_product(&m[i * 2 + k], &inv[k * 2 + j]);
                }
                let target = if i == j { 1.0 } else { 0.0 };
                for (n, &c) in acc.coefficients().iter().enumerate() {
                    let t = if n == 0 { target } else { 0.0 };
                    assert!((c - t).abs() < 1e-13);
                }
            }
        }
    }
}

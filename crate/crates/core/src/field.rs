//! Scalar fields on the tangent bundle and the two derivative engines.

use crate::error::{Error, Result};
use crate::jet::{Jet, JetShape, JetSpace, MultiIndex, Scalar};

/// Deepest base-coordinate order any curvature quantity needs.
pub const MAX_X_ORDER: usize = 2;
/// Deepest fiber order any curvature quantity needs.
pub const MAX_Y_ORDER: usize = 5;

/// A function of `(x, y)` that can be evaluated over any [`Scalar`].
pub trait ScalarField {
    fn dim(&self) -> usize;
    fn eval<T: Scalar>(&self, x: &[T], y: &[T]) -> Result<T>;
}

impl<F: ScalarField + ?Sized> ScalarField for &F {
    fn dim(&self) -> usize {
        (**self).dim()
    }
    fn eval<T: Scalar>(&self, x: &[T], y: &[T]) -> Result<T> {
        (**self).eval(x, y)
    }
}

/// Jet variables for the base point `(x, y)` in `space`.
pub fn tangent_vars(
    space: &std::sync::Arc<JetSpace>,
    x: &[f64],
    y: &[f64],
) -> (Vec<Jet>, Vec<Jet>) {
    let xs = x
        .iter()
        .enumerate()
        .map(|(i, &v)| Jet::x_var(space, i, v))
        .collect();
    let ys = y
        .iter()
        .enumerate()
        .map(|(i, &v)| Jet::y_var(space, i, v))
        .collect();
    (xs, ys)
}

fn check_base<F: ScalarField>(field: &F, x: &[f64], y: &[f64]) -> Result<()> {
    let n = field.dim();
    if x.len() != n {
        return Err(Error::Dimension {
            expected: n,
            actual: x.len(),
        });
    }
    if y.len() != n {
        return Err(Error::Dimension {
            expected: n,
            actual: y.len(),
        });
    }
    Ok(())
}

/// Taylor expansion of `field` at `(x, y)` up to the given orders.
pub fn jet_eval<F: ScalarField>(
    field: &F,
    x: &[f64],
    y: &[f64],
    max_x: usize,
    max_y: usize,
) -> Result<Jet> {
    check_base(field, x, y)?;
    if max_x > MAX_X_ORDER || max_y > MAX_Y_ORDER {
        return Err(Error::InvalidArgument(format!(
            "jet orders ({max_x}, {max_y}) exceed ({MAX_X_ORDER}, {MAX_Y_ORDER})"
        )));
    }
    let n = field.dim();
    let space = JetSpace::get(JetShape::new(n, n, max_x, max_y));
    let (xs, ys) = tangent_vars(&space, x, y);
    let j = field.eval(&xs, &ys)?;
    if !j.is_finite() {
        return Err(Error::Domain {
            op: "jet_eval",
            value: j.value(),
        });
    }
    Ok(j)
}

/// Mixed partial derivative by the jet engine.
pub fn partial<F: ScalarField>(field: &F, x: &[f64], y: &[f64], idx: &MultiIndex) -> Result<f64> {
    let j = jet_eval(field, x, y, idx.x_order(), idx.y_order())?;
    Ok(j.partial(idx))
}

/// Settings for the finite-difference engine.
#[derive(Debug, Clone, Copy, PartialEq)]
#[derive(Default)]
pub struct FdOptions {
    /// Base step; `None` picks one from the derivative order.
    pub step: Option<f64>,
    /// Richardson extrapolation levels; `None` picks one from the order.
    pub levels: Option<usize>,
}


impl FdOptions {
    fn resolve(&self, order: usize, scale: f64) -> (f64, usize) {
        let levels = self.levels.unwrap_or(if order <= 2 { 1 } else { 2 });
        let step = self.step.unwrap_or_else(|| {
            // balance truncation h^(2L+2) against roundoff eps/h^k
            let p = (order + 2 * levels + 2) as f64;
            let h = f64::EPSILON.powf(1.0 / p);
            let h = if order <= 1 { 1e-3 } else { h };
            h * scale
        });
        (step, levels)
    }
}

/// Central-difference weights for the `k`-th derivative on nodes `-m..=m`.
fn central_weights(k: usize) -> (i32, Vec<f64>) {
    let m = k.div_ceil(2).max(1) as i32;
    let nodes: Vec<f64> = (-m..=m).map(f64::from).collect();
    (m, fornberg(&nodes, k))
}

// Fornberg's recursion for finite-difference weights at 0.
fn fornberg(nodes: &[f64], k: usize) -> Vec<f64> {
    let n = nodes.len();
    let mut c = vec![vec![0.0; k + 1]; n];
    let mut c1 = 1.0;
    let mut c4 = nodes[0];
    c[0][0] = 1.0;
    for i in 1..n {
        let mn = i.min(k);
        let mut c2 = 1.0;
        let c5 = c4;
        c4 = nodes[i];
        for j in 0..i {
            let c3 = nodes[i] - nodes[j];
            c2 *= c3;
            if j == i - 1 {
                for s in (1..=mn).rev() {
                    c[i][s] = c1 * (s as f64 * c[i - 1][s - 1] - c5 * c[i - 1][s]) / c2;
                }
                c[i][0] = -c1 * c5 * c[i - 1][0] / c2;
            }
            for s in (1..=mn).rev() {
                c[j][s] = (c4 * c[j][s] - s as f64 * c[j][s - 1]) / c3;
            }
            c[j][0] = c4 * c[j][0] / c3;
        }
        c1 = c2;
    }
    c.iter().map(|row| row[k]).collect()
}

fn stencil<F: ScalarField>(field: &F, x: &[f64], y: &[f64], idx: &MultiIndex, h: f64) -> Result<f64> {
    let n = x.len();
    let orders: Vec<usize> = idx
        .x
        .iter()
        .chain(idx.y.iter())
        .map(|&k| k as usize)
        .collect();
    let active: Vec<(usize, i32, Vec<f64>)> = orders
        .iter()
        .enumerate()
        .filter(|(_, &k)| k > 0)
        .map(|(v, &k)| {
            let (m, w) = central_weights(k);
            (v, m, w)
        })
        .collect();
    let mut base: Vec<f64> = x.iter().chain(y.iter()).copied().collect();
    let mut counter = vec![0usize; active.len()];
    let mut acc = 0.0;
    loop {
        let mut weight = 1.0;
        for (a, (v, m, w)) in active.iter().enumerate() {
            let off = counter[a] as i32 - m;
            base[*v] = if *v < n { x[*v] } else { y[*v - n] } + h * off as f64;
            weight *= w[counter[a]];
        }
        if weight != 0.0 {
            acc += weight * field.eval(&base[..n], &base[n..])?;
        }
        // odometer
        let mut a = 0;
        loop {
            if a == active.len() {
                let total = idx.order() as i32;
                return Ok(acc / h.powi(total));
            }
            counter[a] += 1;
            if counter[a] < active[a].2.len() {
                break;
            }
            counter[a] = 0;
            a += 1;
        }
    }
}

fn fd_core<F: ScalarField>(
    field: &F,
    x: &[f64],
    y: &[f64],
    idx: &MultiIndex,
    step: f64,
    levels: usize,
) -> Result<f64> {
    check_base(field, x, y)?;
    if step < 1e-10 {
        return Err(Error::StepUnderflow { step });
    }
    if idx.order() == 0 {
        return field.eval(x, y);
    }
    let mut row: Vec<f64> = Vec::with_capacity(levels + 1);
    for j in 0..=levels {
        let h = step / f64::powi(2.0, j as i32);
        let mut cur = stencil(field, x, y, idx, h)?;
        // Richardson: errors are even powers of h
        let prev = row.clone();
        row.clear();
        row.push(cur);
        for (l, &p) in prev.iter().enumerate() {
            let f = f64::powi(4.0, l as i32 + 1);
            cur = (f * cur - p) / (f - 1.0);
            row.push(cur);
        }
    }
    Ok(*row.last().unwrap())
}

/// Richardson-extrapolated central differences with one extrapolation
/// level at the given `step`; error `O(step^4)`.
pub fn fd_partial<F: ScalarField>(
    field: &F,
    x: &[f64],
    y: &[f64],
    idx: &MultiIndex,
    step: f64,
) -> Result<f64> {
    fd_core(field, x, y, idx, step, 1)
}

/// Finite differences with step and extrapolation depth chosen by
/// [`FdOptions`]. With both left at `None` the step is chosen adaptively:
/// central differences on a geometric step sequence feed a Neville tableau
/// and the entry with the smallest error estimate is returned.
pub fn fd_partial_with<F: ScalarField>(
    field: &F,
    x: &[f64],
    y: &[f64],
    idx: &MultiIndex,
    opts: &FdOptions,
) -> Result<f64> {
    let norm = x
        .iter()
        .chain(y.iter())
        .map(|v| v * v)
        .sum::<f64>()
        .sqrt();
    if opts.step.is_none() && opts.levels.is_none() && idx.order() > 0 {
        check_base(field, x, y)?;
        return fd_adaptive(field, x, y, idx, 0.05 * (1.0 + norm));
    }
    let (step, levels) = opts.resolve(idx.order(), 1.0 + norm);
    fd_core(field, x, y, idx, step, levels)
}

fn fd_adaptive<F: ScalarField>(field: &F, x: &[f64], y: &[f64], idx: &MultiIndex, h0: f64) -> Result<f64> {
    const SHRINK: f64 = 1.4;
    const ROWS: usize = 14;
    let con2 = SHRINK * SHRINK;
    let mut h = h0;
    let first = loop {
        match stencil(field, x, y, idx, h) {
            Ok(v) if v.is_finite() => break v,
            _ => {
                h /= SHRINK;
                if h < 1e-10 {
                    return Err(Error::StepUnderflow { step: h });
                }
            }
        }
    };
    let mut prev = vec![first];
    let mut best = first;
    let mut err = f64::INFINITY;
    for _ in 1..ROWS {
        h /= SHRINK;
        if h < 1e-10 {
            break;
        }
        let mut row = vec![stencil(field, x, y, idx, h)?];
        let mut fac = con2;
        for j in 1..=prev.len() {
            let v = (row[j - 1] * fac - prev[j - 1]) / (fac - 1.0);
            fac *= con2;
            let e = (v - row[j - 1]).abs().max((v - prev[j - 1]).abs());
            if e <= err {
                err = e;
                best = v;
            }
            row.push(v);
        }
        prev = row;
    }
    Ok(best)
}

#[cfg(test)]
mod tests {
    use super::*;

    struct Poly;
    impl ScalarField for Poly {
        fn dim(&self) -> usize {
            2
        }
        fn eval<T: Scalar>(&self, x: &[T], y: &[T]) -> Result<T> {
            // x1 * |y| + y1 y2
            let r = (y[0].clone() * y[0].clone() + y[1].clone() * y[1].clone()).try_sqrt()?;
            Ok(x[0].clone() * r + y[0].clone() * y[1].clone())
        }
    }

    #[test]
    fn weights_are_classical() {
        let (_, w) = central_weights(1);
        assert_eq!(w.len(), 3);
        assert!((w[0] + 0.5).abs() < 1e-15 && (w[2] - 0.5).abs() < 1e-15);
        let (_, w) = central_weights(2);
        assert!((w[1] + 2.0).abs() < 1e-14);
        let (m, w) = central_weights(3);
        assert_eq!(m, 2);
        assert!((w[0] + 0.5).abs() < 1e-14 && (w[1] - 1.0).abs() < 1e-14);
    }

    #[test]
    fn mixed_fiber_derivative_of_product() {
        let idx = MultiIndex::new(vec![0, 0], vec![1, 1]);
        let v = fd_partial(&Poly, &[0.0, 0.0], &[0.3, 0.7], &idx, 1e-3).unwrap();
        assert!((v - 1.0).abs() < 1e-10);
    }

    #[test]
    fn base_derivative_of_scaled_norm() {
        let idx = MultiIndex::new(vec![1, 0], vec![0, 0]);
        let v = fd_partial(&Poly, &[1.0, 0.0], &[0.0, 1.0], &idx, 1e-3).unwrap();
        assert!((v - 1.0).abs() < 1e-10);
        let j = partial(&Poly, &[1.0, 0.0], &[0.0, 1.0], &idx).unwrap();
        assert!((j - 1.0).abs() < 1e-15);
    }

    #[test]
    fn step_floor() {
        let idx = MultiIndex::new(vec![1, 0], vec![0, 0]);
        let e = fd_partial(&Poly, &[1.0, 0.0], &[0.0, 1.0], &idx, 1e-11);
        assert!(matches!(e, Err(Error::StepUnderflow { .. })));
    }

    #[test]
    fn high_order_fiber_derivatives_agree() {
        let x = [0.2, -0.1];
        let y = [0.6, 0.8];
        for k in 1..=5u8 {
            let idx = MultiIndex::new(vec![0, 0], vec![k, 0]);
            let a = partial(&Poly, &x, &y, &idx).unwrap();
            let b = fd_partial_with(&Poly, &x, &y, &idx, &FdOptions::default()).unwrap();
            assert!((a - b).abs() <= 1e-6 * (1.0 + a.abs()), "k={k}: {a} vs {b}");
        }
    }
}

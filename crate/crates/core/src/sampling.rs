//! Deterministic low-discrepancy sampling of tangent points.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use statrs::distribution::{ContinuousCDF, Normal};

const PRIMES: [u32; 16] = [2, 3, 5, 7, 11, 13, 17, 19, 23, 29, 31, 37, 41, 43, 47, 53];

fn radical_inverse(mut i: u64, base: u32) -> f64 {
    let b = base as u64;
    let inv = 1.0 / base as f64;
    let mut f = inv;
    let mut r = 0.0;
    while i > 0 {
        r += (i % b) as f64 * f;
        i /= b;
        f *= inv;
    }
    r
}

/// Halton sequence in `dim` dimensions shifted by a seeded random offset
/// modulo one.
#[derive(Debug, Clone)]
pub struct ShiftedHalton {
    shift: Vec<f64>,
    index: u64,
}

impl ShiftedHalton {
    pub fn new(dim: usize, seed: u64) -> Self {
        assert!(dim <= PRIMES.len(), "at most {} dimensions", PRIMES.len());
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let shift = (0..dim).map(|_| rng.random::<f64>()).collect();
        // skip the origin-heavy start of the sequence
        Self { shift, index: 1 }
    }

    pub fn dim(&self) -> usize {
        self.shift.len()
    }
}

impl Iterator for ShiftedHalton {
    type Item = Vec<f64>;
    fn next(&mut self) -> Option<Vec<f64>> {
        let i = self.index;
        self.index += 1;
        Some(
            self.shift
                .iter()
                .zip(PRIMES)
                .map(|(s, p)| (radical_inverse(i, p) + s).fract())
                .collect(),
        )
    }
}

/// Maps points of the unit cube to unit vectors through the normal quantile.
pub fn cube_to_sphere(u: &[f64]) -> Vec<f64> {
    let normal = Normal::standard();
    let g: Vec<f64> = u
        .iter()
        .map(|&t| normal.inverse_cdf(t.clamp(1e-12, 1.0 - 1e-12)))
        .collect();
    let norm = g.iter().map(|v| v * v).sum::<f64>().sqrt();
    if norm < 1e-300 {
        let mut e = vec![0.0; u.len()];
        e[0] = 1.0;
        return e;
    }
    g.into_iter().map(|v| v / norm).collect()
}

/// Maps the unit cube onto the ball of the given radius by radial rescaling
/// of the centred cube.
pub fn cube_to_ball(u: &[f64], radius: f64) -> Vec<f64> {
    let c: Vec<f64> = u.iter().map(|&t| 2.0 * t - 1.0).collect();
    let inf = c.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let two = c.iter().map(|v| v * v).sum::<f64>().sqrt();
    if two == 0.0 {
        return c;
    }
    let k = radius * inf / two;
    c.into_iter().map(|v| v * k).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn radical_inverse_base_two() {
        assert_eq!(radical_inverse(1, 2), 0.5);
        assert_eq!(radical_inverse(2, 2), 0.25);
        assert_eq!(radical_inverse(3, 2), 0.75);
        assert!((radical_inverse(5, 3) - (2.0 / 3.0 + 1.0 / 9.0)).abs() < 1e-15);
    }

    #[test]
    fn seeded_and_reproducible() {
        let a: Vec<_> = ShiftedHalton::new(4, 7).take(10).collect();
        let b: Vec<_> = ShiftedHalton::new(4, 7).take(10).collect();
        let c: Vec<_> = ShiftedHalton::new(4, 8).take(10).collect();
        assert_eq!(a, b);
        assert_ne!(a, c);
        assert!(a.iter().flatten().all(|v| (0.0..1.0).contains(v)));
    }

    #[test]
    fn maps_land_where_expected() {
        for p in ShiftedHalton::new(3, 1).take(200) {
            let s = cube_to_sphere(&p);
            let n: f64 = s.iter().map(|v| v * v).sum();
            assert!((n - 1.0).abs() < 1e-12);
            let b = cube_to_ball(&p, 0.8);
            let r: f64 = b.iter().map(|v| v * v).sum::<f64>().sqrt();
            assert!(r <= 0.8 + 1e-12);
        }
    }
}

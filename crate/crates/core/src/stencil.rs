//! Fourth-order finite differences of uniformly sampled series.
//!
//! Interior points use the 5-point central stencil; the two points at each
//! end use 5-point one-sided stencils of the same order.

use nalgebra::DVector;

/// Shortest series accepted by [`derivative`].
pub const MIN_POINTS: usize = 5;

pub trait Sampled: Clone {
    fn combine(terms: &[(f64, &Self)]) -> Self;
}

impl Sampled for f64 {
    fn combine(terms: &[(f64, &Self)]) -> Self {
        terms.iter().map(|(w, v)| w * *v).sum()
    }
}

impl Sampled for DVector<f64> {
    fn combine(terms: &[(f64, &Self)]) -> Self {
        let mut acc = DVector::zeros(terms[0].1.len());
        for (w, v) in terms {
            if *w != 0.0 {
                acc.axpy(*w, v, 1.0);
            }
        }
        acc
    }
}

const CENTRAL: [f64; 5] = [1.0, -8.0, 0.0, 8.0, -1.0];
const EDGE0: [f64; 5] = [-25.0, 48.0, -36.0, 16.0, -3.0];
const EDGE1: [f64; 5] = [-3.0, -10.0, 18.0, -6.0, 1.0];

/// `d/dt` of a series sampled with spacing `h`.
///
/// # Panics
/// If fewer than [`MIN_POINTS`] samples are given.
pub fn derivative<T: Sampled>(values: &[T], h: f64) -> Vec<T> {
    let n = values.len();
    assert!(n >= MIN_POINTS, "need at least {MIN_POINTS} samples, got {n}");
    let s = 1.0 / (12.0 * h);
    let window = |start: usize, w: &[f64; 5], sign: f64| {
        let terms: Vec<(f64, &T)> = (0..5).map(|k| (sign * s * w[k], &values[start + k])).collect();
        T::combine(&terms)
    };
    let reversed = |start: usize, w: &[f64; 5]| {
        // Mirror of a forward stencil anchored at the last samples.
        let terms: Vec<(f64, &T)> = (0..5).map(|k| (-s * w[k], &values[start - k])).collect();
        T::combine(&terms)
    };
    (0..n)
        .map(|j| match j {
            0 => window(0, &EDGE0, 1.0),
            1 => window(0, &EDGE1, 1.0),
            _ if j == n - 1 => reversed(n - 1, &EDGE0),
            _ if j == n - 2 => reversed(n - 1, &EDGE1),
            _ => window(j - 2, &CENTRAL, 1.0),
        })
        .collect()
}

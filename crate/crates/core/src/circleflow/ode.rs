//! Explicit one-step integrators for autonomous systems `y' = f(y)`.

use nalgebra::DVector;
use serde::{Deserialize, Serialize};

use crate::error::{FinslerError, Result};

/// Rejected steps tolerated by the adaptive integrator before giving up.
pub const MAX_REJECTIONS: usize = 10_000;

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct IntegratorStats {
    pub steps: usize,
    pub rejected: usize,
    pub evaluations: usize,
}

pub(crate) fn rk4_step<F>(f: &mut F, y: &DVector<f64>, h: f64, stats: &mut IntegratorStats) -> Result<DVector<f64>>
where
    F: FnMut(&DVector<f64>) -> Result<DVector<f64>>,
{
    let k1 = f(y)?;
    let k2 = f(&(y + &k1 * (0.5 * h)))?;
    let k3 = f(&(y + &k2 * (0.5 * h)))?;
    let k4 = f(&(y + &k3 * h))?;
    stats.steps += 1;
    stats.evaluations += 4;
    Ok(y + (k1 + k2 * 2.0 + k3 * 2.0 + k4) * (h / 6.0))
}

// Dormand–Prince 5(4) tableau.
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

/// Adaptive Dormand–Prince 5(4), local extrapolation, RMS error norm.
pub(crate) struct Dopri5 {
    pub atol: f64,
    pub rtol: f64,
    h: Option<f64>,
}

impl Dopri5 {
    pub fn new(atol: f64, rtol: f64) -> Self {
        Self { atol, rtol, h: None }
    }

    /// Advances `y` by exactly `span`, taking as many accepted steps as the
    /// tolerances require.
    pub fn advance<F>(
        &mut self,
        f: &mut F,
        y: &DVector<f64>,
        span: f64,
        stats: &mut IntegratorStats,
    ) -> Result<DVector<f64>>
    where
        F: FnMut(&DVector<f64>) -> Result<DVector<f64>>,
    {
        let mut y = y.clone();
        let mut done = 0.0;
        let mut h = self.h.unwrap_or(span).min(span);
        while done < span {
            let last = span - done <= h * (1.0 + 1e-12);
            let step = if last { span - done } else { h };
            let mut k: Vec<DVector<f64>> = Vec::with_capacity(7);
            k.push(f(&y)?);
            for (i, row) in A.iter().enumerate().skip(1) {
                let mut yi = y.clone();
                for (j, kj) in k.iter().enumerate().take(i) {
                    if row[j] != 0.0 {
                        yi.axpy(step * row[j], kj, 1.0);
                    }
                }
                k.push(f(&yi)?);
            }
            stats.evaluations += 7;
            let mut y5 = y.clone();
            let mut y4 = y.clone();
            for (j, kj) in k.iter().enumerate() {
                if B5[j] != 0.0 {
                    y5.axpy(step * B5[j], kj, 1.0);
                }
                if B4[j] != 0.0 {
                    y4.axpy(step * B4[j], kj, 1.0);
                }
            }
            let err = (0..y.len())
                .map(|i| {
                    let scale = self.atol + self.rtol * y[i].abs().max(y5[i].abs());
                    ((y5[i] - y4[i]) / scale).powi(2)
                })
                .sum::<f64>()
                / y.len() as f64;
            let err = err.sqrt();
            if !err.is_finite() {
                return Err(FinslerError::NonFinite { context: "adaptive step".into() });
            }
            let factor = if err == 0.0 { 5.0 } else { (0.9 * err.powf(-0.2)).clamp(0.2, 5.0) };
            if err <= 1.0 {
                y = y5;
                done = if last { span } else { done + step };
                stats.steps += 1;
                if !last {
                    h = step * factor;
                } else {
                    // Keep the controller's suggestion for the next interval
                    // instead of the truncated landing step.
                    h = h.max(step * factor).min(h * 5.0);
                }
            } else {
                stats.rejected += 1;
                if stats.rejected > MAX_REJECTIONS {
                    return Err(FinslerError::StepRejectionOverflow { rejections: stats.rejected });
                }
                h = step * factor;
            }
        }
        self.h = Some(h);
        Ok(y)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn oscillator(y: &DVector<f64>) -> Result<DVector<f64>> {
        Ok(DVector::from_vec(vec![y[1], -y[0]]))
    }

    #[test]
    fn rk4_fourth_order() {
        let run = |n: usize| {
            let h = 1.0 / n as f64;
            let mut y = DVector::from_vec(vec![0.0, 1.0]);
            let mut st = IntegratorStats::default();
            for _ in 0..n {
                y = rk4_step(&mut oscillator, &y, h, &mut st).unwrap();
            }
            (y[0] - 1f64.sin()).abs()
        };
        let order = (run(20) / run(40)).log2();
        assert!((order - 4.0).abs() < 0.2, "{order}");
    }

    #[test]
    fn dopri_meets_tolerance_and_lands_exactly() {
        let mut d = Dopri5::new(1e-10, 1e-10);
        let mut st = IntegratorStats::default();
        let mut y = DVector::from_vec(vec![0.0, 1.0]);
        for _ in 0..10 {
            y = d.advance(&mut oscillator, &y, 0.1, &mut st).unwrap();
        }
        assert!((y[0] - 1f64.sin()).abs() < 1e-9);
        assert!((y[1] - 1f64.cos()).abs() < 1e-9);
        assert!(st.steps >= 10);
    }
}

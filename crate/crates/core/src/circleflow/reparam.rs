use nalgebra::DVector;

use crate::error::{FinslerError, Result};
use crate::metric::FinslerMetric;
use crate::stencil;
use crate::transport::CurveSampling;

/// Quintic Hermite basis on `[0, 1]` and its derivative, ordered
/// `(p0, h·d0, h²·a0, h²·a1, h·d1, p1)`.
fn quintic(u: f64) -> ([f64; 6], [f64; 6]) {
    let (u2, u3, u4, u5) = (u * u, u * u * u, u.powi(4), u.powi(5));
    let val = [
        1.0 - 10.0 * u3 + 15.0 * u4 - 6.0 * u5,
        u - 6.0 * u3 + 8.0 * u4 - 3.0 * u5,
        0.5 * (u2 - 3.0 * u3 + 3.0 * u4 - u5),
        0.5 * (u3 - 2.0 * u4 + u5),
        -4.0 * u3 + 7.0 * u4 - 3.0 * u5,
        10.0 * u3 - 15.0 * u4 + 6.0 * u5,
    ];
    let der = [
        -30.0 * u2 + 60.0 * u3 - 30.0 * u4,
        1.0 - 18.0 * u2 + 32.0 * u3 - 15.0 * u4,
        0.5 * (2.0 * u - 9.0 * u2 + 12.0 * u3 - 5.0 * u4),
        0.5 * (3.0 * u2 - 8.0 * u3 + 5.0 * u4),
        -12.0 * u2 + 28.0 * u3 - 15.0 * u4,
        30.0 * u2 - 60.0 * u3 + 30.0 * u4,
    ];
    (val, der)
}

/// Value and `t`-derivative of the quintic Hermite interpolant on `[t_j, t_j + h]`.
fn hermite<T>(u: f64, h: f64, p: [&T; 2], d: [&T; 2], a: [&T; 2]) -> (T, T)
where
    T: Clone + std::ops::Mul<f64, Output = T> + std::ops::Add<Output = T>,
{
    let (b, db) = quintic(u);
    let terms = [
        (p[0].clone(), 1.0),
        (d[0].clone(), h),
        (a[0].clone(), h * h),
        (a[1].clone(), h * h),
        (d[1].clone(), h),
        (p[1].clone(), 1.0),
    ];
    let mut val = terms[0].0.clone() * (b[0] * terms[0].1);
    let mut der = terms[0].0.clone() * (db[0] * terms[0].1 / h);
    for i in 1..6 {
        val = val + terms[i].0.clone() * (b[i] * terms[i].1);
        der = der + terms[i].0.clone() * (db[i] * terms[i].1 / h);
    }
    (val, der)
}

/// Resamples a curve on a grid uniform in the arc length of `m`.
///
/// Arc length is accumulated with the end-corrected trapezoid rule; positions
/// are interpolated with quintic Hermite polynomials built from stencil
/// velocities and accelerations. The output has `count` samples (default:
/// as many as the input), starts at `s = 0` and carries velocities.
pub fn arclength_reparametrize(m: &FinslerMetric, curve: &CurveSampling, count: Option<usize>) -> Result<CurveSampling> {
    let h = curve.dt();
    let xs = curve.positions();
    let vel = curve.velocities();
    let acc = curve.differentiate(&vel);
    let speed: Vec<f64> = xs
        .iter()
        .zip(&vel)
        .map(|(x, v)| m.check_admissible(&crate::LineElement::new(x.clone(), v.clone())))
        .collect::<Result<_>>()?;
    let dspeed = stencil::derivative(&speed, h);

    let mut s = vec![0.0; xs.len()];
    for j in 1..xs.len() {
        s[j] = s[j - 1] + 0.5 * h * (speed[j - 1] + speed[j]) + h * h / 12.0 * (dspeed[j - 1] - dspeed[j]);
        if s[j] <= s[j - 1] {
            return Err(FinslerError::InvalidInput(format!(
                "accumulated length is not increasing at t = {}",
                curve.param(j)
            )));
        }
    }
    let total = *s.last().unwrap();
    let count = count.unwrap_or(xs.len());
    if count < crate::transport::MIN_SAMPLES {
        return Err(FinslerError::TooFewSamples { need: crate::transport::MIN_SAMPLES, got: count });
    }
    let ds = total / (count - 1) as f64;

    let mut positions = Vec::with_capacity(count);
    let mut velocities = Vec::with_capacity(count);
    let mut j = 0;
    for i in 0..count {
        let target = if i == count - 1 { total } else { ds * i as f64 };
        while j + 2 < xs.len() && s[j + 1] < target {
            j += 1;
        }
        // Newton on the Hermite interpolant of s(t), started from the chord.
        let span = s[j + 1] - s[j];
        let mut u = ((target - s[j]) / span).clamp(0.0, 1.0);
        for _ in 0..50 {
            let (sv, sd) = hermite(
                u,
                h,
                [&s[j], &s[j + 1]],
                [&speed[j], &speed[j + 1]],
                [&dspeed[j], &dspeed[j + 1]],
            );
            let du = (sv - target) / (sd * h);
            u = (u - du).clamp(0.0, 1.0);
            if du.abs() < 1e-15 {
                break;
            }
        }
        let (x, dx): (DVector<f64>, DVector<f64>) = hermite(
            u,
            h,
            [&xs[j], &xs[j + 1]],
            [&vel[j], &vel[j + 1]],
            [&acc[j], &acc[j + 1]],
        );
        let f = m.check_admissible(&crate::LineElement::new(x.clone(), dx.clone()))?;
        velocities.push(dx / f);
        positions.push(x);
    }
    CurveSampling::new(0.0, ds, positions, Some(velocities))
}

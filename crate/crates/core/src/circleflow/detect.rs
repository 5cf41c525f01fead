use nalgebra::DVector;
use serde::{Deserialize, Serialize};

use crate::error::{FinslerError, Result};
use crate::metric::FinslerMetric;
use crate::transport::{CurveFrame, CurveSampling, TransportMode};

/// Added to `‖V‖` in the parallelism ratio.
const RHO_EPSILON: f64 = 1e-12;

/// Speeds at or below this make [`successive_derivatives`] fail.
const MIN_SPEED: f64 = 1e-10;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CircleThresholds {
    /// Largest accepted `ρ` for a circle.
    pub parallelism: f64,
    /// Curves whose `k₁` never exceeds this are geodesics.
    pub geodesic: f64,
}

impl Default for CircleThresholds {
    fn default() -> Self {
        Self { parallelism: 1e-4, geodesic: 1e-6 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Verdict {
    Circle,
    Geodesic,
    Neither,
}

impl std::fmt::Display for Verdict {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Verdict::Circle => "circle",
            Verdict::Geodesic => "geodesic",
            Verdict::Neither => "neither",
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CircleTestReport {
    /// `V = c⃛ − 3 (g(ċ,c̈)/g(ċ,ċ)) c̈`.
    pub v: Vec<DVector<f64>>,
    /// `‖V − (g(V,ċ)/g(ċ,ċ)) ċ‖ / (‖V‖ + ε)`.
    pub rho: Vec<f64>,
    /// First curvature `‖c″‖` recovered from the parametrized derivatives.
    pub k1: Vec<f64>,
    pub max_rho: f64,
    pub max_k1: f64,
    pub verdict: Verdict,
}

impl CircleTestReport {
    pub fn passes(&self) -> bool {
        matches!(self.verdict, Verdict::Circle | Verdict::Geodesic)
    }

    /// `(max k₁ − min k₁) / mean k₁`.
    pub fn k1_relative_variation(&self) -> f64 {
        let lo = self.k1.iter().copied().fold(f64::INFINITY, f64::min);
        let mean = self.k1.iter().sum::<f64>() / self.k1.len() as f64;
        if mean == 0.0 {
            0.0
        } else {
            (self.max_k1 - lo) / mean
        }
    }
}

/// Decides whether a curve, in any regular parametrization, is a circle.
pub fn circle_test(
    m: &FinslerMetric,
    curve: &CurveSampling,
    mode: TransportMode,
    thresholds: &CircleThresholds,
) -> Result<CircleTestReport> {
    let frame = CurveFrame::new(m, curve, mode)?;
    let cdot = &frame.velocities;
    let c2 = frame.covariant(cdot)?;
    let c3 = frame.covariant(&c2)?;
    let mut v = Vec::with_capacity(curve.len());
    let mut rho = Vec::with_capacity(curve.len());
    let mut k1 = Vec::with_capacity(curve.len());
    for j in 0..curve.len() {
        let s = &frame.samples[j];
        let speed2 = s.norm_sq(&cdot[j]);
        let a = s.inner(&cdot[j], &c2[j]) / speed2;
        let vj = &c3[j] - &c2[j] * (3.0 * a);
        let perp = &vj - &cdot[j] * (s.inner(&vj, &cdot[j]) / speed2);
        let norm_v = s.norm_sq(&vj).max(0.0).sqrt();
        rho.push(s.norm_sq(&perp).max(0.0).sqrt() / (norm_v + RHO_EPSILON));
        let c_pp = (&c2[j] - &cdot[j] * a) / speed2;
        k1.push(s.norm_sq(&c_pp).max(0.0).sqrt());
        v.push(vj);
    }
    let max_rho = rho.iter().copied().fold(0.0, f64::max);
    let max_k1 = k1.iter().copied().fold(0.0, f64::max);
    let verdict = if max_k1 <= thresholds.geodesic {
        Verdict::Geodesic
    } else if max_rho <= thresholds.parallelism {
        Verdict::Circle
    } else {
        Verdict::Neither
    };
    Ok(CircleTestReport { v, rho, k1, max_rho, max_k1, verdict })
}

/// Covariant derivatives in the given parameter and in arc length, with
/// the residuals of the identities linking them.
#[derive(Debug, Clone, PartialEq)]
pub struct SuccessiveDerivatives {
    pub speed: Vec<f64>,
    pub c1_dot: Vec<DVector<f64>>,
    pub c2_dot: Vec<DVector<f64>>,
    pub c3_dot: Vec<DVector<f64>>,
    pub c1_arc: Vec<DVector<f64>>,
    pub c2_arc: Vec<DVector<f64>>,
    pub c3_arc: Vec<DVector<f64>>,
    /// `‖ċ − |ċ|c′‖`, `‖c̈ − |ċ|²c″ − (g(ċ,c̈)/|ċ|)c′‖` and
    /// `‖c⃛ − |ċ|³c‴ − 3g(ċ,c̈)c″ − (d/dt)(g(ċ,c̈)/|ċ|)c′‖`.
    pub residuals: [Vec<f64>; 3],
}

impl SuccessiveDerivatives {
    pub fn max_residuals(&self) -> [f64; 3] {
        let m = |v: &Vec<f64>| v.iter().copied().fold(0.0, f64::max);
        [m(&self.residuals[0]), m(&self.residuals[1]), m(&self.residuals[2])]
    }
}

pub fn successive_derivatives(
    m: &FinslerMetric,
    curve: &CurveSampling,
    mode: TransportMode,
) -> Result<SuccessiveDerivatives> {
    let frame = CurveFrame::new(m, curve, mode)?;
    let cdot = frame.velocities.clone();
    let speed: Vec<f64> = frame
        .samples
        .iter()
        .zip(&cdot)
        .map(|(s, v)| s.norm_sq(v).max(0.0).sqrt())
        .collect();
    if let Some(j) = speed.iter().position(|&s| s <= MIN_SPEED) {
        return Err(FinslerError::InvalidInput(format!(
            "degenerate speed {} at t = {}",
            speed[j],
            curve.param(j)
        )));
    }
    let c2 = frame.covariant(&cdot)?;
    let c3 = frame.covariant(&c2)?;

    // ∇_{c′} = |ċ|⁻¹ ∇_ċ applied to the unit tangent and its derivatives.
    let per_speed = |field: Vec<DVector<f64>>| -> Vec<DVector<f64>> {
        field.into_iter().zip(&speed).map(|(v, s)| v / *s).collect()
    };
    let a1 = per_speed(cdot.clone());
    let a2 = per_speed(frame.covariant(&a1)?);
    let a3 = per_speed(frame.covariant(&a2)?);

    let gcc: Vec<f64> = (0..cdot.len()).map(|j| frame.samples[j].inner(&cdot[j], &c2[j])).collect();
    let ratio: Vec<f64> = gcc.iter().zip(&speed).map(|(g, s)| g / s).collect();
    let ratio_rate = crate::stencil::derivative(&ratio, curve.dt());

    let mut res = [Vec::new(), Vec::new(), Vec::new()];
    for j in 0..cdot.len() {
        let s = &frame.samples[j];
        let norm = |v: DVector<f64>| s.norm_sq(&v).max(0.0).sqrt();
        let sp = speed[j];
        res[0].push(norm(&cdot[j] - &a1[j] * sp));
        res[1].push(norm(&c2[j] - &a2[j] * (sp * sp) - &a1[j] * ratio[j]));
        res[2].push(norm(&c3[j] - &a3[j] * sp.powi(3) - &a2[j] * (3.0 * gcc[j]) - &a1[j] * ratio_rate[j]));
    }
    Ok(SuccessiveDerivatives {
        speed,
        c1_dot: cdot,
        c2_dot: c2,
        c3_dot: c3,
        c1_arc: a1,
        c2_arc: a2,
        c3_arc: a3,
        residuals: res,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::TAU;

    fn v(xs: &[f64]) -> DVector<f64> {
        DVector::from_row_slice(xs)
    }

    fn reparametrized_circle(t_of_s: impl Fn(f64) -> f64, s_of_t: impl Fn(f64) -> f64, count: usize) -> CurveSampling {
        let (t0, t1) = (t_of_s(0.0), t_of_s(TAU));
        CurveSampling::from_fn(
            t0,
            t1,
            count,
            |t| {
                let s = s_of_t(t);
                v(&[s.sin(), 1.0 - s.cos()])
            },
            None,
        )
        .unwrap()
    }

    fn invert(f: impl Fn(f64) -> f64, df: impl Fn(f64) -> f64) -> impl Fn(f64) -> f64 {
        move |t| {
            let mut s = t;
            for _ in 0..60 {
                s -= (f(s) - t) / df(s);
            }
            s
        }
    }

    #[test]
    fn circle_verdict_is_parametrization_free() {
        let m = FinslerMetric::euclidean(2).unwrap();
        let th = CircleThresholds::default();
        let id = reparametrized_circle(|s| s, |t| t, 2001);
        let r = circle_test(&m, &id, TransportMode::Standard, &th).unwrap();
        assert_eq!(r.verdict, Verdict::Circle, "{}", r.max_rho);

        let f = |s: f64| s + 0.3 * s.sin();
        let s_of_t = invert(f, |s| 1.0 + 0.3 * s.cos());
        let c = reparametrized_circle(f, s_of_t, 2001);
        let r = circle_test(&m, &c, TransportMode::Standard, &th).unwrap();
        assert_eq!(r.verdict, Verdict::Circle, "{}", r.max_rho);
        assert!(r.max_rho <= 1e-4);
    }

    #[test]
    fn parabola_and_line() {
        let m = FinslerMetric::euclidean(2).unwrap();
        let th = CircleThresholds::default();
        let p = CurveSampling::from_fn(-1.0, 1.0, 401, |t| v(&[t, t * t]), None).unwrap();
        assert_eq!(circle_test(&m, &p, TransportMode::Standard, &th).unwrap().verdict, Verdict::Neither);
        let l = CurveSampling::from_fn(0.0, 1.0, 101, |t| v(&[t, 0.5 * t]), None).unwrap();
        assert_eq!(circle_test(&m, &l, TransportMode::Standard, &th).unwrap().verdict, Verdict::Geodesic);
    }

    #[test]
    fn unit_speed_identities() {
        let m = FinslerMetric::euclidean(2).unwrap();
        let c = CurveSampling::from_fn(
            0.0,
            TAU,
            2001,
            |s| v(&[s.sin(), 1.0 - s.cos()]),
            Some(&|s: f64| v(&[s.cos(), s.sin()])),
        )
        .unwrap();
        let d = successive_derivatives(&m, &c, TransportMode::Standard).unwrap();
        for j in 0..c.len() {
            assert!((&d.c1_dot[j] - &d.c1_arc[j]).amax() < 1e-8);
            assert!((&d.c2_dot[j] - &d.c2_arc[j]).amax() < 1e-8, "{j} {}", (&d.c2_dot[j] - &d.c2_arc[j]).amax());
            assert!((&d.c3_dot[j] - &d.c3_arc[j]).amax() < 1e-8, "{j} {}", (&d.c3_dot[j] - &d.c3_arc[j]).amax());
        }
    }

    #[test]
    fn doubled_speed_scales_acceleration() {
        let m = FinslerMetric::euclidean(2).unwrap();
        let c = reparametrized_circle(|s| s / 2.0, |t| 2.0 * t, 2001);
        let d = successive_derivatives(&m, &c, TransportMode::Standard).unwrap();
        for j in 0..c.len() {
            assert!((&d.c2_dot[j] - &d.c2_arc[j] * 4.0).amax() < 1e-6);
        }
        assert!(d.max_residuals().iter().all(|&r| r < 1e-5));
    }

    #[test]
    fn sphere_identities() {
        let m = FinslerMetric::sphere();
        let c = CurveSampling::from_fn(
            0.0,
            2.0,
            801,
            |t| v(&[1.2 + 0.3 * (1.3 * t).sin(), 0.7 * t + 0.1 * t * t]),
            None,
        )
        .unwrap();
        let d = successive_derivatives(&m, &c, TransportMode::Standard).unwrap();
        let r = d.max_residuals();
        assert!(r.iter().all(|&x| x <= 1e-5), "{r:?}");
    }

    #[test]
    fn stalled_curve_is_rejected() {
        let m = FinslerMetric::euclidean(2).unwrap();
        let c = CurveSampling::from_fn(-1.0, 1.0, 41, |t| v(&[t.powi(3), 0.0]), None).unwrap();
        assert!(successive_derivatives(&m, &c, TransportMode::Standard).is_err());
    }
}

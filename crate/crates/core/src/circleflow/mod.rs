//! Geodesics and circles: integration, detection, reparametrization.
//!
//! A circle of curvature `k` is integrated as the first-order system
//!
//! ```text
//! dx/ds = u
//! du/ds = v − Θ(u, u)
//! dv/ds = −g(v, v) u − Θ(v, u)
//! ```
//!
//! where `Θ(A, u)` is the connection term of the covariant derivative along
//! the curve, evaluated at the line element `(x, u)`.

mod detect;
mod integrate;
mod ode;
mod reparam;

use nalgebra::DVector;
use serde::{Deserialize, Serialize};

use crate::connection::connection_sample;
use crate::error::{FinslerError, Result};
use crate::metric::{FinslerMetric, LineElement};
use crate::transport::{frenet_data, CurveSampling, FrenetData, TransportMode};

pub use detect::{
    circle_test, successive_derivatives, CircleTestReport, CircleThresholds, SuccessiveDerivatives, Verdict,
};
pub use integrate::{
    circle_integrate, geodesic_integrate, minkowski_circle_closed_form, CircleEquation, IntegrationOptions,
    Integrator, DEFAULT_ABORT_THRESHOLD, DEFAULT_STEPS_PER_PERIOD, DEFAULT_TOLERANCE,
};
pub use ode::IntegratorStats;
pub use reparam::arclength_reparametrize;

/// Tolerance on the orthonormality of circle initial data.
pub const SPEC_TOLERANCE: f64 = 1e-10;

/// Curvatures at or below this are rejected by [`CircleSpec`].
pub const MIN_CURVATURE: f64 = 1e-12;

/// Initial data of a circle: point, unit tangent, unit normal, curvature.
///
/// `x` and `y` are orthonormal for `g` at the line element `(p, x)`.
#[derive(Debug, Clone, PartialEq)]
pub struct CircleSpec {
    pub p: DVector<f64>,
    pub x: DVector<f64>,
    pub y: DVector<f64>,
    pub k: f64,
}

impl CircleSpec {
    /// Validates orthonormality to [`SPEC_TOLERANCE`].
    pub fn new(m: &FinslerMetric, p: DVector<f64>, x: DVector<f64>, y: DVector<f64>, k: f64) -> Result<Self> {
        check_curvature(k)?;
        let s = connection_sample(m, &LineElement::new(p.clone(), x.clone()))?;
        if y.len() != x.len() {
            return Err(FinslerError::DimensionMismatch { expected: x.len(), got: y.len() });
        }
        let checks = [
            ("g(X,X) − 1", s.norm_sq(&x) - 1.0),
            ("g(X,Y)", s.inner(&x, &y)),
            ("g(Y,Y) − 1", s.norm_sq(&y) - 1.0),
        ];
        for (what, value) in checks {
            if value.abs() > SPEC_TOLERANCE {
                return Err(FinslerError::InvalidInput(format!(
                    "circle initial data not orthonormal: {what} = {value:e}"
                )));
            }
        }
        Ok(Self { p, x, y, k })
    }

    /// Scales `x` to unit length and orthonormalizes `y` against it in `g_(p,x)`.
    pub fn orthonormalized(
        m: &FinslerMetric,
        p: DVector<f64>,
        x: DVector<f64>,
        y: DVector<f64>,
        k: f64,
    ) -> Result<Self> {
        check_curvature(k)?;
        let f = m.check_admissible(&LineElement::new(p.clone(), x.clone()))?;
        let x = x / f;
        let s = connection_sample(m, &LineElement::new(p.clone(), x.clone()))?;
        let y = &y - &x * s.inner(&x, &y);
        let ny = s.norm_sq(&y).max(0.0).sqrt();
        if ny <= 1e-12 {
            return Err(FinslerError::InvalidInput("normal direction is parallel to the tangent".into()));
        }
        Self::new(m, p, x, y / ny, k)
    }

    pub fn dim(&self) -> usize {
        self.p.len()
    }
}

fn check_curvature(k: f64) -> Result<()> {
    if !(k.is_finite() && k > MIN_CURVATURE) {
        return Err(FinslerError::InvalidInput(format!(
            "circle curvature must exceed {MIN_CURVATURE:e} (got {k}); integrate a geodesic instead"
        )));
    }
    Ok(())
}

/// State `(x, u, v)` with `u = c′` and `v = ∇_{c′}c′`.
#[derive(Debug, Clone, PartialEq)]
pub struct CurveState {
    pub x: DVector<f64>,
    pub u: DVector<f64>,
    pub v: DVector<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum CurveKind {
    Circle,
    Geodesic,
}

impl std::fmt::Display for CurveKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            CurveKind::Circle => "circle",
            CurveKind::Geodesic => "geodesic",
        })
    }
}

/// Uniform arc-length grid `s₀ + j·ds`, `j < count`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Grid {
    pub s0: f64,
    pub ds: f64,
    pub count: usize,
}

impl Grid {
    /// Grid on `[0, s_max]` with spacing at most `step`.
    pub fn covering(s_max: f64, step: f64) -> Result<Self> {
        if !(s_max.is_finite() && s_max > 0.0 && step.is_finite() && step > 0.0) {
            return Err(FinslerError::InvalidInput(format!(
                "need positive finite s_max and step (got {s_max}, {step})"
            )));
        }
        let n = ((s_max / step) - 1e-9).ceil().max(1.0) as usize;
        Ok(Self { s0: 0.0, ds: s_max / n as f64, count: n + 1 })
    }

    pub fn at(&self, j: usize) -> f64 {
        self.s0 + self.ds * j as f64
    }

    pub fn values(&self) -> Vec<f64> {
        (0..self.count).map(|j| self.at(j)).collect()
    }
}

/// `g(u,u) − 1`, `g(u,v)` and `g(v,v) − k²` along a trace.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Residuals {
    pub unit: Vec<f64>,
    pub orth: Vec<f64>,
    pub curv: Vec<f64>,
}

impl Residuals {
    pub fn max_unit(&self) -> f64 {
        max_abs(&self.unit)
    }

    pub fn max_orth(&self) -> f64 {
        max_abs(&self.orth)
    }

    pub fn max_curv(&self) -> f64 {
        max_abs(&self.curv)
    }

    fn push(&mut self, unit: f64, orth: f64, curv: f64) {
        self.unit.push(unit);
        self.orth.push(orth);
        self.curv.push(curv);
    }
}

fn max_abs(v: &[f64]) -> f64 {
    v.iter().fold(0.0, |m: f64, x| m.max(x.abs()))
}

/// A sampled geodesic or circle with its first-integral residuals.
#[derive(Debug, Clone, PartialEq)]
pub struct CircleTrace {
    /// Canonical metric spec string.
    pub metric: String,
    pub kind: CurveKind,
    pub k: f64,
    pub grid: Grid,
    pub states: Vec<CurveState>,
    pub residuals: Residuals,
    pub stats: IntegratorStats,
    /// Short description of how the trace was produced.
    pub method: String,
}

impl CircleTrace {
    pub fn len(&self) -> usize {
        self.states.len()
    }

    pub fn is_empty(&self) -> bool {
        self.states.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.states.first().map_or(0, |s| s.x.len())
    }

    pub fn positions(&self) -> Vec<DVector<f64>> {
        self.states.iter().map(|s| s.x.clone()).collect()
    }

    pub fn tangents(&self) -> Vec<DVector<f64>> {
        self.states.iter().map(|s| s.u.clone()).collect()
    }

    /// Positions with the stored tangents as velocities, on the arc-length grid.
    pub fn sampling(&self) -> Result<CurveSampling> {
        CurveSampling::new(self.grid.s0, self.grid.ds, self.positions(), Some(self.tangents()))
    }

    /// Positions only; velocities are then recovered by stencils.
    pub fn position_sampling(&self) -> Result<CurveSampling> {
        CurveSampling::new(self.grid.s0, self.grid.ds, self.positions(), None)
    }

    /// Recomputes the residual series from the stored states under `m`.
    pub fn recompute_residuals(&self, m: &FinslerMetric) -> Result<Residuals> {
        let mut r = Residuals::default();
        for st in &self.states {
            let (a, b, c) = state_residuals(m, st, self.k)?;
            r.push(a, b, c);
        }
        Ok(r)
    }
}

/// Frenet data of a trace, using its stored tangents as velocities.
pub fn frenet_trace(m: &FinslerMetric, trace: &CircleTrace, mode: TransportMode) -> Result<FrenetData> {
    frenet_data(m, &trace.sampling()?, mode)
}

pub(crate) fn state_residuals(m: &FinslerMetric, st: &CurveState, k: f64) -> Result<(f64, f64, f64)> {
    let s = connection_sample(m, &LineElement::new(st.x.clone(), st.u.clone()))?;
    Ok((s.norm_sq(&st.u) - 1.0, s.inner(&st.u, &st.v), s.norm_sq(&st.v) - k * k))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn v(xs: &[f64]) -> DVector<f64> {
        DVector::from_row_slice(xs)
    }

    #[test]
    fn spec_validation() {
        let m = FinslerMetric::euclidean(2).unwrap();
        assert!(CircleSpec::new(&m, v(&[0.0, 0.0]), v(&[1.0, 0.0]), v(&[0.0, 1.0]), 1.0).is_ok());
        assert!(CircleSpec::new(&m, v(&[0.0, 0.0]), v(&[1.0, 0.0]), v(&[0.1, 1.0]), 1.0).is_err());
        assert!(CircleSpec::new(&m, v(&[0.0, 0.0]), v(&[1.0, 0.0]), v(&[0.0, 1.0]), 0.0).is_err());
        let s = CircleSpec::orthonormalized(&m, v(&[0.0, 0.0]), v(&[3.0, 0.0]), v(&[1.0, 2.0]), 0.5).unwrap();
        assert!((s.x - v(&[1.0, 0.0])).norm() < 1e-15);
        assert!((s.y - v(&[0.0, 1.0])).norm() < 1e-15);
    }

    #[test]
    fn randers_spec_uses_reference_direction() {
        let m = FinslerMetric::minkowski_randers(0.3).unwrap();
        let s = CircleSpec::orthonormalized(&m, v(&[0.0, 0.0]), v(&[1.0, 0.0]), v(&[0.0, 1.0]), 1.0).unwrap();
        assert!((m.norm(&[0.0, 0.0], s.x.as_slice()) - 1.0).abs() < 1e-14);
    }

    #[test]
    fn grid_covers_interval() {
        let g = Grid::covering(1.0, 0.3).unwrap();
        assert_eq!(g.count, 5);
        assert!((g.at(g.count - 1) - 1.0).abs() < 1e-15);
        let g = Grid::covering(1.0, 0.25).unwrap();
        assert_eq!(g.count, 5);
    }
}

//! Covariant derivatives of vector fields along sampled curves.
//!
//! Connection data is always evaluated at the line element `(x, ẋ)` of the
//! curve itself.

use nalgebra::DVector;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::connection::{connection_sample, ConnectionSample};
use crate::error::{FinslerError, Result};
use crate::metric::{FinslerMetric, LineElement};
use crate::stencil;

/// Minimum number of samples in a [`CurveSampling`].
pub const MIN_SAMPLES: usize = 7;

/// Below this first curvature a curve is treated as a geodesic by
/// [`frenet_data`].
pub const FRENET_GEODESIC_CUTOFF: f64 = 1e-12;

/// Which vertical term enters the covariant derivative along a curve.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum TransportMode {
    /// `δXⁱ/dt = dXⁱ/dt + (Γⁱ_kh + Cⁱ_ks Nˢ_h) Xᵏ ẋʰ`.
    #[default]
    Standard,
    /// Uses `Cⁱ_ks (ẍˢ + Nˢ_h ẋʰ)` for the vertical part, as a lift of the
    /// curve to the tangent bundle would.
    FullLift,
}

impl std::fmt::Display for TransportMode {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            TransportMode::Standard => "standard",
            TransportMode::FullLift => "full-lift",
        })
    }
}

impl std::str::FromStr for TransportMode {
    type Err = FinslerError;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "standard" => Ok(TransportMode::Standard),
            "full-lift" => Ok(TransportMode::FullLift),
            other => Err(FinslerError::InvalidInput(format!(
                "unknown transport mode '{other}' (expected standard or full-lift)"
            ))),
        }
    }
}

/// Connection term `Θ(a)` of the covariant derivative of `a` along a curve
/// with velocity `xdot` (and acceleration `xddot` in full-lift mode).
pub fn connection_term(
    sample: &ConnectionSample,
    mode: TransportMode,
    a: &DVector<f64>,
    xdot: &DVector<f64>,
    xddot: Option<&DVector<f64>>,
) -> Result<DVector<f64>> {
    match (mode, xddot) {
        (TransportMode::Standard, _) => Ok(sample.transport_term(a, xdot)),
        (TransportMode::FullLift, Some(acc)) => Ok(sample.transport_term_lifted(a, xdot, acc)),
        (TransportMode::FullLift, None) => Err(FinslerError::InvalidInput(
            "full-lift transport needs the curve acceleration".into(),
        )),
    }
}

/// `δX/dt` at one point of a curve.
///
/// `xddot` is required in [`TransportMode::FullLift`] and ignored otherwise.
pub fn covariant_derivative(
    m: &FinslerMetric,
    x: &DVector<f64>,
    xdot: &DVector<f64>,
    field: &DVector<f64>,
    field_rate: &DVector<f64>,
    mode: TransportMode,
    xddot: Option<&DVector<f64>>,
) -> Result<DVector<f64>> {
    let n = m.dim();
    for v in [x, xdot, field, field_rate] {
        if v.len() != n {
            return Err(FinslerError::DimensionMismatch { expected: n, got: v.len() });
        }
    }
    let sample = connection_sample(m, &LineElement::new(x.clone(), xdot.clone()))?;
    Ok(field_rate + connection_term(&sample, mode, field, xdot, xddot)?)
}

/// A curve sampled on a uniform parameter grid.
#[derive(Debug, Clone, PartialEq)]
pub struct CurveSampling {
    t0: f64,
    dt: f64,
    positions: Vec<DVector<f64>>,
    velocities: Option<Vec<DVector<f64>>>,
}

impl CurveSampling {
    pub fn new(
        t0: f64,
        dt: f64,
        positions: Vec<DVector<f64>>,
        velocities: Option<Vec<DVector<f64>>>,
    ) -> Result<Self> {
        if positions.len() < MIN_SAMPLES {
            return Err(FinslerError::TooFewSamples { need: MIN_SAMPLES, got: positions.len() });
        }
        if !(dt.is_finite() && dt > 0.0 && t0.is_finite()) {
            return Err(FinslerError::InvalidInput(format!(
                "parameter grid must be finite and increasing (t0 = {t0}, dt = {dt})"
            )));
        }
        let n = positions[0].len();
        let all = positions.iter().chain(velocities.iter().flatten());
        for v in all {
            if v.len() != n {
                return Err(FinslerError::DimensionMismatch { expected: n, got: v.len() });
            }
            if v.iter().any(|c| !c.is_finite()) {
                return Err(FinslerError::NonFinite { context: "curve sample".into() });
            }
        }
        if let Some(vel) = &velocities {
            if vel.len() != positions.len() {
                return Err(FinslerError::InvalidInput(format!(
                    "{} velocities for {} positions",
                    vel.len(),
                    positions.len()
                )));
            }
        }
        Ok(Self { t0, dt, positions, velocities })
    }

    /// Samples `pos(t)` (and `vel(t)` when given) at `count` points of `[t0, t1]`.
    pub fn from_fn(
        t0: f64,
        t1: f64,
        count: usize,
        pos: impl Fn(f64) -> DVector<f64>,
        vel: Option<&dyn Fn(f64) -> DVector<f64>>,
    ) -> Result<Self> {
        if count < 2 {
            return Err(FinslerError::TooFewSamples { need: MIN_SAMPLES, got: count });
        }
        let dt = (t1 - t0) / (count - 1) as f64;
        let ts: Vec<f64> = (0..count).map(|j| t0 + dt * j as f64).collect();
        let positions = ts.iter().map(|&t| pos(t)).collect();
        let velocities = vel.map(|v| ts.iter().map(|&t| v(t)).collect());
        Self::new(t0, dt, positions, velocities)
    }

    pub fn len(&self) -> usize {
        self.positions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.positions.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.positions[0].len()
    }

    pub fn t0(&self) -> f64 {
        self.t0
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    pub fn param(&self, j: usize) -> f64 {
        self.t0 + self.dt * j as f64
    }

    pub fn params(&self) -> Vec<f64> {
        (0..self.len()).map(|j| self.param(j)).collect()
    }

    pub fn positions(&self) -> &[DVector<f64>] {
        &self.positions
    }

    pub fn given_velocities(&self) -> Option<&[DVector<f64>]> {
        self.velocities.as_deref()
    }

    /// Stored velocities, or stencil derivatives of the positions.
    pub fn velocities(&self) -> Vec<DVector<f64>> {
        match &self.velocities {
            Some(v) => v.clone(),
            None => self.differentiate(&self.positions),
        }
    }

    /// Stencil derivative of a field sampled on this grid.
    pub fn differentiate(&self, field: &[DVector<f64>]) -> Vec<DVector<f64>> {
        stencil::derivative(field, self.dt)
    }

    fn check_field(&self, field: &[DVector<f64>]) -> Result<()> {
        if field.len() != self.len() {
            return Err(FinslerError::InvalidInput(format!(
                "field has {} samples, curve has {}",
                field.len(),
                self.len()
            )));
        }
        Ok(())
    }
}

/// Connection samples at `(x_j, ẋ_j)` for every grid point.
pub fn samples_along(
    m: &FinslerMetric,
    positions: &[DVector<f64>],
    velocities: &[DVector<f64>],
) -> Result<Vec<ConnectionSample>> {
    positions
        .par_iter()
        .zip(velocities.par_iter())
        .map(|(x, v)| connection_sample(m, &LineElement::new(x.clone(), v.clone())))
        .collect()
}

/// Precomputed connection data along a sampled curve.
pub struct CurveFrame {
    pub velocities: Vec<DVector<f64>>,
    pub accelerations: Vec<DVector<f64>>,
    pub samples: Vec<ConnectionSample>,
    pub mode: TransportMode,
    dt: f64,
}

impl CurveFrame {
    pub fn new(m: &FinslerMetric, curve: &CurveSampling, mode: TransportMode) -> Result<Self> {
        if curve.dim() != m.dim() {
            return Err(FinslerError::DimensionMismatch { expected: m.dim(), got: curve.dim() });
        }
        let velocities = curve.velocities();
        let accelerations = curve.differentiate(&velocities);
        let samples = samples_along(m, curve.positions(), &velocities)?;
        Ok(Self { velocities, accelerations, samples, mode, dt: curve.dt() })
    }

    /// `δX/dt` for a field sampled on the curve grid.
    pub fn covariant(&self, field: &[DVector<f64>]) -> Result<Vec<DVector<f64>>> {
        let rate = stencil::derivative(field, self.dt);
        (0..field.len())
            .map(|j| {
                let term = connection_term(
                    &self.samples[j],
                    self.mode,
                    &field[j],
                    &self.velocities[j],
                    Some(&self.accelerations[j]),
                )?;
                Ok(&rate[j] + term)
            })
            .collect()
    }
}

/// `r(t) = d/dt g(X, Y) − g(∇X, Y) − g(X, ∇Y)`, with `g` taken at `(x, ẋ)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CompatibilityResidual {
    pub series: Vec<f64>,
    pub max_abs: f64,
}

pub fn compatibility_residual(
    m: &FinslerMetric,
    curve: &CurveSampling,
    x_field: &[DVector<f64>],
    y_field: &[DVector<f64>],
    mode: TransportMode,
) -> Result<CompatibilityResidual> {
    curve.check_field(x_field)?;
    curve.check_field(y_field)?;
    let frame = CurveFrame::new(m, curve, mode)?;
    compatibility_in_frame(&frame, x_field, y_field)
}

pub fn compatibility_in_frame(
    frame: &CurveFrame,
    x_field: &[DVector<f64>],
    y_field: &[DVector<f64>],
) -> Result<CompatibilityResidual> {
    let nx = frame.covariant(x_field)?;
    let ny = frame.covariant(y_field)?;
    let gxy: Vec<f64> = frame
        .samples
        .iter()
        .zip(x_field.iter().zip(y_field))
        .map(|(s, (a, b))| s.inner(a, b))
        .collect();
    let dg = stencil::derivative(&gxy, frame.dt);
    let series: Vec<f64> = (0..gxy.len())
        .map(|j| {
            let s = &frame.samples[j];
            dg[j] - s.inner(&nx[j], &y_field[j]) - s.inner(&x_field[j], &ny[j])
        })
        .collect();
    let max_abs = series.iter().fold(0.0, |m: f64, r| m.max(r.abs()));
    Ok(CompatibilityResidual { series, max_abs })
}

/// First curvature and second-curvature residual along an arc-length
/// parameterized curve.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FrenetData {
    pub k1: Vec<f64>,
    /// `‖∇Y + k₁X‖_g` with `Y = ∇X / k₁`; `None` where `k₁` is below
    /// [`FRENET_GEODESIC_CUTOFF`].
    pub k2_residual: Vec<Option<f64>>,
}

impl FrenetData {
    pub fn is_geodesic(&self) -> bool {
        self.k1.iter().all(|&k| k < FRENET_GEODESIC_CUTOFF)
    }

    pub fn k1_mean(&self) -> f64 {
        self.k1.iter().sum::<f64>() / self.k1.len() as f64
    }

    /// `(max k₁ − min k₁) / mean k₁`.
    pub fn k1_relative_variation(&self) -> f64 {
        let lo = self.k1.iter().copied().fold(f64::INFINITY, f64::min);
        let hi = self.k1.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let mean = self.k1_mean();
        if mean == 0.0 {
            0.0
        } else {
            (hi - lo) / mean
        }
    }

    pub fn k2_residual_max(&self) -> Option<f64> {
        let vals: Vec<f64> = self.k2_residual.iter().flatten().copied().collect();
        if vals.is_empty() {
            None
        } else {
            Some(vals.into_iter().fold(0.0, f64::max))
        }
    }
}

pub fn frenet_data(m: &FinslerMetric, curve: &CurveSampling, mode: TransportMode) -> Result<FrenetData> {
    let frame = CurveFrame::new(m, curve, mode)?;
    let tangent = &frame.velocities;
    let normal = frame.covariant(tangent)?;
    let k1: Vec<f64> = frame
        .samples
        .iter()
        .zip(&normal)
        .map(|(s, v)| s.norm_sq(v).max(0.0).sqrt())
        .collect();
    let unit_normal: Vec<DVector<f64>> = normal
        .iter()
        .zip(&k1)
        .map(|(v, &k)| if k < FRENET_GEODESIC_CUTOFF { v * 0.0 } else { v / k })
        .collect();
    let d_normal = frame.covariant(&unit_normal)?;
    let k2_residual = (0..k1.len())
        .map(|j| {
            if k1[j] < FRENET_GEODESIC_CUTOFF {
                return None;
            }
            let r = &d_normal[j] + &tangent[j] * k1[j];
            Some(frame.samples[j].norm_sq(&r).max(0.0).sqrt())
        })
        .collect();
    Ok(FrenetData { k1, k2_residual })
}

use std::f64::consts::TAU;

use nalgebra::DVector;
use serde::{Deserialize, Serialize};

use super::ode::{rk4_step, Dopri5, IntegratorStats};
use super::{state_residuals, CircleSpec, CircleTrace, CurveKind, CurveState, Grid, Residuals};
use crate::connection::{connection_sample, spray};
use crate::error::{FinslerError, Result};
use crate::metric::{FinslerMetric, LineElement};
use crate::spec;
use crate::transport::{connection_term, TransportMode};

/// Default RK4 steps per circle period `2π/k`.
pub const DEFAULT_STEPS_PER_PERIOD: usize = 4000;

/// Default absolute and relative tolerance of the adaptive integrator.
pub const DEFAULT_TOLERANCE: f64 = 1e-10;

/// Default bound on the normalized first-integral residuals before an
/// integration is aborted.
pub const DEFAULT_ABORT_THRESHOLD: f64 = 1e-3;

/// Normalization of a geodesic's initial direction is accepted within this
/// distance from `F = 1`.
const GEODESIC_NORMALIZE_WINDOW: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Integrator {
    Rk4,
    Dopri5 { atol: f64, rtol: f64 },
}

impl Integrator {
    pub fn adaptive() -> Self {
        Integrator::Dopri5 { atol: DEFAULT_TOLERANCE, rtol: DEFAULT_TOLERANCE }
    }

    fn label(&self) -> String {
        match self {
            Integrator::Rk4 => "rk4".into(),
            Integrator::Dopri5 { atol, rtol } => format!("dopri5(atol={atol:e},rtol={rtol:e})"),
        }
    }
}

/// Which leading coefficient drives `dv/ds`.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum CircleEquation {
    /// `dv/ds = −g(v,v) u − Θ(v,u)`.
    #[default]
    Intrinsic,
    /// `dv/ds = −k² u − Θ(v,u)`: for Minkowski norms this is
    /// `x‴ + k² x′ = 0`.
    FixedCurvature,
}

impl std::fmt::Display for CircleEquation {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            CircleEquation::Intrinsic => "intrinsic",
            CircleEquation::FixedCurvature => "fixed-curvature",
        })
    }
}

impl std::str::FromStr for CircleEquation {
    type Err = FinslerError;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "intrinsic" => Ok(CircleEquation::Intrinsic),
            "fixed-curvature" => Ok(CircleEquation::FixedCurvature),
            other => Err(FinslerError::InvalidInput(format!(
                "unknown circle equation '{other}' (expected intrinsic or fixed-curvature)"
            ))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IntegrationOptions {
    pub integrator: Integrator,
    /// Output spacing (and RK4 step). Defaults to `(2π/k)/4000` for circles
    /// and `2π/4000` for geodesics.
    pub step: Option<f64>,
    pub mode: TransportMode,
    pub equation: CircleEquation,
    /// Abort once `|g(u,u)−1|`, `|g(u,v)|/k` or `|g(v,v)−k²|/k²` exceeds this.
    pub abort_threshold: Option<f64>,
}

impl Default for IntegrationOptions {
    fn default() -> Self {
        Self {
            integrator: Integrator::Rk4,
            step: None,
            mode: TransportMode::Standard,
            equation: CircleEquation::Intrinsic,
            abort_threshold: Some(DEFAULT_ABORT_THRESHOLD),
        }
    }
}

impl IntegrationOptions {
    pub fn with_step(mut self, step: f64) -> Self {
        self.step = Some(step);
        self
    }

    pub fn with_integrator(mut self, integrator: Integrator) -> Self {
        self.integrator = integrator;
        self
    }

    pub fn with_mode(mut self, mode: TransportMode) -> Self {
        self.mode = mode;
        self
    }

    pub fn with_equation(mut self, equation: CircleEquation) -> Self {
        self.equation = equation;
        self
    }

    pub fn with_abort_threshold(mut self, threshold: Option<f64>) -> Self {
        self.abort_threshold = threshold;
        self
    }
}

fn split(y: &DVector<f64>, n: usize, parts: usize) -> Vec<DVector<f64>> {
    (0..parts).map(|p| y.rows(p * n, n).into_owned()).collect()
}

fn join(parts: &[&DVector<f64>]) -> DVector<f64> {
    DVector::from_iterator(
        parts.iter().map(|p| p.len()).sum(),
        parts.iter().flat_map(|p| p.iter().copied()),
    )
}

/// Integrates a circle of curvature `spec.k` from `s = 0` to `s_max`.
///
/// Residual growth past the abort threshold, or a line element leaving the
/// admissible region, ends the run with [`FinslerError::Aborted`] carrying
/// the trace up to that point.
pub fn circle_integrate(
    m: &FinslerMetric,
    spec: &CircleSpec,
    s_max: f64,
    opts: &IntegrationOptions,
) -> Result<CircleTrace> {
    let n = m.dim();
    if spec.dim() != n {
        return Err(FinslerError::DimensionMismatch { expected: n, got: spec.dim() });
    }
    let k = spec.k;
    let step = opts.step.unwrap_or(TAU / k / DEFAULT_STEPS_PER_PERIOD as f64);
    let grid = Grid::covering(s_max, step)?;
    let (mode, equation) = (opts.mode, opts.equation);
    let mut rhs = |y: &DVector<f64>| -> Result<DVector<f64>> {
        let p = split(y, n, 3);
        let (x, u, v) = (&p[0], &p[1], &p[2]);
        let s = connection_sample(m, &LineElement::new(x.clone(), u.clone()))?;
        let du = v - s.transport_term(u, u);
        let lead = match equation {
            CircleEquation::Intrinsic => s.norm_sq(v),
            CircleEquation::FixedCurvature => k * k,
        };
        let dv = -(u * lead) - connection_term(&s, mode, v, u, Some(&du))?;
        Ok(join(&[u, &du, &dv]))
    };
    let y0 = join(&[&spec.p, &spec.x, &(&spec.y * k)]);
    let state_of = |y: &DVector<f64>| -> Result<CurveState> {
        let p = split(y, n, 3);
        Ok(CurveState { x: p[0].clone(), u: p[1].clone(), v: p[2].clone() })
    };
    let method = format!("{}; transport={mode}; equation={equation}", opts.integrator.label());
    let header = TraceHeader { metric: spec::render(m), kind: CurveKind::Circle, k, grid, method };
    drive(m, header, &mut rhs, y0, &state_of, opts)
}

/// Integrates `ẍ + 2G(x, ẋ) = 0` from `(p, X)` to `s_max`.
///
/// `X` is rescaled to `F(p, X) = 1` when it is within `1e-6` of unit length.
pub fn geodesic_integrate(
    m: &FinslerMetric,
    p: &DVector<f64>,
    x: &DVector<f64>,
    s_max: f64,
    opts: &IntegrationOptions,
) -> Result<CircleTrace> {
    let n = m.dim();
    let f = m.check_admissible(&LineElement::new(p.clone(), x.clone()))?;
    if (f - 1.0).abs() > GEODESIC_NORMALIZE_WINDOW {
        return Err(FinslerError::InvalidInput(format!(
            "geodesic initial direction has F = {f}, expected 1"
        )));
    }
    let x = x / f;
    let step = opts.step.unwrap_or(TAU / DEFAULT_STEPS_PER_PERIOD as f64);
    let grid = Grid::covering(s_max, step)?;
    let mut rhs = |y: &DVector<f64>| -> Result<DVector<f64>> {
        let p = split(y, n, 2);
        let g = spray(m, &LineElement::new(p[0].clone(), p[1].clone()))?;
        Ok(join(&[&p[1], &(g * -2.0)]))
    };
    let state_of = |y: &DVector<f64>| -> Result<CurveState> {
        let p = split(y, n, 2);
        let s = connection_sample(m, &LineElement::new(p[0].clone(), p[1].clone()))?;
        let v = &s.spray * -2.0 + s.transport_term(&p[1], &p[1]);
        Ok(CurveState { x: p[0].clone(), u: p[1].clone(), v })
    };
    let y0 = join(&[p, &x]);
    let header = TraceHeader {
        metric: spec::render(m),
        kind: CurveKind::Geodesic,
        k: 0.0,
        grid,
        method: opts.integrator.label(),
    };
    drive(m, header, &mut rhs, y0, &state_of, opts)
}

struct TraceHeader {
    metric: String,
    kind: CurveKind,
    k: f64,
    grid: Grid,
    method: String,
}

impl TraceHeader {
    fn into_trace(self, states: Vec<CurveState>, residuals: Residuals, stats: IntegratorStats) -> CircleTrace {
        CircleTrace {
            metric: self.metric,
            kind: self.kind,
            k: self.k,
            grid: self.grid,
            states,
            residuals,
            stats,
            method: self.method,
        }
    }
}

fn drive<F>(
    m: &FinslerMetric,
    header: TraceHeader,
    rhs: &mut F,
    y0: DVector<f64>,
    state_of: &dyn Fn(&DVector<f64>) -> Result<CurveState>,
    opts: &IntegrationOptions,
) -> Result<CircleTrace>
where
    F: FnMut(&DVector<f64>) -> Result<DVector<f64>>,
{
    let grid = header.grid;
    let k = header.k;
    let mut states = Vec::with_capacity(grid.count);
    let mut residuals = Residuals::default();
    let mut stats = IntegratorStats::default();
    let mut dopri = match opts.integrator {
        Integrator::Dopri5 { atol, rtol } => Some(Dopri5::new(atol, rtol)),
        Integrator::Rk4 => None,
    };
    let mut y = y0;
    for j in 0..grid.count {
        if j > 0 {
            let next = match dopri.as_mut() {
                Some(d) => d.advance(rhs, &y, grid.ds, &mut stats),
                None => rk4_step(rhs, &y, grid.ds, &mut stats),
            };
            y = match next {
                Ok(next) => next,
                Err(e @ FinslerError::StepRejectionOverflow { .. }) => return Err(e),
                Err(e) => {
                    return Err(abort(header, states, residuals, stats, grid.at(j), e.to_string()));
                }
            };
        }
        let recorded = state_of(&y).and_then(|st| {
            let r = state_residuals(m, &st, k)?;
            Ok((st, r))
        });
        let (st, (unit, orth, curv)) = match recorded {
            Ok(v) => v,
            Err(e) => return Err(abort(header, states, residuals, stats, grid.at(j), e.to_string())),
        };
        if st.x.iter().chain(st.u.iter()).chain(st.v.iter()).any(|c| !c.is_finite()) {
            return Err(abort(header, states, residuals, stats, grid.at(j), "non-finite state".into()));
        }
        states.push(st);
        residuals.push(unit, orth, curv);
        if let Some(limit) = opts.abort_threshold {
            let worst = if k > 0.0 {
                unit.abs().max(orth.abs() / k).max(curv.abs() / (k * k))
            } else {
                unit.abs()
            };
            if worst > limit {
                let reason = format!(
                    "first-integral residual {worst:e} exceeds {limit:e} (unit {unit:e}, orth {orth:e}, curv {curv:e})"
                );
                return Err(abort(header, states, residuals, stats, grid.at(j), reason));
            }
        }
    }
    Ok(header.into_trace(states, residuals, stats))
}

fn abort(
    header: TraceHeader,
    states: Vec<CurveState>,
    residuals: Residuals,
    stats: IntegratorStats,
    at: f64,
    reason: String,
) -> FinslerError {
    let mut partial = header.into_trace(states, residuals, stats);
    partial.grid.count = partial.states.len();
    FinslerError::Aborted { at, reason, partial: Box::new(partial) }
}

/// Exact solution of `x‴ + k² x′ = 0` through `(x0, u0, v0)` on `grid`.
///
/// Requires an `x`-independent metric and `k = √g_(x0,u0)(v0,v0)` to `1e-10`.
pub fn minkowski_circle_closed_form(
    m: &FinslerMetric,
    x0: &DVector<f64>,
    u0: &DVector<f64>,
    v0: &DVector<f64>,
    k: f64,
    grid: Grid,
) -> Result<CircleTrace> {
    if !m.is_minkowski() {
        return Err(FinslerError::InvalidMetric("closed-form circles need an x-independent metric".into()));
    }
    if !(k.is_finite() && k > 0.0) {
        return Err(FinslerError::InvalidInput(format!("curvature must be positive (got {k})")));
    }
    let s0 = connection_sample(m, &LineElement::new(x0.clone(), u0.clone()))?;
    let k0 = s0.norm_sq(v0).max(0.0).sqrt();
    if (k0 - k).abs() > 1e-10 {
        return Err(FinslerError::InvalidInput(format!(
            "k = {k} disagrees with √g(v0,v0) = {k0}"
        )));
    }
    let mut states = Vec::with_capacity(grid.count);
    let mut residuals = Residuals::default();
    for s in grid.values() {
        let (sn, cs) = (k * s).sin_cos();
        let st = CurveState {
            x: x0 + u0 * (sn / k) + v0 * ((1.0 - cs) / (k * k)),
            u: u0 * cs + v0 * (sn / k),
            v: u0 * (-k * sn) + v0 * cs,
        };
        let (a, b, c) = state_residuals(m, &st, k)?;
        residuals.push(a, b, c);
        states.push(st);
    }
    Ok(CircleTrace {
        metric: spec::render(m),
        kind: CurveKind::Circle,
        k,
        grid,
        states,
        residuals,
        stats: IntegratorStats::default(),
        method: "closed-form".into(),
    })
}

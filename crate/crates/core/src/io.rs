//! Trace and report files.
//!
//! Trace JSON:
//!
//! ```text
//! { "metric": "<spec>", "kind": "circle" | "geodesic", "k": …,
//!   "grid": { "s0": …, "ds": …, "count": … },
//!   "states": [ [[x…], [u…], [v…]], … ],
//!   "residuals": { "unit": […], "orth": […], "curv": […] },
//!   "summary": { "max_unit": …, "max_orth": …, "max_curv": …, "method": "…",
//!                "steps": …, "rejected": …, "evaluations": … } }
//! ```
//!
//! Trace CSV has the header `s,x1..xn,u1..un,v1..vn,unit,orth,curv` and
//! writes every number with 17 significant digits.
//!
//! Non-finite numbers are never written; encountering one is an error.

use nalgebra::DVector;
use serde::{Deserialize, Serialize};

use crate::circleflow::{CircleTrace, CurveKind, CurveState, Grid, IntegratorStats, Residuals};
use crate::error::{FinslerError, Result};
use crate::transport::CurveSampling;
use crate::vogel::{ConformalReport, PreservationReport};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TraceSummary {
    pub max_unit: f64,
    pub max_orth: f64,
    pub max_curv: f64,
    pub method: String,
    pub steps: usize,
    pub rejected: usize,
    pub evaluations: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct TraceFile {
    metric: String,
    kind: CurveKind,
    k: f64,
    grid: Grid,
    states: Vec<[Vec<f64>; 3]>,
    residuals: Residuals,
    summary: TraceSummary,
}

pub fn trace_summary(trace: &CircleTrace) -> TraceSummary {
    TraceSummary {
        max_unit: trace.residuals.max_unit(),
        max_orth: trace.residuals.max_orth(),
        max_curv: trace.residuals.max_curv(),
        method: trace.method.clone(),
        steps: trace.stats.steps,
        rejected: trace.stats.rejected,
        evaluations: trace.stats.evaluations,
    }
}

fn ensure_finite<'a>(what: &str, values: impl IntoIterator<Item = &'a f64>) -> Result<()> {
    if values.into_iter().any(|v| !v.is_finite()) {
        return Err(FinslerError::NonFinite { context: what.to_string() });
    }
    Ok(())
}

fn check_trace(trace: &CircleTrace) -> Result<()> {
    ensure_finite("trace header", [&trace.k, &trace.grid.s0, &trace.grid.ds])?;
    for st in &trace.states {
        ensure_finite("trace state", st.x.iter().chain(st.u.iter()).chain(st.v.iter()))?;
    }
    let r = &trace.residuals;
    ensure_finite("trace residuals", r.unit.iter().chain(&r.orth).chain(&r.curv))?;
    let n = trace.states.len();
    if trace.grid.count != n || r.unit.len() != n || r.orth.len() != n || r.curv.len() != n {
        return Err(FinslerError::InvalidInput(format!(
            "trace has {n} states but grid count {} and residual lengths {}/{}/{}",
            trace.grid.count,
            r.unit.len(),
            r.orth.len(),
            r.curv.len()
        )));
    }
    let dim = trace.dim();
    if trace
        .states
        .iter()
        .any(|s| s.x.len() != dim || s.u.len() != dim || s.v.len() != dim)
    {
        return Err(FinslerError::InvalidInput("trace states have inconsistent dimensions".into()));
    }
    Ok(())
}

pub fn trace_to_json(trace: &CircleTrace) -> Result<String> {
    check_trace(trace)?;
    let file = TraceFile {
        metric: trace.metric.clone(),
        kind: trace.kind,
        k: trace.k,
        grid: trace.grid,
        states: trace
            .states
            .iter()
            .map(|s| [s.x.as_slice().to_vec(), s.u.as_slice().to_vec(), s.v.as_slice().to_vec()])
            .collect(),
        residuals: trace.residuals.clone(),
        summary: trace_summary(trace),
    };
    serde_json::to_string(&file).map_err(|e| FinslerError::InvalidInput(format!("cannot serialize trace: {e}")))
}

pub fn trace_from_json(text: &str) -> Result<CircleTrace> {
    let file: TraceFile =
        serde_json::from_str(text).map_err(|e| FinslerError::InvalidInput(format!("malformed trace JSON: {e}")))?;
    let summary = &file.summary;
    ensure_finite("trace summary", [&summary.max_unit, &summary.max_orth, &summary.max_curv])?;
    let trace = CircleTrace {
        metric: file.metric,
        kind: file.kind,
        k: file.k,
        grid: file.grid,
        states: file
            .states
            .into_iter()
            .map(|[x, u, v]| CurveState { x: DVector::from_vec(x), u: DVector::from_vec(u), v: DVector::from_vec(v) })
            .collect(),
        residuals: file.residuals,
        stats: IntegratorStats {
            steps: summary.steps,
            rejected: summary.rejected,
            evaluations: summary.evaluations,
        },
        method: summary.method.clone(),
    };
    check_trace(&trace)?;
    Ok(trace)
}

fn num(v: f64) -> String {
    format!("{v:.16e}")
}

pub fn csv_header(n: usize) -> String {
    let mut cols = vec!["s".to_string()];
    for prefix in ["x", "u", "v"] {
        cols.extend((1..=n).map(|i| format!("{prefix}{i}")));
    }
    cols.extend(["unit", "orth", "curv"].map(String::from));
    cols.join(",")
}

pub fn trace_to_csv(trace: &CircleTrace) -> Result<String> {
    check_trace(trace)?;
    let mut out = csv_header(trace.dim());
    out.push('\n');
    for (j, st) in trace.states.iter().enumerate() {
        let mut row = vec![num(trace.grid.at(j))];
        row.extend(st.x.iter().chain(st.u.iter()).chain(st.v.iter()).map(|&v| num(v)));
        row.extend([trace.residuals.unit[j], trace.residuals.orth[j], trace.residuals.curv[j]].map(num));
        out.push_str(&row.join(","));
        out.push('\n');
    }
    Ok(out)
}

/// Reads a sampled curve from CSV.
///
/// The first column is the parameter (`t` or `s`) and must be uniformly
/// spaced; columns `x1..xn` give positions and optional `u1..un` velocities.
/// Other columns are ignored, so trace CSV files are accepted as-is.
pub fn curve_from_csv(text: &str) -> Result<CurveSampling> {
    let mut lines = text.lines().filter(|l| !l.trim().is_empty());
    let header: Vec<&str> = lines
        .next()
        .ok_or_else(|| FinslerError::InvalidInput("empty CSV".into()))?
        .split(',')
        .map(str::trim)
        .collect();
    if !matches!(header.first(), Some(&"t") | Some(&"s")) {
        return Err(FinslerError::InvalidInput("first CSV column must be 't' or 's'".into()));
    }
    let column = |name: &str| header.iter().position(|h| *h == name);
    let xs: Vec<usize> = (1..).map_while(|i| column(&format!("x{i}"))).collect();
    if xs.is_empty() {
        return Err(FinslerError::InvalidInput("CSV has no x1 column".into()));
    }
    let us: Vec<usize> = (1..=xs.len()).map_while(|i| column(&format!("u{i}"))).collect();
    let with_vel = us.len() == xs.len();
    let mut ts = Vec::new();
    let mut pos = Vec::new();
    let mut vel = Vec::new();
    for (row_no, line) in lines.enumerate() {
        let fields: Vec<&str> = line.split(',').map(str::trim).collect();
        if fields.len() != header.len() {
            return Err(FinslerError::InvalidInput(format!(
                "CSV row {} has {} fields, header has {}",
                row_no + 2,
                fields.len(),
                header.len()
            )));
        }
        let parse = |i: usize| -> Result<f64> {
            let v: f64 = fields[i].parse().map_err(|_| {
                FinslerError::InvalidInput(format!("CSV row {}: bad number '{}'", row_no + 2, fields[i]))
            })?;
            ensure_finite("CSV value", [&v])?;
            Ok(v)
        };
        ts.push(parse(0)?);
        pos.push(DVector::from_vec(xs.iter().map(|&i| parse(i)).collect::<Result<Vec<_>>>()?));
        if with_vel {
            vel.push(DVector::from_vec(us.iter().map(|&i| parse(i)).collect::<Result<Vec<_>>>()?));
        }
    }
    if ts.len() < 2 {
        return Err(FinslerError::TooFewSamples { need: crate::transport::MIN_SAMPLES, got: ts.len() });
    }
    let dt = (ts[ts.len() - 1] - ts[0]) / (ts.len() - 1) as f64;
    let scale = ts.iter().fold(dt.abs(), |m, t| m.max(t.abs()));
    for (j, t) in ts.iter().enumerate() {
        if (t - (ts[0] + dt * j as f64)).abs() > 1e-9 * scale {
            return Err(FinslerError::InvalidInput(format!("parameter grid is not uniform at row {}", j + 2)));
        }
    }
    CurveSampling::new(ts[0], dt, pos, with_vel.then_some(vel))
}

/// Reads a trace from JSON, or a curve from CSV when the text does not
/// start with `{`.
pub enum CurveInput {
    Trace(Box<CircleTrace>),
    Curve(CurveSampling),
}

impl CurveInput {
    pub fn parse(text: &str) -> Result<Self> {
        if text.trim_start().starts_with('{') {
            Ok(CurveInput::Trace(Box::new(trace_from_json(text)?)))
        } else {
            Ok(CurveInput::Curve(curve_from_csv(text)?))
        }
    }

    /// The curve with the trace's stored tangents as velocities.
    pub fn sampling(&self) -> Result<CurveSampling> {
        match self {
            CurveInput::Trace(t) => t.sampling(),
            CurveInput::Curve(c) => Ok(c.clone()),
        }
    }
}

fn check_opt(what: &str, v: &Option<f64>) -> Result<()> {
    ensure_finite(what, v.iter())
}

fn check_preservation(report: &PreservationReport) -> Result<()> {
    ensure_finite("report", report.point.iter().chain([&report.orthogonality]))?;
    check_opt("report", &report.mean_k_ratio)?;
    for r in &report.records {
        ensure_finite("circle record", r.x.iter().chain(&r.y).chain([&r.k, &r.gbar_xy]))?;
        for v in [&r.max_rho, &r.rho_at_p, &r.k_bar, &r.k_ratio] {
            check_opt("circle record", v)?;
        }
    }
    Ok(())
}

fn check_conformal(report: &ConformalReport) -> Result<()> {
    for p in &report.probes {
        ensure_finite("probe", p.x.iter().chain([&p.sigma, &p.variance, &p.tensor_residual]))?;
    }
    if let Some(w) = &report.worst {
        ensure_finite("worst pair", w.x.iter().chain(&w.y1).chain(&w.y2).chain([&w.log_ratio1, &w.log_ratio2]))?;
    }
    Ok(())
}

fn to_pretty<T: Serialize>(value: &T) -> Result<String> {
    serde_json::to_string_pretty(value).map_err(|e| FinslerError::InvalidInput(format!("cannot serialize report: {e}")))
}

pub fn preservation_report_to_json(report: &PreservationReport) -> Result<String> {
    check_preservation(report)?;
    to_pretty(report)
}

pub fn conformal_report_to_json(report: &ConformalReport) -> Result<String> {
    check_conformal(report)?;
    to_pretty(report)
}

/// Both analyses of a metric pair, as written by the `vogel` subcommand.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VogelReport {
    pub preservation: PreservationReport,
    pub conformality: ConformalReport,
}

pub fn vogel_report_to_json(report: &VogelReport) -> Result<String> {
    check_preservation(&report.preservation)?;
    check_conformal(&report.conformality)?;
    to_pretty(report)
}

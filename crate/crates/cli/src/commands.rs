use std::error::Error;
use std::f64::consts::TAU;
use std::fs;
use std::path::{Path, PathBuf};

use finsler::circleflow::{
    arclength_reparametrize, circle_integrate, circle_test, geodesic_integrate, CircleEquation, CircleSpec,
    CircleTrace, IntegrationOptions, Integrator, DEFAULT_TOLERANCE,
};
use finsler::io::{self, CurveInput, VogelReport};
use finsler::spec::{parse_metric, parse_metric_spec, render};
use finsler::tensor::Tensor3;
use finsler::transport::{frenet_data, CurveSampling, TransportMode};
use finsler::vogel::{conformality_check, preservation_harness, probe_directions, HarnessConfig};
use finsler::{connection_sample, FinslerError, FinslerMetric, LineElement};
use nalgebra::{DMatrix, DVector};
use serde_json::{json, Value};

use crate::tolerances::Tolerances;
use crate::{
    CheckCircleArgs, Command, Equation, Format, FrenetArgs, IndicatrixArgs, IntegratorChoice, Kind, MetricInfoArgs,
    TraceArgs, VogelArgs,
};

type CmdResult<T = u8> = Result<T, Box<dyn Error>>;

pub fn run(command: Command) -> CmdResult {
    let tol = Tolerances::from_env()?;
    match command {
        Command::MetricInfo(a) => metric_info(a),
        Command::Trace(a) => trace(a, &tol),
        Command::CheckCircle(a) => check_circle(a, &tol),
        Command::Frenet(a) => frenet(a),
        Command::Vogel(a) => vogel(a, &tol),
        Command::Indicatrix(a) => indicatrix(a),
    }
}

fn parse_vector(what: &str, text: &str) -> CmdResult<DVector<f64>> {
    let values = text
        .split(',')
        .map(|s| {
            let s = s.trim();
            match s.parse::<f64>() {
                Ok(v) if v.is_finite() => Ok(v),
                _ => Err(format!("{what}: bad number '{s}'")),
            }
        })
        .collect::<Result<Vec<_>, _>>()?;
    Ok(DVector::from_vec(values))
}

fn check_dim(what: &str, v: &DVector<f64>, m: &FinslerMetric) -> CmdResult<()> {
    if v.len() != m.dim() {
        return Err(format!("{what} has {} components, metric dimension is {}", v.len(), m.dim()).into());
    }
    Ok(())
}

fn write_output(out: Option<&Path>, text: &str) -> CmdResult<()> {
    match out {
        Some(path) => fs::write(path, text).map_err(|e| format!("cannot write {}: {e}", path.display()))?,
        None => emit(text)?,
    }
    Ok(())
}

/// Writes to standard output; a closed pipe is not an error.
fn emit(text: &str) -> CmdResult<()> {
    use std::io::Write;
    let mut out = std::io::stdout().lock();
    match out.write_all(text.as_bytes()).and_then(|_| out.flush()) {
        Err(e) if e.kind() != std::io::ErrorKind::BrokenPipe => Err(e.into()),
        _ => Ok(()),
    }
}

fn read_input(path: &Path) -> CmdResult<String> {
    Ok(fs::read_to_string(path).map_err(|e| format!("cannot read {}: {e}", path.display()))?)
}

fn finite_json(value: Value) -> CmdResult<String> {
    fn walk(v: &Value) -> bool {
        match v {
            Value::Number(n) => n.as_f64().is_some_and(f64::is_finite),
            Value::Array(a) => a.iter().all(walk),
            Value::Object(o) => o.values().all(walk),
            _ => true,
        }
    }
    // serde_json maps NaN and ±∞ to null, so a finite check has to happen on
    // the inputs; this only guards against numbers that slipped through.
    if !walk(&value) {
        return Err(Box::new(FinslerError::NonFinite { context: "JSON output".into() }));
    }
    Ok(serde_json::to_string_pretty(&value)? + "\n")
}

fn ensure_finite(context: &str, values: impl IntoIterator<Item = f64>) -> CmdResult<()> {
    if values.into_iter().all(f64::is_finite) {
        Ok(())
    } else {
        Err(Box::new(FinslerError::NonFinite { context: context.into() }))
    }
}

fn matrix_rows(m: &DMatrix<f64>) -> Vec<Vec<f64>> {
    m.row_iter().map(|r| r.iter().copied().collect()).collect()
}

fn tensor_nested(t: &Tensor3) -> Vec<Vec<Vec<f64>>> {
    let n = t.dim();
    (0..n).map(|i| (0..n).map(|j| (0..n).map(|k| t[(i, j, k)]).collect()).collect()).collect()
}

fn metric_info(a: MetricInfoArgs) -> CmdResult {
    let spec = parse_metric_spec(&a.metric)?;
    let m = &spec.metric;
    let (xs, ys) = a.at.split_once(';').ok_or("--at expects 'x1,x2,…;y1,y2,…'")?;
    let x = parse_vector("--at position", xs)?;
    let y = parse_vector("--at direction", ys)?;
    check_dim("--at position", &x, m)?;
    check_dim("--at direction", &y, m)?;
    let le = LineElement::new(x.clone(), y.clone());
    let f = m.check_admissible(&le)?;
    let s = connection_sample(m, &le)?;
    ensure_finite(
        "connection data",
        s.g.iter()
            .chain(s.ginv.iter())
            .chain(s.cartan.as_slice())
            .chain(s.spray.iter())
            .chain(s.nonlinear.iter())
            .chain(s.christoffel.as_slice())
            .copied(),
    )?;
    let out = json!({
        "metric": spec.canonical(),
        "x": x.as_slice(),
        "y": y.as_slice(),
        "F": f,
        "g": matrix_rows(&s.g),
        "g_inv": matrix_rows(&s.ginv),
        "cartan": tensor_nested(&s.cartan),
        "spray": s.spray.as_slice(),
        "nonlinear": matrix_rows(&s.nonlinear),
        "christoffel": tensor_nested(&s.christoffel),
    });
    emit(&finite_json(out)?)?;
    Ok(0)
}

fn trace_format(a: &TraceArgs) -> Format {
    a.format.unwrap_or_else(|| match a.out.as_deref().and_then(Path::extension) {
        Some(ext) if ext.eq_ignore_ascii_case("csv") => Format::Csv,
        _ => Format::Json,
    })
}

fn write_trace(t: &CircleTrace, format: Format, out: Option<&Path>) -> CmdResult<()> {
    let text = match format {
        Format::Json => io::trace_to_json(t)? + "\n",
        Format::Csv => io::trace_to_csv(t)?,
    };
    write_output(out, &text)
}

fn trace(a: TraceArgs, tol: &Tolerances) -> CmdResult {
    let m = parse_metric(&a.metric)?;
    let p = parse_vector("--p", &a.p)?;
    let x = parse_vector("--X", &a.x)?;
    check_dim("--p", &p, &m)?;
    check_dim("--X", &x, &m)?;
    let integrator = match a.integrator {
        IntegratorChoice::Rk4 => Integrator::Rk4,
        IntegratorChoice::Dopri5 => {
            let t = a.tol.unwrap_or(DEFAULT_TOLERANCE);
            Integrator::Dopri5 { atol: t, rtol: t }
        }
    };
    let abort = if a.no_abort { None } else { a.abort.or(tol.abort) };
    let mut opts = IntegrationOptions::default()
        .with_integrator(integrator)
        .with_mode(TransportMode::from(a.mode))
        .with_equation(match a.equation {
            Equation::Intrinsic => CircleEquation::Intrinsic,
            Equation::FixedCurvature => CircleEquation::FixedCurvature,
        })
        .with_abort_threshold(abort);
    if let Some(step) = a.step {
        opts = opts.with_step(step);
    }
    let result = match a.kind {
        Kind::Circle => {
            let y = parse_vector("--Y", a.y.as_deref().ok_or("--Y is required for circles")?)?;
            check_dim("--Y", &y, &m)?;
            let k = a.k.ok_or("--k is required for circles")?;
            let spec = if a.orthonormalize {
                CircleSpec::orthonormalized(&m, p, x, y, k)?
            } else {
                CircleSpec::new(&m, p, x, y, k)?
            };
            circle_integrate(&m, &spec, a.smax, &opts)
        }
        Kind::Geodesic => {
            if a.y.is_some() || a.k.is_some() {
                return Err("--Y and --k apply to circles only".into());
            }
            geodesic_integrate(&m, &p, &x, a.smax, &opts)
        }
    };
    let format = trace_format(&a);
    match result {
        Ok(t) => {
            write_trace(&t, format, a.out.as_deref())?;
            Ok(0)
        }
        Err(FinslerError::Aborted { at, reason, partial }) => {
            if let Some(out) = a.out.as_deref() {
                write_trace(&partial, format, Some(out))?;
                eprintln!("partial trace written to {}", out.display());
            }
            Err(format!("integration aborted at s = {at}: {reason}").into())
        }
        Err(e) => Err(e.into()),
    }
}

/// Loads a curve and the metric to analyse it with.
fn load_curve(metric: Option<&str>, input: &PathBuf) -> CmdResult<(FinslerMetric, String, CurveSampling)> {
    let parsed = CurveInput::parse(&read_input(input)?)?;
    let spec = match (metric, &parsed) {
        (Some(s), _) => s.to_string(),
        (None, CurveInput::Trace(t)) => t.metric.clone(),
        (None, CurveInput::Curve(_)) => return Err("--metric is required for CSV input".into()),
    };
    let m = parse_metric(&spec)?;
    let curve = parsed.sampling()?;
    if curve.dim() != m.dim() {
        return Err(format!("curve dimension {} does not match metric dimension {}", curve.dim(), m.dim()).into());
    }
    Ok((m, spec, curve))
}

fn check_circle(a: CheckCircleArgs, tol: &Tolerances) -> CmdResult {
    let thresholds = tol.thresholds_with(&a.thresholds)?;
    let (m, _, mut curve) = load_curve(a.metric.as_deref(), &a.input)?;
    if a.reparametrize {
        curve = arclength_reparametrize(&m, &curve, None)?;
    }
    let r = circle_test(&m, &curve, TransportMode::from(a.mode), &thresholds)?;
    ensure_finite("circle test", [r.max_rho, r.max_k1, r.k1_relative_variation()])?;
    let out = json!({
        "metric": render(&m),
        "verdict": r.verdict.to_string(),
        "max_rho": r.max_rho,
        "max_k1": r.max_k1,
        "k1_relative_variation": r.k1_relative_variation(),
        "samples": curve.len(),
        "thresholds": { "parallelism": thresholds.parallelism, "geodesic": thresholds.geodesic },
    });
    write_output(a.out.as_deref(), &finite_json(out)?)?;
    Ok(0)
}

fn frenet(a: FrenetArgs) -> CmdResult {
    let (m, _, curve) = load_curve(a.metric.as_deref(), &a.input)?;
    let fd = frenet_data(&m, &curve, TransportMode::from(a.mode))?;
    ensure_finite("first curvature", fd.k1.iter().copied())?;
    ensure_finite("second Frenet residual", fd.k2_residual.iter().flatten().copied())?;
    let mut out = json!({
        "metric": render(&m),
        "geodesic": fd.is_geodesic(),
        "k1_mean": fd.k1_mean(),
        "k1_relative_variation": fd.k1_relative_variation(),
        "k2_residual_max": fd.k2_residual_max(),
    });
    if a.series {
        out["k1"] = json!(fd.k1);
        out["k2_residual"] = json!(fd.k2_residual);
    }
    write_output(a.out.as_deref(), &finite_json(out)?)?;
    Ok(0)
}

fn vogel(a: VogelArgs, tol: &Tolerances) -> CmdResult {
    let m = parse_metric(&a.metric_a)?;
    let mbar = parse_metric(&a.metric_b)?;
    let p = parse_vector("--point", &a.point)?;
    check_dim("--point", &p, &m)?;
    let mut config = HarnessConfig { thresholds: tol.thresholds_with(&a.thresholds)?, ..HarnessConfig::default() };
    if let Some(k) = &a.kset {
        config.k_values = parse_vector("--kset", k)?.as_slice().to_vec();
    }
    if let Some(n) = a.pairs {
        config.pairs = n;
    }
    if let Some(seed) = a.seed {
        config.seed = seed;
    }
    if let Some(periods) = a.periods {
        config.periods = periods;
    }
    if let Some(n) = a.steps_per_period {
        config.steps_per_period = n;
    }
    config.mode = TransportMode::from(a.mode);
    config.integration = config.integration.with_mode(config.mode).with_abort_threshold(tol.abort);

    let preservation = preservation_harness(&m, &mbar, &p, &config)?;
    let directions = probe_directions(m.dim(), a.directions, config.seed);
    let conformality = conformality_check(&m, &mbar, std::slice::from_ref(&p), &directions)?;
    let negative = preservation.verdict == finsler::vogel::PreservationVerdict::NonPreserving
        || conformality.verdict == finsler::vogel::ConformalVerdict::NotConformal;
    let summary = format!(
        "preservation: {} ({} of {} circles failing, {} errors)\nconformality: {}\n",
        preservation.verdict,
        preservation.failing().count(),
        preservation.records.len(),
        preservation.errors,
        conformality.verdict
    );
    let text = io::vogel_report_to_json(&VogelReport { preservation, conformality })? + "\n";
    match a.out.as_deref() {
        Some(path) => {
            write_output(Some(path), &text)?;
            emit(&summary)?;
        }
        None => {
            emit(&text)?;
            eprint!("{summary}");
        }
    }
    Ok(if a.expect && negative { 2 } else { 0 })
}

fn indicatrix(a: IndicatrixArgs) -> CmdResult {
    let m = FinslerMetric::minkowski_randers(a.b)?;
    if a.samples == 0 {
        return Err("--samples must be positive".into());
    }
    let b = a.b;
    let origin = [0.0, 0.0];
    let mut text = String::from("theta,u,v,F\n");
    for j in 0..a.samples {
        let th = TAU * j as f64 / a.samples as f64;
        let u = (th.cos() - b) / (1.0 - b * b);
        let v = th.sin() / (1.0 - b * b).sqrt();
        let f = m.norm(&origin, &[u, v]);
        text.push_str(&format!("{th:.16e},{u:.16e},{v:.16e},{f:.16e}\n"));
    }
    write_output(a.out.as_deref(), &text)?;
    Ok(0)
}

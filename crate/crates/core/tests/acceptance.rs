//! Acceptance gate: one PASS/FAIL line per criterion, nonzero exit on any
//! failure. Notes below a line are diagnostics and never affect the verdict.

use std::f64::consts::{FRAC_PI_2, FRAC_PI_4, PI, TAU};
use std::time::Instant;

use finsler::circleflow::{
    circle_integrate, circle_test, frenet_trace, geodesic_integrate, minkowski_circle_closed_form, CircleEquation,
    CircleSpec, CircleThresholds, CircleTrace, IntegrationOptions, Verdict,
};
use finsler::io::{trace_from_json, trace_to_json};
use finsler::spec::{parse_metric, parse_metric_spec, render};
use finsler::transport::{compatibility_residual, CurveSampling, TransportMode};
use finsler::vogel::{
    bilinear_proportionality, conformality_check, preservation_harness, probe_directions, ConformalVerdict,
    HarnessConfig, PreservationVerdict, Proportionality,
};
use finsler::{connection_sample, ConnectionSample, FinslerError, FinslerMetric, LineElement};
use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

struct Outcome {
    pass: bool,
    detail: String,
    notes: Vec<String>,
}

impl Outcome {
    fn new(pass: bool, detail: String) -> Self {
        Self { pass, detail, notes: Vec::new() }
    }

    fn note(mut self, note: String) -> Self {
        self.notes.push(note);
        self
    }
}

type Check = fn() -> Result<Outcome, FinslerError>;

fn v(a: &[f64]) -> DVector<f64> {
    DVector::from_vec(a.to_vec())
}

fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

fn gaussian(r: &mut ChaCha8Rng, n: usize) -> DVector<f64> {
    DVector::from_iterator(n, (0..n).map(|_| -> f64 { r.sample(StandardNormal) }))
}

fn direction(r: &mut ChaCha8Rng, n: usize) -> DVector<f64> {
    loop {
        let y = gaussian(r, n);
        if y.norm() > 0.1 {
            return y;
        }
    }
}

fn sample(m: &FinslerMetric, x: &DVector<f64>, y: &DVector<f64>) -> Result<ConnectionSample, FinslerError> {
    connection_sample(m, &LineElement::new(x.clone(), y.clone()))
}

/// Classical Levi-Civita data of a Riemannian chart metric.
struct Classical {
    g: DMatrix<f64>,
    gamma: Vec<[[f64; 2]; 2]>,
}

impl Classical {
    fn sphere(x: &DVector<f64>) -> Self {
        let (s, c) = x[0].sin_cos();
        let mut gamma = vec![[[0.0; 2]; 2]; 2];
        gamma[0][1][1] = -s * c;
        gamma[1][0][1] = c / s;
        gamma[1][1][0] = c / s;
        Self { g: DMatrix::from_diagonal(&v(&[1.0, s * s])), gamma }
    }

    fn diag14() -> Self {
        Self { g: DMatrix::from_diagonal(&v(&[1.0, 4.0])), gamma: vec![[[0.0; 2]; 2]; 2] }
    }

    fn error(&self, s: &ConnectionSample, y: &DVector<f64>) -> f64 {
        let mut err = (&s.g - &self.g).abs().max();
        for i in 0..2 {
            let mut gi = 0.0;
            for j in 0..2 {
                let mut nij = 0.0;
                for k in 0..2 {
                    err = err.max((s.christoffel[(i, j, k)] - self.gamma[i][j][k]).abs());
                    nij += self.gamma[i][j][k] * y[k];
                    gi += 0.5 * self.gamma[i][j][k] * y[j] * y[k];
                }
                err = err.max((s.nonlinear[(i, j)] - nij).abs());
            }
            err = err.max((s.spray[i] - gi).abs());
        }
        err
    }
}

fn tensor_correctness() -> Result<Outcome, FinslerError> {
    let mut r = rng(1);
    let sphere = FinslerMetric::sphere();
    let diag = parse_metric("riemannian:diag=1,4")?;
    let (mut worst, mut cartan) = (0.0f64, 0.0f64);
    for _ in 0..50 {
        let x = v(&[r.random_range(0.3..PI - 0.3), r.random_range(-PI..PI)]);
        let y = direction(&mut r, 2);
        let s = sample(&sphere, &x, &y)?;
        worst = worst.max(Classical::sphere(&x).error(&s, &y));
        cartan = cartan.max(s.cartan.max_abs());

        let x = gaussian(&mut r, 2);
        let s = sample(&diag, &x, &y)?;
        worst = worst.max(Classical::diag14().error(&s, &y));
        cartan = cartan.max(s.cartan.max_abs());
    }
    Ok(Outcome::new(
        worst <= 1e-8 && cartan <= 1e-12,
        format!("max |g,Γ,N,G − classical| = {worst:.2e} (≤ 1e-8), max |C| = {cartan:.2e}"),
    ))
}

const CATALOGUE: [&str; 7] = [
    "euclidean:n=3",
    "riemannian:sphere",
    "riemannian:diag=1,4",
    "randers:b=0.3,0.1,a=1,0.2,0.2,1.5",
    "minkowski-randers:b=0.3",
    "conformal:base=(randers:b=0.2,-0.1),sigma=0.3*sin(x1)+0.1*x2",
    "homothety:base=(riemannian:sphere),c=0.5",
];

fn uses_sphere(spec: &str) -> bool {
    spec.contains("sphere")
}

fn random_point(r: &mut ChaCha8Rng, spec: &str, n: usize) -> DVector<f64> {
    if uses_sphere(spec) {
        v(&[r.random_range(0.4..PI - 0.4), r.random_range(-PI..PI)])
    } else {
        DVector::from_iterator(n, (0..n).map(|_| r.random_range(-1.0..1.0)))
    }
}

/// `|a − b| / max(|b|, 10⁻⁶ · natural)` with `natural` the size of a
/// quantity of the same degree built from `F`.
fn rel(diff: f64, reference: f64, natural: f64) -> f64 {
    diff / reference.max(1e-6 * natural).max(f64::MIN_POSITIVE)
}

fn homogeneity() -> Result<Outcome, FinslerError> {
    let mut r = rng(2);
    let mut worst = [0.0f64; 5];
    for spec in CATALOGUE {
        let m = parse_metric(spec)?;
        let n = m.dim();
        for _ in 0..100 {
            let x = random_point(&mut r, spec, n);
            let y = direction(&mut r, n);
            let lam: f64 = r.random_range(0.2..5.0);
            let ly = &y * lam;
            let f = m.norm(x.as_slice(), y.as_slice());
            let fl = m.norm(x.as_slice(), ly.as_slice());
            let a = sample(&m, &x, &y)?;
            let b = sample(&m, &x, &ly)?;
            worst[0] = worst[0].max(rel((fl - lam * f).abs(), lam * f, lam * f));
            worst[1] = worst[1].max(rel((&b.g - &a.g).abs().max(), a.g.abs().max(), f * f));
            let g2 = &a.spray * (lam * lam);
            worst[2] = worst[2].max(rel((&b.spray - &g2).abs().max(), g2.abs().max(), lam * lam * f * f));
            let n1 = &a.nonlinear * lam;
            worst[3] = worst[3].max(rel((&b.nonlinear - &n1).abs().max(), n1.abs().max(), lam * f));
            let cy = (0..n)
                .flat_map(|i| (0..n).map(move |j| (i, j)))
                .map(|(i, j)| (0..n).map(|k| a.cartan[(i, j, k)] * y[k]).sum::<f64>().abs())
                .fold(0.0, f64::max);
            let scale = a.cartan.max_abs() * y.amax() * n as f64;
            worst[4] = worst[4].max(if cy == 0.0 { 0.0 } else { cy / scale.max(f64::MIN_POSITIVE) });
        }
    }
    let names = ["F", "g", "G", "N", "C·y"];
    let detail = names.iter().zip(worst).map(|(n, w)| format!("{n} {w:.1e}")).collect::<Vec<_>>().join(", ");
    Ok(Outcome::new(
        worst.iter().all(|&w| w <= 1e-9),
        format!("worst relative errors over {} metrics × 100 elements: {detail} (≤ 1e-9)", CATALOGUE.len()),
    ))
}

fn euclidean_circle() -> Result<Outcome, FinslerError> {
    let m = FinslerMetric::euclidean(2)?;
    let spec = CircleSpec::new(&m, v(&[0.0, 0.0]), v(&[1.0, 0.0]), v(&[0.0, 1.0]), 0.5)?;
    let t = circle_integrate(&m, &spec, 2.0 * TAU, &IntegrationOptions::default())?;
    let mut sup = 0.0f64;
    for (j, st) in t.states.iter().enumerate() {
        let s = t.grid.at(j);
        let exact = v(&[2.0 * (s / 2.0).sin(), 2.0 * (1.0 - (s / 2.0).cos())]);
        sup = sup.max((&st.x - exact).amax());
    }
    let res = [t.residuals.max_unit(), t.residuals.max_orth(), t.residuals.max_curv()];
    Ok(Outcome::new(
        sup <= 1e-8 && res.iter().all(|&r| r <= 1e-8),
        format!(
            "sup error {sup:.2e}, residuals unit {:.1e} orth {:.1e} curv {:.1e} (all ≤ 1e-8)",
            res[0], res[1], res[2]
        ),
    ))
}

fn sphere_small_circle() -> Result<Outcome, FinslerError> {
    let m = FinslerMetric::sphere();
    let th = FRAC_PI_4;
    let k = 1.0 / th.tan();
    let spec = CircleSpec::new(&m, v(&[th, 0.0]), v(&[0.0, 1.0 / th.sin()]), v(&[-1.0, 0.0]), k)?;
    let period = TAU * th.sin();
    let t = circle_integrate(&m, &spec, period, &IntegrationOptions::default())?;
    let fd = frenet_trace(&m, &t, TransportMode::Standard)?;
    let k1_err = fd.k1.iter().map(|k1| (k1 - k).abs() / k).fold(0.0, f64::max);
    let k2 = fd.k2_residual_max().unwrap_or(f64::INFINITY);
    let drift = t.states.iter().map(|s| (s.x[0] - th).abs()).fold(0.0, f64::max);
    let last = t.states.last().expect("non-empty trace");
    let closure = (last.x[1] - TAU).abs();
    Ok(Outcome::new(
        k1_err <= 1e-5 && k2 <= 1e-5,
        format!("max |k₁ − cot θ₀|/cot θ₀ = {k1_err:.2e}, max k₂ residual {k2:.2e} (both ≤ 1e-5)"),
    )
    .note(format!("colatitude drift {drift:.1e}, longitude closure error {closure:.1e}")))
}

/// Maximum of `g_u(u,u) − 1` along the fixed-curvature Minkowski–Randers
/// circle with `X = (1,0)`, `Y ∝ (0,1)`, `k = 1` (equal to 120/169).
const RANDERS_UNIT_BASELINE: f64 = 0.7100591715976321;

fn minkowski_agreement() -> Result<Outcome, FinslerError> {
    let m = FinslerMetric::minkowski_randers(0.3)?;
    let spec = CircleSpec::orthonormalized(&m, v(&[0.0, 0.0]), v(&[1.0, 0.0]), v(&[0.0, 1.0]), 1.0)?;
    let opts = IntegrationOptions::default().with_equation(CircleEquation::FixedCurvature).with_abort_threshold(None);
    let num = circle_integrate(&m, &spec, TAU, &opts)?;
    let exact = minkowski_circle_closed_form(&m, &spec.p, &spec.x, &spec.y, 1.0, num.grid)?;
    let sup = num
        .states
        .iter()
        .zip(&exact.states)
        .map(|(a, b)| (&a.x - &b.x).amax().max((&a.u - &b.u).amax()).max((&a.v - &b.v).amax()))
        .fold(0.0, f64::max);
    let unit = num.residuals.max_unit();
    let drift = (unit - RANDERS_UNIT_BASELINE).abs() / RANDERS_UNIT_BASELINE;
    let intrinsic = circle_integrate(&m, &spec, TAU, &IntegrationOptions::default().with_abort_threshold(None))?;
    Ok(Outcome::new(
        sup <= 1e-8 && drift <= 0.1,
        format!(
            "sup |numeric − closed form| = {sup:.2e} (≤ 1e-8); unit-speed residual {unit:.6e} vs baseline \
             {RANDERS_UNIT_BASELINE:.6e} ({:.2}% off, ≤ 10%)",
            100.0 * drift
        ),
    )
    .note(format!(
        "intrinsic equation on the same data: unit {:.1e}, orth {:.1e}, g(v,v) − k² drifts to {:.3}",
        intrinsic.residuals.max_unit(),
        intrinsic.residuals.max_orth(),
        intrinsic.residuals.max_curv()
    )))
}

fn reparametrization_invariance() -> Result<Outcome, FinslerError> {
    let m = FinslerMetric::euclidean(2)?;
    let th = CircleThresholds::default();
    type Phi = fn(f64) -> (f64, f64);
    let maps: [(&str, Phi); 3] = [
        ("s", |t| (t, 1.0)),
        ("s + 0.3 sin s", |t| (t + 0.3 * t.sin(), 1.0 + 0.3 * t.cos())),
        ("s³/(s²+1) + s", |t| {
            let d = t * t + 1.0;
            (t.powi(3) / d + t, (t.powi(4) + 3.0 * t * t) / (d * d) + 1.0)
        }),
    ];
    let mut pass = true;
    let mut parts = Vec::new();
    for (name, phi) in maps {
        let c = CurveSampling::from_fn(
            0.0,
            TAU,
            2001,
            &|t: f64| {
                let (p, _) = phi(t);
                v(&[p.cos(), p.sin()])
            },
            Some(&|t: f64| {
                let (p, dp) = phi(t);
                v(&[-dp * p.sin(), dp * p.cos()])
            }),
        )?;
        let r = circle_test(&m, &c, TransportMode::Standard, &th)?;
        pass &= r.verdict == Verdict::Circle && r.max_rho <= 1e-4;
        parts.push(format!("t = {name}: {} ρ {:.1e}", r.verdict, r.max_rho));
    }
    let parabola = CurveSampling::from_fn(-1.0, 1.0, 2001, &|t: f64| v(&[t, t * t]), None)?;
    let r = circle_test(&m, &parabola, TransportMode::Standard, &th)?;
    pass &= r.verdict == Verdict::Neither;
    parts.push(format!("parabola: {} ρ {:.2}", r.verdict, r.max_rho));
    Ok(Outcome::new(pass, parts.join("; ")))
}

fn circle_dichotomy() -> Result<Outcome, FinslerError> {
    let mut r = rng(7);
    let th = CircleThresholds::default();
    let mode = TransportMode::FullLift;
    let opts = IntegrationOptions::default().with_mode(mode);
    let (mut geodesics, mut circles, mut other) = (0, 0, Vec::new());
    let mut worst_var = 0.0f64;
    for i in 0..20 {
        let spec = CATALOGUE[i % CATALOGUE.len()];
        let m = parse_metric(spec)?;
        let n = m.dim();
        let p = if uses_sphere(spec) {
            v(&[r.random_range(1.3..1.85), r.random_range(-PI..PI)])
        } else {
            random_point(&mut r, spec, n)
        };
        let x = direction(&mut r, n);
        let y = direction(&mut r, n);
        let geodesic = i % 4 == 3;
        let trace = if geodesic {
            let x = &x / m.norm(p.as_slice(), x.as_slice());
            let len = if uses_sphere(spec) { 0.8 } else { TAU };
            geodesic_integrate(&m, &p, &x, len, &opts)?
        } else {
            let k = if uses_sphere(spec) { r.random_range(2.5..4.0) } else { r.random_range(0.5..2.0) };
            let cs = CircleSpec::orthonormalized(&m, p, x, y, k)?;
            circle_integrate(&m, &cs, TAU / k, &opts)?
        };
        let test = circle_test(&m, &trace.sampling()?, mode, &th)?;
        match test.verdict {
            Verdict::Geodesic => geodesics += 1,
            Verdict::Circle => {
                let var = frenet_trace(&m, &trace, mode)?.k1_relative_variation();
                worst_var = worst_var.max(var);
                if var <= 1e-5 {
                    circles += 1;
                } else {
                    other.push(format!("{spec}: k₁ variation {var:.1e}"));
                }
            }
            Verdict::Neither => other.push(format!("{spec}: neither (ρ {:.1e})", test.max_rho)),
        }
        if (test.verdict == Verdict::Geodesic) != geodesic {
            other.push(format!("{spec}: expected {}", if geodesic { "geodesic" } else { "circle" }));
        }
    }
    let standard = standard_transport_drift()?;
    Ok(Outcome::new(
        other.is_empty(),
        format!(
            "{geodesics} geodesics, {circles} circles (max k₁ variation {worst_var:.1e} ≤ 1e-5), {} other{}",
            other.len(),
            if other.is_empty() { String::new() } else { format!(": {}", other.join("; ")) }
        ),
    )
    .note("traces and tests use full-lift transport, identical to standard on Riemannian metrics".into())
    .note(standard))
}

/// With standard transport the intrinsic circle equation on a Randers
/// metric passes the parallelism test while `k₁` is not constant.
fn standard_transport_drift() -> Result<String, FinslerError> {
    let m = parse_metric("minkowski-randers:b=0.3")?;
    let cs = CircleSpec::orthonormalized(&m, v(&[0.0, 0.0]), v(&[1.0, 0.0]), v(&[0.0, 1.0]), 1.0)?;
    let t = circle_integrate(&m, &cs, TAU, &IntegrationOptions::default().with_abort_threshold(None))?;
    let test = circle_test(&m, &t.sampling()?, TransportMode::Standard, &CircleThresholds::default())?;
    let var = frenet_trace(&m, &t, TransportMode::Standard)?.k1_relative_variation();
    Ok(format!(
        "standard transport, minkowski-randers:b=0.3, k = 1: verdict {} (ρ {:.1e}) with k₁ variation {var:.2}",
        test.verdict, test.max_rho
    ))
}

fn random_spd(r: &mut ChaCha8Rng, n: usize) -> DMatrix<f64> {
    let a = DMatrix::from_fn(n, n, |_, _| -> f64 { r.sample(StandardNormal) });
    &a * a.transpose() + DMatrix::identity(n, n) * 0.5
}

fn bilinear_proportionality_suite() -> Result<Outcome, FinslerError> {
    let mut r = rng(8);
    let (mut worst_alpha, mut missed, mut min_pert) = (0.0f64, 0usize, f64::INFINITY);
    for _ in 0..1000 {
        let n = r.random_range(2..=5);
        let g = random_spd(&mut r, n);
        let alpha = r.random_range(-2.0f64..2.0).exp();
        match bilinear_proportionality(&(&g * alpha), &g)? {
            Proportionality::Proportional { alpha: a } => worst_alpha = worst_alpha.max((a - alpha).abs() / alpha),
            Proportionality::NotProportional { .. } => worst_alpha = f64::INFINITY,
        }
        let mut d = DMatrix::from_fn(n, n, |_, _| -> f64 { r.sample(StandardNormal) });
        d = (&d + d.transpose()) * 0.5;
        d -= &g * (d.dot(&g) / g.dot(&g));
        let size = 1e-3 * 10f64.powf(r.random_range(0.0..1.5));
        d *= size / d.norm();
        min_pert = min_pert.min(d.norm());
        if matches!(bilinear_proportionality(&(&g * alpha + d), &g)?, Proportionality::Proportional { .. }) {
            missed += 1;
        }
    }
    Ok(Outcome::new(
        worst_alpha <= 1e-10 && missed == 0 && min_pert >= 1e-3 * (1.0 - 1e-12),
        format!(
            "1000 proportional pairs: worst relative α error {worst_alpha:.1e} (≤ 1e-10); \
             1000 perturbed pairs (‖ΔF‖ ≥ {min_pert:.2e}): {missed} accepted"
        ),
    ))
}

fn non_conformal_pair() -> Result<Outcome, FinslerError> {
    let m = FinslerMetric::euclidean(2)?;
    let mbar = parse_metric("riemannian:diag=1,4")?;
    let p = v(&[0.0, 0.0]);
    let report = preservation_harness(&m, &mbar, &p, &HarnessConfig::default())?;
    let failing: Vec<_> = report.failing().collect();
    let min_gbar = failing.iter().map(|r| r.gbar_xy.abs()).fold(f64::INFINITY, f64::min);
    let conf = conformality_check(&m, &mbar, std::slice::from_ref(&p), &probe_directions(2, 16, 7))?;
    let variance = conf.probes.iter().map(|q| q.variance).fold(0.0, f64::max);
    Ok(Outcome::new(
        report.verdict == PreservationVerdict::NonPreserving
            && !failing.is_empty()
            && min_gbar >= 1e-3
            && conf.verdict == ConformalVerdict::NotConformal,
        format!(
            "harness {} ({} of {} failing, {} errors), min failing |ḡ_X(X,Y)| = {min_gbar:.3} (≥ 1e-3), \
             conformality {} (log-ratio variance {variance:.3})",
            report.verdict,
            failing.len(),
            report.records.len(),
            report.errors,
            conf.verdict
        ),
    ))
}

fn homothety() -> Result<Outcome, FinslerError> {
    let m = FinslerMetric::sphere();
    let p = v(&[FRAC_PI_2, 0.0]);
    let config = HarnessConfig { k_values: vec![2.0, 3.0], ..HarnessConfig::default() };
    let mut pass = true;
    let mut parts = Vec::new();
    for c in [-1.0f64, 0.5, 2.0] {
        let mbar = FinslerMetric::homothety(FinslerMetric::sphere(), c)?;
        let report = preservation_harness(&m, &mbar, &p, &config)?;
        let expected = (-c).exp();
        let worst = report
            .records
            .iter()
            .map(|r| r.k_ratio.map_or(f64::INFINITY, |q| (q - expected).abs()))
            .fold(0.0, f64::max);
        pass &= report.verdict == PreservationVerdict::Preserving && report.errors == 0 && worst <= 1e-6;
        parts.push(format!("c = {c}: {} with max |k̄/k − e^(−c)| = {worst:.1e}", report.verdict));
    }
    Ok(Outcome::new(pass, format!("{} (≤ 1e-6)", parts.join("; "))))
}

fn test_curve(count: usize) -> Result<(CurveSampling, Vec<DVector<f64>>, Vec<DVector<f64>>), FinslerError> {
    let c = CurveSampling::from_fn(0.0, 1.0, count, &|t: f64| v(&[1.0 + 0.3 * t.sin(), 0.5 * t + 0.2 * t * t]), None)?;
    let xf = c.params().iter().map(|&t| v(&[t.cos(), 1.0 + t])).collect();
    let yf = c.params().iter().map(|&t| v(&[0.5 - t, (2.0 * t).sin()])).collect();
    Ok((c, xf, yf))
}

fn residual_series(m: &FinslerMetric, mode: TransportMode) -> Result<[f64; 3], FinslerError> {
    let mut out = [0.0; 3];
    for (o, n) in out.iter_mut().zip([81, 161, 321]) {
        let (c, xf, yf) = test_curve(n)?;
        *o = compatibility_residual(m, &c, &xf, &yf, mode)?.max_abs;
    }
    Ok(out)
}

/// Standard-transport compatibility residual of `randers:b=0.3,0.1` on the
/// 321-point test curve.
const RANDERS_COMPATIBILITY_BASELINE: f64 = 3.6053350866373624e-2;

fn compatibility() -> Result<Outcome, FinslerError> {
    let mut pass = true;
    let mut parts = Vec::new();
    for spec in ["riemannian:sphere", "conformal:base=(euclidean:n=2),sigma=0.3*sin(x1)+0.2*x2"] {
        let [e1, e2, e3] = residual_series(&parse_metric(spec)?, TransportMode::Standard)?;
        let (o1, o2) = ((e1 / e2).log2(), (e2 / e3).log2());
        pass &= e3 <= 1e-6 && o1 >= 3.5 && o2 >= 3.5;
        parts.push(format!("{spec}: max |r| {e3:.1e}, orders {o1:.2}/{o2:.2}"));
    }
    let flat = residual_series(&parse_metric("riemannian:diag=1,4")?, TransportMode::Standard)?;
    pass &= flat[2] <= 1e-6;
    parts.push(format!("riemannian:diag=1,4: max |r| {:.1e}", flat[2]));

    let randers = parse_metric("randers:b=0.3,0.1")?;
    let std = residual_series(&randers, TransportMode::Standard)?[2];
    let full = residual_series(&randers, TransportMode::FullLift)?;
    let drift = (std - RANDERS_COMPATIBILITY_BASELINE).abs() / RANDERS_COMPATIBILITY_BASELINE;
    pass &= drift <= 0.1;
    Ok(Outcome::new(
        pass,
        format!("{} (≤ 1e-6, order ≥ 3.5)", parts.join("; ")),
    )
    .note(format!(
        "randers:b=0.3,0.1 standard transport: max |r| {std:.4e} vs tracked baseline {RANDERS_COMPATIBILITY_BASELINE:.4e} \
         ({:.2}% off, ≤ 10%)",
        100.0 * drift
    ))
    .note(format!(
        "randers:b=0.3,0.1 full-lift transport: max |r| {:.1e} / {:.1e} / {:.1e} on 81/161/321 points",
        full[0], full[1], full[2]
    )))
}

const VALID_SPECS: [&str; 50] = [
    "euclidean",
    "euclidean:n=2",
    "euclidean:n=3",
    "euclidean:n=5",
    "riemannian:sphere",
    "riemannian:flat",
    "riemannian:flat,n=3",
    "riemannian:flat,n=4",
    "riemannian:diag=1,4",
    "riemannian:diag=2,0.5,3",
    "riemannian:diag=1e-2,1e2",
    "riemannian:diag=1,1",
    "randers:b=0.3",
    "randers:b=0.3,0.1",
    "randers:b=0,0.5",
    "randers:b=-0.2,0.1,0.05",
    "randers:n=3,b=0.1",
    "randers:b=0.3,0.1,a=1,2",
    "randers:b=0.1,0.1,a=2,0.5,0.5,1",
    "randers:a=1,1,b=0.2,0.2",
    "randers:n=4,b=0.1,0.1,0.1,0.1",
    "randers:b=0.5,a=4,1",
    "randers:b=0.3,a=1,0,0,1",
    "randers:b=.25",
    "minkowski-randers:b=0.3",
    "minkowski-randers:b=0.01",
    "minkowski-randers:b=0.9",
    "minkowski-randers:b=3e-1",
    "minkowski-randers:b=0.5",
    "conformal:base=(euclidean:n=2),sigma=x1",
    "conformal:base=(euclidean),sigma=0.5",
    "conformal:base=(riemannian:sphere),sigma=0.1*x1",
    "conformal:base=(randers:b=0.3),sigma=sin(x1)+cos(x2)",
    "conformal:base=(euclidean:n=3),sigma=x1*x2-x3^2",
    "conformal:base=(minkowski-randers:b=0.2),sigma=exp(-x1^2)",
    "conformal:base=(riemannian:diag=1,4),sigma=log(2+x1^2)",
    "conformal:base=(euclidean:n=2),sigma=-x1",
    "conformal:base=(euclidean:n=2),sigma=2^(-x1)",
    "conformal:base=(euclidean:n=2),sigma=(x1+x2)/3",
    "conformal:base=(conformal:base=(euclidean:n=2),sigma=x1),sigma=x2",
    "conformal:base=(euclidean:n=2),sigma=0.1*x1^2+0.2*x2^2",
    "conformal:base=(euclidean:n=2),sigma=sin(cos(x1))",
    "conformal:base=(euclidean:n=2),sigma=x1-x2-1",
    "conformal:base=(euclidean:n=2),sigma=-(x1)",
    "conformal:base=(euclidean:n=2),sigma=1.5e-3*x2",
    "homothety:base=(riemannian:sphere),c=0.5",
    "homothety:base=(euclidean:n=2),c=-1",
    "homothety:base=(randers:b=0.3,0.1),c=2",
    "homothety:base=(homothety:base=(euclidean),c=1),c=1",
    "homothety:base=(conformal:base=(euclidean:n=2),sigma=x1),c=0.25",
];

const INVALID_SPECS: [&str; 20] = [
    "",
    "euclid",
    "euclidean:",
    "euclidean:n=",
    "euclidean:n=2,",
    "euclidean:n=2,n=3",
    "euclidean:m=2",
    "euclidean:n=0",
    "euclidean:n=1.5",
    "riemannian",
    "riemannian:sphere,flat",
    "riemannian:diag=1,-4",
    "randers",
    "randers:b=1.5",
    "randers:b=0.3,a=1,2,3",
    "minkowski-randers:b=1",
    "conformal:base=(euclidean:n=2)",
    "conformal:base=(euclidean:n=2),sigma=y1",
    "conformal:base=(euclidean:n=2,sigma=x1",
    "homothety:base=euclidean,c=1",
];

fn norms_agree(a: &FinslerMetric, b: &FinslerMetric, r: &mut ChaCha8Rng) -> bool {
    let n = a.dim();
    (0..5).all(|_| {
        let x = v(&vec![0.7; n]) + gaussian(r, n) * 0.1;
        let y = direction(r, n);
        a.norm(x.as_slice(), y.as_slice()) == b.norm(x.as_slice(), y.as_slice())
    })
}

fn round_trip_trace(t: &CircleTrace) -> Result<bool, FinslerError> {
    let a = trace_to_json(t)?;
    let b = trace_to_json(&trace_from_json(&a)?)?;
    Ok(a == b)
}

fn parser_corpus() -> Result<Outcome, FinslerError> {
    let mut r = rng(12);
    let mut bad = Vec::new();
    for src in VALID_SPECS {
        let ok = parse_metric_spec(src).and_then(|s| {
            let text = render(&s.metric);
            let again = parse_metric(&text)?;
            Ok(again == s.metric && render(&again) == text && norms_agree(&s.metric, &again, &mut r))
        });
        if !matches!(ok, Ok(true)) {
            bad.push(format!("valid '{src}': {ok:?}"));
        }
    }
    for src in INVALID_SPECS {
        match parse_metric_spec(src) {
            Err(FinslerError::Parse(e)) if e.offset <= src.len() => {}
            other => bad.push(format!("invalid '{src}': {:?}", other.map(|s| s.canonical()))),
        }
    }
    let m = FinslerMetric::sphere();
    let cs = CircleSpec::orthonormalized(&m, v(&[1.0, 0.2]), v(&[0.3, 1.0]), v(&[-1.0, 0.0]), 1.7)?;
    let sphere_circle = circle_integrate(&m, &cs, 1.0, &IntegrationOptions::default())?;
    let randers = parse_metric("randers:b=0.3,0.1,a=1,0.2,0.2,1.5")?;
    let x = v(&[0.6, 0.8]);
    let x = &x / randers.norm(&[0.0, 0.0], x.as_slice());
    let geodesic = geodesic_integrate(&randers, &v(&[0.0, 0.0]), &x, 2.0, &IntegrationOptions::default())?;
    let json_ok = round_trip_trace(&sphere_circle)? && round_trip_trace(&geodesic)?;
    let mut broken = sphere_circle.clone();
    broken.states[1].v[1] = f64::INFINITY;
    let rejects_inf = trace_to_json(&broken).is_err();
    Ok(Outcome::new(
        bad.is_empty() && json_ok && rejects_inf,
        format!(
            "{} valid and {} invalid specs, {} mismatches; trace JSON round-trip byte-identical: {json_ok}; \
             non-finite trace rejected: {rejects_inf}",
            VALID_SPECS.len(),
            INVALID_SPECS.len(),
            bad.len()
        ),
    )
    .note(bad.join("\n        ")))
}

fn main() {
    let checks: [(&str, Check); 12] = [
        ("tensor correctness", tensor_correctness),
        ("homogeneity suite", homogeneity),
        ("euclidean circle", euclidean_circle),
        ("sphere small circle", sphere_small_circle),
        ("minkowski agreement", minkowski_agreement),
        ("reparametrization invariance", reparametrization_invariance),
        ("circle/geodesic dichotomy", circle_dichotomy),
        ("bilinear proportionality", bilinear_proportionality_suite),
        ("non-conformal pair breaks circles", non_conformal_pair),
        ("homothety", homothety),
        ("compatibility residual", compatibility),
        ("parser corpus", parser_corpus),
    ];
    let mut failures = 0;
    for (i, (name, check)) in checks.iter().enumerate() {
        let start = Instant::now();
        let outcome = check().unwrap_or_else(|e| Outcome::new(false, format!("error: {e}")));
        if !outcome.pass {
            failures += 1;
        }
        println!(
            "[{}] {:>2}. {name}: {} ({:.2}s)",
            if outcome.pass { "PASS" } else { "FAIL" },
            i + 1,
            outcome.detail,
            start.elapsed().as_secs_f64()
        );
        for note in outcome.notes.iter().filter(|n| !n.is_empty()) {
            println!("      note: {note}");
        }
    }
    println!("acceptance: {} of {} criteria passed", checks.len() - failures, checks.len());
    if failures > 0 {
        std::process::exit(1);
    }
}

//! Conformality between two metrics on the same chart, and whether the
//! identity map sends circles of one metric to circles of the other.

use std::f64::consts::TAU;

use nalgebra::{DMatrix, DVector};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::circleflow::{
    arclength_reparametrize, circle_integrate, circle_test, geodesic_integrate, CircleSpec, CircleThresholds,
    IntegrationOptions, Verdict, DEFAULT_STEPS_PER_PERIOD,
};
use crate::connection::fundamental_tensor;
use crate::error::{FinslerError, Result};
use crate::metric::{FinslerMetric, LineElement};
use crate::transport::{frenet_data, TransportMode};

/// Largest per-point variance of `log(F̄/F)` accepted as conformal.
pub const CONFORMAL_VARIANCE_TOLERANCE: f64 = 1e-10;
/// Largest relative `‖ḡ − e^{2σ}g‖` accepted as conformal.
pub const CONFORMAL_TENSOR_TOLERANCE: f64 = 1e-8;
/// Relative tolerance of [`bilinear_proportionality`].
pub const PROPORTIONALITY_TOLERANCE: f64 = 1e-10;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ConformalVerdict {
    Conformal,
    NotConformal,
}

impl std::fmt::Display for ConformalVerdict {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            ConformalVerdict::Conformal => "conformal",
            ConformalVerdict::NotConformal => "not-conformal",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProbeResult {
    pub x: Vec<f64>,
    /// Mean of `log(F̄/F)` over the probe directions.
    pub sigma: f64,
    pub variance: f64,
    /// `max |ḡ − e^{2σ}g| / max |e^{2σ}g|` over the probe directions.
    pub tensor_residual: f64,
}

/// Directions at one probe point with the most different `log(F̄/F)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WorstPair {
    pub x: Vec<f64>,
    pub y1: Vec<f64>,
    pub y2: Vec<f64>,
    pub log_ratio1: f64,
    pub log_ratio2: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConformalReport {
    pub verdict: ConformalVerdict,
    pub probes: Vec<ProbeResult>,
    pub worst: Option<WorstPair>,
}

/// `count` unit directions in `ℝⁿ`: evenly spaced angles for `n = 2`,
/// seeded Gaussian samples otherwise.
pub fn probe_directions(n: usize, count: usize, seed: u64) -> Vec<DVector<f64>> {
    if n == 2 {
        return (0..count)
            .map(|i| {
                let t = TAU * i as f64 / count as f64;
                DVector::from_vec(vec![t.cos(), t.sin()])
            })
            .collect();
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..count).map(|_| gaussian_direction(&mut rng, n)).collect()
}

fn gaussian_direction(rng: &mut ChaCha8Rng, n: usize) -> DVector<f64> {
    loop {
        let v: DVector<f64> = DVector::from_iterator(n, (0..n).map(|_| -> f64 { StandardNormal.sample(rng) }));
        let norm = v.norm();
        if norm > 1e-8 {
            return v / norm;
        }
    }
}

/// Estimates `σ` with `F̄ = e^σ F` at each probe point and checks that it
/// does not depend on the direction.
pub fn conformality_check(
    m: &FinslerMetric,
    mbar: &FinslerMetric,
    probes: &[DVector<f64>],
    directions: &[DVector<f64>],
) -> Result<ConformalReport> {
    if m.dim() != mbar.dim() {
        return Err(FinslerError::DimensionMismatch { expected: m.dim(), got: mbar.dim() });
    }
    if probes.is_empty() || directions.len() < 2 {
        return Err(FinslerError::InvalidInput("need probe points and at least two directions".into()));
    }
    let mut results = Vec::with_capacity(probes.len());
    let mut worst: Option<(f64, WorstPair)> = None;
    for x in probes {
        let mut logs = Vec::with_capacity(directions.len());
        for y in directions {
            let le = LineElement::new(x.clone(), y.clone());
            let f = m.check_admissible(&le)?;
            let fbar = mbar.check_admissible(&le)?;
            logs.push((fbar / f).ln());
        }
        let sigma = logs.iter().sum::<f64>() / logs.len() as f64;
        let variance = logs.iter().map(|l| (l - sigma).powi(2)).sum::<f64>() / logs.len() as f64;
        let scale = (2.0 * sigma).exp();
        let mut tensor_residual: f64 = 0.0;
        for y in directions {
            let le = LineElement::new(x.clone(), y.clone());
            let g = fundamental_tensor(m, &le)? * scale;
            let gbar = fundamental_tensor(mbar, &le)?;
            tensor_residual = tensor_residual.max((&gbar - &g).amax() / g.amax().max(f64::MIN_POSITIVE));
        }
        let (lo, hi) = min_max_index(&logs);
        let spread = logs[hi] - logs[lo];
        if worst.as_ref().is_none_or(|(s, _)| spread > *s) {
            worst = Some((
                spread,
                WorstPair {
                    x: x.as_slice().to_vec(),
                    y1: directions[lo].as_slice().to_vec(),
                    y2: directions[hi].as_slice().to_vec(),
                    log_ratio1: logs[lo],
                    log_ratio2: logs[hi],
                },
            ));
        }
        results.push(ProbeResult { x: x.as_slice().to_vec(), sigma, variance, tensor_residual });
    }
    let conformal = results
        .iter()
        .all(|p| p.variance <= CONFORMAL_VARIANCE_TOLERANCE && p.tensor_residual <= CONFORMAL_TENSOR_TOLERANCE);
    Ok(ConformalReport {
        verdict: if conformal { ConformalVerdict::Conformal } else { ConformalVerdict::NotConformal },
        probes: results,
        worst: worst.map(|(_, w)| w),
    })
}

fn min_max_index(v: &[f64]) -> (usize, usize) {
    let mut lo = 0;
    let mut hi = 0;
    for (i, x) in v.iter().enumerate() {
        if *x < v[lo] {
            lo = i;
        }
        if *x > v[hi] {
            hi = i;
        }
    }
    (lo, hi)
}

/// Where two forms fail to be proportional, in a `G`-orthonormal basis.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Witness {
    pub i: usize,
    pub j: usize,
    /// `F(eᵢ, eⱼ)` for an off-diagonal witness, or
    /// `F(p₊, p₋) = (F(eᵢ,eᵢ) − F(eⱼ,eⱼ))/2` with `p± = (eᵢ ± eⱼ)/√2`
    /// for a rotated-probe witness.
    pub value: f64,
    pub rotated: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum Proportionality {
    Proportional { alpha: f64 },
    NotProportional { witness: Witness, relative: f64 },
}

impl Proportionality {
    pub fn alpha(&self) -> Option<f64> {
        match self {
            Proportionality::Proportional { alpha } => Some(*alpha),
            Proportionality::NotProportional { .. } => None,
        }
    }
}

/// Decides whether `F = α G` for some `α > 0`.
///
/// In a `G`-orthonormal basis `eᵢ`, proportionality means every pair of
/// orthonormal vectors stays `F`-orthogonal with a common `F`-length:
/// off-diagonal entries `F(eᵢ,eⱼ)` and rotated probes `F(p₊,p₋)` vanish.
pub fn bilinear_proportionality(f: &DMatrix<f64>, g: &DMatrix<f64>) -> Result<Proportionality> {
    let n = g.nrows();
    for (name, m) in [("F", f), ("G", g)] {
        if !m.is_square() || m.nrows() != n {
            return Err(FinslerError::DimensionMismatch { expected: n, got: m.nrows() });
        }
        if (m - m.transpose()).amax() > 1e-12 * m.amax().max(1.0) {
            return Err(FinslerError::InvalidInput(format!("{name} is not symmetric")));
        }
        if m.clone().cholesky().is_none() {
            return Err(FinslerError::InvalidInput(format!("{name} is not positive definite")));
        }
    }
    let l = g.clone().cholesky().expect("checked above").l();
    let linv = l
        .try_inverse()
        .ok_or_else(|| FinslerError::InvalidInput("G is singular".into()))?;
    let mf = &linv * f * linv.transpose();
    let alpha = mf.diagonal().mean();
    let mut best = Witness { i: 0, j: 0, value: 0.0, rotated: false };
    for i in 0..n {
        for j in (i + 1)..n {
            let off = mf[(i, j)];
            let rot = 0.5 * (mf[(i, i)] - mf[(j, j)]);
            if off.abs() > best.value.abs() {
                best = Witness { i, j, value: off, rotated: false };
            }
            if rot.abs() > best.value.abs() {
                best = Witness { i, j, value: rot, rotated: true };
            }
        }
    }
    let relative = best.value.abs() / alpha;
    if relative <= PROPORTIONALITY_TOLERANCE {
        Ok(Proportionality::Proportional { alpha })
    } else {
        Ok(Proportionality::NotProportional { witness: best, relative })
    }
}

/// `ḡ_X(X, Y)` at the line element `(p, X)`.
pub fn gbar_pair(mbar: &FinslerMetric, p: &DVector<f64>, x: &DVector<f64>, y: &DVector<f64>) -> Result<f64> {
    let g = fundamental_tensor(mbar, &LineElement::new(p.clone(), x.clone()))?;
    Ok(x.dot(&(g * y)))
}

/// A `g_X`-orthonormal pair with `F(p, X) = 1`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OrthonormalPair {
    pub x: Vec<f64>,
    pub y: Vec<f64>,
}

/// Seeded `X` on the `F`-indicatrix at `p` and `Y` orthonormal to it in `g_X`.
pub fn sample_pairs(m: &FinslerMetric, p: &DVector<f64>, count: usize, seed: u64) -> Result<Vec<OrthonormalPair>> {
    let n = m.dim();
    if p.len() != n {
        return Err(FinslerError::DimensionMismatch { expected: n, got: p.len() });
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = Vec::with_capacity(count);
    while out.len() < count {
        let dir = gaussian_direction(&mut rng, n);
        let f = m.check_admissible(&LineElement::new(p.clone(), dir.clone()))?;
        let x = dir / f;
        let g = fundamental_tensor(m, &LineElement::new(p.clone(), x.clone()))?;
        let raw = gaussian_direction(&mut rng, n);
        let y = &raw - &x * x.dot(&(&g * &raw));
        let ny = y.dot(&(&g * &y)).sqrt();
        if ny < 1e-6 {
            continue;
        }
        let y = y / ny;
        out.push(OrthonormalPair { x: x.as_slice().to_vec(), y: y.as_slice().to_vec() });
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OrthogonalityTransfer {
    /// Largest `|ḡ_X(X, Y)|` over the sampled pairs.
    pub worst: f64,
    pub pair: OrthonormalPair,
}

/// How far `g_X`-orthonormal pairs at `p` are from `ḡ_X`-orthogonal.
pub fn orthogonality_transfer(
    m: &FinslerMetric,
    mbar: &FinslerMetric,
    p: &DVector<f64>,
    samples: usize,
    seed: u64,
) -> Result<OrthogonalityTransfer> {
    if samples == 0 {
        return Err(FinslerError::InvalidInput("need at least one sample".into()));
    }
    let mut best: Option<OrthogonalityTransfer> = None;
    for pair in sample_pairs(m, p, samples, seed)? {
        let x = DVector::from_vec(pair.x.clone());
        let y = DVector::from_vec(pair.y.clone());
        let v = gbar_pair(mbar, p, &x, &y)?.abs();
        if best.as_ref().is_none_or(|b| v > b.worst) {
            best = Some(OrthogonalityTransfer { worst: v, pair });
        }
    }
    Ok(best.expect("samples > 0"))
}

#[derive(Debug, Clone, PartialEq)]
pub struct HarnessConfig {
    /// Curvatures of the circle family; `0` selects a geodesic.
    pub k_values: Vec<f64>,
    pub pairs: usize,
    pub seed: u64,
    /// Integration length in periods `2π/k` (`2π` for geodesics).
    pub periods: f64,
    pub steps_per_period: usize,
    pub thresholds: CircleThresholds,
    pub mode: TransportMode,
    pub integration: IntegrationOptions,
}

impl Default for HarnessConfig {
    fn default() -> Self {
        Self {
            k_values: vec![0.5, 1.0, 2.0],
            pairs: 4,
            seed: 7,
            periods: 1.0,
            steps_per_period: DEFAULT_STEPS_PER_PERIOD,
            thresholds: CircleThresholds::default(),
            mode: TransportMode::Standard,
            integration: IntegrationOptions::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CircleRecord {
    pub x: Vec<f64>,
    pub y: Vec<f64>,
    pub k: f64,
    /// `ḡ_X(X, Y)` at `p`.
    pub gbar_xy: f64,
    pub verdict: Option<Verdict>,
    pub max_rho: Option<f64>,
    /// `ρ` of the image test at the first sample (the point `p`).
    pub rho_at_p: Option<f64>,
    /// Mean first curvature of the image under `m̄`.
    pub k_bar: Option<f64>,
    pub k_ratio: Option<f64>,
    pub error: Option<String>,
}

impl CircleRecord {
    pub fn passes(&self) -> bool {
        matches!(self.verdict, Some(Verdict::Circle | Verdict::Geodesic))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum PreservationVerdict {
    Preserving,
    NonPreserving,
}

impl std::fmt::Display for PreservationVerdict {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            PreservationVerdict::Preserving => "preserving",
            PreservationVerdict::NonPreserving => "non-preserving",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PreservationReport {
    pub metric: String,
    pub metric_bar: String,
    pub point: Vec<f64>,
    pub verdict: PreservationVerdict,
    pub records: Vec<CircleRecord>,
    /// Records whose integration or image test failed to run.
    pub errors: usize,
    /// Worst `|ḡ_X(X,Y)|` over the sampled pairs.
    pub orthogonality: f64,
    /// Mean `k̄/k` over passing circles with `k > 0`.
    pub mean_k_ratio: Option<f64>,
}

impl PreservationReport {
    pub fn failing(&self) -> impl Iterator<Item = &CircleRecord> {
        self.records.iter().filter(|r| r.error.is_none() && !r.passes())
    }
}

/// Integrates a family of circles through `p` under `m` and tests each
/// image under `m̄` (the identity map between the two metrics).
///
/// The verdict is `Preserving` when every completed image is a circle or a
/// geodesic. Integration failures are recorded per circle and excluded.
pub fn preservation_harness(
    m: &FinslerMetric,
    mbar: &FinslerMetric,
    p: &DVector<f64>,
    config: &HarnessConfig,
) -> Result<PreservationReport> {
    if m.dim() != mbar.dim() {
        return Err(FinslerError::DimensionMismatch { expected: m.dim(), got: mbar.dim() });
    }
    if config.k_values.is_empty() || config.pairs == 0 {
        return Err(FinslerError::InvalidInput("need at least one curvature and one pair".into()));
    }
    if config.k_values.iter().any(|k| !(k.is_finite() && *k >= 0.0)) {
        return Err(FinslerError::InvalidInput("curvatures must be finite and non-negative".into()));
    }
    let pairs = sample_pairs(m, p, config.pairs, config.seed)?;
    let work: Vec<(&OrthonormalPair, f64)> =
        pairs.iter().flat_map(|pr| config.k_values.iter().map(move |&k| (pr, k))).collect();
    let records: Vec<CircleRecord> = work
        .par_iter()
        .map(|(pair, k)| run_circle(m, mbar, p, pair, *k, config))
        .collect::<Result<_>>()?;
    let completed: Vec<&CircleRecord> = records.iter().filter(|r| r.error.is_none()).collect();
    let errors = records.len() - completed.len();
    let preserving = !completed.is_empty() && completed.iter().all(|r| r.passes());
    let ratios: Vec<f64> = completed.iter().filter(|r| r.passes()).filter_map(|r| r.k_ratio).collect();
    let orthogonality = records.iter().map(|r| r.gbar_xy.abs()).fold(0.0, f64::max);
    Ok(PreservationReport {
        metric: crate::spec::render(m),
        metric_bar: crate::spec::render(mbar),
        point: p.as_slice().to_vec(),
        verdict: if preserving { PreservationVerdict::Preserving } else { PreservationVerdict::NonPreserving },
        records,
        errors,
        orthogonality,
        mean_k_ratio: (!ratios.is_empty()).then(|| ratios.iter().sum::<f64>() / ratios.len() as f64),
    })
}

fn run_circle(
    m: &FinslerMetric,
    mbar: &FinslerMetric,
    p: &DVector<f64>,
    pair: &OrthonormalPair,
    k: f64,
    config: &HarnessConfig,
) -> Result<CircleRecord> {
    let x = DVector::from_vec(pair.x.clone());
    let y = DVector::from_vec(pair.y.clone());
    let gbar_xy = gbar_pair(mbar, p, &x, &y)?;
    let mut record = CircleRecord {
        x: pair.x.clone(),
        y: pair.y.clone(),
        k,
        gbar_xy,
        verdict: None,
        max_rho: None,
        rho_at_p: None,
        k_bar: None,
        k_ratio: None,
        error: None,
    };
    let outcome = (|| -> Result<()> {
        let period = if k > 0.0 { TAU / k } else { TAU };
        let opts = config.integration.with_step(period / config.steps_per_period as f64).with_mode(config.mode);
        let s_max = period * config.periods;
        let trace = if k > 0.0 {
            let spec = CircleSpec::new(m, p.clone(), x.clone(), y.clone(), k)?;
            circle_integrate(m, &spec, s_max, &opts)?
        } else {
            geodesic_integrate(m, p, &x, s_max, &opts)?
        };
        let image = arclength_reparametrize(mbar, &trace.sampling()?, None)?;
        let test = circle_test(mbar, &image, config.mode, &config.thresholds)?;
        record.verdict = Some(test.verdict);
        record.max_rho = Some(test.max_rho);
        record.rho_at_p = test.rho.first().copied();
        if test.verdict == Verdict::Circle {
            let fd = frenet_data(mbar, &image, config.mode)?;
            let kbar = fd.k1_mean();
            record.k_bar = Some(kbar);
            if k > 0.0 {
                record.k_ratio = Some(kbar / k);
            }
        }
        Ok(())
    })();
    if let Err(e) = outcome {
        record.error = Some(e.to_string());
    }
    Ok(record)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::expr::Expr;
    use crate::metric::Chart;

    fn v(xs: &[f64]) -> DVector<f64> {
        DVector::from_row_slice(xs)
    }

    #[test]
    fn conformal_by_construction() {
        let m = FinslerMetric::euclidean(2).unwrap();
        let mbar = FinslerMetric::conformal(m.clone(), Expr::Var(0)).unwrap();
        let probes = vec![v(&[0.3, -1.0]), v(&[-0.7, 0.2])];
        let r = conformality_check(&m, &mbar, &probes, &probe_directions(2, 12, 1)).unwrap();
        assert_eq!(r.verdict, ConformalVerdict::Conformal);
        for p in &r.probes {
            assert!((p.sigma - p.x[0]).abs() <= 1e-10);
        }
        let same = conformality_check(&m, &m, &probes, &probe_directions(2, 12, 1)).unwrap();
        assert!(same.probes.iter().all(|p| p.sigma.abs() < 1e-15));
    }

    #[test]
    fn anisotropic_scaling_is_not_conformal() {
        let m = FinslerMetric::euclidean(2).unwrap();
        let mbar = FinslerMetric::riemannian(Chart::Diag(vec![1.0, 4.0])).unwrap();
        let r = conformality_check(&m, &mbar, &[v(&[0.0, 0.0])], &probe_directions(2, 8, 1)).unwrap();
        assert_eq!(r.verdict, ConformalVerdict::NotConformal);
        assert!(r.probes[0].variance > 1e-2);
        let w = r.worst.unwrap();
        assert!((w.log_ratio2 - w.log_ratio1 - 2f64.ln()).abs() < 1e-12);
    }

    #[test]
    fn bilinear_proportionality_examples() {
        let g = DMatrix::from_row_slice(2, 2, &[2.0, 0.3, 0.3, 1.0]);
        assert!((bilinear_proportionality(&(&g * 2.0), &g).unwrap().alpha().unwrap() - 2.0).abs() < 1e-14);
        let r = bilinear_proportionality(&DMatrix::from_diagonal(&v(&[1.0, 2.0])), &DMatrix::identity(2, 2)).unwrap();
        match r {
            Proportionality::NotProportional { witness, .. } => {
                assert!(witness.rotated);
                assert!((witness.value.abs() - 0.5).abs() < 1e-15);
            }
            p => panic!("{p:?}"),
        }
        let bad = DMatrix::from_row_slice(2, 2, &[1.0, 2.0, 2.0, 1.0]);
        assert!(bilinear_proportionality(&bad, &g).is_err());
    }

    #[test]
    fn orthogonality_examples() {
        let m = FinslerMetric::euclidean(2).unwrap();
        let mbar = FinslerMetric::riemannian(Chart::Diag(vec![1.0, 4.0])).unwrap();
        let s = 0.5f64.sqrt();
        let val = gbar_pair(&mbar, &v(&[0.0, 0.0]), &v(&[s, s]), &v(&[-s, s])).unwrap();
        assert!((val - 1.5).abs() < 1e-14);
        let h = FinslerMetric::homothety(m.clone(), 0.7).unwrap();
        let t = orthogonality_transfer(&m, &h, &v(&[0.1, 0.2]), 20, 3).unwrap();
        assert!(t.worst <= 1e-10);
        let c = FinslerMetric::conformal(m.clone(), "x1*x2".parse().unwrap()).unwrap();
        assert!(orthogonality_transfer(&m, &c, &v(&[0.4, 0.9]), 20, 3).unwrap().worst <= 1e-10);
    }

    #[test]
    fn identity_pair_preserves() {
        let m = FinslerMetric::euclidean(2).unwrap();
        let cfg = HarnessConfig { k_values: vec![1.0, 0.0], pairs: 2, steps_per_period: 1000, ..Default::default() };
        let r = preservation_harness(&m, &m, &v(&[0.0, 0.0]), &cfg).unwrap();
        assert_eq!(r.verdict, PreservationVerdict::Preserving, "{r:?}");
        assert_eq!(r.errors, 0);
        let ratio = r.mean_k_ratio.unwrap();
        assert!((ratio - 1.0).abs() < 1e-6);
    }

    #[test]
    fn anisotropic_image_is_not_a_circle() {
        let m = FinslerMetric::euclidean(2).unwrap();
        let mbar = FinslerMetric::riemannian(Chart::Diag(vec![1.0, 4.0])).unwrap();
        let cfg = HarnessConfig { k_values: vec![1.0], pairs: 3, steps_per_period: 1000, ..Default::default() };
        let r = preservation_harness(&m, &mbar, &v(&[0.0, 0.0]), &cfg).unwrap();
        assert_eq!(r.verdict, PreservationVerdict::NonPreserving);
        assert!(r.failing().count() > 0);
    }
}

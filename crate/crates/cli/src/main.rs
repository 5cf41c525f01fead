mod commands;
mod tolerances;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use finsler::transport::TransportMode;

/// Numerical Finsler geometry: connection data, circles, and the
/// conformality analysis.
///
/// Default tolerances can be overridden with FINSLER_TOLERANCES, e.g.
/// `FINSLER_TOLERANCES=parallelism=1e-4,geodesic=1e-6,abort=1e-3`
/// (`abort=none` disables aborting). Command-line flags take precedence.
#[derive(Debug, Parser)]
#[command(name = "finsler", version)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Print g, C, G, N and Γ at a line element.
    MetricInfo(MetricInfoArgs),
    /// Integrate a circle or geodesic and write its trace.
    Trace(TraceArgs),
    /// Classify a sampled curve as circle, geodesic or neither.
    CheckCircle(CheckCircleArgs),
    /// First curvature and second Frenet residual along a sampled curve.
    Frenet(FrenetArgs),
    /// Circle-preservation harness and conformality check for two metrics.
    Vogel(VogelArgs),
    /// Sample the unit circle of the Minkowski–Randers norm as CSV.
    Indicatrix(IndicatrixArgs),
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum Mode {
    Standard,
    FullLift,
}

impl From<Mode> for TransportMode {
    fn from(m: Mode) -> Self {
        match m {
            Mode::Standard => TransportMode::Standard,
            Mode::FullLift => TransportMode::FullLift,
        }
    }
}

#[derive(Debug, Clone, Args)]
pub struct ThresholdArgs {
    /// Maximum parallelism ratio ρ for a circle.
    #[arg(long)]
    pub parallelism: Option<f64>,
    /// First curvature below which a curve is a geodesic.
    #[arg(long = "geodesic-cutoff")]
    pub geodesic: Option<f64>,
}

#[derive(Debug, Args)]
pub struct MetricInfoArgs {
    #[arg(long)]
    pub metric: String,
    /// Line element as `x1,x2,…;y1,y2,…`.
    #[arg(long, allow_hyphen_values = true)]
    pub at: String,
}

#[derive(Debug, Clone, Copy, ValueEnum, PartialEq, Eq)]
pub enum Kind {
    Circle,
    Geodesic,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum IntegratorChoice {
    Rk4,
    Dopri5,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum Equation {
    Intrinsic,
    FixedCurvature,
}

#[derive(Debug, Clone, Copy, ValueEnum, PartialEq, Eq)]
pub enum Format {
    Json,
    Csv,
}

#[derive(Debug, Args)]
pub struct TraceArgs {
    #[arg(long, value_enum, default_value = "circle")]
    pub kind: Kind,
    #[arg(long)]
    pub metric: String,
    /// Initial point.
    #[arg(long, allow_hyphen_values = true)]
    pub p: String,
    /// Initial unit tangent.
    #[arg(long = "X", allow_hyphen_values = true)]
    pub x: String,
    /// Initial unit normal (circles only).
    #[arg(long = "Y", allow_hyphen_values = true)]
    pub y: Option<String>,
    /// Curvature (circles only).
    #[arg(long)]
    pub k: Option<f64>,
    /// Arc length to integrate.
    #[arg(long)]
    pub smax: f64,
    /// Output step in arc length.
    #[arg(long)]
    pub step: Option<f64>,
    #[arg(long, value_enum, default_value = "rk4")]
    pub integrator: IntegratorChoice,
    /// Absolute and relative tolerance of the adaptive integrator.
    #[arg(long)]
    pub tol: Option<f64>,
    #[arg(long, value_enum, default_value = "standard")]
    pub mode: Mode,
    #[arg(long, value_enum, default_value = "intrinsic")]
    pub equation: Equation,
    /// Normalize X and orthonormalize Y instead of requiring it.
    #[arg(long)]
    pub orthonormalize: bool,
    /// Abort once a normalized first-integral residual exceeds this.
    #[arg(long = "abort-threshold")]
    pub abort: Option<f64>,
    /// Never abort on residual growth.
    #[arg(long = "no-abort", conflicts_with = "abort")]
    pub no_abort: bool,
    /// Output file; the format follows the extension unless --format is given.
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long, value_enum)]
    pub format: Option<Format>,
}

#[derive(Debug, Args)]
pub struct CheckCircleArgs {
    /// Metric of the test; defaults to the metric recorded in a trace.
    #[arg(long)]
    pub metric: Option<String>,
    /// Trace JSON or CSV file.
    #[arg(long = "in")]
    pub input: PathBuf,
    #[command(flatten)]
    pub thresholds: ThresholdArgs,
    #[arg(long, value_enum, default_value = "standard")]
    pub mode: Mode,
    /// Resample at unit speed under the metric before testing.
    #[arg(long)]
    pub reparametrize: bool,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct FrenetArgs {
    #[arg(long)]
    pub metric: Option<String>,
    #[arg(long = "in")]
    pub input: PathBuf,
    #[arg(long, value_enum, default_value = "standard")]
    pub mode: Mode,
    /// Include the per-sample series.
    #[arg(long)]
    pub series: bool,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct VogelArgs {
    #[arg(long = "metric-a")]
    pub metric_a: String,
    #[arg(long = "metric-b")]
    pub metric_b: String,
    #[arg(long, allow_hyphen_values = true)]
    pub point: String,
    /// Curvatures of the circle family; 0 adds geodesics.
    #[arg(long, allow_hyphen_values = true)]
    pub kset: Option<String>,
    /// Number of orthonormal (X, Y) pairs.
    #[arg(long)]
    pub pairs: Option<usize>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Integration length in periods.
    #[arg(long)]
    pub periods: Option<f64>,
    #[arg(long = "steps-per-period")]
    pub steps_per_period: Option<usize>,
    /// Directions probed by the conformality check.
    #[arg(long, default_value_t = 16)]
    pub directions: usize,
    #[command(flatten)]
    pub thresholds: ThresholdArgs,
    #[arg(long, value_enum, default_value = "standard")]
    pub mode: Mode,
    /// Exit with status 2 unless the pair is preserving and conformal.
    #[arg(long)]
    pub expect: bool,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct IndicatrixArgs {
    #[arg(long)]
    pub b: f64,
    #[arg(long, default_value_t = 64)]
    pub samples: usize,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match commands::run(cli.command) {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(1)
        }
    }
}

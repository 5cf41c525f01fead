//! Numerical Finsler geometry on a single coordinate chart.
//!
//! * [`derivkit`]: exact (nested dual) and finite-difference partials of `F²`.
//! * [`metric`], [`connection`]: the metric catalogue and its connection data
//!   (`g`, `C`, `G`, `N`, `Γ`) at a line element.
//! * [`transport`]: covariant derivatives along sampled curves, metric
//!   compatibility residuals, Frenet curvature data.
//! * [`circleflow`]: geodesic and circle integration, the circle test,
//!   arc-length reparametrization.
//! * [`vogel`]: conformality detection and the circle-preservation harness.
//! * [`spec`], [`expr`], [`io`]: metric-spec strings, σ expressions, trace
//!   and report files.

pub mod circleflow;
pub mod connection;
pub mod derivkit;
pub mod error;
pub mod expr;
pub mod io;
pub mod metric;
pub mod spec;
pub mod stencil;
pub mod syntax;
pub mod tensor;
pub mod transport;
pub mod vogel;

pub use connection::{connection_sample, ConnectionSample};
pub use error::{FinslerError, Result};
pub use metric::{Chart, FinslerMetric, LineElement, MetricKind};

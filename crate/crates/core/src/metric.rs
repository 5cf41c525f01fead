//! The metric catalogue.

use nalgebra::{DMatrix, DVector};

use crate::derivkit::{Scalar, ScalarField};
use crate::error::{FinslerError, Result};
use crate::expr::Expr;

/// Construction rejects Randers 1-forms with `‖b‖_a ≥ 1 − RANDERS_MARGIN`.
pub const RANDERS_MARGIN: f64 = 1e-9;

/// Built-in Riemannian chart metrics `g_ij(x)`.
#[derive(Debug, Clone, PartialEq)]
pub enum Chart {
    Flat { n: usize },
    /// Unit 2-sphere in (colatitude, longitude): `diag(1, sin²x¹)`.
    Sphere,
    /// Constant `diag(d₁ … dₙ)`.
    Diag(Vec<f64>),
}

#[derive(Debug, Clone, PartialEq)]
pub enum MetricKind {
    Euclidean { n: usize },
    Riemannian(Chart),
    /// `√(a(y,y)) + b(y)` with constant `a` and `b`.
    Randers { a: DMatrix<f64>, b: DVector<f64> },
    /// The Randers plane `√(u²+v²) + b·u`.
    MinkowskiRanders { b: f64 },
    /// `e^{σ(x)}·F_base(x, y)`.
    Conformal { base: Box<FinslerMetric>, sigma: Expr },
}

/// A Finsler structure `F(x, y)` on a single coordinate chart.
#[derive(Debug, Clone, PartialEq)]
pub struct FinslerMetric {
    kind: MetricKind,
}

impl FinslerMetric {
    pub fn euclidean(n: usize) -> Result<Self> {
        if n < 2 {
            return Err(FinslerError::InvalidMetric(format!(
                "dimension must be at least 2, got {n}"
            )));
        }
        Ok(Self {
            kind: MetricKind::Euclidean { n },
        })
    }

    pub fn riemannian(chart: Chart) -> Result<Self> {
        match &chart {
            Chart::Flat { n } if *n < 2 => {
                return Err(FinslerError::InvalidMetric(format!(
                    "dimension must be at least 2, got {n}"
                )))
            }
            Chart::Diag(d) => {
                if d.len() < 2 {
                    return Err(FinslerError::InvalidMetric(
                        "diag needs at least 2 entries".into(),
                    ));
                }
                if d.iter().any(|&v| !(v > 0.0 && v.is_finite())) {
                    return Err(FinslerError::InvalidMetric(
                        "diag entries must be positive and finite".into(),
                    ));
                }
            }
            _ => {}
        }
        Ok(Self {
            kind: MetricKind::Riemannian(chart),
        })
    }

    pub fn sphere() -> Self {
        Self {
            kind: MetricKind::Riemannian(Chart::Sphere),
        }
    }

    pub fn randers(a: DMatrix<f64>, b: DVector<f64>) -> Result<Self> {
        let n = b.len();
        if n < 2 || a.nrows() != n || a.ncols() != n {
            return Err(FinslerError::InvalidMetric(format!(
                "randers needs an n×n form and an n-covector with n ≥ 2 (got {}×{} and {})",
                a.nrows(),
                a.ncols(),
                n
            )));
        }
        if a.iter().chain(b.iter()).any(|v| !v.is_finite()) {
            return Err(FinslerError::InvalidMetric("non-finite randers parameter".into()));
        }
        if (&a - a.transpose()).amax() > 1e-12 * a.amax().max(1.0) {
            return Err(FinslerError::InvalidMetric("randers form a is not symmetric".into()));
        }
        let chol = a.clone().cholesky().ok_or_else(|| {
            FinslerError::InvalidMetric("randers form a is not positive definite".into())
        })?;
        let norm = b.dot(&chol.solve(&b)).sqrt();
        if norm >= 1.0 - RANDERS_MARGIN {
            return Err(FinslerError::InvalidMetric(format!(
                "b out of range (0,1): ‖b‖_a = {norm}"
            )));
        }
        Ok(Self {
            kind: MetricKind::Randers { a, b },
        })
    }

    pub fn minkowski_randers(b: f64) -> Result<Self> {
        if !(b > 0.0 && b < 1.0 - RANDERS_MARGIN) {
            return Err(FinslerError::InvalidMetric(format!(
                "b out of range (0,1): {b}"
            )));
        }
        Ok(Self {
            kind: MetricKind::MinkowskiRanders { b },
        })
    }

    pub fn conformal(base: FinslerMetric, sigma: Expr) -> Result<Self> {
        if sigma.max_var() > base.dim() {
            return Err(FinslerError::InvalidMetric(format!(
                "sigma references x{} but the base metric has dimension {}",
                sigma.max_var(),
                base.dim()
            )));
        }
        Ok(Self {
            kind: MetricKind::Conformal {
                base: Box::new(base),
                sigma,
            },
        })
    }

    /// Constant rescaling `e^c·F`.
    pub fn homothety(base: FinslerMetric, c: f64) -> Result<Self> {
        Self::conformal(base, Expr::Num(c))
    }

    pub fn kind(&self) -> &MetricKind {
        &self.kind
    }

    pub fn dim(&self) -> usize {
        match &self.kind {
            MetricKind::Euclidean { n } => *n,
            MetricKind::Riemannian(Chart::Flat { n }) => *n,
            MetricKind::Riemannian(Chart::Sphere) => 2,
            MetricKind::Riemannian(Chart::Diag(d)) => d.len(),
            MetricKind::Randers { b, .. } => b.len(),
            MetricKind::MinkowskiRanders { .. } => 2,
            MetricKind::Conformal { base, .. } => base.dim(),
        }
    }

    /// True when `g` does not depend on `y`.
    pub fn is_riemannian(&self) -> bool {
        match &self.kind {
            MetricKind::Euclidean { .. } | MetricKind::Riemannian(_) => true,
            MetricKind::Randers { b, .. } => b.iter().all(|&v| v == 0.0),
            MetricKind::MinkowskiRanders { .. } => false,
            MetricKind::Conformal { base, .. } => base.is_riemannian(),
        }
    }

    /// True when `F` does not depend on `x` (a Minkowski norm in linear coordinates).
    pub fn is_minkowski(&self) -> bool {
        match &self.kind {
            MetricKind::Euclidean { .. }
            | MetricKind::Riemannian(Chart::Flat { .. })
            | MetricKind::Riemannian(Chart::Diag(_))
            | MetricKind::Randers { .. }
            | MetricKind::MinkowskiRanders { .. } => true,
            MetricKind::Riemannian(Chart::Sphere) => false,
            MetricKind::Conformal { base, sigma } => sigma.is_constant() && base.is_minkowski(),
        }
    }

    /// `F(x, y)` on any scalar carrier.
    pub fn norm_generic<S: Scalar>(&self, x: &[S], y: &[S]) -> S {
        match &self.kind {
            MetricKind::Conformal { base, sigma } => sigma.eval(x).exp() * base.norm_generic(x, y),
            MetricKind::Randers { a, b } => quad_form(a, y).sqrt() + linear_form(b, y),
            MetricKind::MinkowskiRanders { b } => {
                (y[0] * y[0] + y[1] * y[1]).sqrt() + y[0].scale(*b)
            }
            _ => self.norm_squared_generic(x, y).sqrt(),
        }
    }

    /// `F²(x, y)`; Riemannian kinds skip the square root.
    pub fn norm_squared_generic<S: Scalar>(&self, x: &[S], y: &[S]) -> S {
        match &self.kind {
            MetricKind::Euclidean { .. } | MetricKind::Riemannian(Chart::Flat { .. }) => {
                dot(y, y)
            }
            MetricKind::Riemannian(Chart::Sphere) => {
                let s = x[0].sin();
                y[0] * y[0] + s * s * y[1] * y[1]
            }
            MetricKind::Riemannian(Chart::Diag(d)) => y
                .iter()
                .zip(d)
                .fold(S::cst(0.0), |acc, (&yi, &di)| acc + (yi * yi).scale(di)),
            MetricKind::Conformal { base, sigma } => {
                sigma.eval(x).scale(2.0).exp() * base.norm_squared_generic(x, y)
            }
            _ => {
                let f = self.norm_generic(x, y);
                f * f
            }
        }
    }

    pub fn norm(&self, x: &[f64], y: &[f64]) -> f64 {
        self.norm_generic(x, y)
    }

    pub fn norm_at(&self, le: &LineElement) -> f64 {
        self.norm(le.x.as_slice(), le.y.as_slice())
    }

    /// `σ(x)` of a conformal wrapper, `0` otherwise.
    pub fn conformal_factor(&self, x: &[f64]) -> f64 {
        match &self.kind {
            MetricKind::Conformal { base, sigma } => sigma.eval(x) + base.conformal_factor(x),
            _ => 0.0,
        }
    }

    pub fn check_admissible(&self, le: &LineElement) -> Result<f64> {
        let n = self.dim();
        if le.x.len() != n || le.y.len() != n {
            return Err(FinslerError::DimensionMismatch {
                expected: n,
                got: le.x.len().max(le.y.len()),
            });
        }
        let f = self.norm_at(le);
        if !(f.is_finite() && f > 0.0) {
            return Err(FinslerError::Inadmissible {
                x: le.x.as_slice().to_vec(),
                y: le.y.as_slice().to_vec(),
                value: f,
            });
        }
        Ok(f)
    }
}

fn dot<S: Scalar>(a: &[S], b: &[S]) -> S {
    a.iter()
        .zip(b)
        .fold(S::cst(0.0), |acc, (&ai, &bi)| acc + ai * bi)
}

fn quad_form<S: Scalar>(a: &DMatrix<f64>, y: &[S]) -> S {
    let n = y.len();
    let mut acc = S::cst(0.0);
    for i in 0..n {
        let mut row = S::cst(0.0);
        for j in 0..n {
            let aij = a[(i, j)];
            if aij != 0.0 {
                row = row + y[j].scale(aij);
            }
        }
        acc = acc + y[i] * row;
    }
    acc
}

fn linear_form<S: Scalar>(b: &DVector<f64>, y: &[S]) -> S {
    y.iter()
        .zip(b.iter())
        .filter(|(_, &bi)| bi != 0.0)
        .fold(S::cst(0.0), |acc, (&yi, &bi)| acc + yi.scale(bi))
}

/// `F²` as a differentiable field; every connection quantity is built from it.
pub struct SquaredNorm<'a>(pub &'a FinslerMetric);

impl ScalarField for SquaredNorm<'_> {
    fn dim(&self) -> usize {
        self.0.dim()
    }

    fn eval<S: Scalar>(&self, x: &[S], y: &[S]) -> S {
        self.0.norm_squared_generic(x, y)
    }
}

/// A point together with a reference direction.
#[derive(Debug, Clone, PartialEq)]
pub struct LineElement {
    pub x: DVector<f64>,
    pub y: DVector<f64>,
}

impl LineElement {
    pub fn new(x: DVector<f64>, y: DVector<f64>) -> Self {
        Self { x, y }
    }

    pub fn from_slices(x: &[f64], y: &[f64]) -> Self {
        Self {
            x: DVector::from_column_slice(x),
            y: DVector::from_column_slice(y),
        }
    }

    pub fn dim(&self) -> usize {
        self.x.len()
    }
}

//! Connection data of a Finsler structure at a line element.
//!
//! Every quantity is built from one jet of `E = F²`:
//!
//! * `g_ij = ½ ∂²E/∂yⁱ∂yʲ`
//! * `Cⁱ_jk = ½ gⁱᵐ ∂g_mk/∂yʲ`
//! * `Gⁱ = ¼ gⁱˡ (∂²E/∂xᵐ∂yˡ yᵐ − ∂E/∂xˡ)`
//! * `Nⁱ_j = ∂Gⁱ/∂yʲ`, so that `Nⁱ_j yʲ = 2Gⁱ` and the spray is horizontal
//! * `Γⁱ_jk = ½ gⁱʰ (δ_j g_hk + δ_k g_hj − δ_h g_jk)` with `δ_j = ∂/∂xʲ − Nˢ_j ∂/∂yˢ`
//!
//! Geodesics satisfy `ẍⁱ + 2Gⁱ(x, ẋ) = 0`, and `Γⁱ_jk yʲyᵏ = 2Gⁱ`.

use nalgebra::{DMatrix, DVector};

use crate::derivkit::{jet_eval, DerivativeProvider, Jet, Order, OrderSpec};
use crate::error::{FinslerError, Result};
use crate::metric::{FinslerMetric, LineElement, SquaredNorm};
use crate::tensor::Tensor3;

/// `g`, `g⁻¹`, `C`, `G`, `N`, `Γ` at one line element.
#[derive(Debug, Clone, PartialEq)]
pub struct ConnectionSample {
    pub line_element: LineElement,
    pub g: DMatrix<f64>,
    pub ginv: DMatrix<f64>,
    /// `Cⁱ_jk`
    pub cartan: Tensor3,
    /// `Gⁱ`
    pub spray: DVector<f64>,
    /// `Nⁱ_j`
    pub nonlinear: DMatrix<f64>,
    /// `Γⁱ_jk`
    pub christoffel: Tensor3,
}

impl ConnectionSample {
    pub fn dim(&self) -> usize {
        self.g.nrows()
    }

    /// `g_(x,y)(a, b)`.
    pub fn inner(&self, a: &DVector<f64>, b: &DVector<f64>) -> f64 {
        a.dot(&(&self.g * b))
    }

    pub fn norm_sq(&self, a: &DVector<f64>) -> f64 {
        self.inner(a, a)
    }

    /// `(Γⁱ_kh + Cⁱ_ks Nˢ_h) aᵏ bʰ`: the connection term of the covariant
    /// derivative of `a` along a curve with velocity `b`.
    pub fn transport_term(&self, a: &DVector<f64>, b: &DVector<f64>) -> DVector<f64> {
        let nb = &self.nonlinear * b;
        let gamma = self.christoffel.contract(a.as_slice(), b.as_slice());
        let cn = self.cartan.contract(a.as_slice(), nb.as_slice());
        DVector::from_iterator(self.dim(), gamma.iter().zip(&cn).map(|(p, q)| p + q))
    }

    /// `Γⁱ_kh aᵏ ẋʰ + Cⁱ_ks aᵏ (ẍˢ + Nˢ_h ẋʰ)`: connection term including the
    /// vertical part of the lifted curve `(x, ẋ)`.
    pub fn transport_term_lifted(
        &self,
        a: &DVector<f64>,
        xdot: &DVector<f64>,
        xddot: &DVector<f64>,
    ) -> DVector<f64> {
        let vertical = xddot + &self.nonlinear * xdot;
        let gamma = self.christoffel.contract(a.as_slice(), xdot.as_slice());
        let cv = self.cartan.contract(a.as_slice(), vertical.as_slice());
        DVector::from_iterator(self.dim(), gamma.iter().zip(&cv).map(|(p, q)| p + q))
    }
}

fn y_spec() -> OrderSpec {
    [Order::Y1, Order::Y2].into_iter().collect()
}

fn eval_jet(
    m: &FinslerMetric,
    le: &LineElement,
    spec: OrderSpec,
    provider: DerivativeProvider,
) -> Result<Jet> {
    m.check_admissible(le)?;
    jet_eval(&SquaredNorm(m), le, spec, provider)
}

fn metric_from_jet(jet: &Jet, le: &LineElement) -> Result<(DMatrix<f64>, DMatrix<f64>)> {
    let n = jet.dim();
    let g = DMatrix::from_fn(n, n, |i, j| 0.5 * jet.yy(i, j));
    let chol = g.clone().cholesky().ok_or_else(|| FinslerError::NotPositiveDefinite {
        x: le.x.as_slice().to_vec(),
        y: le.y.as_slice().to_vec(),
    })?;
    let ginv = chol.inverse();
    Ok((g, ginv))
}

/// `g_ij = ½ ∂²F²/∂yⁱ∂yʲ`.
pub fn fundamental_tensor(m: &FinslerMetric, le: &LineElement) -> Result<DMatrix<f64>> {
    let jet = eval_jet(m, le, y_spec(), DerivativeProvider::ExactArithmetic)?;
    Ok(metric_from_jet(&jet, le)?.0)
}

/// `Cⁱ_jk`, symmetric in `(j, k)`, with `Cⁱ_jk yʲ = 0`.
pub fn cartan_torsion(m: &FinslerMetric, le: &LineElement) -> Result<Tensor3> {
    let spec = y_spec().with(Order::Y3);
    let jet = eval_jet(m, le, spec, DerivativeProvider::ExactArithmetic)?;
    let (_, ginv) = metric_from_jet(&jet, le)?;
    Ok(cartan_from(&jet, &ginv))
}

/// Spray coefficients `Gⁱ`.
pub fn spray(m: &FinslerMetric, le: &LineElement) -> Result<DVector<f64>> {
    let spec = y_spec().with(Order::X1).with(Order::X1Y1);
    let jet = eval_jet(m, le, spec, DerivativeProvider::ExactArithmetic)?;
    let (_, ginv) = metric_from_jet(&jet, le)?;
    let a = spray_bracket(&jet, le);
    Ok(&ginv * a * 0.25)
}

/// `Nⁱ_j = ∂Gⁱ/∂yʲ`.
pub fn nonlinear_connection(m: &FinslerMetric, le: &LineElement) -> Result<DMatrix<f64>> {
    Ok(connection_sample(m, le)?.nonlinear)
}

/// Cartan Christoffel symbols `Γⁱ_jk`.
pub fn cartan_christoffels(m: &FinslerMetric, le: &LineElement) -> Result<Tensor3> {
    Ok(connection_sample(m, le)?.christoffel)
}

pub fn connection_sample(m: &FinslerMetric, le: &LineElement) -> Result<ConnectionSample> {
    connection_sample_with(m, le, DerivativeProvider::ExactArithmetic)
}

/// [`connection_sample`] with an explicit derivative provider.
pub fn connection_sample_with(
    m: &FinslerMetric,
    le: &LineElement,
    provider: DerivativeProvider,
) -> Result<ConnectionSample> {
    let jet = eval_jet(m, le, OrderSpec::all(), provider)?;
    let n = jet.dim();
    let (g, ginv) = metric_from_jet(&jet, le)?;
    let y = &le.y;

    // ∂g_ab/∂yʰ
    let dg_y = Tensor3::from_fn(n, |a, b, h| 0.5 * jet.yyy(a, b, h));
    let cartan = cartan_from(&jet, &ginv);

    let bracket = spray_bracket(&jet, le);
    let spray = &ginv * &bracket * 0.25;

    // ∂gⁱˡ/∂yʲ = −gⁱᵃ (∂g_ab/∂yʲ) gᵇˡ
    let mut dginv = Tensor3::zeros(n);
    for j in 0..n {
        let dg = DMatrix::from_fn(n, n, |a, b| dg_y[(a, b, j)]);
        let prod = &ginv * dg * &ginv;
        for i in 0..n {
            for l in 0..n {
                dginv[(i, l, j)] = -prod[(i, l)];
            }
        }
    }
    let nonlinear = DMatrix::from_fn(n, n, |i, j| {
        let mut acc = 0.0;
        for l in 0..n {
            // ∂A_l/∂yʲ
            let mut da = jet.xy(j, l) - jet.xy(l, j);
            for mm in 0..n {
                da += jet.xyy(mm, l, j) * y[mm];
            }
            acc += dginv[(i, l, j)] * bracket[l] + ginv[(i, l)] * da;
        }
        0.25 * acc
    });

    // δg_hk/δxʲ
    let delta_g = Tensor3::from_fn(n, |h, k, j| {
        let mut v = 0.5 * jet.xyy(j, h, k);
        for s in 0..n {
            v -= nonlinear[(s, j)] * dg_y[(h, k, s)];
        }
        v
    });
    let christoffel = Tensor3::from_fn(n, |i, j, k| {
        let mut acc = 0.0;
        for h in 0..n {
            acc += ginv[(i, h)]
                * (delta_g[(h, k, j)] + delta_g[(h, j, k)] - delta_g[(j, k, h)]);
        }
        0.5 * acc
    });

    let sample = ConnectionSample {
        line_element: le.clone(),
        g,
        ginv,
        cartan,
        spray,
        nonlinear,
        christoffel,
    };
    Ok(sample)
}

fn cartan_from(jet: &Jet, ginv: &DMatrix<f64>) -> Tensor3 {
    let n = jet.dim();
    Tensor3::from_fn(n, |i, j, k| {
        let mut acc = 0.0;
        for mm in 0..n {
            acc += ginv[(i, mm)] * jet.yyy(mm, k, j);
        }
        0.25 * acc
    })
}

/// `A_l = ∂²E/∂xᵐ∂yˡ yᵐ − ∂E/∂xˡ`.
fn spray_bracket(jet: &Jet, le: &LineElement) -> DVector<f64> {
    let n = jet.dim();
    DVector::from_fn(n, |l, _| {
        let mut acc = -jet.x(l);
        for mm in 0..n {
            acc += jet.xy(mm, l) * le.y[mm];
        }
        acc
    })
}

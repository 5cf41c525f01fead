//! Partial derivatives of scalar fields `f(x, y)` on the tangent bundle.
//!
//! Two providers share one contract: nested dual arithmetic (exact up to
//! rounding) and 4th-order central finite differences (the cross-check
//! oracle). Supported partials are the closed set `∂_y`, `∂²_y`, `∂³_y`,
//! `∂_x`, `∂_x∂_y`, `∂_x∂²_y`.

mod dual;
mod fd;
mod jet;

pub use dual::{seed1, seed2, seed3, unpack2, unpack3, Dual, Dual1, Dual2, Dual3, Scalar};
pub use fd::{fd_partial, FD_DEFAULT_STEP};
pub use jet::{fd_crosscheck, jet_eval, DerivativeProvider, Jet, MultiIndex, Order, OrderSpec};

/// A scalar function of a point `x` and a direction `y`, evaluable on any
/// [`Scalar`] carrier.
pub trait ScalarField {
    fn dim(&self) -> usize;
    fn eval<S: Scalar>(&self, x: &[S], y: &[S]) -> S;
}

/// A coordinate slot: either a point coordinate `xⁱ` or a direction component `yⁱ`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Var {
    X(usize),
    Y(usize),
}

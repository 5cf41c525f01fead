//! Generic scalars and single-direction dual numbers.
//!
//! A [`Dual<T>`] carries a value and one directional derivative. Nesting
//! `Dual<Dual<Dual<f64>>>` gives one perturbation per nesting level, so a
//! single evaluation yields every mixed partial along three chosen
//! directions, with no truncation error.

use std::fmt::Debug;
use std::ops::{Add, Div, Mul, Neg, Sub};

/// Arithmetic carrier shared by plain `f64` and every nesting of [`Dual`].
pub trait Scalar:
    Copy
    + Debug
    + PartialEq
    + Add<Output = Self>
    + Sub<Output = Self>
    + Mul<Output = Self>
    + Div<Output = Self>
    + Neg<Output = Self>
{
    fn cst(v: f64) -> Self;
    /// Innermost real part.
    fn re(&self) -> f64;
    fn sqrt(self) -> Self;
    fn sin(self) -> Self;
    fn cos(self) -> Self;
    fn exp(self) -> Self;
    fn ln(self) -> Self;
    fn powi(self, n: i32) -> Self;
    fn powf(self, p: f64) -> Self;

    fn scale(self, c: f64) -> Self {
        self * Self::cst(c)
    }
}

impl Scalar for f64 {
    #[inline]
    fn cst(v: f64) -> Self {
        v
    }
    #[inline]
    fn re(&self) -> f64 {
        *self
    }
    #[inline]
    fn sqrt(self) -> Self {
        f64::sqrt(self)
    }
    #[inline]
    fn sin(self) -> Self {
        f64::sin(self)
    }
    #[inline]
    fn cos(self) -> Self {
        f64::cos(self)
    }
    #[inline]
    fn exp(self) -> Self {
        f64::exp(self)
    }
    #[inline]
    fn ln(self) -> Self {
        f64::ln(self)
    }
    #[inline]
    fn powi(self, n: i32) -> Self {
        f64::powi(self, n)
    }
    #[inline]
    fn powf(self, p: f64) -> Self {
        f64::powf(self, p)
    }
    #[inline]
    fn scale(self, c: f64) -> Self {
        self * c
    }
}

/// `re + eps·ε` with `ε² = 0`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Dual<T> {
    pub re: T,
    pub eps: T,
}

impl<T: Scalar> Dual<T> {
    pub fn new(re: T, eps: T) -> Self {
        Self { re, eps }
    }

    pub fn constant(re: T) -> Self {
        Self {
            re,
            eps: T::cst(0.0),
        }
    }

    /// Applies a univariate function given its value and derivative at `re`.
    #[inline]
    fn chain(self, value: T, deriv: T) -> Self {
        Self {
            re: value,
            eps: deriv * self.eps,
        }
    }
}

impl<T: Scalar> Add for Dual<T> {
    type Output = Self;
    #[inline]
    fn add(self, o: Self) -> Self {
        Self::new(self.re + o.re, self.eps + o.eps)
    }
}

impl<T: Scalar> Sub for Dual<T> {
    type Output = Self;
    #[inline]
    fn sub(self, o: Self) -> Self {
        Self::new(self.re - o.re, self.eps - o.eps)
    }
}

impl<T: Scalar> Mul for Dual<T> {
    type Output = Self;
    #[inline]
    fn mul(self, o: Self) -> Self {
        Self::new(self.re * o.re, self.re * o.eps + self.eps * o.re)
    }
}

impl<T: Scalar> Div for Dual<T> {
    type Output = Self;
    #[inline]
    fn div(self, o: Self) -> Self {
        let q = self.re / o.re;
        Self::new(q, (self.eps - q * o.eps) / o.re)
    }
}

impl<T: Scalar> Neg for Dual<T> {
    type Output = Self;
    #[inline]
    fn neg(self) -> Self {
        Self::new(-self.re, -self.eps)
    }
}

impl<T: Scalar> Scalar for Dual<T> {
    #[inline]
    fn cst(v: f64) -> Self {
        Self::constant(T::cst(v))
    }

    #[inline]
    fn re(&self) -> f64 {
        self.re.re()
    }

    fn sqrt(self) -> Self {
        let r = self.re.sqrt();
        self.chain(r, T::cst(0.5) / r)
    }

    fn sin(self) -> Self {
        self.chain(self.re.sin(), self.re.cos())
    }

    fn cos(self) -> Self {
        self.chain(self.re.cos(), -self.re.sin())
    }

    fn exp(self) -> Self {
        let e = self.re.exp();
        self.chain(e, e)
    }

    fn ln(self) -> Self {
        self.chain(self.re.ln(), T::cst(1.0) / self.re)
    }

    fn powi(self, n: i32) -> Self {
        match n {
            0 => Self::cst(1.0),
            1 => self,
            _ => self.chain(self.re.powi(n), self.re.powi(n - 1).scale(n as f64)),
        }
    }

    fn powf(self, p: f64) -> Self {
        if p == 0.0 {
            return Self::cst(1.0);
        }
        self.chain(self.re.powf(p), self.re.powf(p - 1.0).scale(p))
    }

    #[inline]
    fn scale(self, c: f64) -> Self {
        Self::new(self.re.scale(c), self.eps.scale(c))
    }
}

pub type Dual1 = Dual<f64>;
pub type Dual2 = Dual<Dual1>;
pub type Dual3 = Dual<Dual2>;

/// Seeds a variable of value `v` with perturbation `s1` along the single
/// direction of a first-order dual.
pub fn seed1(v: f64, s1: f64) -> Dual1 {
    Dual::new(v, s1)
}

pub fn seed2(v: f64, s1: f64, s2: f64) -> Dual2 {
    Dual::new(Dual::new(v, s1), Dual::new(s2, 0.0))
}

pub fn seed3(v: f64, s1: f64, s2: f64, s3: f64) -> Dual3 {
    Dual::new(
        seed2(v, s1, s2),
        Dual::new(Dual::new(s3, 0.0), Dual::constant(0.0)),
    )
}

/// All partials carried by a third-order dual: `[f, ∂1, ∂2, ∂12, ∂3, ∂13, ∂23, ∂123]`.
pub fn unpack3(d: &Dual3) -> [f64; 8] {
    [
        d.re.re.re,
        d.re.re.eps,
        d.re.eps.re,
        d.re.eps.eps,
        d.eps.re.re,
        d.eps.re.eps,
        d.eps.eps.re,
        d.eps.eps.eps,
    ]
}

/// `[f, ∂1, ∂2, ∂12]` of a second-order dual.
pub fn unpack2(d: &Dual2) -> [f64; 4] {
    [d.re.re, d.re.eps, d.eps.re, d.eps.eps]
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn first_derivative_of_product() {
        let x = seed1(3.0, 1.0);
        let f = x * x + x.scale(2.0);
        assert_eq!(f.re, 15.0);
        assert_eq!(f.eps, 8.0);
    }

    #[test]
    fn third_derivative_of_cubic_is_exact() {
        let x = seed3(1.7, 1.0, 1.0, 1.0);
        let f = x * x * x;
        let p = unpack3(&f);
        assert_eq!(p[7], 6.0);
        assert_eq!(p[3], 6.0 * 1.7);
    }

    #[test]
    fn transcendental_chain() {
        let x = seed2(0.4, 1.0, 1.0);
        let f = x.sin().exp();
        let [v, d1, _, d11] = unpack2(&f);
        let s = 0.4f64.sin();
        let c = 0.4f64.cos();
        assert!((v - s.exp()).abs() < 1e-15);
        assert!((d1 - c * s.exp()).abs() < 1e-15);
        assert!((d11 - (c * c - s) * s.exp()).abs() < 1e-14);
    }

    #[test]
    fn division_and_sqrt() {
        let x = seed1(4.0, 1.0);
        let f = Dual1::cst(1.0) / x.sqrt();
        assert!((f.eps + 0.5 * 4f64.powf(-1.5)).abs() < 1e-16);
    }
}

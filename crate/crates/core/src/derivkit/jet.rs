use std::fmt;

use super::dual::{seed1, seed2, seed3, unpack2, unpack3, Dual1, Dual2, Dual3};
use super::fd::{fd_partial, FD_DEFAULT_STEP};
use super::{ScalarField, Var};
use crate::error::{FinslerError, Result};
use crate::metric::LineElement;

/// One of the supported partial-derivative orders `(x-order, y-order)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Order {
    Y1,
    Y2,
    Y3,
    X1,
    X1Y1,
    X1Y2,
}

impl Order {
    pub const ALL: [Order; 6] = [
        Order::Y1,
        Order::Y2,
        Order::Y3,
        Order::X1,
        Order::X1Y1,
        Order::X1Y2,
    ];

    pub fn from_counts(x_order: usize, y_order: usize) -> Result<Self> {
        Ok(match (x_order, y_order) {
            (0, 1) => Order::Y1,
            (0, 2) => Order::Y2,
            (0, 3) => Order::Y3,
            (1, 0) => Order::X1,
            (1, 1) => Order::X1Y1,
            (1, 2) => Order::X1Y2,
            _ => {
                return Err(FinslerError::UnsupportedOrder(format!(
                    "({x_order},{y_order})"
                )))
            }
        })
    }

    fn bit(self) -> u8 {
        1 << (self as u8)
    }
}

/// A set of requested orders.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct OrderSpec(u8);

impl OrderSpec {
    pub const fn empty() -> Self {
        Self(0)
    }

    pub fn all() -> Self {
        Order::ALL.iter().fold(Self::empty(), |s, &o| s.with(o))
    }

    pub fn with(self, o: Order) -> Self {
        Self(self.0 | o.bit())
    }

    pub fn contains(self, o: Order) -> bool {
        self.0 & o.bit() != 0
    }
}

impl FromIterator<Order> for OrderSpec {
    fn from_iter<I: IntoIterator<Item = Order>>(iter: I) -> Self {
        iter.into_iter().fold(Self::empty(), |s, o| s.with(o))
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum DerivativeProvider {
    ExactArithmetic,
    FiniteDifference { step: f64 },
}

impl DerivativeProvider {
    pub fn finite_difference() -> Self {
        DerivativeProvider::FiniteDifference {
            step: FD_DEFAULT_STEP,
        }
    }
}

impl Default for DerivativeProvider {
    fn default() -> Self {
        DerivativeProvider::ExactArithmetic
    }
}

/// A partial-derivative multi-index: at most one `x` slot plus `y` slots.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MultiIndex {
    pub x: Vec<usize>,
    pub y: Vec<usize>,
}

impl MultiIndex {
    pub fn y(idx: &[usize]) -> Self {
        Self {
            x: vec![],
            y: idx.to_vec(),
        }
    }

    pub fn xy(m: usize, idx: &[usize]) -> Self {
        Self {
            x: vec![m],
            y: idx.to_vec(),
        }
    }
}

impl fmt::Display for MultiIndex {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "∂x{:?}∂y{:?}", self.x, self.y)
    }
}

/// Value and requested partials of a scalar field at one line element.
///
/// Flat storage, row-major: `y2[i·n + j]`, `y3[(i·n + j)·n + k]`,
/// `x1y1[m·n + l]`, `x1y2[(m·n + i)·n + j]`.
#[derive(Debug, Clone, PartialEq)]
pub struct Jet {
    n: usize,
    pub value: f64,
    y1: Option<Vec<f64>>,
    y2: Option<Vec<f64>>,
    y3: Option<Vec<f64>>,
    x1: Option<Vec<f64>>,
    x1y1: Option<Vec<f64>>,
    x1y2: Option<Vec<f64>>,
}

impl Jet {
    fn empty(n: usize, value: f64) -> Self {
        Self {
            n,
            value,
            y1: None,
            y2: None,
            y3: None,
            x1: None,
            x1y1: None,
            x1y2: None,
        }
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    fn slot(&self, o: Order) -> Option<&Vec<f64>> {
        match o {
            Order::Y1 => self.y1.as_ref(),
            Order::Y2 => self.y2.as_ref(),
            Order::Y3 => self.y3.as_ref(),
            Order::X1 => self.x1.as_ref(),
            Order::X1Y1 => self.x1y1.as_ref(),
            Order::X1Y2 => self.x1y2.as_ref(),
        }
    }

    fn slot_mut(&mut self, o: Order) -> &mut Option<Vec<f64>> {
        match o {
            Order::Y1 => &mut self.y1,
            Order::Y2 => &mut self.y2,
            Order::Y3 => &mut self.y3,
            Order::X1 => &mut self.x1,
            Order::X1Y1 => &mut self.x1y1,
            Order::X1Y2 => &mut self.x1y2,
        }
    }

    /// Which orders this jet carries.
    pub fn spec(&self) -> OrderSpec {
        Order::ALL
            .iter()
            .copied()
            .filter(|&o| self.slot(o).is_some())
            .collect()
    }

    fn get(&self, o: Order, flat: usize) -> f64 {
        self.slot(o)
            .unwrap_or_else(|| panic!("{o:?} partials were not requested"))[flat]
    }

    pub fn y(&self, i: usize) -> f64 {
        self.get(Order::Y1, i)
    }

    pub fn yy(&self, i: usize, j: usize) -> f64 {
        self.get(Order::Y2, i * self.n + j)
    }

    pub fn yyy(&self, i: usize, j: usize, k: usize) -> f64 {
        self.get(Order::Y3, (i * self.n + j) * self.n + k)
    }

    pub fn x(&self, m: usize) -> f64 {
        self.get(Order::X1, m)
    }

    pub fn xy(&self, m: usize, l: usize) -> f64 {
        self.get(Order::X1Y1, m * self.n + l)
    }

    pub fn xyy(&self, m: usize, i: usize, j: usize) -> f64 {
        self.get(Order::X1Y2, (m * self.n + i) * self.n + j)
    }

    /// Looks up an arbitrary multi-index; errors outside the supported set
    /// or when the order was not requested.
    pub fn partial(&self, idx: &MultiIndex) -> Result<f64> {
        let order = Order::from_counts(idx.x.len(), idx.y.len())?;
        if idx.x.iter().chain(&idx.y).any(|&i| i >= self.n) {
            return Err(FinslerError::InvalidInput(format!(
                "index out of range in {idx} for dimension {}",
                self.n
            )));
        }
        if self.slot(order).is_none() {
            return Err(FinslerError::InvalidInput(format!(
                "{idx} was not requested from this jet"
            )));
        }
        let n = self.n;
        let flat = idx
            .x
            .iter()
            .chain(&idx.y)
            .fold(0usize, |acc, &i| acc * n + i);
        Ok(self.get(order, flat))
    }

    /// Largest `|a − b| / max(1, |a|)` over the partials both jets carry.
    pub fn max_discrepancy(&self, other: &Jet) -> f64 {
        let mut worst = rel(self.value, other.value);
        for o in Order::ALL {
            if let (Some(a), Some(b)) = (self.slot(o), other.slot(o)) {
                for (&p, &q) in a.iter().zip(b) {
                    worst = worst.max(rel(p, q));
                }
            }
        }
        worst
    }

    fn check_finite(&self) -> Result<()> {
        let all_finite = self.value.is_finite()
            && Order::ALL
                .iter()
                .filter_map(|&o| self.slot(o))
                .all(|v| v.iter().all(|p| p.is_finite()));
        if all_finite {
            Ok(())
        } else {
            Err(FinslerError::NonFinite {
                context: "jet of a scalar field".into(),
            })
        }
    }
}

fn rel(a: f64, b: f64) -> f64 {
    (a - b).abs() / a.abs().max(1.0)
}

/// Evaluates `f` and the requested partials at `at`.
pub fn jet_eval<F: ScalarField>(
    f: &F,
    at: &LineElement,
    spec: OrderSpec,
    provider: DerivativeProvider,
) -> Result<Jet> {
    let n = f.dim();
    if at.x.len() != n || at.y.len() != n {
        return Err(FinslerError::DimensionMismatch {
            expected: n,
            got: at.x.len().max(at.y.len()),
        });
    }
    if at.y.iter().all(|&v| v == 0.0) {
        return Err(FinslerError::InvalidInput(
            "reference vector y must be non-zero".into(),
        ));
    }
    let jet = match provider {
        DerivativeProvider::ExactArithmetic => exact_jet(f, at, spec),
        DerivativeProvider::FiniteDifference { step } => fd_jet(f, at, spec, step),
    };
    jet.check_finite()?;
    Ok(jet)
}

/// Largest relative discrepancy between the exact and finite-difference providers.
pub fn fd_crosscheck<F: ScalarField>(f: &F, at: &LineElement, spec: OrderSpec) -> Result<f64> {
    let exact = jet_eval(f, at, spec, DerivativeProvider::ExactArithmetic)?;
    let fd = jet_eval(f, at, spec, DerivativeProvider::finite_difference())?;
    Ok(exact.max_discrepancy(&fd))
}

fn seeds(v: Var, dirs: &[Var]) -> [f64; 3] {
    let mut s = [0.0; 3];
    for (slot, d) in s.iter_mut().zip(dirs) {
        *slot = if *d == v { 1.0 } else { 0.0 };
    }
    s
}

fn eval_with<F: ScalarField, S: super::Scalar>(
    f: &F,
    at: &LineElement,
    dirs: &[Var],
    mk: impl Fn(f64, [f64; 3]) -> S,
) -> S {
    let x: Vec<S> = at
        .x
        .iter()
        .enumerate()
        .map(|(i, &v)| mk(v, seeds(Var::X(i), dirs)))
        .collect();
    let y: Vec<S> = at
        .y
        .iter()
        .enumerate()
        .map(|(i, &v)| mk(v, seeds(Var::Y(i), dirs)))
        .collect();
    f.eval(&x, &y)
}

fn eval1<F: ScalarField>(f: &F, at: &LineElement, a: Var) -> [f64; 2] {
    let d: Dual1 = eval_with(f, at, &[a], |v, s| seed1(v, s[0]));
    [d.re, d.eps]
}

fn eval2<F: ScalarField>(f: &F, at: &LineElement, a: Var, b: Var) -> [f64; 4] {
    let d: Dual2 = eval_with(f, at, &[a, b], |v, s| seed2(v, s[0], s[1]));
    unpack2(&d)
}

fn eval3<F: ScalarField>(f: &F, at: &LineElement, a: Var, b: Var, c: Var) -> [f64; 8] {
    let d: Dual3 = eval_with(f, at, &[a, b, c], |v, s| seed3(v, s[0], s[1], s[2]));
    unpack3(&d)
}

struct Filler {
    n: usize,
    y1: Vec<f64>,
    y2: Vec<f64>,
    y3: Vec<f64>,
    x1: Vec<f64>,
    x1y1: Vec<f64>,
    x1y2: Vec<f64>,
}

impl Filler {
    fn new(n: usize) -> Self {
        Self {
            n,
            y1: vec![0.0; n],
            y2: vec![0.0; n * n],
            y3: vec![0.0; n * n * n],
            x1: vec![0.0; n],
            x1y1: vec![0.0; n * n],
            x1y2: vec![0.0; n * n * n],
        }
    }

    fn set_yy(&mut self, i: usize, j: usize, v: f64) {
        let n = self.n;
        self.y2[i * n + j] = v;
        self.y2[j * n + i] = v;
    }

    fn set_yyy(&mut self, i: usize, j: usize, k: usize, v: f64) {
        let n = self.n;
        for (a, b, c) in [(i, j, k), (i, k, j), (j, i, k), (j, k, i), (k, i, j), (k, j, i)] {
            self.y3[(a * n + b) * n + c] = v;
        }
    }

    fn set_xyy(&mut self, m: usize, i: usize, j: usize, v: f64) {
        let n = self.n;
        self.x1y2[(m * n + i) * n + j] = v;
        self.x1y2[(m * n + j) * n + i] = v;
    }
}

fn exact_jet<F: ScalarField>(f: &F, at: &LineElement, spec: OrderSpec) -> Jet {
    let n = at.dim();
    let mut fl = Filler::new(n);
    let mut value = f64::NAN;

    if spec.contains(Order::Y3) {
        for i in 0..n {
            for j in i..n {
                for k in j..n {
                    // [f, ∂i, ∂j, ∂ij, ∂k, ∂ik, ∂jk, ∂ijk]
                    let p = eval3(f, at, Var::Y(i), Var::Y(j), Var::Y(k));
                    value = p[0];
                    fl.y1[i] = p[1];
                    fl.set_yy(i, j, p[3]);
                    fl.set_yy(i, k, p[5]);
                    fl.set_yy(j, k, p[6]);
                    fl.set_yyy(i, j, k, p[7]);
                }
            }
        }
    } else if spec.contains(Order::Y2) {
        for i in 0..n {
            for j in i..n {
                let p = eval2(f, at, Var::Y(i), Var::Y(j));
                value = p[0];
                fl.y1[i] = p[1];
                fl.set_yy(i, j, p[3]);
            }
        }
    } else if spec.contains(Order::Y1) {
        for i in 0..n {
            let p = eval1(f, at, Var::Y(i));
            value = p[0];
            fl.y1[i] = p[1];
        }
    }

    if spec.contains(Order::X1Y2) {
        for m in 0..n {
            for i in 0..n {
                for j in i..n {
                    let p = eval3(f, at, Var::X(m), Var::Y(i), Var::Y(j));
                    value = p[0];
                    fl.x1[m] = p[1];
                    fl.x1y1[m * n + i] = p[3];
                    fl.x1y1[m * n + j] = p[5];
                    fl.set_xyy(m, i, j, p[7]);
                }
            }
        }
    } else if spec.contains(Order::X1Y1) {
        for m in 0..n {
            for l in 0..n {
                let p = eval2(f, at, Var::X(m), Var::Y(l));
                value = p[0];
                fl.x1[m] = p[1];
                fl.x1y1[m * n + l] = p[3];
            }
        }
    } else if spec.contains(Order::X1) {
        for m in 0..n {
            let p = eval1(f, at, Var::X(m));
            value = p[0];
            fl.x1[m] = p[1];
        }
    }

    if value.is_nan() {
        value = f.eval::<f64>(at.x.as_slice(), at.y.as_slice());
    }
    assemble(n, value, spec, fl)
}

fn fd_jet<F: ScalarField>(f: &F, at: &LineElement, spec: OrderSpec, step: f64) -> Jet {
    let n = at.dim();
    let (x, y) = (at.x.as_slice(), at.y.as_slice());
    let d = |vars: &[Var]| fd_partial(f, x, y, vars, step);
    let mut fl = Filler::new(n);
    // Every permutation is evaluated separately so symmetry is a genuine check.
    for i in 0..n {
        if spec.contains(Order::Y1) {
            fl.y1[i] = d(&[Var::Y(i)]);
        }
        if spec.contains(Order::X1) {
            fl.x1[i] = d(&[Var::X(i)]);
        }
        for j in 0..n {
            if spec.contains(Order::Y2) {
                fl.y2[i * n + j] = d(&[Var::Y(i), Var::Y(j)]);
            }
            if spec.contains(Order::X1Y1) {
                fl.x1y1[i * n + j] = d(&[Var::X(i), Var::Y(j)]);
            }
            for k in 0..n {
                if spec.contains(Order::Y3) {
                    fl.y3[(i * n + j) * n + k] = d(&[Var::Y(i), Var::Y(j), Var::Y(k)]);
                }
                if spec.contains(Order::X1Y2) {
                    fl.x1y2[(i * n + j) * n + k] = d(&[Var::X(i), Var::Y(j), Var::Y(k)]);
                }
            }
        }
    }
    let value = f.eval::<f64>(x, y);
    assemble(n, value, spec, fl)
}

fn assemble(n: usize, value: f64, spec: OrderSpec, fl: Filler) -> Jet {
    let mut jet = Jet::empty(n, value);
    let Filler {
        y1,
        y2,
        y3,
        x1,
        x1y1,
        x1y2,
        ..
    } = fl;
    for (o, v) in [
        (Order::Y1, y1),
        (Order::Y2, y2),
        (Order::Y3, y3),
        (Order::X1, x1),
        (Order::X1Y1, x1y1),
        (Order::X1Y2, x1y2),
    ] {
        if spec.contains(o) {
            *jet.slot_mut(o) = Some(v);
        }
    }
    jet
}

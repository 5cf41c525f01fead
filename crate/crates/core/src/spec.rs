//! Metric spec strings.
//!
//! ```text
//! spec   := kind (':' param (',' param)*)?
//! param  := name ('=' value)?
//! value  := number (',' number)* | '(' spec ')' | expression
//! ```
//!
//! | kind                | parameters                                         |
//! |---------------------|----------------------------------------------------|
//! | `euclidean`         | `n` (default 2)                                    |
//! | `riemannian`        | `sphere` \| `flat` with `n` \| `diag=d1,…,dn`       |
//! | `randers`           | `b=b1,…,bn`, `a=` n diagonal or n² row-major entries, `n` |
//! | `minkowski-randers` | `b`                                                |
//! | `conformal`         | `base=(spec)`, `sigma=expression in x1…xn`         |
//! | `homothety`         | `base=(spec)`, `c`                                 |
//!
//! A comma inside a number list continues the list unless it is followed by
//! a parameter name.

use std::fmt;
use std::str::FromStr;

use nalgebra::{DMatrix, DVector};

use crate::error::{FinslerError, Result};
use crate::expr::{parse_expr, Expr};
use crate::metric::{Chart, FinslerMetric, MetricKind};
use crate::syntax::{Cursor, ParseError};

/// A parsed metric together with the text it came from.
#[derive(Debug, Clone, PartialEq)]
pub struct MetricSpec {
    pub source: String,
    pub metric: FinslerMetric,
}

impl MetricSpec {
    /// Canonical spec string of the parsed metric.
    pub fn canonical(&self) -> String {
        render(&self.metric)
    }
}

impl FromStr for MetricSpec {
    type Err = FinslerError;
    fn from_str(s: &str) -> Result<Self> {
        parse_metric_spec(s)
    }
}

impl fmt::Display for MetricSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.canonical())
    }
}

pub fn parse_metric_spec(src: &str) -> Result<MetricSpec> {
    let mut cur = Cursor::new(src);
    let metric = parse_spec(&mut cur)?;
    if !cur.at_end() {
        return Err(cur.unexpected("',' or end of spec").into());
    }
    Ok(MetricSpec { source: src.to_string(), metric })
}

/// Parses just the metric.
pub fn parse_metric(src: &str) -> Result<FinslerMetric> {
    parse_metric_spec(src).map(|s| s.metric)
}

enum Value {
    Flag,
    Numbers(Vec<f64>),
    Spec(FinslerMetric),
    Expr(Expr),
}

struct Param {
    name: String,
    offset: usize,
    value: Value,
}

fn parse_spec(cur: &mut Cursor<'_>) -> Result<FinslerMetric> {
    cur.skip_ws();
    let kind_at = cur.pos();
    let kind = cur
        .ident(true)
        .ok_or_else(|| cur.unexpected("a metric kind"))?
        .to_string();
    let mut params = Vec::new();
    if cur.eat(':') {
        loop {
            params.push(parse_param(cur, &kind)?);
            if !cur.eat(',') {
                break;
            }
        }
    }
    let mut p = Params { kind: &kind, kind_at, params };
    let metric = build(&mut p).map_err(|e| match e {
        FinslerError::InvalidMetric(msg) => ParseError::new(kind_at, msg).into(),
        other => other,
    })?;
    p.finish()?;
    Ok(metric)
}

fn parse_param(cur: &mut Cursor<'_>, kind: &str) -> Result<Param> {
    cur.skip_ws();
    let offset = cur.pos();
    let name = cur
        .ident(false)
        .ok_or_else(|| cur.unexpected("a parameter name"))?
        .to_string();
    if !cur.eat('=') {
        return Ok(Param { name, offset, value: Value::Flag });
    }
    let value = match (kind, name.as_str()) {
        (_, "base") => {
            cur.expect('(')?;
            let m = parse_spec(cur)?;
            cur.expect(')')?;
            Value::Spec(m)
        }
        ("conformal", "sigma") => Value::Expr(parse_expr(cur)?),
        _ => Value::Numbers(parse_numbers(cur)?),
    };
    Ok(Param { name, offset, value })
}

fn parse_numbers(cur: &mut Cursor<'_>) -> Result<Vec<f64>, ParseError> {
    let mut out = vec![signed(cur)?];
    loop {
        let save = cur.pos();
        if !cur.eat(',') {
            break;
        }
        match cur.peek() {
            Some(c) if c.is_ascii_digit() || c == '-' || c == '+' || c == '.' => out.push(signed(cur)?),
            _ => {
                // The comma belongs to the parameter list.
                cur.set_pos(save);
                break;
            }
        }
    }
    Ok(out)
}

fn signed(cur: &mut Cursor<'_>) -> Result<f64, ParseError> {
    cur.skip_ws();
    let at = cur.pos();
    let v = cur.signed_number()?;
    if !v.is_finite() {
        return Err(ParseError::new(at, "number out of range"));
    }
    Ok(v)
}

struct Params<'a> {
    kind: &'a str,
    kind_at: usize,
    params: Vec<Param>,
}

impl Params<'_> {
    fn take(&mut self, name: &str) -> Result<Option<Param>> {
        let hits: Vec<usize> = (0..self.params.len()).filter(|&i| self.params[i].name == name).collect();
        if hits.len() > 1 {
            let p = &self.params[hits[1]];
            return Err(ParseError::new(p.offset, format!("duplicate parameter '{name}'")).into());
        }
        Ok(hits.first().map(|&i| self.params.remove(i)))
    }

    fn flag(&mut self, name: &str) -> Result<bool> {
        match self.take(name)? {
            None => Ok(false),
            Some(Param { value: Value::Flag, .. }) => Ok(true),
            Some(p) => Err(ParseError::new(p.offset, format!("'{name}' takes no value")).into()),
        }
    }

    fn numbers(&mut self, name: &str) -> Result<Option<(usize, Vec<f64>)>> {
        match self.take(name)? {
            None => Ok(None),
            Some(Param { value: Value::Numbers(v), offset, .. }) => Ok(Some((offset, v))),
            Some(p) => Err(ParseError::new(p.offset, format!("'{name}' expects numbers")).into()),
        }
    }

    fn scalar(&mut self, name: &str) -> Result<Option<(usize, f64)>> {
        match self.numbers(name)? {
            None => Ok(None),
            Some((at, v)) if v.len() == 1 => Ok(Some((at, v[0]))),
            Some((at, _)) => Err(ParseError::new(at, format!("'{name}' expects a single number")).into()),
        }
    }

    fn count(&mut self, name: &str) -> Result<Option<usize>> {
        match self.take(name)? {
            None => Ok(None),
            Some(Param { value: Value::Numbers(v), offset, .. }) => {
                if v.len() == 1 && v[0] >= 1.0 && v[0].fract() == 0.0 && v[0] <= 1e6 {
                    Ok(Some(v[0] as usize))
                } else {
                    Err(ParseError::new(offset, format!("'{name}' must be a positive integer")).into())
                }
            }
            Some(p) => Err(ParseError::new(p.offset, format!("'{name}' must be a positive integer")).into()),
        }
    }

    fn base(&mut self) -> Result<FinslerMetric> {
        match self.take("base")? {
            Some(Param { value: Value::Spec(m), .. }) => Ok(m),
            Some(p) => Err(ParseError::new(p.offset, "'base' expects a parenthesized spec").into()),
            None => Err(self.missing("base")),
        }
    }

    fn missing(&self, name: &str) -> FinslerError {
        ParseError::new(self.kind_at, format!("{} needs parameter '{name}'", self.kind)).into()
    }

    fn finish(self) -> Result<()> {
        match self.params.first() {
            Some(p) => Err(ParseError::new(
                p.offset,
                format!("unknown parameter '{}' for {}", p.name, self.kind),
            )
            .into()),
            None => Ok(()),
        }
    }
}

fn build(p: &mut Params<'_>) -> Result<FinslerMetric> {
    match p.kind {
        "euclidean" => FinslerMetric::euclidean(p.count("n")?.unwrap_or(2)),
        "riemannian" => {
            let sphere = p.flag("sphere")?;
            let flat = p.flag("flat")?;
            let diag = p.numbers("diag")?;
            let n = p.count("n")?;
            match (sphere, flat, diag, n) {
                (true, false, None, None) => Ok(FinslerMetric::sphere()),
                (false, true, None, n) => FinslerMetric::riemannian(Chart::Flat { n: n.unwrap_or(2) }),
                (false, false, Some((_, d)), None) => FinslerMetric::riemannian(Chart::Diag(d)),
                _ => Err(ParseError::new(
                    p.kind_at,
                    "riemannian needs exactly one of sphere, flat[,n=…], diag=…",
                )
                .into()),
            }
        }
        "randers" => {
            let (_, b) = p.numbers("b")?.ok_or_else(|| p.missing("b"))?;
            let a = p.numbers("a")?;
            let n = p.count("n")?.unwrap_or(b.len().max(2));
            if b.len() > n {
                return Err(FinslerError::InvalidMetric(format!("b has {} entries for n = {n}", b.len())));
            }
            let mut bv = DVector::zeros(n);
            bv.rows_mut(0, b.len()).copy_from_slice(&b);
            let am = match a {
                None => DMatrix::identity(n, n),
                Some((_, a)) if a.len() == n => DMatrix::from_diagonal(&DVector::from_vec(a)),
                Some((_, a)) if a.len() == n * n => DMatrix::from_row_slice(n, n, &a),
                Some((at, a)) => {
                    return Err(ParseError::new(
                        at,
                        format!("'a' needs {n} or {} entries, got {}", n * n, a.len()),
                    )
                    .into())
                }
            };
            FinslerMetric::randers(am, bv)
        }
        "minkowski-randers" => {
            let (_, b) = p.scalar("b")?.ok_or_else(|| p.missing("b"))?;
            FinslerMetric::minkowski_randers(b)
        }
        "conformal" => {
            let base = p.base()?;
            let sigma = match p.take("sigma")? {
                Some(Param { value: Value::Expr(e), .. }) => e,
                Some(q) => return Err(ParseError::new(q.offset, "'sigma' expects an expression").into()),
                None => return Err(p.missing("sigma")),
            };
            FinslerMetric::conformal(base, sigma)
        }
        "homothety" => {
            let base = p.base()?;
            let (_, c) = p.scalar("c")?.ok_or_else(|| p.missing("c"))?;
            FinslerMetric::homothety(base, c)
        }
        other => Err(ParseError::new(p.kind_at, format!("unknown metric kind '{other}'")).into()),
    }
}

fn list(v: impl IntoIterator<Item = f64>) -> String {
    v.into_iter().map(|x| x.to_string()).collect::<Vec<_>>().join(",")
}

/// Canonical spec string; parsing it yields an equal metric.
pub fn render(m: &FinslerMetric) -> String {
    match m.kind() {
        MetricKind::Euclidean { n } => format!("euclidean:n={n}"),
        MetricKind::Riemannian(Chart::Sphere) => "riemannian:sphere".into(),
        MetricKind::Riemannian(Chart::Flat { n }) => format!("riemannian:flat,n={n}"),
        MetricKind::Riemannian(Chart::Diag(d)) => format!("riemannian:diag={}", list(d.iter().copied())),
        MetricKind::Randers { a, b } => {
            let n = b.len();
            let diagonal = (0..n).all(|i| (0..n).all(|j| i == j || a[(i, j)] == 0.0));
            let a_text = if diagonal {
                list(a.diagonal().iter().copied())
            } else {
                list((0..n).flat_map(|i| (0..n).map(move |j| (i, j))).map(|(i, j)| a[(i, j)]))
            };
            format!("randers:n={n},b={},a={a_text}", list(b.iter().copied()))
        }
        MetricKind::MinkowskiRanders { b } => format!("minkowski-randers:b={b}"),
        MetricKind::Conformal { base, sigma } => format!("conformal:base=({}),sigma={sigma}", render(base)),
    }
}

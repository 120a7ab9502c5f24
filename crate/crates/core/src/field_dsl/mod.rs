//! Closed-form scalar fields over space-time: exponents `p_i(x,t)`, forcing
//! `f(x,t)` and initial data `u_0(x)`.
//!
//! Expressions are parsed once into an immutable [`FieldExpr`], which can be
//! evaluated at a point, evaluated over a batch of grid points, and
//! differentiated symbolically.

mod ast;
mod diff;
mod parser;
mod tape;

pub use ast::{BinOp, Func, Node, Var};
pub use parser::ParseError;

use crate::domain::{RectDomain, SampleGrid};
use serde::{Deserialize, Serialize};
use std::fmt;
use std::str::FromStr;
use tape::Tape;
use thiserror::Error;

#[derive(Debug, Clone, Copy, PartialEq, Error)]
pub enum EvalError {
    #[error("division by zero")]
    DivisionByZero,
    #[error("argument outside the domain of `{0}`")]
    Domain(&'static str),
    #[error("non-finite result")]
    NonFinite,
    #[error("variable `{0}` not supplied")]
    MissingVariable(Var),
}

/// Parsed, immutable field expression.
#[derive(Clone, Debug)]
pub struct FieldExpr {
    root: Node,
    tape: Tape,
}

impl PartialEq for FieldExpr {
    fn eq(&self, other: &Self) -> bool {
        self.root == other.root
    }
}

impl FieldExpr {
    pub fn parse(text: &str) -> Result<Self, ParseError> {
        parser::parse(text).map(Self::from_node)
    }

    pub fn from_node(root: Node) -> Self {
        let tape = Tape::compile(&root);
        FieldExpr { root, tape }
    }

    pub fn constant(c: f64) -> Self {
        Self::from_node(Node::Const(c))
    }

    pub fn zero() -> Self {
        Self::constant(0.0)
    }

    pub fn root(&self) -> &Node {
        &self.root
    }

    pub fn into_node(self) -> Node {
        self.root
    }

    pub fn as_constant(&self) -> Option<f64> {
        self.root.as_const()
    }

    pub fn depends_on(&self, var: Var) -> bool {
        self.root.depends_on(var)
    }

    /// Whether any spatial variable appears.
    pub fn depends_on_space(&self) -> bool {
        self.root.max_space_index().is_some()
    }

    /// Number of spatial variables the expression needs (`x3` => 3).
    pub fn space_arity(&self) -> usize {
        self.root.max_space_index().map_or(0, |i| i + 1)
    }

    /// Evaluate at one point `(x, t)`.
    pub fn eval(&self, x: &[f64], t: f64) -> Result<f64, EvalError> {
        let cols: Vec<&[f64]> = x.iter().map(std::slice::from_ref).collect();
        let mut out = [0.0];
        self.tape.eval(&cols, 1, t, &mut out)?;
        Ok(out[0])
    }

    /// Evaluate at every point of a batch; `coords[i]` holds the `x_{i+1}`
    /// column and `out.len()` is the batch size.
    pub fn eval_batch(&self, coords: &[&[f64]], t: f64, out: &mut [f64]) -> Result<(), EvalError> {
        let n = out.len();
        self.tape.eval(coords, n, t, out)
    }

    /// Convenience wrapper over [`FieldExpr::eval_batch`] for owned columns.
    pub fn eval_columns(&self, coords: &[Vec<f64>], t: f64) -> Result<Vec<f64>, EvalError> {
        let n = coords.first().map_or(1, Vec::len);
        let refs: Vec<&[f64]> = coords.iter().map(Vec::as_slice).collect();
        let mut out = vec![0.0; n];
        self.eval_batch(&refs, t, &mut out)?;
        Ok(out)
    }

    pub fn differentiate(&self, var: Var) -> FieldExpr {
        FieldExpr::from_node(diff::derivative(&self.root, var))
    }

    /// Spatial gradient `(D_1 e, ..., D_n e)`.
    pub fn gradient(&self, n: usize) -> Vec<FieldExpr> {
        (0..n).map(|i| self.differentiate(Var::X(i))).collect()
    }
}

impl fmt::Display for FieldExpr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        self.root.fmt(f)
    }
}

impl FromStr for FieldExpr {
    type Err = ParseError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        FieldExpr::parse(s)
    }
}

/// Safety factor applied to the sampled gradient maximum.
pub const LIPSCHITZ_SAFETY: f64 = 1.1;

/// A sampled Lipschitz bound. It is not certified: sampling can miss the
/// true maximum of the gradient, so `certified` is always `false` here.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LipschitzEstimate {
    pub value: f64,
    pub sampled_max: f64,
    pub samples: usize,
    pub certified: bool,
}

/// Max of `|(grad_x e, d_t e)|` over a closed uniform space-time grid, times
/// [`LIPSCHITZ_SAFETY`].
pub fn lipschitz_estimate(
    e: &FieldExpr,
    domain: &RectDomain,
    horizon: f64,
    samples: SampleGrid,
) -> Result<LipschitzEstimate, EvalError> {
    let n = domain.dim();
    let mut partials = e.gradient(n);
    partials.push(e.differentiate(Var::T));
    let active: Vec<&FieldExpr> = partials.iter().filter(|p| p.as_constant() != Some(0.0)).collect();

    let cols = samples.space_columns(domain);
    let refs: Vec<&[f64]> = cols.iter().map(Vec::as_slice).collect();
    let npts = cols[0].len();
    let times = if e.depends_on(Var::T) || active.iter().any(|p| p.depends_on(Var::T)) {
        samples.times(horizon)
    } else {
        vec![0.0]
    };

    let mut sq = vec![0.0; npts];
    let mut buf = vec![0.0; npts];
    let mut max_norm: f64 = 0.0;
    for &t in &times {
        sq.fill(0.0);
        for p in &active {
            p.eval_batch(&refs, t, &mut buf)?;
            for (s, g) in sq.iter_mut().zip(&buf) {
                *s += g * g;
            }
        }
        for s in &sq {
            max_norm = max_norm.max(s.sqrt());
        }
    }
    Ok(LipschitzEstimate {
        value: max_norm * LIPSCHITZ_SAFETY,
        sampled_max: max_norm,
        samples: npts * times.len(),
        certified: false,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use std::f64::consts::PI;

    fn ev(s: &str, x: &[f64], t: f64) -> Result<f64, EvalError> {
        FieldExpr::parse(s).unwrap().eval(x, t)
    }

    #[test]
    fn evaluation_basics() {
        assert_eq!(ev("2", &[0.3, 0.1], 0.5).unwrap(), 2.0);
        assert_eq!(ev("sin(0)", &[], 0.0).unwrap(), 0.0);
        assert_relative_eq!(
            ev("exp(1)", &[], 0.0).unwrap(),
            std::f64::consts::E,
            max_relative = 1e-12
        );
        assert_eq!(ev("x1", &[0.5], 0.0).unwrap(), 0.5);
        assert_eq!(ev("min(x1, t) + max(1, 2)", &[0.25], 0.75).unwrap(), 2.25);
        assert_relative_eq!(ev("pi", &[], 0.0).unwrap(), PI);
        assert_eq!(ev("2^-1", &[], 0.0).unwrap(), 0.5);
        assert_eq!(ev("abs(-3) + sign(-2) + step(0)", &[], 0.0).unwrap(), 3.0);
    }

    #[test]
    fn evaluation_errors() {
        assert_eq!(ev("1/(x1-x1)", &[0.4], 0.0), Err(EvalError::DivisionByZero));
        assert_eq!(ev("log(x1 - 1)", &[0.5], 0.0), Err(EvalError::Domain("log")));
        assert_eq!(ev("sqrt(-1)", &[], 0.0), Err(EvalError::Domain("sqrt")));
        assert_eq!(ev("exp(1000)", &[], 0.0), Err(EvalError::NonFinite));
        assert_eq!(ev("(-2)^0.5", &[], 0.0), Err(EvalError::Domain("pow")));
        assert_eq!(ev("x3", &[1.0], 0.0), Err(EvalError::MissingVariable(Var::X(2))));
    }

    #[test]
    fn batch_matches_pointwise() {
        let e = FieldExpr::parse("2 + 0.2*sin(3*x1)*t - x2^2/(1+x1)").unwrap();
        let x1 = vec![0.0, 0.5, 1.0, 2.0];
        let x2 = vec![1.0, -1.0, 0.25, 3.0];
        let out = e.eval_columns(&[x1.clone(), x2.clone()], 0.7).unwrap();
        for i in 0..4 {
            assert_eq!(out[i], e.eval(&[x1[i], x2[i]], 0.7).unwrap());
        }
    }

    #[test]
    fn derivative_examples() {
        let d = FieldExpr::parse("x1*x1").unwrap().differentiate(Var::X(0));
        for x in [0.0, 0.3, -2.0] {
            assert_relative_eq!(d.eval(&[x], 0.0).unwrap(), 2.0 * x);
        }
        let d = FieldExpr::parse("sin(t)").unwrap().differentiate(Var::T);
        assert_relative_eq!(d.eval(&[], 0.4).unwrap(), 0.4f64.cos());
        let d = FieldExpr::parse("2 + 0.1*x1").unwrap().differentiate(Var::X(0));
        assert_eq!(d.as_constant(), Some(0.1));
    }

    #[test]
    fn kink_conventions() {
        let d = FieldExpr::parse("abs(x1)").unwrap().differentiate(Var::X(0));
        assert_eq!(d.eval(&[0.0], 0.0).unwrap(), 0.0);
        assert_eq!(d.eval(&[-1.0], 0.0).unwrap(), -1.0);
        // ties go to the first argument
        let d = FieldExpr::parse("min(2*x1, x1 + 1)").unwrap().differentiate(Var::X(0));
        assert_eq!(d.eval(&[1.0], 0.0).unwrap(), 2.0);
        assert_eq!(d.eval(&[2.0], 0.0).unwrap(), 1.0);
        let d = FieldExpr::parse("max(x1 + 1, 2*x1)").unwrap().differentiate(Var::X(0));
        assert_eq!(d.eval(&[1.0], 0.0).unwrap(), 1.0);
        assert_eq!(d.eval(&[2.0], 0.0).unwrap(), 2.0);
    }

    #[test]
    fn variable_exponent_power_rule() {
        // d/dx (x^x) = x^x (ln x + 1)
        let d = FieldExpr::parse("x1^x1").unwrap().differentiate(Var::X(0));
        let x: f64 = 1.7;
        assert_relative_eq!(
            d.eval(&[x], 0.0).unwrap(),
            x.powf(x) * (x.ln() + 1.0),
            max_relative = 1e-14
        );
        // d/dx 2^x = 2^x ln 2
        let d = FieldExpr::parse("2^x1").unwrap().differentiate(Var::X(0));
        assert_relative_eq!(
            d.eval(&[x], 0.0).unwrap(),
            2f64.powf(x) * 2f64.ln(),
            max_relative = 1e-14
        );
    }

    #[test]
    fn print_parse_round_trip_examples() {
        for s in [
            "2 + 0.2*sin(3*x1)*t",
            "-x1^2",
            "min(x1, -3.5e-7)",
            "x1/x2/t",
            "(1-x1)^(2+t)",
        ] {
            let e = FieldExpr::parse(s).unwrap();
            let again = FieldExpr::parse(&e.to_string()).unwrap();
            assert_eq!(e, again, "{s}");
        }
        // folded negative constants print as (-c)
        let e = FieldExpr::from_node(Node::mul(Node::Const(-2.0), Node::Var(Var::X(0))));
        let again = FieldExpr::parse(&e.to_string()).unwrap();
        assert_eq!(again.eval(&[3.0], 0.0).unwrap(), -6.0);
    }

    #[test]
    fn lipschitz_examples() {
        let dom = RectDomain::new(vec![1.0, 1.0]).unwrap();
        let g = SampleGrid::new(33, 9);
        let est = lipschitz_estimate(&FieldExpr::parse("2").unwrap(), &dom, 1.0, g).unwrap();
        assert_eq!(est.value, 0.0);
        assert!(!est.certified);
        let est = lipschitz_estimate(&FieldExpr::parse("2 + 0.1*x1").unwrap(), &dom, 1.0, g).unwrap();
        assert_relative_eq!(est.value, 0.11, max_relative = 1e-12);

        let dom = RectDomain::new(vec![PI]).unwrap();
        let est = lipschitz_estimate(
            &FieldExpr::parse("2 + 0.2*sin(x1)").unwrap(),
            &dom,
            1.0,
            SampleGrid::default(),
        )
        .unwrap();
        assert!((est.value - 0.22).abs() <= 0.02 * 0.22);
    }
}

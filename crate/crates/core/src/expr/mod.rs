//! Scalar fields `u: R^n -> R` parsed from text, evaluated with exact 2-jets.
//!
//! Grammar (whitespace is ignored):
//!
//! ```text
//! expr    = term { ("+" | "-") term } ;
//! term    = unary { ("*" | "/") unary } ;
//! unary   = "-" unary | power ;
//! power   = atom [ "^" [ "-" ] integer ] ;
//! atom    = number | variable | call | "(" expr ")" ;
//! call    = ("exp" | "log" | "sqrt") "(" expr ")"
//!         | "abs2" "(" [ variable "," variable ] ")" ;
//! variable = "x" integer ;          (* x1 .. xn *)
//! number  = digits [ "." digits ] [ ("e" | "E") [ "+" | "-" ] digits ] ;
//! ```
//!
//! `abs2(xi, xj)` is `xi^2 + ... + xj^2`; `abs2()` sums over all variables.
//! Exponents are integer literals only.

mod jet;
mod parser;

pub use jet::{Dual2, Jet2};

use std::fmt;

use crate::error::{Error, Result};
use crate::geometry::Point;

#[derive(Debug, Clone, PartialEq)]
pub enum Node {
    Const(f64),
    /// Zero-based variable index.
    Var(usize),
    Neg(Box<Node>),
    Add(Box<Node>, Box<Node>),
    Sub(Box<Node>, Box<Node>),
    Mul(Box<Node>, Box<Node>),
    Div(Box<Node>, Box<Node>),
    Pow(Box<Node>, i32),
    Exp(Box<Node>),
    Log(Box<Node>),
    Sqrt(Box<Node>),
    /// Sum of squares of variables `lo..=hi` (zero-based).
    Abs2 {
        lo: usize,
        hi: usize,
    },
}

/// A parsed scalar field in `n` variables.
#[derive(Debug, Clone, PartialEq)]
pub struct Expr {
    root: Node,
    n: usize,
}

impl Expr {
    /// Parses `text` as a field on R^n.
    pub fn parse(text: &str, n: usize) -> Result<Self> {
        if text.trim().is_empty() {
            return Err(Error::Syntax { offset: 0, message: "empty expression".into() });
        }
        let root = parser::Parser::new(text, n).parse()?;
        Ok(Self { root, n })
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn root(&self) -> &Node {
        &self.root
    }

    /// Value only.
    pub fn eval(&self, p: &Point) -> Result<f64> {
        crate::geometry::check_dim(p, self.n)?;
        let v = eval_value(&self.root, p.as_slice())?;
        if v.is_finite() {
            Ok(v)
        } else {
            Err(Error::NonFinite)
        }
    }

    /// Value, gradient and Hessian at `p`.
    pub fn eval_jet2(&self, p: &Point) -> Result<Jet2> {
        Ok(self.eval_dual(p)?.to_jet())
    }

    /// Like [`Expr::eval_jet2`] but returns the packed dual number.
    pub fn eval_dual(&self, p: &Point) -> Result<Dual2> {
        crate::geometry::check_dim(p, self.n)?;
        let d = eval_dual(&self.root, p.as_slice(), self.n)?;
        if d.is_finite() {
            Ok(d)
        } else {
            Err(Error::NonFinite)
        }
    }
}

impl fmt::Display for Expr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write_node(&self.root, f)
    }
}

fn write_node(node: &Node, f: &mut fmt::Formatter<'_>) -> fmt::Result {
    match node {
        Node::Const(c) => write!(f, "{c:?}"),
        Node::Var(i) => write!(f, "x{}", i + 1),
        Node::Neg(a) => {
            write!(f, "(-")?;
            write_node(a, f)?;
            write!(f, ")")
        }
        Node::Add(a, b) | Node::Sub(a, b) | Node::Mul(a, b) | Node::Div(a, b) => {
            let op = match node {
                Node::Add(..) => "+",
                Node::Sub(..) => "-",
                Node::Mul(..) => "*",
                _ => "/",
            };
            write!(f, "(")?;
            write_node(a, f)?;
            write!(f, " {op} ")?;
            write_node(b, f)?;
            write!(f, ")")
        }
        Node::Pow(a, k) => {
            write!(f, "(")?;
            write_node(a, f)?;
            write!(f, ")^{k}")
        }
        Node::Exp(a) | Node::Log(a) | Node::Sqrt(a) => {
            let name = match node {
                Node::Exp(_) => "exp",
                Node::Log(_) => "log",
                _ => "sqrt",
            };
            write!(f, "{name}(")?;
            write_node(a, f)?;
            write!(f, ")")
        }
        Node::Abs2 { lo, hi } => write!(f, "abs2(x{}, x{})", lo + 1, hi + 1),
    }
}

fn eval_value(node: &Node, x: &[f64]) -> Result<f64> {
    Ok(match node {
        Node::Const(c) => *c,
        Node::Var(i) => x[*i],
        Node::Neg(a) => -eval_value(a, x)?,
        Node::Add(a, b) => eval_value(a, x)? + eval_value(b, x)?,
        Node::Sub(a, b) => eval_value(a, x)? - eval_value(b, x)?,
        Node::Mul(a, b) => eval_value(a, x)? * eval_value(b, x)?,
        Node::Div(a, b) => eval_value(a, x)? / eval_value(b, x)?,
        Node::Pow(a, k) => eval_value(a, x)?.powi(*k),
        Node::Exp(a) => eval_value(a, x)?.exp(),
        Node::Log(a) => {
            let v = eval_value(a, x)?;
            if v <= 0.0 {
                return Err(Error::Domain(format!("log of nonpositive value {v}")));
            }
            v.ln()
        }
        Node::Sqrt(a) => {
            let v = eval_value(a, x)?;
            if v < 0.0 {
                return Err(Error::Domain(format!("sqrt of negative value {v}")));
            }
            v.sqrt()
        }
        Node::Abs2 { lo, hi } => x[*lo..=*hi].iter().map(|t| t * t).sum(),
    })
}

fn eval_dual(node: &Node, x: &[f64], n: usize) -> Result<Dual2> {
    Ok(match node {
        Node::Const(c) => Dual2::constant(n, *c),
        Node::Var(i) => Dual2::variable(n, *i, x[*i]),
        Node::Neg(a) => eval_dual(a, x, n)?.neg(),
        Node::Add(a, b) => eval_dual(a, x, n)?.add(&eval_dual(b, x, n)?),
        Node::Sub(a, b) => eval_dual(a, x, n)?.sub(&eval_dual(b, x, n)?),
        Node::Mul(a, b) => eval_dual(a, x, n)?.mul(&eval_dual(b, x, n)?),
        Node::Div(a, b) => {
            let d = eval_dual(b, x, n)?;
            if d.v == 0.0 {
                return Err(Error::NonFinite);
            }
            eval_dual(a, x, n)?.div(&d)
        }
        Node::Pow(a, k) => {
            let d = eval_dual(a, x, n)?;
            if d.v == 0.0 && *k < 0 {
                return Err(Error::NonFinite);
            }
            d.powi(*k)
        }
        Node::Exp(a) => eval_dual(a, x, n)?.exp(),
        Node::Log(a) => {
            let d = eval_dual(a, x, n)?;
            if d.v <= 0.0 {
                return Err(Error::Domain(format!("log of nonpositive value {}", d.v)));
            }
            d.ln()
        }
        Node::Sqrt(a) => {
            let d = eval_dual(a, x, n)?;
            if d.v <= 0.0 {
                // sqrt is not differentiable at 0
                return Err(Error::Domain(format!("sqrt of nonpositive value {}", d.v)));
            }
            d.sqrt()
        }
        Node::Abs2 { lo, hi } => {
            let mut d = Dual2::constant(n, 0.0);
            for (i, xi) in x.iter().enumerate().take(*hi + 1).skip(*lo) {
                d.v += xi * xi;
                d.g[i] = 2.0 * xi;
                let k = i * n - i * (i + 1) / 2 + i;
                d.h[k] = 2.0;
            }
            d
        }
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::point;
    use approx::assert_abs_diff_eq;
    use nalgebra::DMatrix;

    #[test]
    fn parses_quadric_and_log_norm() {
        Expr::parse("x1^2+x2^2-0.5*x3^2-1", 3).unwrap();
        Expr::parse("log(sqrt(x1^2+x2^2+x3^2))", 3).unwrap();
    }

    #[test]
    fn dangling_caret_is_syntax_error() {
        match Expr::parse("x1^", 3) {
            Err(Error::Syntax { offset, .. }) => assert_eq!(offset, 3),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn unknown_variable() {
        assert!(matches!(Expr::parse("x4+1", 3), Err(Error::UnknownVariable(_))));
        assert!(matches!(Expr::parse("y+1", 3), Err(Error::UnknownVariable(_))));
    }

    #[test]
    fn log_norm_hessian_on_axis() {
        let e = Expr::parse("log(sqrt(x1^2+x2^2+x3^2))", 3).unwrap();
        let j = e.eval_jet2(&point(&[2.0, 0.0, 0.0])).unwrap();
        let expected = DMatrix::from_diagonal(&nalgebra::DVector::from_vec(vec![-0.25, 0.25, 0.25]));
        assert_abs_diff_eq!((j.hessian - expected).amax(), 0.0, epsilon = 1e-15);
    }

    #[test]
    fn quadric_hessian_is_constant() {
        let e = Expr::parse("x1^2+x2^2-0.5*x3^2-1", 3).unwrap();
        for p in [[0.0, 0.0, 0.0], [1.5, -2.0, 3.0]] {
            let j = e.eval_jet2(&point(&p)).unwrap();
            let expected = DMatrix::from_diagonal(&nalgebra::DVector::from_vec(vec![2.0, 2.0, -1.0]));
            assert_abs_diff_eq!((j.hessian - expected).amax(), 0.0, epsilon = 1e-15);
        }
    }

    #[test]
    fn constant_jet() {
        let e = Expr::parse("3.5", 3).unwrap();
        let j = e.eval_jet2(&point(&[1.0, 2.0, 3.0])).unwrap();
        assert_eq!(j.value, 3.5);
        assert_eq!(j.gradient.amax(), 0.0);
        assert_eq!(j.hessian.amax(), 0.0);
    }

    #[test]
    fn abs2_slices() {
        let e = Expr::parse("abs2(x2, x3) + abs2()", 3).unwrap();
        assert_eq!(e.eval(&point(&[1.0, 2.0, 3.0])).unwrap(), 13.0 + 14.0);
    }

    #[test]
    fn domain_errors() {
        let e = Expr::parse("log(x1)", 3).unwrap();
        assert!(matches!(e.eval_jet2(&point(&[-1.0, 0.0, 0.0])), Err(Error::Domain(_))));
        let e = Expr::parse("1/x1", 3).unwrap();
        assert!(matches!(e.eval_jet2(&point(&[0.0, 0.0, 0.0])), Err(Error::NonFinite)));
    }

    #[test]
    fn precedence_and_unary_minus() {
        let e = Expr::parse("-x1^2 + 2*3 - 4/2", 1).unwrap();
        assert_eq!(e.eval(&point(&[3.0])).unwrap(), -9.0 + 6.0 - 2.0);
        let e = Expr::parse("2*x1^-1 + 1e-1", 1).unwrap();
        assert_abs_diff_eq!(e.eval(&point(&[4.0])).unwrap(), 0.6, epsilon = 1e-15);
    }

    #[test]
    fn print_parse_roundtrip() {
        for s in [
            "x1^2+x2^2-0.5*x3^2-1",
            "-1/(1+x1^2) + 1*(x2^2+x3^2)",
            "exp(-x1)*log(abs2()) - sqrt(x2^2+1)^-3",
            "abs2(x1, x2) - 0.1",
        ] {
            let e = Expr::parse(s, 3).unwrap();
            let again = Expr::parse(&e.to_string(), 3).unwrap();
            assert_eq!(e, again, "{s} -> {e}");
        }
    }
}

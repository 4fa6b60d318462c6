//! Expression trees with exact symbolic differentiation.
//!
//! Constructors fold constants eagerly (`x*0 -> 0`, `x+0 -> x`, `x*1 -> x`,
//! `e^0 -> 1`, ...) so that repeated differentiation keeps trees small and the
//! second derivative of an affine expression is literally `Const(0)`.

#[cfg(test)]
use crate::num::abs;
use crate::num::{powi, sqrt};
use crate::prelude::*;
use core::fmt;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum UnaryFn {
    Sin,
    Cos,
    Exp,
    Log,
    Sqrt,
}

impl UnaryFn {
    pub fn name(self) -> &'static str {
        match self {
            UnaryFn::Sin => "sin",
            UnaryFn::Cos => "cos",
            UnaryFn::Exp => "exp",
            UnaryFn::Log => "log",
            UnaryFn::Sqrt => "sqrt",
        }
    }

    pub fn from_name(name: &str) -> Option<Self> {
        Some(match name {
            "sin" => UnaryFn::Sin,
            "cos" => UnaryFn::Cos,
            "exp" => UnaryFn::Exp,
            "log" => UnaryFn::Log,
            "sqrt" => UnaryFn::Sqrt,
            _ => return None,
        })
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum Expr {
    Const(f64),
    /// 0-based variable index.
    Var(usize),
    Neg(Box<Expr>),
    Add(Box<Expr>, Box<Expr>),
    Sub(Box<Expr>, Box<Expr>),
    Mul(Box<Expr>, Box<Expr>),
    Div(Box<Expr>, Box<Expr>),
    PowInt(Box<Expr>, i32),
    Unary(UnaryFn, Box<Expr>),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum DomainErrorKind {
    DivisionByZero,
    LogNonPositive,
    SqrtNegative,
    ZeroToNegativePower,
    NonFinite,
    DimensionMismatch,
}

/// Evaluation left the domain of some node.
#[derive(Clone, Debug, PartialEq)]
pub struct DomainError {
    pub kind: DomainErrorKind,
    /// Rendering of the offending node.
    pub node: String,
    pub point: Vec<f64>,
}

impl fmt::Display for DomainError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let what = match self.kind {
            DomainErrorKind::DivisionByZero => "division by zero",
            DomainErrorKind::LogNonPositive => "log of a non-positive value",
            DomainErrorKind::SqrtNegative => "sqrt of a negative value",
            DomainErrorKind::ZeroToNegativePower => "zero raised to a negative power",
            DomainErrorKind::NonFinite => "non-finite value",
            DomainErrorKind::DimensionMismatch => "point has the wrong dimension",
        };
        write!(f, "domain error: {what} in `{}` at {:?}", self.node, self.point)
    }
}

impl core::error::Error for DomainError {}

#[allow(clippy::should_implement_trait)]
impl Expr {
    pub fn constant(c: f64) -> Expr {
        Expr::Const(c)
    }

    pub fn var(i: usize) -> Expr {
        Expr::Var(i)
    }

    fn as_const(&self) -> Option<f64> {
        match self {
            Expr::Const(c) => Some(*c),
            _ => None,
        }
    }

    pub fn is_zero(&self) -> bool {
        self.as_const() == Some(0.0)
    }

    pub fn neg(a: Expr) -> Expr {
        match a {
            Expr::Const(c) => Expr::Const(-c),
            Expr::Neg(inner) => *inner,
            other => Expr::Neg(Box::new(other)),
        }
    }

    pub fn add(a: Expr, b: Expr) -> Expr {
        match (a.as_const(), b.as_const()) {
            (Some(x), Some(y)) => Expr::Const(x + y),
            (Some(0.0), _) => b,
            (_, Some(0.0)) => a,
            _ => match b {
                Expr::Neg(inner) => Expr::Sub(Box::new(a), inner),
                b => Expr::Add(Box::new(a), Box::new(b)),
            },
        }
    }

    pub fn sub(a: Expr, b: Expr) -> Expr {
        match (a.as_const(), b.as_const()) {
            (Some(x), Some(y)) => Expr::Const(x - y),
            (Some(0.0), _) => Expr::neg(b),
            (_, Some(0.0)) => a,
            _ => match b {
                Expr::Neg(inner) => Expr::Add(Box::new(a), inner),
                b => Expr::Sub(Box::new(a), Box::new(b)),
            },
        }
    }

    pub fn mul(a: Expr, b: Expr) -> Expr {
        match (a.as_const(), b.as_const()) {
            (Some(x), Some(y)) => Expr::Const(x * y),
            (Some(0.0), _) => Expr::Const(0.0),
            (_, Some(0.0)) => Expr::Const(0.0),
            (Some(1.0), _) => b,
            (_, Some(1.0)) => a,
            (Some(-1.0), _) => Expr::neg(b),
            (_, Some(-1.0)) => Expr::neg(a),
            (None, Some(y)) => Expr::mul(Expr::Const(y), a),
            (Some(x), None) => match b {
                // c1 * (c2 * e) -> (c1 c2) * e
                Expr::Mul(l, r) if l.as_const().is_some() => {
                    Expr::mul(Expr::Const(x * l.as_const().unwrap_or(1.0)), *r)
                }
                Expr::Neg(inner) => Expr::mul(Expr::Const(-x), *inner),
                b => Expr::Mul(Box::new(Expr::Const(x)), Box::new(b)),
            },
            (None, None) => match (a, b) {
                (Expr::Neg(l), Expr::Neg(r)) => Expr::mul(*l, *r),
                (Expr::Neg(l), r) | (r, Expr::Neg(l)) => Expr::neg(Expr::mul(*l, r)),
                (l, r) => Expr::Mul(Box::new(l), Box::new(r)),
            },
        }
    }

    pub fn div(a: Expr, b: Expr) -> Expr {
        match (a.as_const(), b.as_const()) {
            (Some(x), Some(y)) if y != 0.0 => Expr::Const(x / y),
            (_, Some(1.0)) => a,
            (_, Some(-1.0)) => Expr::neg(a),
            (Some(0.0), _) => Expr::Const(0.0),
            _ => Expr::Div(Box::new(a), Box::new(b)),
        }
    }

    pub fn powi(base: Expr, exponent: i32) -> Expr {
        match exponent {
            0 => Expr::Const(1.0),
            1 => base,
            _ => match base {
                Expr::Const(c) if c != 0.0 || exponent > 0 => Expr::Const(powi(c, exponent)),
                Expr::PowInt(inner, k) => match k.checked_mul(exponent) {
                    Some(e) => Expr::powi(*inner, e),
                    None => Expr::PowInt(Box::new(Expr::PowInt(inner, k)), exponent),
                },
                b => Expr::PowInt(Box::new(b), exponent),
            },
        }
    }

    pub fn unary(kind: UnaryFn, child: Expr) -> Expr {
        if let Expr::Const(c) = child {
            let folded = match kind {
                UnaryFn::Sin => Some(libm::sin(c)),
                UnaryFn::Cos => Some(libm::cos(c)),
                UnaryFn::Exp => Some(libm::exp(c)),
                UnaryFn::Log if c > 0.0 => Some(libm::log(c)),
                UnaryFn::Sqrt if c >= 0.0 => Some(sqrt(c)),
                _ => None,
            };
            if let Some(v) = folded {
                return Expr::Const(v);
            }
        }
        Expr::Unary(kind, Box::new(child))
    }

    /// Largest variable index referenced, if any.
    pub fn max_var(&self) -> Option<usize> {
        match self {
            Expr::Const(_) => None,
            Expr::Var(i) => Some(*i),
            Expr::Neg(a) | Expr::PowInt(a, _) | Expr::Unary(_, a) => a.max_var(),
            Expr::Add(a, b) | Expr::Sub(a, b) | Expr::Mul(a, b) | Expr::Div(a, b) => {
                match (a.max_var(), b.max_var()) {
                    (Some(x), Some(y)) => Some(x.max(y)),
                    (x, y) => x.or(y),
                }
            }
        }
    }

    /// Number of nodes in the tree.
    pub fn size(&self) -> usize {
        match self {
            Expr::Const(_) | Expr::Var(_) => 1,
            Expr::Neg(a) | Expr::PowInt(a, _) | Expr::Unary(_, a) => 1 + a.size(),
            Expr::Add(a, b) | Expr::Sub(a, b) | Expr::Mul(a, b) | Expr::Div(a, b) => {
                1 + a.size() + b.size()
            }
        }
    }

    /// Exact partial derivative with respect to variable `var`.
    pub fn differentiate(&self, var: usize) -> Expr {
        match self {
            Expr::Const(_) => Expr::Const(0.0),
            Expr::Var(i) => Expr::Const(if *i == var { 1.0 } else { 0.0 }),
            Expr::Neg(a) => Expr::neg(a.differentiate(var)),
            Expr::Add(a, b) => Expr::add(a.differentiate(var), b.differentiate(var)),
            Expr::Sub(a, b) => Expr::sub(a.differentiate(var), b.differentiate(var)),
            Expr::Mul(a, b) => Expr::add(
                Expr::mul(a.differentiate(var), (**b).clone()),
                Expr::mul((**a).clone(), b.differentiate(var)),
            ),
            Expr::Div(a, b) => {
                let da = a.differentiate(var);
                let db = b.differentiate(var);
                let first = Expr::div(da, (**b).clone());
                if db.is_zero() {
                    return first;
                }
                let second = Expr::div(Expr::mul((**a).clone(), db), Expr::powi((**b).clone(), 2));
                Expr::sub(first, second)
            }
            Expr::PowInt(a, k) => {
                let da = a.differentiate(var);
                if da.is_zero() {
                    return Expr::Const(0.0);
                }
                Expr::mul(
                    Expr::mul(Expr::Const(*k as f64), Expr::powi((**a).clone(), k - 1)),
                    da,
                )
            }
            Expr::Unary(kind, a) => {
                let da = a.differentiate(var);
                if da.is_zero() {
                    return Expr::Const(0.0);
                }
                let a = (**a).clone();
                let outer = match kind {
                    UnaryFn::Sin => Expr::unary(UnaryFn::Cos, a),
                    UnaryFn::Cos => Expr::neg(Expr::unary(UnaryFn::Sin, a)),
                    UnaryFn::Exp => Expr::unary(UnaryFn::Exp, a),
                    UnaryFn::Log => return Expr::div(da, a),
                    UnaryFn::Sqrt => {
                        return Expr::div(da, Expr::mul(Expr::Const(2.0), Expr::unary(UnaryFn::Sqrt, a)))
                    }
                };
                Expr::mul(outer, da)
            }
        }
    }

    /// Evaluates the expression; any domain violation or non-finite
    /// intermediate is reported instead of propagated.
    pub fn eval(&self, z: &[f64]) -> Result<f64, DomainError> {
        let err = |kind: DomainErrorKind, node: &Expr| DomainError {
            kind,
            node: format!("{node}"),
            point: z.to_vec(),
        };
        let v = match self {
            Expr::Const(c) => *c,
            Expr::Var(i) => match z.get(*i) {
                Some(v) => *v,
                None => return Err(err(DomainErrorKind::DimensionMismatch, self)),
            },
            Expr::Neg(a) => -a.eval(z)?,
            Expr::Add(a, b) => a.eval(z)? + b.eval(z)?,
            Expr::Sub(a, b) => a.eval(z)? - b.eval(z)?,
            Expr::Mul(a, b) => a.eval(z)? * b.eval(z)?,
            Expr::Div(a, b) => {
                let den = b.eval(z)?;
                if den == 0.0 {
                    return Err(err(DomainErrorKind::DivisionByZero, self));
                }
                a.eval(z)? / den
            }
            Expr::PowInt(a, k) => {
                let base = a.eval(z)?;
                if base == 0.0 && *k < 0 {
                    return Err(err(DomainErrorKind::ZeroToNegativePower, self));
                }
                powi(base, *k)
            }
            Expr::Unary(kind, a) => {
                let x = a.eval(z)?;
                match kind {
                    UnaryFn::Sin => libm::sin(x),
                    UnaryFn::Cos => libm::cos(x),
                    UnaryFn::Exp => libm::exp(x),
                    UnaryFn::Log => {
                        if x <= 0.0 {
                            return Err(err(DomainErrorKind::LogNonPositive, self));
                        }
                        libm::log(x)
                    }
                    UnaryFn::Sqrt => {
                        if x < 0.0 {
                            return Err(err(DomainErrorKind::SqrtNegative, self));
                        }
                        sqrt(x)
                    }
                }
            }
        };
        if v.is_finite() {
            Ok(v)
        } else {
            Err(err(DomainErrorKind::NonFinite, self))
        }
    }

    /// Renders with custom variable names (falls back to `z{i+1}`).
    pub fn display_with<'a>(&'a self, names: &'a [String]) -> NamedExpr<'a> {
        NamedExpr { expr: self, names }
    }

    fn precedence(&self) -> u8 {
        match self {
            Expr::Add(..) | Expr::Sub(..) => 1,
            Expr::Mul(..) | Expr::Div(..) => 2,
            Expr::Neg(..) => 3,
            Expr::PowInt(..) => 4,
            Expr::Const(c) if *c < 0.0 => 3,
            _ => 5,
        }
    }

    fn write(&self, f: &mut fmt::Formatter<'_>, names: &[String]) -> fmt::Result {
        let child = |f: &mut fmt::Formatter<'_>, e: &Expr, min: u8| -> fmt::Result {
            if e.precedence() < min {
                write!(f, "(")?;
                e.write(f, names)?;
                write!(f, ")")
            } else {
                e.write(f, names)
            }
        };
        match self {
            Expr::Const(c) => write!(f, "{c}"),
            Expr::Var(i) => match names.get(*i) {
                Some(n) => write!(f, "{n}"),
                None => write!(f, "z{}", i + 1),
            },
            Expr::Neg(a) => {
                write!(f, "-")?;
                child(f, a, 4)
            }
            Expr::Add(a, b) => {
                child(f, a, 1)?;
                write!(f, " + ")?;
                child(f, b, 2)
            }
            Expr::Sub(a, b) => {
                child(f, a, 1)?;
                write!(f, " - ")?;
                child(f, b, 2)
            }
            Expr::Mul(a, b) => {
                child(f, a, 2)?;
                write!(f, "*")?;
                child(f, b, 3)
            }
            Expr::Div(a, b) => {
                child(f, a, 2)?;
                write!(f, "/")?;
                child(f, b, 3)
            }
            Expr::PowInt(a, k) => {
                child(f, a, 5)?;
                if *k < 0 {
                    write!(f, "^({k})")
                } else {
                    write!(f, "^{k}")
                }
            }
            Expr::Unary(kind, a) => {
                write!(f, "{}(", kind.name())?;
                a.write(f, names)?;
                write!(f, ")")
            }
        }
    }
}

pub struct NamedExpr<'a> {
    expr: &'a Expr,
    names: &'a [String],
}

impl fmt::Display for NamedExpr<'_> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        self.expr.write(f, self.names)
    }
}

impl fmt::Display for Expr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        self.write(f, &[])
    }
}

macro_rules! impl_binop {
    ($trait:ident, $method:ident, $ctor:ident) => {
        impl core::ops::$trait for Expr {
            type Output = Expr;
            fn $method(self, rhs: Expr) -> Expr {
                Expr::$ctor(self, rhs)
            }
        }
        impl core::ops::$trait<f64> for Expr {
            type Output = Expr;
            fn $method(self, rhs: f64) -> Expr {
                Expr::$ctor(self, Expr::Const(rhs))
            }
        }
        impl core::ops::$trait<Expr> for f64 {
            type Output = Expr;
            fn $method(self, rhs: Expr) -> Expr {
                Expr::$ctor(Expr::Const(self), rhs)
            }
        }
    };
}

impl_binop!(Add, add, add);
impl_binop!(Sub, sub, sub);
impl_binop!(Mul, mul, mul);
impl_binop!(Div, div, div);

impl core::ops::Neg for Expr {
    type Output = Expr;
    fn neg(self) -> Expr {
        Expr::neg(self)
    }
}

/// `|a - b| <= tol * max(1, |a|, |b|)`
#[cfg(test)]
pub(crate) fn close(a: f64, b: f64, tol: f64) -> bool {
    abs(a - b) <= tol * 1f64.max(abs(a)).max(abs(b))
}

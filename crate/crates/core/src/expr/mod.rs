//! A small expression language for coefficient functions.
//!
//! Problem files describe `A(t)`, `f(t)` and `F(t, x)` as strings such as
//! `"atan(t)"`, `"exp(-abs(t))"` or `"x1 - 0.5*x1^3"`. This module parses
//! them into an immutable [`Expr`] tree and evaluates it in double precision.
//!
//! ```text
//! expr    := term (('+' | '-') term)*
//! term    := unary (('*' | '/') unary)*
//! unary   := '-' unary | '+' unary | power
//! power   := primary ('^' unary)?          right-associative
//! primary := number | variable | constant | function '(' expr ')' | '(' expr ')'
//! ```
//!
//! Variables are `t` and `x1 .. xn`; constants are `pi` and `e`; functions
//! are `sin cos tan atan exp ln sqrt abs tanh cosh sinh sign`. Named
//! parameters can be supplied at parse time and are folded into literals.

mod parser;

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fmt;

use thiserror::Error;

pub use parser::{parse, parse_with_params};

/// Variable reference inside an expression.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Var {
    /// Time `t`.
    T,
    /// State component `x{k}`, stored zero-based.
    X(usize),
}

impl Var {
    pub fn name(&self) -> String {
        match self {
            Var::T => "t".to_string(),
            Var::X(i) => format!("x{}", i + 1),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Constant {
    Pi,
    E,
}

impl Constant {
    fn value(self) -> f64 {
        match self {
            Constant::Pi => std::f64::consts::PI,
            Constant::E => std::f64::consts::E,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BinOp {
    Add,
    Sub,
    Mul,
    Div,
    Pow,
}

impl BinOp {
    fn symbol(self) -> &'static str {
        match self {
            BinOp::Add => "+",
            BinOp::Sub => "-",
            BinOp::Mul => "*",
            BinOp::Div => "/",
            BinOp::Pow => "^",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Func {
    Sin,
    Cos,
    Tan,
    Atan,
    Exp,
    Ln,
    Sqrt,
    Abs,
    Tanh,
    Cosh,
    Sinh,
    Sign,
}

impl Func {
    pub(crate) const ALL: [Func; 12] = [
        Func::Sin,
        Func::Cos,
        Func::Tan,
        Func::Atan,
        Func::Exp,
        Func::Ln,
        Func::Sqrt,
        Func::Abs,
        Func::Tanh,
        Func::Cosh,
        Func::Sinh,
        Func::Sign,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Func::Sin => "sin",
            Func::Cos => "cos",
            Func::Tan => "tan",
            Func::Atan => "atan",
            Func::Exp => "exp",
            Func::Ln => "ln",
            Func::Sqrt => "sqrt",
            Func::Abs => "abs",
            Func::Tanh => "tanh",
            Func::Cosh => "cosh",
            Func::Sinh => "sinh",
            Func::Sign => "sign",
        }
    }

    pub(crate) fn from_name(name: &str) -> Option<Func> {
        Func::ALL.iter().copied().find(|f| f.name() == name)
    }

    fn apply(self, x: f64) -> Result<f64, EvalError> {
        let y = match self {
            Func::Sin => x.sin(),
            Func::Cos => x.cos(),
            Func::Tan => x.tan(),
            Func::Atan => x.atan(),
            Func::Exp => x.exp(),
            Func::Ln => {
                if x <= 0.0 {
                    return Err(EvalError::Domain(format!("ln of non-positive value {x}")));
                }
                x.ln()
            }
            Func::Sqrt => {
                if x < 0.0 {
                    return Err(EvalError::Domain(format!("sqrt of negative value {x}")));
                }
                x.sqrt()
            }
            Func::Abs => x.abs(),
            Func::Tanh => x.tanh(),
            Func::Cosh => x.cosh(),
            Func::Sinh => x.sinh(),
            Func::Sign => {
                if x > 0.0 {
                    1.0
                } else if x < 0.0 {
                    -1.0
                } else {
                    0.0
                }
            }
        };
        Ok(y)
    }
}

/// Parsed expression tree. Immutable once built.
#[derive(Debug, Clone, PartialEq)]
pub enum Expr {
    Num(f64),
    Var(Var),
    Const(Constant),
    Neg(Box<Expr>),
    Binary(BinOp, Box<Expr>, Box<Expr>),
    Call(Func, Box<Expr>),
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ParseError {
    #[error("syntax error at byte {offset}: expected {expected}, found {found}")]
    Syntax {
        offset: usize,
        expected: String,
        found: String,
    },
    #[error("unknown identifier `{name}` at byte {offset}")]
    UnknownIdentifier { name: String, offset: usize },
}

impl ParseError {
    pub fn offset(&self) -> usize {
        match self {
            ParseError::Syntax { offset, .. } | ParseError::UnknownIdentifier { offset, .. } => {
                *offset
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum EvalError {
    #[error("unbound variable `{0}`")]
    Unbound(String),
    #[error("domain violation: {0}")]
    Domain(String),
    #[error("non-finite result in `{0}`")]
    NonFinite(String),
}

/// Source of variable values during evaluation.
pub trait Bindings {
    fn value(&self, var: Var) -> Option<f64>;
}

/// The common binding: a time and a state slice.
#[derive(Debug, Clone, Copy)]
pub struct Point<'a> {
    pub t: f64,
    pub x: &'a [f64],
}

impl<'a> Point<'a> {
    pub fn at(t: f64) -> Point<'static> {
        Point { t, x: &[] }
    }

    pub fn new(t: f64, x: &'a [f64]) -> Self {
        Point { t, x }
    }
}

impl Bindings for Point<'_> {
    fn value(&self, var: Var) -> Option<f64> {
        match var {
            Var::T => Some(self.t),
            Var::X(i) => self.x.get(i).copied(),
        }
    }
}

impl Bindings for HashMap<String, f64> {
    fn value(&self, var: Var) -> Option<f64> {
        self.get(&var.name()).copied()
    }
}

impl Bindings for BTreeMap<String, f64> {
    fn value(&self, var: Var) -> Option<f64> {
        self.get(&var.name()).copied()
    }
}

impl Expr {
    /// Evaluates the tree. Domain violations and overflow are errors, never
    /// silent infinities or NaNs.
    pub fn eval<B: Bindings + ?Sized>(&self, env: &B) -> Result<f64, EvalError> {
        let v = match self {
            Expr::Num(v) => *v,
            Expr::Const(c) => c.value(),
            Expr::Var(var) => env
                .value(*var)
                .ok_or_else(|| EvalError::Unbound(var.name()))?,
            Expr::Neg(a) => -a.eval(env)?,
            Expr::Call(f, a) => f.apply(a.eval(env)?)?,
            Expr::Binary(op, a, b) => {
                let x = a.eval(env)?;
                let y = b.eval(env)?;
                match op {
                    BinOp::Add => x + y,
                    BinOp::Sub => x - y,
                    BinOp::Mul => x * y,
                    BinOp::Div => {
                        if y == 0.0 {
                            return Err(EvalError::Domain(format!("division of {x} by zero")));
                        }
                        x / y
                    }
                    BinOp::Pow => pow(x, y)?,
                }
            }
        };
        if v.is_finite() {
            Ok(v)
        } else {
            Err(EvalError::NonFinite(self.to_string()))
        }
    }

    /// Exact set of variable names occurring in the tree.
    pub fn free_vars(&self) -> BTreeSet<String> {
        let mut out = BTreeSet::new();
        self.visit_vars(&mut |v| {
            out.insert(v.name());
        });
        out
    }

    pub(crate) fn vars(&self) -> BTreeSet<Var> {
        let mut out = BTreeSet::new();
        self.visit_vars(&mut |v| {
            out.insert(v);
        });
        out
    }

    fn visit_vars(&self, f: &mut impl FnMut(Var)) {
        match self {
            Expr::Num(_) | Expr::Const(_) => {}
            Expr::Var(v) => f(*v),
            Expr::Neg(a) | Expr::Call(_, a) => a.visit_vars(f),
            Expr::Binary(_, a, b) => {
                a.visit_vars(f);
                b.visit_vars(f);
            }
        }
    }

    /// Largest state index referenced, one-based (`x3` gives 3).
    pub fn max_state_index(&self) -> usize {
        self.vars()
            .into_iter()
            .filter_map(|v| match v {
                Var::X(i) => Some(i + 1),
                Var::T => None,
            })
            .max()
            .unwrap_or(0)
    }

    /// Substitutes `t -> t + h`, giving the time-translated expression.
    pub fn shift_time(&self, h: f64) -> Expr {
        match self {
            Expr::Var(Var::T) => {
                if h == 0.0 {
                    Expr::Var(Var::T)
                } else {
                    Expr::Binary(
                        BinOp::Add,
                        Box::new(Expr::Var(Var::T)),
                        Box::new(Expr::Num(h)),
                    )
                }
            }
            Expr::Num(_) | Expr::Const(_) | Expr::Var(_) => self.clone(),
            Expr::Neg(a) => Expr::Neg(Box::new(a.shift_time(h))),
            Expr::Call(f, a) => Expr::Call(*f, Box::new(a.shift_time(h))),
            Expr::Binary(op, a, b) => {
                Expr::Binary(*op, Box::new(a.shift_time(h)), Box::new(b.shift_time(h)))
            }
        }
    }

    /// Multiplies the expression by a constant factor.
    pub fn scaled(&self, factor: f64) -> Expr {
        Expr::Binary(
            BinOp::Mul,
            Box::new(Expr::Num(factor)),
            Box::new(self.clone()),
        )
    }
}

fn pow(x: f64, y: f64) -> Result<f64, EvalError> {
    if x == 0.0 && y < 0.0 {
        return Err(EvalError::Domain(format!("0 raised to negative power {y}")));
    }
    if x < 0.0 && y.fract() != 0.0 {
        return Err(EvalError::Domain(format!(
            "negative base {x} raised to non-integer power {y}"
        )));
    }
    Ok(x.powf(y))
}

/// Prints a fully parenthesized form that parses back to an equivalent tree.
impl fmt::Display for Expr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Expr::Num(v) => {
                if *v < 0.0 || (*v == 0.0 && v.is_sign_negative()) {
                    write!(f, "(-{:?})", -v)
                } else {
                    write!(f, "{v:?}")
                }
            }
            Expr::Var(v) => write!(f, "{}", v.name()),
            Expr::Const(Constant::Pi) => write!(f, "pi"),
            Expr::Const(Constant::E) => write!(f, "e"),
            Expr::Neg(a) => write!(f, "(-{a})"),
            Expr::Call(func, a) => write!(f, "{}({a})", func.name()),
            Expr::Binary(op, a, b) => write!(f, "({a} {} {b})", op.symbol()),
        }
    }
}

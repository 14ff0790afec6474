//! Scalar expression language.
//!
//! Every piece of user-supplied system data (coefficients, nonlinearities,
//! delays, kernels, histories) is an [`Expr`]: parsed from text, evaluated
//! in `f64` (or in the extended-range [`Wide`] arithmetic when intermediate
//! products would overflow), and differentiated symbolically.
//!
//! Grammar (EBNF, whitespace ignored):
//!
//! ```text
//! expr    = term , { ("+" | "-") , term } ;
//! term    = unary , { ("*" | "/") , unary } ;
//! unary   = "-" , unary | power ;
//! power   = primary , [ "^" , unary ] ;          (* right-associative *)
//! primary = number | constant | variable
//!         | function , "(" , expr , ")"
//!         | "(" , expr , ")" ;
//! number  = digits , [ "." , digits ] , [ ("e" | "E") , [ "+" | "-" ] , digits ]
//!         | "." , digits , [ exponent ] ;
//! constant = "pi" | "e" ;
//! variable = "t" | "s" | "u" | "v" | "w" ;
//! function = "sin" | "cos" | "exp" | "ln" | "sqrt" | "abs" | "cbrt" ;
//! ```
//!
//! An exponent written as a literal ratio of integers (`x^(5/3)`, `x^2`,
//! `x^(-1/2)`) is a rational power: with an odd denominator it is evaluated
//! through the real root, so negative bases are allowed. Any other
//! non-integer exponent requires a non-negative base.

mod diff;
mod eval;
mod parse;
mod wide;

use std::fmt;

use thiserror::Error;

pub use wide::Wide;

/// Variables an expression may refer to.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Var {
    T,
    S,
    U,
    V,
    W,
}

impl Var {
    pub const ALL: [Var; 5] = [Var::T, Var::S, Var::U, Var::V, Var::W];

    pub fn name(self) -> &'static str {
        match self {
            Var::T => "t",
            Var::S => "s",
            Var::U => "u",
            Var::V => "v",
            Var::W => "w",
        }
    }

    fn index(self) -> usize {
        self as usize
    }

    pub fn from_name(name: &str) -> Option<Var> {
        Var::ALL.into_iter().find(|v| v.name() == name)
    }
}

impl fmt::Display for Var {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Func {
    Sin,
    Cos,
    Exp,
    Ln,
    Sqrt,
    Abs,
    Cbrt,
}

impl Func {
    const ALL: [Func; 7] = [
        Func::Sin,
        Func::Cos,
        Func::Exp,
        Func::Ln,
        Func::Sqrt,
        Func::Abs,
        Func::Cbrt,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Func::Sin => "sin",
            Func::Cos => "cos",
            Func::Exp => "exp",
            Func::Ln => "ln",
            Func::Sqrt => "sqrt",
            Func::Abs => "abs",
            Func::Cbrt => "cbrt",
        }
    }

    fn from_name(name: &str) -> Option<Func> {
        Func::ALL.into_iter().find(|f| f.name() == name)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Constant {
    Pi,
    E,
}

impl Constant {
    pub fn value(self) -> f64 {
        match self {
            Constant::Pi => std::f64::consts::PI,
            Constant::E => std::f64::consts::E,
        }
    }

    fn name(self) -> &'static str {
        match self {
            Constant::Pi => "pi",
            Constant::E => "e",
        }
    }
}

/// Expression tree. Immutable once built; cheap enough to clone.
#[derive(Clone, Debug, PartialEq)]
pub enum Expr {
    Num(f64),
    Const(Constant),
    Var(Var),
    Neg(Box<Expr>),
    Add(Box<Expr>, Box<Expr>),
    Sub(Box<Expr>, Box<Expr>),
    Mul(Box<Expr>, Box<Expr>),
    Div(Box<Expr>, Box<Expr>),
    Pow(Box<Expr>, Box<Expr>),
    /// `base^(num/den)` with `den >= 1`; real root when `den` is odd.
    RatPow(Box<Expr>, i64, u64),
    Call(Func, Box<Expr>),
}

#[derive(Clone, Debug, PartialEq, Error)]
pub enum ExprError {
    #[error("syntax error at byte {offset}: {message}")]
    Syntax { offset: usize, message: String },
    #[error("unknown identifier `{name}` at byte {offset}; allowed: {allowed}")]
    UnknownIdentifier {
        name: String,
        offset: usize,
        allowed: String,
    },
    #[error("variable `{0}` is not bound")]
    Unbound(Var),
    #[error("domain error: {reason} in `{subexpr}`")]
    Domain { reason: String, subexpr: String },
}

impl ExprError {
    pub(crate) fn domain(reason: &str, e: &Expr) -> ExprError {
        ExprError::Domain {
            reason: reason.to_string(),
            subexpr: e.to_string(),
        }
    }
}

/// Variable values for evaluation.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct Bindings {
    values: [Option<f64>; 5],
}

impl Bindings {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn with(mut self, var: Var, value: f64) -> Self {
        self.values[var.index()] = Some(value);
        self
    }

    pub fn set(&mut self, var: Var, value: f64) {
        self.values[var.index()] = Some(value);
    }

    pub fn get(&self, var: Var) -> Option<f64> {
        self.values[var.index()]
    }
}

impl Expr {
    /// Parses `text`, accepting only the variables in `allowed`.
    pub fn parse(text: &str, allowed: &[Var]) -> Result<Expr, ExprError> {
        parse::parse(text, allowed)
    }

    /// Parses `text` with every variable allowed.
    pub fn parse_any(text: &str) -> Result<Expr, ExprError> {
        parse::parse(text, &Var::ALL)
    }

    pub fn num(x: f64) -> Expr {
        Expr::Num(x)
    }

    pub fn var(v: Var) -> Expr {
        Expr::Var(v)
    }

    pub fn call(f: Func, arg: Expr) -> Expr {
        Expr::Call(f, Box::new(arg))
    }

    /// `self^exponent` for a real constant exponent.
    pub fn powf(self, exponent: f64) -> Expr {
        if exponent.fract() == 0.0 && exponent.abs() < 1e9 {
            Expr::RatPow(Box::new(self), exponent as i64, 1)
        } else {
            Expr::Pow(Box::new(self), Box::new(Expr::Num(exponent)))
        }
    }

    pub fn ratpow(self, num: i64, den: u64) -> Expr {
        assert!(den >= 1, "rational exponent needs a positive denominator");
        Expr::RatPow(Box::new(self), num, den)
    }

    /// Evaluates in double precision.
    pub fn eval(&self, bindings: &Bindings) -> Result<f64, ExprError> {
        eval::eval(self, &bindings.values)
    }

    /// Evaluates a single-variable expression.
    pub fn eval_at(&self, var: Var, x: f64) -> Result<f64, ExprError> {
        let mut values = [None; 5];
        values[var.index()] = Some(x);
        eval::eval(self, &values)
    }

    /// Evaluates in extended-exponent arithmetic; products such as
    /// `exp(2*s)*exp(-2*s)` stay finite where `f64` would give `inf*0`.
    pub fn eval_wide(&self, bindings: &Bindings) -> Result<Wide, ExprError> {
        wide::eval(self, &bindings.values)
    }

    pub fn eval_wide_at(&self, var: Var, x: f64) -> Result<f64, ExprError> {
        let mut values = [None; 5];
        values[var.index()] = Some(x);
        wide::eval(self, &values).map(Wide::to_f64)
    }

    /// Symbolic derivative with respect to `var`.
    pub fn diff(&self, var: Var) -> Expr {
        diff::diff(self, var)
    }

    /// Replaces every occurrence of `var` by `with`.
    pub fn substitute(&self, var: Var, with: &Expr) -> Expr {
        match self {
            Expr::Var(v) if *v == var => with.clone(),
            Expr::Num(_) | Expr::Const(_) | Expr::Var(_) => self.clone(),
            Expr::Neg(a) => Expr::Neg(Box::new(a.substitute(var, with))),
            Expr::Add(a, b) => Expr::Add(
                Box::new(a.substitute(var, with)),
                Box::new(b.substitute(var, with)),
            ),
            Expr::Sub(a, b) => Expr::Sub(
                Box::new(a.substitute(var, with)),
                Box::new(b.substitute(var, with)),
            ),
            Expr::Mul(a, b) => Expr::Mul(
                Box::new(a.substitute(var, with)),
                Box::new(b.substitute(var, with)),
            ),
            Expr::Div(a, b) => Expr::Div(
                Box::new(a.substitute(var, with)),
                Box::new(b.substitute(var, with)),
            ),
            Expr::Pow(a, b) => Expr::Pow(
                Box::new(a.substitute(var, with)),
                Box::new(b.substitute(var, with)),
            ),
            Expr::RatPow(a, n, d) => Expr::RatPow(Box::new(a.substitute(var, with)), *n, *d),
            Expr::Call(f, a) => Expr::Call(*f, Box::new(a.substitute(var, with))),
        }
    }

    /// Renames a variable.
    pub fn rename(&self, from: Var, to: Var) -> Expr {
        self.substitute(from, &Expr::Var(to))
    }

    pub fn free_vars(&self) -> Vec<Var> {
        let mut seen = [false; 5];
        self.visit_vars(&mut seen);
        Var::ALL.into_iter().filter(|v| seen[v.index()]).collect()
    }

    fn visit_vars(&self, seen: &mut [bool; 5]) {
        match self {
            Expr::Var(v) => seen[v.index()] = true,
            Expr::Num(_) | Expr::Const(_) => {}
            Expr::Neg(a) | Expr::RatPow(a, _, _) | Expr::Call(_, a) => a.visit_vars(seen),
            Expr::Add(a, b)
            | Expr::Sub(a, b)
            | Expr::Mul(a, b)
            | Expr::Div(a, b)
            | Expr::Pow(a, b) => {
                a.visit_vars(seen);
                b.visit_vars(seen);
            }
        }
    }

    /// Whether the tree contains `exp` or a power with a variable exponent,
    /// the only nodes whose intermediates can leave the `f64` range for
    /// moderate arguments.
    pub fn has_exponential(&self) -> bool {
        match self {
            Expr::Call(Func::Exp, _) => true,
            Expr::Pow(a, b) => !b.free_vars().is_empty() || a.has_exponential() || b.has_exponential(),
            Expr::Var(_) | Expr::Num(_) | Expr::Const(_) => false,
            Expr::Neg(a) | Expr::RatPow(a, _, _) | Expr::Call(_, a) => a.has_exponential(),
            Expr::Add(a, b) | Expr::Sub(a, b) | Expr::Mul(a, b) | Expr::Div(a, b) => {
                a.has_exponential() || b.has_exponential()
            }
        }
    }

    pub fn depends_on(&self, var: Var) -> bool {
        let mut seen = [false; 5];
        self.visit_vars(&mut seen);
        seen[var.index()]
    }

    /// The constant value, when the tree is a bare literal.
    pub fn as_number(&self) -> Option<f64> {
        match self {
            Expr::Num(x) => Some(*x),
            Expr::Const(c) => Some(c.value()),
            _ => None,
        }
    }

    pub fn is_zero(&self) -> bool {
        self.as_number() == Some(0.0)
    }

    fn precedence(&self) -> u8 {
        match self {
            Expr::Add(..) | Expr::Sub(..) => 1,
            Expr::Mul(..) | Expr::Div(..) => 2,
            Expr::Neg(_) => 3,
            Expr::Pow(..) | Expr::RatPow(..) => 4,
            Expr::Num(x) if *x < 0.0 => 3,
            _ => 5,
        }
    }
}

fn write_child(f: &mut fmt::Formatter<'_>, child: &Expr, min_prec: u8) -> fmt::Result {
    if child.precedence() < min_prec {
        write!(f, "({child})")
    } else {
        write!(f, "{child}")
    }
}

impl fmt::Display for Expr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Expr::Num(x) => {
                if *x < 0.0 {
                    write!(f, "-{:?}", -x)
                } else {
                    write!(f, "{x:?}")
                }
            }
            Expr::Const(c) => f.write_str(c.name()),
            Expr::Var(v) => f.write_str(v.name()),
            Expr::Neg(a) => {
                f.write_str("-")?;
                write_child(f, a, 3)
            }
            Expr::Add(a, b) => {
                write_child(f, a, 1)?;
                f.write_str(" + ")?;
                write_child(f, b, 2)
            }
            Expr::Sub(a, b) => {
                write_child(f, a, 1)?;
                f.write_str(" - ")?;
                write_child(f, b, 2)
            }
            Expr::Mul(a, b) => {
                write_child(f, a, 2)?;
                f.write_str("*")?;
                write_child(f, b, 3)
            }
            Expr::Div(a, b) => {
                write_child(f, a, 2)?;
                f.write_str("/")?;
                write_child(f, b, 3)
            }
            Expr::Pow(a, b) => {
                write_child(f, a, 5)?;
                f.write_str("^")?;
                // exponent is parsed as `unary`, so a bare literal ratio must
                // stay wrapped or it would turn into a rational power
                write!(f, "({b})")
            }
            Expr::RatPow(a, n, d) => {
                write_child(f, a, 5)?;
                if *d == 1 {
                    if *n < 0 {
                        write!(f, "^({n})")
                    } else {
                        write!(f, "^{n}")
                    }
                } else {
                    write!(f, "^({n}/{d})")
                }
            }
            Expr::Call(func, a) => write!(f, "{}({a})", func.name()),
        }
    }
}

macro_rules! binop {
    ($trait:ident, $method:ident, $variant:ident) => {
        impl std::ops::$trait for Expr {
            type Output = Expr;
            fn $method(self, rhs: Expr) -> Expr {
                Expr::$variant(Box::new(self), Box::new(rhs))
            }
        }

        impl std::ops::$trait<f64> for Expr {
            type Output = Expr;
            fn $method(self, rhs: f64) -> Expr {
                Expr::$variant(Box::new(self), Box::new(Expr::Num(rhs)))
            }
        }

        impl std::ops::$trait<Expr> for f64 {
            type Output = Expr;
            fn $method(self, rhs: Expr) -> Expr {
                Expr::$variant(Box::new(Expr::Num(self)), Box::new(rhs))
            }
        }
    };
}

binop!(Add, add, Add);
binop!(Sub, sub, Sub);
binop!(Mul, mul, Mul);
binop!(Div, div, Div);

impl std::ops::Neg for Expr {
    type Output = Expr;
    fn neg(self) -> Expr {
        Expr::Neg(Box::new(self))
    }
}

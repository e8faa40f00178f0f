//! Symbolic scalar expressions over chart coordinates.
//!
//! Trees are immutable and reference counted, so subexpressions are shared
//! freely. Every node carries a structural hash and a mask of the variables it
//! mentions; both are computed once at construction.

mod diff;
mod display;
mod parse;
mod tape;

use std::ops;
use std::sync::Arc;

use thiserror::Error;

pub use diff::{diff, substitute, Differentiator};
pub use display::Printer;
pub use parse::{parse, parse_with};
pub use tape::{Slot, Tape, TapeBuilder};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ExprError {
    #[error("syntax error at position {position}: expected {expected}, found {found}")]
    Syntax {
        position: usize,
        expected: String,
        found: String,
    },
    #[error("unknown identifier `{name}` at position {position}")]
    UnknownIdentifier { name: String, position: usize },
    #[error("{what} at point {point:?}")]
    EvalDomain { what: &'static str, point: Vec<f64> },
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Func {
    Exp,
    Log,
    Sin,
    Cos,
    Sqrt,
}

impl Func {
    pub fn name(self) -> &'static str {
        match self {
            Func::Exp => "exp",
            Func::Log => "log",
            Func::Sin => "sin",
            Func::Cos => "cos",
            Func::Sqrt => "sqrt",
        }
    }

    pub fn from_name(s: &str) -> Option<Func> {
        Some(match s {
            "exp" => Func::Exp,
            "log" => Func::Log,
            "sin" => Func::Sin,
            "cos" => Func::Cos,
            "sqrt" => Func::Sqrt,
            _ => return None,
        })
    }

    /// Applies the function, or `None` outside its domain.
    pub fn apply(self, x: f64) -> Option<f64> {
        let y = match self {
            Func::Exp => x.exp(),
            Func::Log if x > 0.0 => x.ln(),
            Func::Sqrt if x >= 0.0 => x.sqrt(),
            Func::Sin => x.sin(),
            Func::Cos => x.cos(),
            _ => return None,
        };
        y.is_finite().then_some(y)
    }
}

#[derive(Clone, Debug)]
pub enum Kind {
    Const(f64),
    Var(usize),
    Neg(Expr),
    Add(Expr, Expr),
    Sub(Expr, Expr),
    Mul(Expr, Expr),
    Div(Expr, Expr),
    Pow(Expr, i32),
    Func(Func, Expr),
}

#[derive(Debug)]
struct Node {
    kind: Kind,
    hash: u64,
    vars: u64,
}

#[derive(Clone)]
pub struct Expr(Arc<Node>);

fn mix(h: u64, x: u64) -> u64 {
    (h.rotate_left(5) ^ x).wrapping_mul(0x517c_c1b7_2722_0a95)
}

fn var_bit(i: usize) -> u64 {
    1u64 << i.min(63)
}

impl Expr {
    /// Builds a node without any simplification.
    pub fn raw(kind: Kind) -> Expr {
        let (hash, vars) = match &kind {
            Kind::Const(c) => (mix(1, c.to_bits()), 0),
            Kind::Var(i) => (mix(2, *i as u64), var_bit(*i)),
            Kind::Neg(a) => (mix(3, a.hash()), a.vars()),
            Kind::Add(a, b) => (mix(mix(4, a.hash()), b.hash()), a.vars() | b.vars()),
            Kind::Sub(a, b) => (mix(mix(5, a.hash()), b.hash()), a.vars() | b.vars()),
            Kind::Mul(a, b) => (mix(mix(6, a.hash()), b.hash()), a.vars() | b.vars()),
            Kind::Div(a, b) => (mix(mix(7, a.hash()), b.hash()), a.vars() | b.vars()),
            Kind::Pow(a, n) => (mix(mix(8, a.hash()), *n as u64), a.vars()),
            Kind::Func(f, a) => (mix(mix(9, *f as u64), a.hash()), a.vars()),
        };
        Expr(Arc::new(Node { kind, hash, vars }))
    }

    pub fn constant(c: f64) -> Expr {
        Expr::raw(Kind::Const(c))
    }

    pub fn zero() -> Expr {
        Expr::constant(0.0)
    }

    pub fn one() -> Expr {
        Expr::constant(1.0)
    }

    pub fn var(i: usize) -> Expr {
        Expr::raw(Kind::Var(i))
    }

    pub fn kind(&self) -> &Kind {
        &self.0.kind
    }

    pub fn hash(&self) -> u64 {
        self.0.hash
    }

    fn vars(&self) -> u64 {
        self.0.vars
    }

    /// False only when the expression certainly does not mention variable `i`.
    pub fn depends_on(&self, i: usize) -> bool {
        self.vars() & var_bit(i) != 0
    }

    pub fn as_const(&self) -> Option<f64> {
        match self.kind() {
            Kind::Const(c) => Some(*c),
            _ => None,
        }
    }

    pub fn is_zero(&self) -> bool {
        self.as_const() == Some(0.0)
    }

    pub fn is_one(&self) -> bool {
        self.as_const() == Some(1.0)
    }

    pub(crate) fn ptr(&self) -> *const () {
        Arc::as_ptr(&self.0) as *const ()
    }

    /// Number of distinct nodes reachable from this one.
    pub fn dag_size(&self) -> usize {
        let mut seen = std::collections::HashSet::new();
        let mut stack = vec![self.clone()];
        while let Some(e) = stack.pop() {
            if !seen.insert(e.ptr()) {
                continue;
            }
            match e.kind() {
                Kind::Const(_) | Kind::Var(_) => {}
                Kind::Neg(a) | Kind::Pow(a, _) | Kind::Func(_, a) => stack.push(a.clone()),
                Kind::Add(a, b) | Kind::Sub(a, b) | Kind::Mul(a, b) | Kind::Div(a, b) => {
                    stack.push(a.clone());
                    stack.push(b.clone());
                }
            }
        }
        seen.len()
    }

    pub fn neg(&self) -> Expr {
        match self.kind() {
            Kind::Const(c) => Expr::constant(-c),
            Kind::Neg(a) => a.clone(),
            Kind::Sub(a, b) => Expr::raw(Kind::Sub(b.clone(), a.clone())),
            _ => Expr::raw(Kind::Neg(self.clone())),
        }
    }

    pub fn add(&self, b: &Expr) -> Expr {
        let a = self;
        match (a.kind(), b.kind()) {
            (Kind::Const(x), Kind::Const(y)) => Expr::constant(x + y),
            _ if a.is_zero() => b.clone(),
            _ if b.is_zero() => a.clone(),
            (_, Kind::Neg(y)) => a.sub(y),
            (Kind::Neg(x), _) => b.sub(x),
            _ if a == b => Expr::constant(2.0).mul(a),
            _ => Expr::raw(Kind::Add(a.clone(), b.clone())),
        }
    }

    pub fn sub(&self, b: &Expr) -> Expr {
        let a = self;
        match (a.kind(), b.kind()) {
            (Kind::Const(x), Kind::Const(y)) => Expr::constant(x - y),
            _ if b.is_zero() => a.clone(),
            _ if a.is_zero() => b.neg(),
            _ if a == b => Expr::zero(),
            (_, Kind::Neg(y)) => a.add(y),
            _ => Expr::raw(Kind::Sub(a.clone(), b.clone())),
        }
    }

    pub fn mul(&self, b: &Expr) -> Expr {
        let a = self;
        match (a.kind(), b.kind()) {
            (Kind::Const(x), Kind::Const(y)) => Expr::constant(x * y),
            _ if a.is_zero() || b.is_zero() => Expr::zero(),
            _ if a.is_one() => b.clone(),
            _ if b.is_one() => a.clone(),
            (Kind::Const(x), _) if *x == -1.0 => b.neg(),
            (_, Kind::Const(_)) => b.mul(a),
            (Kind::Neg(x), _) => x.mul(b).neg(),
            (_, Kind::Neg(y)) => a.mul(y).neg(),
            (Kind::Const(x), Kind::Mul(c, y)) if c.as_const().is_some() => {
                Expr::constant(x * c.as_const().unwrap_or(1.0)).mul(y)
            }
            _ if a == b => a.powi(2),
            _ => Expr::raw(Kind::Mul(a.clone(), b.clone())),
        }
    }

    pub fn div(&self, b: &Expr) -> Expr {
        let a = self;
        match (a.kind(), b.kind()) {
            (Kind::Const(x), Kind::Const(y)) if *y != 0.0 => Expr::constant(x / y),
            _ if b.is_one() => a.clone(),
            _ if a.is_zero() && !b.is_zero() => Expr::zero(),
            _ if a == b && !b.is_zero() => Expr::one(),
            (Kind::Neg(x), _) => x.div(b).neg(),
            (_, Kind::Neg(y)) => a.div(y).neg(),
            _ => Expr::raw(Kind::Div(a.clone(), b.clone())),
        }
    }

    pub fn powi(&self, n: i32) -> Expr {
        match self.kind() {
            _ if n == 0 => Expr::one(),
            _ if n == 1 => self.clone(),
            Kind::Const(c) => {
                let v = c.powi(n);
                if v.is_finite() {
                    Expr::constant(v)
                } else {
                    Expr::raw(Kind::Pow(self.clone(), n))
                }
            }
            Kind::Pow(a, m) => match m.checked_mul(n) {
                Some(k) => a.powi(k),
                None => Expr::raw(Kind::Pow(self.clone(), n)),
            },
            Kind::Neg(a) if n % 2 == 0 => a.powi(n),
            Kind::Neg(a) => a.powi(n).neg(),
            _ => Expr::raw(Kind::Pow(self.clone(), n)),
        }
    }

    pub fn apply(&self, f: Func) -> Expr {
        if let Some(c) = self.as_const() {
            if let Some(v) = f.apply(c) {
                return Expr::constant(v);
            }
        }
        Expr::raw(Kind::Func(f, self.clone()))
    }

    pub fn exp(&self) -> Expr {
        self.apply(Func::Exp)
    }

    pub fn ln(&self) -> Expr {
        self.apply(Func::Log)
    }

    pub fn sin(&self) -> Expr {
        self.apply(Func::Sin)
    }

    pub fn cos(&self) -> Expr {
        self.apply(Func::Cos)
    }

    pub fn sqrt(&self) -> Expr {
        self.apply(Func::Sqrt)
    }

    pub fn scale(&self, c: f64) -> Expr {
        Expr::constant(c).mul(self)
    }

    /// Sum built as a balanced tree, so long sums stay shallow.
    pub fn sum<I: IntoIterator<Item = Expr>>(terms: I) -> Expr {
        let mut layer: Vec<Expr> = terms.into_iter().filter(|t| !t.is_zero()).collect();
        if layer.is_empty() {
            return Expr::zero();
        }
        while layer.len() > 1 {
            let mut next = Vec::with_capacity(layer.len().div_ceil(2));
            let mut it = layer.chunks(2);
            for pair in &mut it {
                next.push(match pair {
                    [a, b] => a.add(b),
                    [a] => a.clone(),
                    _ => unreachable!(),
                });
            }
            layer = next;
        }
        layer.pop().unwrap_or_else(Expr::zero)
    }

    /// Evaluates one expression at a point.
    pub fn evaluate(&self, point: &[f64]) -> Result<f64, ExprError> {
        let mut b = TapeBuilder::new();
        b.push(self);
        let tape = b.finish();
        Ok(tape.eval(point)?[0])
    }

    pub fn differentiate(&self, var: usize) -> Expr {
        diff(self, var)
    }
}

impl PartialEq for Expr {
    fn eq(&self, other: &Expr) -> bool {
        if Arc::ptr_eq(&self.0, &other.0) {
            return true;
        }
        if self.hash() != other.hash() {
            return false;
        }
        match (self.kind(), other.kind()) {
            (Kind::Const(a), Kind::Const(b)) => a.to_bits() == b.to_bits(),
            (Kind::Var(a), Kind::Var(b)) => a == b,
            (Kind::Neg(a), Kind::Neg(b)) => a == b,
            (Kind::Add(a, b), Kind::Add(c, d))
            | (Kind::Sub(a, b), Kind::Sub(c, d))
            | (Kind::Mul(a, b), Kind::Mul(c, d))
            | (Kind::Div(a, b), Kind::Div(c, d)) => a == c && b == d,
            (Kind::Pow(a, n), Kind::Pow(b, m)) => n == m && a == b,
            (Kind::Func(f, a), Kind::Func(g, b)) => f == g && a == b,
            _ => false,
        }
    }
}

impl Eq for Expr {}

impl std::hash::Hash for Expr {
    fn hash<H: std::hash::Hasher>(&self, state: &mut H) {
        state.write_u64(self.0.hash);
    }
}

impl std::fmt::Debug for Expr {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{self}")
    }
}

impl From<f64> for Expr {
    fn from(c: f64) -> Expr {
        Expr::constant(c)
    }
}

macro_rules! binop {
    ($tr:ident, $m:ident, $f:ident) => {
        impl ops::$tr<Expr> for Expr {
            type Output = Expr;
            fn $m(self, rhs: Expr) -> Expr {
                Expr::$f(&self, &rhs)
            }
        }
        impl ops::$tr<&Expr> for Expr {
            type Output = Expr;
            fn $m(self, rhs: &Expr) -> Expr {
                Expr::$f(&self, rhs)
            }
        }
        impl ops::$tr<Expr> for &Expr {
            type Output = Expr;
            fn $m(self, rhs: Expr) -> Expr {
                Expr::$f(self, &rhs)
            }
        }
        impl ops::$tr<&Expr> for &Expr {
            type Output = Expr;
            fn $m(self, rhs: &Expr) -> Expr {
                Expr::$f(self, rhs)
            }
        }
        impl ops::$tr<f64> for Expr {
            type Output = Expr;
            fn $m(self, rhs: f64) -> Expr {
                Expr::$f(&self, &Expr::constant(rhs))
            }
        }
        impl ops::$tr<f64> for &Expr {
            type Output = Expr;
            fn $m(self, rhs: f64) -> Expr {
                Expr::$f(self, &Expr::constant(rhs))
            }
        }
        impl ops::$tr<Expr> for f64 {
            type Output = Expr;
            fn $m(self, rhs: Expr) -> Expr {
                Expr::$f(&Expr::constant(self), &rhs)
            }
        }
        impl ops::$tr<&Expr> for f64 {
            type Output = Expr;
            fn $m(self, rhs: &Expr) -> Expr {
                Expr::$f(&Expr::constant(self), rhs)
            }
        }
    };
}

binop!(Add, add, add);
binop!(Sub, sub, sub);
binop!(Mul, mul, mul);
binop!(Div, div, div);

impl ops::Neg for Expr {
    type Output = Expr;
    fn neg(self) -> Expr {
        Expr::neg(&self)
    }
}

impl ops::Neg for &Expr {
    type Output = Expr;
    fn neg(self) -> Expr {
        Expr::neg(self)
    }
}

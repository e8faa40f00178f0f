use std::fmt;

use super::{Expr, Kind};

/// Prints an expression with given variable names. The output reparses to a
/// tree with identical evaluation: constants use the shortest round-trip form
/// and parentheses follow the tree shape exactly.
pub struct Printer<'a> {
    expr: &'a Expr,
    names: Option<&'a [String]>,
}

// Precedence levels: sums, products, unary minus, powers, atoms.
const SUM: u8 = 1;
const PROD: u8 = 2;
const UNARY: u8 = 3;
const ATOM: u8 = 5;

fn level(e: &Expr) -> u8 {
    match e.kind() {
        Kind::Add(..) | Kind::Sub(..) => SUM,
        Kind::Mul(..) | Kind::Div(..) => PROD,
        Kind::Neg(_) => UNARY,
        Kind::Pow(..) => 4,
        _ => ATOM,
    }
}

fn number(c: f64) -> String {
    let a = c.abs();
    if a != 0.0 && !(1e-5..1e16).contains(&a) {
        format!("{c:e}")
    } else {
        format!("{c}")
    }
}

impl Printer<'_> {
    fn name(&self, i: usize, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.names.and_then(|n| n.get(i)) {
            Some(n) => write!(f, "{n}"),
            None => write!(f, "x{}", i + 1),
        }
    }

    fn at(&self, e: &Expr, min: u8, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if level(e) < min {
            write!(f, "(")?;
            self.go(e, f)?;
            write!(f, ")")
        } else {
            self.go(e, f)
        }
    }

    fn go(&self, e: &Expr, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match e.kind() {
            Kind::Const(c) => {
                if c.is_sign_negative() {
                    write!(f, "(-{})", number(-c))
                } else {
                    write!(f, "{}", number(*c))
                }
            }
            Kind::Var(i) => self.name(*i, f),
            Kind::Neg(a) => {
                write!(f, "-")?;
                self.at(a, 4, f)
            }
            Kind::Add(a, b) => {
                self.at(a, SUM, f)?;
                write!(f, " + ")?;
                self.at(b, PROD, f)
            }
            Kind::Sub(a, b) => {
                self.at(a, SUM, f)?;
                write!(f, " - ")?;
                self.at(b, PROD, f)
            }
            Kind::Mul(a, b) => {
                self.at(a, PROD, f)?;
                write!(f, "*")?;
                self.at(b, UNARY, f)
            }
            Kind::Div(a, b) => {
                self.at(a, PROD, f)?;
                write!(f, "/")?;
                self.at(b, UNARY, f)
            }
            Kind::Pow(a, n) => {
                self.at(a, ATOM, f)?;
                if *n < 0 {
                    write!(f, "^(-{})", -(*n as i64))
                } else {
                    write!(f, "^{n}")
                }
            }
            Kind::Func(func, a) => {
                write!(f, "{}(", func.name())?;
                self.go(a, f)?;
                write!(f, ")")
            }
        }
    }
}

impl fmt::Display for Printer<'_> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        self.go(self.expr, f)
    }
}

impl Expr {
    pub fn display<'a>(&'a self, names: &'a [String]) -> Printer<'a> {
        Printer {
            expr: self,
            names: Some(names),
        }
    }
}

impl fmt::Display for Expr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        Printer {
            expr: self,
            names: None,
        }
        .fmt(f)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::expr::parse;

    #[test]
    fn prints_readably() {
        let names = vec!["x1".to_string(), "x2".to_string()];
        let e = parse("x1^2 * sin(x2)", &names).unwrap();
        assert_eq!(e.display(&names).to_string(), "x1^2*sin(x2)");
        let e = parse("a - (b - c)", &["a".into(), "b".into(), "c".into()]).unwrap();
        assert_eq!(e.to_string(), "x1 - (x2 - x3)");
        assert_eq!(Expr::constant(-2.5).to_string(), "(-2.5)");
        assert_eq!(Expr::constant(1e-9).to_string(), "1e-9");
    }
}

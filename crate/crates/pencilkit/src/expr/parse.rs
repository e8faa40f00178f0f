//! Recursive-descent parser.
//!
//! ```text
//! expr   := term (('+'|'-') term)*
//! term   := factor (('*'|'/') factor)*
//! factor := '-'? atom ('^' int)?
//! atom   := number | ident | func '(' expr ')' | '(' expr ')'
//! int    := '-'? digits | '(' '-'? digits ')'
//! ```

use super::{Expr, ExprError, Func, Kind};

#[derive(Clone, Debug, PartialEq)]
enum Tok {
    Num(f64),
    Ident(String),
    Sym(char),
    End,
}

impl Tok {
    fn describe(&self) -> String {
        match self {
            Tok::Num(x) => format!("number {x}"),
            Tok::Ident(s) => format!("identifier `{s}`"),
            Tok::Sym(c) => format!("`{c}`"),
            Tok::End => "end of input".into(),
        }
    }
}

fn lex(src: &str) -> Result<Vec<(usize, Tok)>, ExprError> {
    let bytes = src.as_bytes();
    let mut out = Vec::new();
    let mut i = 0;
    while i < bytes.len() {
        let c = bytes[i] as char;
        if c.is_ascii_whitespace() {
            i += 1;
        } else if c.is_ascii_digit() || c == '.' {
            let start = i;
            while i < bytes.len() && (bytes[i].is_ascii_digit() || bytes[i] == b'.') {
                i += 1;
            }
            if i < bytes.len() && (bytes[i] == b'e' || bytes[i] == b'E') {
                let mut j = i + 1;
                if j < bytes.len() && (bytes[j] == b'+' || bytes[j] == b'-') {
                    j += 1;
                }
                if j < bytes.len() && bytes[j].is_ascii_digit() {
                    i = j;
                    while i < bytes.len() && bytes[i].is_ascii_digit() {
                        i += 1;
                    }
                }
            }
            let text = &src[start..i];
            let v: f64 = text.parse().map_err(|_| ExprError::Syntax {
                position: start,
                expected: "a number".into(),
                found: format!("`{text}`"),
            })?;
            out.push((start, Tok::Num(v)));
        } else if c.is_ascii_alphabetic() || c == '_' {
            let start = i;
            while i < bytes.len() && (bytes[i].is_ascii_alphanumeric() || bytes[i] == b'_') {
                i += 1;
            }
            out.push((start, Tok::Ident(src[start..i].to_string())));
        } else if "+-*/^()".contains(c) {
            out.push((i, Tok::Sym(c)));
            i += 1;
        } else {
            return Err(ExprError::Syntax {
                position: i,
                expected: "an operator, number, identifier or parenthesis".into(),
                found: format!("`{c}`"),
            });
        }
    }
    out.push((src.len(), Tok::End));
    Ok(out)
}

struct Parser<'a, F> {
    toks: Vec<(usize, Tok)>,
    pos: usize,
    resolve: &'a F,
}

impl<F: Fn(&str) -> Option<Expr>> Parser<'_, F> {
    fn peek(&self) -> &Tok {
        &self.toks[self.pos].1
    }

    fn at(&self) -> usize {
        self.toks[self.pos].0
    }

    fn bump(&mut self) -> Tok {
        let t = self.toks[self.pos].1.clone();
        if self.pos + 1 < self.toks.len() {
            self.pos += 1;
        }
        t
    }

    fn err<T>(&self, expected: &str) -> Result<T, ExprError> {
        Err(ExprError::Syntax {
            position: self.at(),
            expected: expected.into(),
            found: self.peek().describe(),
        })
    }

    fn expect(&mut self, c: char) -> Result<(), ExprError> {
        if *self.peek() == Tok::Sym(c) {
            self.bump();
            Ok(())
        } else {
            self.err(&format!("`{c}`"))
        }
    }

    fn expr(&mut self) -> Result<Expr, ExprError> {
        let mut acc = self.term()?;
        loop {
            match self.peek() {
                Tok::Sym('+') => {
                    self.bump();
                    acc = Expr::raw(Kind::Add(acc, self.term()?));
                }
                Tok::Sym('-') => {
                    self.bump();
                    acc = Expr::raw(Kind::Sub(acc, self.term()?));
                }
                _ => return Ok(acc),
            }
        }
    }

    fn term(&mut self) -> Result<Expr, ExprError> {
        let mut acc = self.factor()?;
        loop {
            match self.peek() {
                Tok::Sym('*') => {
                    self.bump();
                    acc = Expr::raw(Kind::Mul(acc, self.factor()?));
                }
                Tok::Sym('/') => {
                    self.bump();
                    acc = Expr::raw(Kind::Div(acc, self.factor()?));
                }
                _ => return Ok(acc),
            }
        }
    }

    fn factor(&mut self) -> Result<Expr, ExprError> {
        let negate = if *self.peek() == Tok::Sym('-') {
            self.bump();
            true
        } else {
            false
        };
        let mut base = self.atom()?;
        if *self.peek() == Tok::Sym('^') {
            self.bump();
            let n = self.integer()?;
            base = Expr::raw(Kind::Pow(base, n));
        }
        Ok(match (negate, base.as_const()) {
            (false, _) => base,
            (true, Some(c)) => Expr::constant(-c),
            (true, None) => Expr::raw(Kind::Neg(base)),
        })
    }

    fn integer(&mut self) -> Result<i32, ExprError> {
        let paren = *self.peek() == Tok::Sym('(');
        if paren {
            self.bump();
        }
        let neg = *self.peek() == Tok::Sym('-');
        if neg {
            self.bump();
        }
        let n = match self.peek() {
            Tok::Num(x) if x.fract() == 0.0 && x.abs() <= i32::MAX as f64 => *x as i32,
            _ => return self.err("an integer exponent"),
        };
        self.bump();
        if paren {
            self.expect(')')?;
        }
        Ok(if neg { -n } else { n })
    }

    fn atom(&mut self) -> Result<Expr, ExprError> {
        let position = self.at();
        match self.peek().clone() {
            Tok::Num(x) => {
                self.bump();
                Ok(Expr::constant(x))
            }
            Tok::Sym('(') => {
                self.bump();
                let e = self.expr()?;
                self.expect(')')?;
                Ok(e)
            }
            Tok::Ident(name) => {
                self.bump();
                if let Some(f) = Func::from_name(&name) {
                    if *self.peek() == Tok::Sym('(') {
                        self.bump();
                        let arg = self.expr()?;
                        self.expect(')')?;
                        return Ok(Expr::raw(Kind::Func(f, arg)));
                    }
                }
                (self.resolve)(&name).ok_or(ExprError::UnknownIdentifier { name, position })
            }
            _ => self.err("a number, identifier, function call or `(`"),
        }
    }
}

/// Parses with a custom identifier resolver.
pub fn parse_with<F: Fn(&str) -> Option<Expr>>(src: &str, resolve: &F) -> Result<Expr, ExprError> {
    let mut p = Parser {
        toks: lex(src)?,
        pos: 0,
        resolve,
    };
    let e = p.expr()?;
    if *p.peek() != Tok::End {
        return p.err("an operator or end of input");
    }
    Ok(e)
}

/// Parses an expression whose identifiers are the given coordinate names
/// (mapped to variables by position) or the constant `pi`.
pub fn parse(src: &str, names: &[String]) -> Result<Expr, ExprError> {
    parse_with(src, &|id: &str| {
        names
            .iter()
            .position(|n| n == id)
            .map(Expr::var)
            .or_else(|| (id == "pi").then(|| Expr::constant(std::f64::consts::PI)))
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn names() -> Vec<String> {
        vec!["x1".into(), "x2".into()]
    }

    #[test]
    fn precedence() {
        let e = parse("1 + 2*x1^2 - -x2/4", &names()).unwrap();
        let v = e.evaluate(&[3.0, 8.0]).unwrap();
        assert_eq!(v, 1.0 + 18.0 + 2.0);
        let e = parse("-x1^2", &names()).unwrap();
        assert_eq!(e.evaluate(&[3.0, 0.0]).unwrap(), -9.0);
        let e = parse("x1^-2 + x1^(-1)", &names()).unwrap();
        assert_eq!(e.evaluate(&[2.0, 0.0]).unwrap(), 0.75);
        let e = parse("2e-3*x1 + 1.5E2", &names()).unwrap();
        assert!((e.evaluate(&[1.0, 0.0]).unwrap() - 150.002).abs() < 1e-12);
    }

    #[test]
    fn errors() {
        match parse("x1 + * 2", &names()) {
            Err(ExprError::Syntax { position, .. }) => assert_eq!(position, 5),
            other => panic!("{other:?}"),
        }
        match parse("x1 + y", &names()) {
            Err(ExprError::UnknownIdentifier { name, position }) => {
                assert_eq!(name, "y");
                assert_eq!(position, 5);
            }
            other => panic!("{other:?}"),
        }
        assert!(parse("sin(x1", &names()).is_err());
        assert!(parse("x1^1.5", &names()).is_err());
        assert!(parse("x1 x2", &names()).is_err());
        assert!(parse("", &names()).is_err());
        assert!(parse("x1 # 2", &names()).is_err());
    }
}

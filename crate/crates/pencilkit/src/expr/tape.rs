use std::collections::HashMap;

use super::{Expr, ExprError, Func, Kind};

#[derive(Clone, Copy, Debug)]
enum Op {
    Const(f64),
    Var(u32),
    Neg(u32),
    Add(u32, u32),
    Sub(u32, u32),
    Mul(u32, u32),
    Div(u32, u32),
    Pow(u32, i32),
    Func(Func, u32),
}

#[derive(Clone, Copy, PartialEq, Eq, Hash)]
enum Key {
    Const(u64),
    Var(u32),
    Neg(u32),
    Bin(u8, u32, u32),
    Pow(u32, i32),
    Func(Func, u32),
}

/// A contiguous range of tape outputs.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Slot {
    pub start: usize,
    pub len: usize,
}

impl Slot {
    pub fn of<'a>(&self, values: &'a [f64]) -> &'a [f64] {
        &values[self.start..self.start + self.len]
    }
}

/// Compiles many expressions into one straight-line program. Identical
/// subexpressions (by structure, not just by pointer) are computed once.
#[derive(Default)]
pub struct TapeBuilder {
    ops: Vec<Op>,
    dedup: HashMap<Key, u32>,
    seen: HashMap<*const (), u32>,
    outputs: Vec<u32>,
    keep: Vec<Expr>,
    nvars: usize,
}

impl TapeBuilder {
    pub fn new() -> Self {
        Self::default()
    }

    fn emit(&mut self, key: Key, op: Op) -> u32 {
        if let Some(&i) = self.dedup.get(&key) {
            return i;
        }
        let i = self.ops.len() as u32;
        self.ops.push(op);
        self.dedup.insert(key, i);
        i
    }

    fn compile(&mut self, e: &Expr) -> u32 {
        if let Some(&i) = self.seen.get(&e.ptr()) {
            return i;
        }
        let i = match e.kind() {
            Kind::Const(c) => self.emit(Key::Const(c.to_bits()), Op::Const(*c)),
            Kind::Var(v) => {
                self.nvars = self.nvars.max(v + 1);
                self.emit(Key::Var(*v as u32), Op::Var(*v as u32))
            }
            Kind::Neg(a) => {
                let a = self.compile(a);
                self.emit(Key::Neg(a), Op::Neg(a))
            }
            Kind::Add(a, b) => {
                let (a, b) = (self.compile(a), self.compile(b));
                let (x, y) = (a.min(b), a.max(b));
                self.emit(Key::Bin(0, x, y), Op::Add(a, b))
            }
            Kind::Sub(a, b) => {
                let (a, b) = (self.compile(a), self.compile(b));
                self.emit(Key::Bin(1, a, b), Op::Sub(a, b))
            }
            Kind::Mul(a, b) => {
                let (a, b) = (self.compile(a), self.compile(b));
                let (x, y) = (a.min(b), a.max(b));
                self.emit(Key::Bin(2, x, y), Op::Mul(a, b))
            }
            Kind::Div(a, b) => {
                let (a, b) = (self.compile(a), self.compile(b));
                self.emit(Key::Bin(3, a, b), Op::Div(a, b))
            }
            Kind::Pow(a, n) => {
                let a = self.compile(a);
                self.emit(Key::Pow(a, *n), Op::Pow(a, *n))
            }
            Kind::Func(f, a) => {
                let a = self.compile(a);
                self.emit(Key::Func(*f, a), Op::Func(*f, a))
            }
        };
        self.seen.insert(e.ptr(), i);
        i
    }

    /// Adds one output and returns its index.
    pub fn push(&mut self, e: &Expr) -> usize {
        self.keep.push(e.clone());
        let i = self.compile(e);
        self.outputs.push(i);
        self.outputs.len() - 1
    }

    pub fn push_all<'a, I: IntoIterator<Item = &'a Expr>>(&mut self, es: I) -> Slot {
        let start = self.outputs.len();
        for e in es {
            self.push(e);
        }
        Slot {
            start,
            len: self.outputs.len() - start,
        }
    }

    pub fn finish(self) -> Tape {
        Tape {
            ops: self.ops,
            outputs: self.outputs,
            nvars: self.nvars,
        }
    }
}

#[derive(Clone, Debug)]
pub struct Tape {
    ops: Vec<Op>,
    outputs: Vec<u32>,
    nvars: usize,
}

impl Tape {
    pub fn len(&self) -> usize {
        self.ops.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ops.is_empty()
    }

    pub fn outputs(&self) -> usize {
        self.outputs.len()
    }

    pub fn eval(&self, point: &[f64]) -> Result<Vec<f64>, ExprError> {
        let mut scratch = Vec::new();
        let mut out = Vec::new();
        self.eval_into(point, &mut scratch, &mut out)?;
        Ok(out)
    }

    pub fn eval_into(
        &self,
        point: &[f64],
        scratch: &mut Vec<f64>,
        out: &mut Vec<f64>,
    ) -> Result<(), ExprError> {
        let fail = |what| ExprError::EvalDomain {
            what,
            point: point.to_vec(),
        };
        if point.len() < self.nvars {
            return Err(fail("too few coordinates"));
        }
        scratch.clear();
        scratch.reserve(self.ops.len());
        for op in &self.ops {
            let v = match *op {
                Op::Const(c) => c,
                Op::Var(i) => point[i as usize],
                Op::Neg(a) => -scratch[a as usize],
                Op::Add(a, b) => scratch[a as usize] + scratch[b as usize],
                Op::Sub(a, b) => scratch[a as usize] - scratch[b as usize],
                Op::Mul(a, b) => scratch[a as usize] * scratch[b as usize],
                Op::Div(a, b) => {
                    let d = scratch[b as usize];
                    if d == 0.0 {
                        return Err(fail("division by zero"));
                    }
                    scratch[a as usize] / d
                }
                Op::Pow(a, n) => {
                    let x = scratch[a as usize];
                    if x == 0.0 && n < 0 {
                        return Err(fail("negative power of zero"));
                    }
                    x.powi(n)
                }
                Op::Func(f, a) => match f.apply(scratch[a as usize]) {
                    Some(v) => v,
                    None => {
                        return Err(fail(match f {
                            Func::Log => "log of a non-positive number",
                            Func::Sqrt => "sqrt of a negative number",
                            _ => "non-finite function value",
                        }))
                    }
                },
            };
            if !v.is_finite() {
                return Err(fail("non-finite intermediate value"));
            }
            scratch.push(v);
        }
        out.clear();
        out.extend(self.outputs.iter().map(|&i| scratch[i as usize]));
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::expr::parse;

    #[test]
    fn structural_cse() {
        let names = vec!["x".to_string(), "y".to_string()];
        let a = parse("sin(x*y) + sin(x*y)^2", &names).unwrap();
        let b = parse("sin(y*x) * cos(x)", &names).unwrap();
        let mut tb = TapeBuilder::new();
        let s = tb.push_all([&a, &b]);
        let tape = tb.finish();
        // x, y, x*y, sin, ^2, +, cos, *, and the shared product y*x folds into x*y
        assert!(tape.len() <= 9, "tape has {} ops", tape.len());
        let v = tape.eval(&[0.3, 1.1]).unwrap();
        let s0 = (0.33f64).sin();
        assert!((s.of(&v)[0] - (s0 + s0 * s0)).abs() < 1e-15);
    }

    #[test]
    fn domain_errors_carry_the_point() {
        let names = vec!["x".to_string()];
        let e = parse("log(x)", &names).unwrap();
        match e.evaluate(&[-1.0]) {
            Err(ExprError::EvalDomain { point, .. }) => assert_eq!(point, vec![-1.0]),
            other => panic!("unexpected {other:?}"),
        }
        assert!(parse("1/x", &names).unwrap().evaluate(&[0.0]).is_err());
    }
}

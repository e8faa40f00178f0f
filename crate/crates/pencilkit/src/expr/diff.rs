use std::collections::HashMap;

use super::{Expr, Func, Kind};

/// Differentiates with respect to one variable, memoizing on node identity so
/// shared subtrees are differentiated once and the result stays a DAG.
pub struct Differentiator {
    var: usize,
    memo: HashMap<*const (), Expr>,
    keep: Vec<Expr>,
}

impl Differentiator {
    pub fn new(var: usize) -> Self {
        Differentiator {
            var,
            memo: HashMap::new(),
            keep: Vec::new(),
        }
    }

    pub fn diff(&mut self, e: &Expr) -> Expr {
        self.keep.push(e.clone());
        self.go(e)
    }

    fn go(&mut self, e: &Expr) -> Expr {
        if !e.depends_on(self.var) {
            return Expr::zero();
        }
        if let Some(d) = self.memo.get(&e.ptr()) {
            return d.clone();
        }
        let d = match e.kind() {
            Kind::Const(_) => Expr::zero(),
            Kind::Var(i) => {
                if *i == self.var {
                    Expr::one()
                } else {
                    Expr::zero()
                }
            }
            Kind::Neg(a) => self.go(a).neg(),
            Kind::Add(a, b) => self.go(a).add(&self.go(b)),
            Kind::Sub(a, b) => self.go(a).sub(&self.go(b)),
            Kind::Mul(a, b) => {
                let da = self.go(a);
                let db = self.go(b);
                da.mul(b).add(&a.mul(&db))
            }
            Kind::Div(a, b) => {
                let da = self.go(a);
                let db = self.go(b);
                if db.is_zero() {
                    da.div(b)
                } else {
                    da.mul(b).sub(&a.mul(&db)).div(&b.powi(2))
                }
            }
            Kind::Pow(a, n) => {
                let da = self.go(a);
                Expr::constant(*n as f64).mul(&a.powi(n - 1)).mul(&da)
            }
            Kind::Func(f, a) => {
                let da = self.go(a);
                match f {
                    Func::Exp => e.mul(&da),
                    Func::Log => da.div(a),
                    Func::Sin => a.cos().mul(&da),
                    Func::Cos => a.sin().mul(&da).neg(),
                    Func::Sqrt => da.div(&e.scale(2.0)),
                }
            }
        };
        self.memo.insert(e.ptr(), d.clone());
        d
    }
}

pub fn diff(e: &Expr, var: usize) -> Expr {
    Differentiator::new(var).diff(e)
}

/// Replaces every `Var(i)` by `subs[i]`. Variables beyond `subs` are kept.
pub fn substitute(e: &Expr, subs: &[Expr]) -> Expr {
    fn go(e: &Expr, subs: &[Expr], memo: &mut HashMap<*const (), Expr>) -> Expr {
        if let Some(r) = memo.get(&e.ptr()) {
            return r.clone();
        }
        let r = match e.kind() {
            Kind::Const(_) => e.clone(),
            Kind::Var(i) => subs.get(*i).cloned().unwrap_or_else(|| e.clone()),
            Kind::Neg(a) => go(a, subs, memo).neg(),
            Kind::Add(a, b) => go(a, subs, memo).add(&go(b, subs, memo)),
            Kind::Sub(a, b) => go(a, subs, memo).sub(&go(b, subs, memo)),
            Kind::Mul(a, b) => go(a, subs, memo).mul(&go(b, subs, memo)),
            Kind::Div(a, b) => go(a, subs, memo).div(&go(b, subs, memo)),
            Kind::Pow(a, n) => go(a, subs, memo).powi(*n),
            Kind::Func(f, a) => go(a, subs, memo).apply(*f),
        };
        memo.insert(e.ptr(), r.clone());
        r
    }
    go(e, subs, &mut HashMap::new())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::expr::parse;

    fn names() -> Vec<String> {
        vec!["x".into(), "y".into()]
    }

    fn fd(e: &Expr, p: &[f64], var: usize) -> f64 {
        let h = 1e-6;
        let mut a = p.to_vec();
        let mut b = p.to_vec();
        a[var] += h;
        b[var] -= h;
        (e.evaluate(&a).unwrap() - e.evaluate(&b).unwrap()) / (2.0 * h)
    }

    #[test]
    fn derivatives_match_central_differences() {
        let srcs = [
            "x^3*y - 2*x",
            "exp(x*y)/(1 + y^2)",
            "log(x + 2)*sin(y) - cos(x*y)",
            "sqrt(x^2 + y^2 + 1)",
            "x^-2 * y",
            "-(x - y)^4 / (3 + x)",
        ];
        let p = [0.7, -0.4];
        for s in srcs {
            let e = parse(s, &names()).unwrap();
            for v in 0..2 {
                let d = diff(&e, v).evaluate(&p).unwrap();
                let want = fd(&e, &p, v);
                assert!((d - want).abs() < 1e-6 * (1.0 + want.abs()), "{s} d{v}: {d} vs {want}");
            }
        }
    }

    #[test]
    fn shared_subtrees_stay_shared() {
        // f = g*g*...*g with g shared: derivative DAG grows linearly.
        let g = (Expr::var(0) * Expr::var(1)).sin();
        let mut f = g.clone();
        for _ in 0..30 {
            f = f.mul(&g.add(&f));
        }
        let d = diff(&f, 0);
        assert!(d.dag_size() < 40 * f.dag_size());
    }

    #[test]
    fn substitution_composes() {
        let e = parse("x*y + sin(x)", &names()).unwrap();
        let u = Expr::var(0);
        let sub = substitute(&e, &[u.powi(2), Expr::constant(3.0)]);
        let v = sub.evaluate(&[1.5]).unwrap();
        assert!((v - (2.25 * 3.0 + 2.25f64.sin())).abs() < 1e-12);
    }
}

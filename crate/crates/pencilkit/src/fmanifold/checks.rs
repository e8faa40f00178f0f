use crate::expr::{Expr, TapeBuilder};
use crate::geometry::{gradient_table, lie_derivative_metric};
use crate::pencil::nijenhuis_at;
use crate::report::{CheckReport, PointWorst, Terms};
use crate::sampling::{reduce, Settings};

use super::{FManSpec, FmanSlots};

fn points_or_report(f: &FManSpec, s: &Settings, name: &str) -> Result<Vec<Vec<f64>>, CheckReport> {
    f.sample(s).map_err(|e| CheckReport::precondition_failed(name, e.to_string()))
}

/// Commutativity, associativity and unity of the multiplication.
pub fn check_algebra(f: &FManSpec, s: &Settings) -> CheckReport {
    const NAME: &str = "algebra";
    let points = match points_or_report(f, s, NAME) {
        Ok(p) => p,
        Err(r) => return r,
    };
    let n = f.dim();
    let mut tb = TapeBuilder::new();
    let slots = FmanSlots::new(&mut tb, f);
    let su = f.unity().map(|u| tb.push_all(&u.0));
    let tape = tb.finish();
    let aggs = reduce(&points, s.parallelism, 3, |pt| {
        let v = tape.eval(pt)?;
        let p = slots.at(&v);
        let mut comm = PointWorst::new();
        let mut assoc = PointWorst::new();
        let mut unit = PointWorst::new();
        for k in 0..n {
            for i in 0..n {
                for j in 0..n {
                    let mut t = Terms::new();
                    t.push(p.c(k, i, j));
                    t.push(-p.c(k, j, i));
                    comm.offer_terms(&t, || format!("c^{}_{}{} − c^{}_{}{}", k + 1, i + 1, j + 1, k + 1, j + 1, i + 1));
                }
            }
        }
        for l in 0..n {
            for i in 0..n {
                for j in 0..n {
                    for k in 0..n {
                        let mut t = Terms::new();
                        for s in 0..n {
                            t.push(p.c(s, i, j) * p.c(l, s, k));
                            t.push(-p.c(s, j, k) * p.c(l, i, s));
                        }
                        assoc.offer_terms(&t, || {
                            format!("((∂{}·∂{})·∂{} − ∂{}·(∂{}·∂{}))^{}", i + 1, j + 1, k + 1, i + 1, j + 1, k + 1, l + 1)
                        });
                    }
                }
            }
        }
        match p.unity(su.map(|s| s.of(&v))) {
            None => unit.offer(f64::INFINITY, || "no unity: e^i c^k_ij = δ^k_j has no solution".into()),
            Some(e) => {
                for k in 0..n {
                    for j in 0..n {
                        let mut t = Terms::new();
                        for i in 0..n {
                            t.push(e[i] * p.c(k, i, j));
                        }
                        t.push(if k == j { -1.0 } else { 0.0 });
                        unit.offer_terms(&t, || format!("(e·∂{})^{} − δ", j + 1, k + 1));
                    }
                }
            }
        }
        Ok(vec![comm, assoc, unit])
    });
    let mut r = CheckReport::new(NAME);
    r.push_sub(aggs[0].sub("commutative", s.tol));
    r.push_sub(aggs[1].sub("associative", s.tol));
    r.push_sub(aggs[2].sub("unity", s.tol));
    r.conjunction(&["commutative", "associative", "unity"]);
    if f.unity().is_none() {
        r.note("unity solved pointwise by least squares");
    }
    r
}

/// `g̃(X·Y, Z) = g̃(X, Y·Z)` on coordinate frames.
pub fn check_invariant_metric(f: &FManSpec, s: &Settings) -> CheckReport {
    const NAME: &str = "invariant-metric";
    let points = match points_or_report(f, s, NAME) {
        Ok(p) => p,
        Err(r) => return r,
    };
    let n = f.dim();
    let mut tb = TapeBuilder::new();
    let slots = FmanSlots::new(&mut tb, f);
    let tape = tb.finish();
    let aggs = reduce(&points, s.parallelism, 1, |pt| {
        let v = tape.eval(pt)?;
        let p = slots.at(&v);
        let mut w = PointWorst::new();
        for i in 0..n {
            for j in 0..n {
                for k in 0..n {
                    let mut t = Terms::new();
                    for l in 0..n {
                        t.push(p.gcov[l * n + k] * p.c(l, i, j));
                        t.push(-p.gcov[i * n + l] * p.c(l, j, k));
                    }
                    w.offer_terms(&t, || format!("X=∂{}, Y=∂{}, Z=∂{}", i + 1, j + 1, k + 1));
                }
            }
        }
        Ok(vec![w])
    });
    CheckReport::from_aggregate(NAME, &aggs[0], s.tol)
}

/// `L_E(·) = k·` and `L_E g̃ = D g̃`.
pub fn check_euler_scaling(f: &FManSpec, s: &Settings) -> CheckReport {
    const NAME: &str = "euler-scaling";
    let points = match points_or_report(f, s, NAME) {
        Ok(p) => p,
        Err(r) => return r,
    };
    let n = f.dim();
    let lie = lie_derivative_metric(f.euler(), f.g_tilde());
    let mut tb = TapeBuilder::new();
    let slots = FmanSlots::new(&mut tb, f);
    let sl = tb.push_all(&lie);
    let tape = tb.finish();
    let (k, big_d) = (f.k(), f.big_d());
    let aggs = reduce(&points, s.parallelism, 2, |pt| {
        let v = tape.eval(pt)?;
        let p = slots.at(&v);
        let de = |v: usize, i: usize| p.de[v * n + i];
        let mut wc = PointWorst::new();
        for l in 0..n {
            for i in 0..n {
                for j in 0..n {
                    let mut t = Terms::new();
                    for s in 0..n {
                        t.push(p.e[s] * p.dc[s * n * n * n + (l * n + i) * n + j]);
                        t.push(-p.c(s, i, j) * de(s, l));
                        t.push(p.c(l, s, j) * de(i, s));
                        t.push(p.c(l, i, s) * de(j, s));
                    }
                    t.push(-k * p.c(l, i, j));
                    wc.offer_terms(&t, || format!("(L_E(·) − k·)(∂{}, ∂{})^{}", i + 1, j + 1, l + 1));
                }
            }
        }
        let mut wg = PointWorst::new();
        let lv = sl.of(&v);
        for i in 0..n {
            for j in 0..n {
                let mut t = Terms::new();
                t.push(lv[i * n + j]);
                t.push(-big_d * p.gcov[i * n + j]);
                wg.offer_terms(&t, || format!("(L_E g~ − D g~)_{}{}", i + 1, j + 1));
            }
        }
        Ok(vec![wc, wg])
    });
    let mut r = CheckReport::new(NAME);
    r.push_sub(aggs[0].sub("lie-product", s.tol));
    r.push_sub(aggs[1].sub("lie-metric", s.tol));
    r.conjunction(&["lie-product", "lie-metric"]);
    r
}

pub(crate) fn require_algebra(f: &FManSpec, s: &Settings, name: &str) -> Option<CheckReport> {
    for pre in [check_algebra(f, s), check_invariant_metric(f, s)] {
        if !pre.verdict.is_pass() {
            let mut r = CheckReport::precondition_failed(
                name,
                format!("{} is {} (residual {:e})", pre.check, pre.verdict.as_str(), pre.residual),
            );
            r.residual = pre.residual;
            r.witnesses = pre.witnesses;
            return Some(r);
        }
    }
    None
}

/// `∇̃(·)(X,Y,Z,E) = ∇̃(·)(E,X,Y,Z)`.
pub fn check_weak_f_condition(f: &FManSpec, s: &Settings) -> CheckReport {
    const NAME: &str = "weak-f-condition";
    if let Some(r) = require_algebra(f, s, NAME) {
        return r;
    }
    let points = match points_or_report(f, s, NAME) {
        Ok(p) => p,
        Err(r) => return r,
    };
    let n = f.dim();
    let mut tb = TapeBuilder::new();
    let slots = FmanSlots::new(&mut tb, f);
    let tape = tb.finish();
    let aggs = reduce(&points, s.parallelism, 1, |pt| {
        let v = tape.eval(pt)?;
        let p = slots.at(&v);
        let (t4, sc) = p.t4();
        let q = |i: usize, j: usize, k: usize, l: usize| ((i * n + j) * n + k) * n + l;
        let mut w = PointWorst::new();
        for x in 0..n {
            for y in 0..n {
                for z in 0..n {
                    let mut t = Terms::new();
                    for e in 0..n {
                        t.push_scaled(p.e[e] * t4[q(x, y, z, e)], p.e[e] * sc[q(x, y, z, e)]);
                        t.push_scaled(-p.e[e] * t4[q(e, x, y, z)], p.e[e] * sc[q(e, x, y, z)]);
                    }
                    w.offer_terms(&t, || format!("X=∂{}, Y=∂{}, Z=∂{}", x + 1, y + 1, z + 1));
                }
            }
        }
        Ok(vec![w])
    });
    CheckReport::from_aggregate(NAME, &aggs[0], s.tol)
}

/// Total symmetry of `∇̃(·)`, through the three adjacent transpositions.
pub fn check_f_condition(f: &FManSpec, s: &Settings) -> CheckReport {
    const NAME: &str = "f-condition";
    if let Some(r) = require_algebra(f, s, NAME) {
        return r;
    }
    let points = match points_or_report(f, s, NAME) {
        Ok(p) => p,
        Err(r) => return r,
    };
    let n = f.dim();
    let mut tb = TapeBuilder::new();
    let slots = FmanSlots::new(&mut tb, f);
    let tape = tb.finish();
    let aggs = reduce(&points, s.parallelism, 3, |pt| {
        let v = tape.eval(pt)?;
        let p = slots.at(&v);
        let (t4, sc) = p.t4();
        let q = |a: [usize; 4]| ((a[0] * n + a[1]) * n + a[2]) * n + a[3];
        let mut ws = vec![PointWorst::new(), PointWorst::new(), PointWorst::new()];
        for i in 0..n {
            for j in 0..n {
                for k in 0..n {
                    for l in 0..n {
                        let a = [i, j, k, l];
                        for (pos, w) in ws.iter_mut().enumerate() {
                            let mut b = a;
                            b.swap(pos, pos + 1);
                            let mut t = Terms::new();
                            t.push_scaled(t4[q(a)], sc[q(a)]);
                            t.push_scaled(-t4[q(b)], sc[q(b)]);
                            w.offer_terms(&t, || {
                                format!("∇~(·)(∂{},∂{},∂{},∂{}) vs slots {} and {} exchanged", i + 1, j + 1, k + 1, l + 1, pos + 1, pos + 2)
                            });
                        }
                    }
                }
            }
        }
        Ok(ws)
    });
    let mut r = CheckReport::new(NAME);
    r.push_sub(aggs[0].sub("swap-1-2", s.tol));
    r.push_sub(aggs[1].sub("swap-2-3", s.tol));
    r.push_sub(aggs[2].sub("swap-3-4", s.tol));
    r.conjunction(&["swap-1-2", "swap-2-3", "swap-3-4"]);
    r
}

/// Nijenhuis torsion of `E·`.
pub fn check_nijenhuis_euler(f: &FManSpec, s: &Settings) -> CheckReport {
    const NAME: &str = "nijenhuis-euler";
    let weak = check_weak_f_condition(f, s);
    let points = match points_or_report(f, s, NAME) {
        Ok(p) => p,
        Err(r) => return r,
    };
    let n = f.dim();
    let em = f.euler_multiplication();
    let dem: Vec<Expr> = gradient_table(&em, n).into_iter().flatten().collect();
    let mut tb = TapeBuilder::new();
    let sa = tb.push_all(&em);
    let sda = tb.push_all(&dem);
    let tape = tb.finish();
    let aggs = reduce(&points, s.parallelism, 1, |pt| {
        let v = tape.eval(pt)?;
        let mut w = PointWorst::new();
        for (idx, t) in nijenhuis_at(n, sa.of(&v), sda.of(&v)).iter().enumerate() {
            w.offer_terms(t, || {
                let (k, i, j) = (idx / (n * n), (idx / n) % n, idx % n);
                format!("N_(E·)^{}_{}{}", k + 1, i + 1, j + 1)
            });
        }
        Ok(vec![w])
    });
    let mut r = CheckReport::from_aggregate(NAME, &aggs[0], s.tol);
    if !weak.verdict.is_pass() {
        let residual = r.residual;
        r = CheckReport::precondition_failed(
            NAME,
            format!("weak 𝔉 condition is {}; N_(E·) residual {residual:e} reported without a verdict", weak.verdict.as_str()),
        );
        r.residual = residual;
        r.witnesses = aggs[0].witness.iter().cloned().collect();
    }
    r
}

use std::sync::Arc;

use nalgebra::DMatrix;

use crate::expr::{Slot, TapeBuilder};
use crate::geometry::numeric::riemann_at;
use crate::geometry::{gradient_table, MetricGeometry};
use crate::report::{CheckReport, PointWorst, SubVerdict, Terms, Verdict, Witness};
use crate::sampling::{map_points, reduce, Settings};

use super::{nijenhuis_at, PencilSpec};

pub(crate) struct Prepared {
    pub points: Vec<Vec<f64>>,
    pub lambdas: Vec<f64>,
    pub members: Vec<Arc<MetricGeometry>>,
    pub notes: Vec<String>,
}

pub(crate) fn prepare(p: &PencilSpec, s: &Settings, name: &str, need_lambdas: bool) -> Result<Prepared, CheckReport> {
    let fail = |e: crate::Error| CheckReport::precondition_failed(name, e.to_string());
    let points = p.sample(s).map_err(fail)?;
    if !need_lambdas {
        return Ok(Prepared {
            points,
            lambdas: Vec::new(),
            members: Vec::new(),
            notes: Vec::new(),
        });
    }
    let (lambdas, notes) = p.usable_lambdas(&points, s).map_err(fail)?;
    if lambdas.len() < 3 && lambdas.len() < s.lambdas.len() {
        let mut r = CheckReport::precondition_failed(name, "singular pencil: fewer than 3 usable λ-samples");
        r.notes.extend(notes);
        return Err(r);
    }
    let members = lambdas
        .iter()
        .map(|&l| p.member(l))
        .collect::<crate::Result<Vec<_>>>()
        .map_err(fail)?;
    Ok(Prepared {
        points,
        lambdas,
        members,
        notes,
    })
}

pub(crate) fn finish_notes(r: &mut CheckReport, prep: &Prepared) {
    r.lambdas = prep.lambdas.clone();
    r.notes.extend(prep.notes.iter().cloned());
}

pub(crate) struct GeoSlots {
    pub contra: Slot,
    pub gamma: Slot,
    pub dgamma: Option<Slot>,
}

pub(crate) fn push_geo(tb: &mut TapeBuilder, g: &MetricGeometry, with_derivatives: bool) -> GeoSlots {
    GeoSlots {
        contra: tb.push_all(&g.contra),
        gamma: tb.push_all(&g.conn.gamma),
        dgamma: with_derivatives.then(|| tb.push_all(g.dgamma())),
    }
}

/// Almost compatibility, decided twice: through the Christoffel pencil
/// relation at the λ-samples and through the Nijenhuis torsion of `A`.
pub fn check_almost_compatible(p: &PencilSpec, s: &Settings) -> CheckReport {
    const NAME: &str = "almost-compatible";
    let prep = match prepare(p, s, NAME, true) {
        Ok(x) => x,
        Err(r) => return r,
    };
    let n = p.dim();
    let a = p.operator_a();
    let da: Vec<_> = gradient_table(&a, n).into_iter().flatten().collect();

    let mut tb = TapeBuilder::new();
    let g0 = push_geo(&mut tb, p.geometry(), false);
    let g1 = push_geo(&mut tb, p.geometry_tilde(), false);
    let gl: Vec<GeoSlots> = prep.members.iter().map(|m| push_geo(&mut tb, m, false)).collect();
    let sa = tb.push_all(&a);
    let sda = tb.push_all(&da);
    let tape = tb.finish();

    let aggs = reduce(&prep.points, s.parallelism, 2, |pt| {
        let v = tape.eval(pt)?;
        let (g, gam) = (g0.contra.of(&v), g0.gamma.of(&v));
        let (gt, gamt) = (g1.contra.of(&v), g1.gamma.of(&v));
        let mut wa = PointWorst::new();
        for (li, &lam) in prep.lambdas.iter().enumerate() {
            let (gl_, gaml) = (gl[li].contra.of(&v), gl[li].gamma.of(&v));
            for a in 0..n {
                for i in 0..n {
                    for m in 0..n {
                        let mut t = Terms::new();
                        for j in 0..n {
                            t.push(gl_[m * n + j] * gaml[(a * n + i) * n + j]);
                            t.push(-g[m * n + j] * gam[(a * n + i) * n + j]);
                            t.push(-lam * gt[m * n + j] * gamt[(a * n + i) * n + j]);
                        }
                        wa.offer_terms(&t, || {
                            format!("λ={lam}, α=dx{}, X=∂{}, component {}", a + 1, i + 1, m + 1)
                        });
                    }
                }
            }
        }
        let mut wb = PointWorst::new();
        for (idx, t) in nijenhuis_at(n, sa.of(&v), sda.of(&v)).iter().enumerate() {
            wb.offer_terms(t, || {
                let (k, i, j) = (idx / (n * n), (idx / n) % n, idx % n);
                format!("N_A^{}_{}{}", k + 1, i + 1, j + 1)
            });
        }
        Ok(vec![wa, wb])
    });
    let mut r = CheckReport::new(NAME);
    r.push_sub(aggs[0].sub("defalmost", s.tol));
    r.push_sub(aggs[1].sub("nijenhuis", s.tol));
    r.equivalence(&["defalmost", "nijenhuis"]);
    finish_notes(&mut r, &prep);
    r
}

pub(crate) fn require_almost(p: &PencilSpec, s: &Settings, name: &str) -> Option<CheckReport> {
    let pre = check_almost_compatible(p, s);
    if pre.verdict.is_pass() {
        return None;
    }
    let mut r = CheckReport::precondition_failed(
        name,
        format!("almost-compatibility is {} (residual {:e})", pre.verdict.as_str(), pre.residual),
    );
    r.residual = pre.residual;
    r.witnesses = pre.witnesses;
    Some(r)
}

/// Compatibility through the curvature pencil relation and through the two
/// quadratic contorsion identities; the three verdicts must agree.
pub fn check_compatible(p: &PencilSpec, s: &Settings) -> CheckReport {
    const NAME: &str = "compatible";
    if let Some(r) = require_almost(p, s, NAME) {
        return r;
    }
    let prep = match prepare(p, s, NAME, true) {
        Ok(x) => x,
        Err(r) => return r,
    };
    let n = p.dim();
    let mut tb = TapeBuilder::new();
    let g0 = push_geo(&mut tb, p.geometry(), true);
    let g1 = push_geo(&mut tb, p.geometry_tilde(), true);
    let gl: Vec<GeoSlots> = prep.members.iter().map(|m| push_geo(&mut tb, m, true)).collect();
    let tape = tb.finish();

    let aggs = reduce(&prep.points, s.parallelism, 3, |pt| {
        let v = tape.eval(pt)?;
        let curv = |gs: &GeoSlots| {
            let dg = gs.dgamma.as_ref().map(|d| d.of(&v)).unwrap_or(&[]);
            riemann_at(n, gs.gamma.of(&v), dg)
        };
        let (g, gt) = (g0.contra.of(&v), g1.contra.of(&v));
        let (r0, s0) = curv(&g0);
        let (r1, s1) = curv(&g1);
        let idx = |l: usize, k: usize, i: usize, j: usize| ((l * n + k) * n + i) * n + j;

        let mut w1 = PointWorst::new();
        for (li, &lam) in prep.lambdas.iter().enumerate() {
            let glv = gl[li].contra.of(&v);
            let (rl, sl) = curv(&gl[li]);
            for m in 0..n {
                for a in 0..n {
                    for i in 0..n {
                        for j in (i + 1)..n {
                            let mut t = Terms::new();
                            for k in 0..n {
                                let q = idx(a, k, i, j);
                                t.push_scaled(glv[m * n + k] * rl[q], glv[m * n + k] * sl[q]);
                                t.push_scaled(-g[m * n + k] * r0[q], g[m * n + k] * s0[q]);
                                t.push_scaled(-lam * gt[m * n + k] * r1[q], lam * gt[m * n + k] * s1[q]);
                            }
                            w1.offer_terms(&t, || {
                                format!("λ={lam}, α=dx{}, X=∂{}, Y=∂{}, component {}", a + 1, i + 1, j + 1, m + 1)
                            });
                        }
                    }
                }
            }
        }
        let (gam0, gam1) = (g0.gamma.of(&v), g1.gamma.of(&v));
        let kk: Vec<f64> = gam0.iter().zip(gam1).map(|(a, b)| a - b).collect();
        let k3 = |a: usize, i: usize, j: usize| kk[(a * n + i) * n + j];
        let quad = |h: &[f64], w: &mut PointWorst, which: &str| {
            for a in 0..n {
                for b in 0..n {
                    for i in 0..n {
                        for j in (i + 1)..n {
                            let mut t = Terms::new();
                            for k in 0..n {
                                for l in 0..n {
                                    t.push(h[k * n + l] * k3(a, j, k) * k3(b, i, l));
                                    t.push(-h[k * n + l] * k3(a, i, k) * k3(b, j, l));
                                }
                            }
                            w.offer_terms(&t, || {
                                format!("{which}: α=dx{}, β=dx{}, X=∂{}, Y=∂{}", a + 1, b + 1, i + 1, j + 1)
                            });
                        }
                    }
                }
            }
        };
        let mut w2 = PointWorst::new();
        let mut w3 = PointWorst::new();
        quad(g, &mut w2, "g*");
        quad(gt, &mut w3, "g~*");
        Ok(vec![w1, w2, w3])
    });
    let mut r = CheckReport::new(NAME);
    r.push_sub(aggs[0].sub("curvature-pencil", s.tol));
    r.push_sub(aggs[1].sub("contorsion-g", s.tol));
    r.push_sub(aggs[2].sub("contorsion-g-tilde", s.tol));
    r.equivalence(&["curvature-pencil", "contorsion-g", "contorsion-g-tilde"]);
    finish_notes(&mut r, &prep);
    r
}

/// `g*(∇̃_{g̃*γ}α − ∇_{g̃*γ}α) = g̃*(∇̃_{g*γ}α − ∇_{g*γ}α)` on coordinate forms.
pub fn check_prop_au(p: &PencilSpec, s: &Settings) -> CheckReport {
    const NAME: &str = "prop-au";
    if let Some(r) = require_almost(p, s, NAME) {
        return r;
    }
    let prep = match prepare(p, s, NAME, false) {
        Ok(x) => x,
        Err(r) => return r,
    };
    let n = p.dim();
    let mut tb = TapeBuilder::new();
    let g0 = push_geo(&mut tb, p.geometry(), false);
    let g1 = push_geo(&mut tb, p.geometry_tilde(), false);
    let tape = tb.finish();
    let aggs = reduce(&prep.points, s.parallelism, 1, |pt| {
        let v = tape.eval(pt)?;
        let (g, gt) = (g0.contra.of(&v), g1.contra.of(&v));
        let kk: Vec<f64> = g0.gamma.of(&v).iter().zip(g1.gamma.of(&v)).map(|(a, b)| a - b).collect();
        let mut w = PointWorst::new();
        for m in 0..n {
            for c in 0..n {
                for a in 0..n {
                    let mut t = Terms::new();
                    for k in 0..n {
                        for i in 0..n {
                            let kv = kk[(a * n + i) * n + k];
                            t.push(g[m * n + k] * gt[c * n + i] * kv);
                            t.push(-gt[m * n + k] * g[c * n + i] * kv);
                        }
                    }
                    w.offer_terms(&t, || format!("α=dx{}, γ=dx{}, component {}", a + 1, c + 1, m + 1));
                }
            }
        }
        Ok(vec![w])
    });
    CheckReport::from_aggregate(NAME, &aggs[0], s.tol)
}

/// Curvature of every pencil member at the λ-samples, plus `R` and `R̃`.
pub fn check_flat_pencil(p: &PencilSpec, s: &Settings) -> CheckReport {
    const NAME: &str = "flat-pencil";
    let prep = match prepare(p, s, NAME, true) {
        Ok(x) => x,
        Err(r) => return r,
    };
    let n = p.dim();
    let mut tb = TapeBuilder::new();
    let g0 = push_geo(&mut tb, p.geometry(), true);
    let g1 = push_geo(&mut tb, p.geometry_tilde(), true);
    let gl: Vec<GeoSlots> = prep.members.iter().map(|m| push_geo(&mut tb, m, true)).collect();
    let tape = tb.finish();
    let aggs = reduce(&prep.points, s.parallelism, 3, |pt| {
        let v = tape.eval(pt)?;
        let worst = |gs: &GeoSlots, w: &mut PointWorst, tag: &str| {
            let dg = gs.dgamma.as_ref().map(|d| d.of(&v)).unwrap_or(&[]);
            let (r, sc) = riemann_at(n, gs.gamma.of(&v), dg);
            for (q, (x, y)) in r.iter().zip(&sc).enumerate() {
                w.offer(crate::report::normalized(*x, *y), || {
                    let (l, k, i, j) = (q / (n * n * n), (q / (n * n)) % n, (q / n) % n, q % n);
                    format!("{tag}: R^{}_{}{}{}", l + 1, k + 1, i + 1, j + 1)
                });
            }
        };
        let mut wl = PointWorst::new();
        for (li, lam) in prep.lambdas.iter().enumerate() {
            worst(&gl[li], &mut wl, &format!("λ={lam}"));
        }
        let mut w0 = PointWorst::new();
        let mut w1 = PointWorst::new();
        worst(&g0, &mut w0, "g");
        worst(&g1, &mut w1, "g~");
        Ok(vec![wl, w0, w1])
    });
    let mut r = CheckReport::new(NAME);
    r.push_sub(aggs[0].sub("pencil-curvature", s.tol));
    r.push_sub(aggs[1].sub("curvature-g", s.tol));
    r.push_sub(aggs[2].sub("curvature-g-tilde", s.tol));
    r.conjunction(&["pencil-curvature", "curvature-g", "curvature-g-tilde"]);
    finish_notes(&mut r, &prep);
    r
}

/// Minimum pairwise eigenvalue gap of `A` must exceed this everywhere.
pub const SEMISIMPLE_GAP: f64 = 1e-6;

/// Pointwise-distinct real eigenvalues of `A = g̃* g`.
pub fn check_semisimple(p: &PencilSpec, s: &Settings) -> CheckReport {
    const NAME: &str = "semisimple";
    let prep = match prepare(p, s, NAME, false) {
        Ok(x) => x,
        Err(r) => return r,
    };
    let n = p.dim();
    let a = p.operator_a();
    let da: Vec<_> = gradient_table(&a, n).into_iter().flatten().collect();
    let mut tb = TapeBuilder::new();
    let sa = tb.push_all(&a);
    let sda = tb.push_all(&da);
    let tape = tb.finish();
    let per_point = map_points(&prep.points, s.parallelism, |pt| {
        let v = tape.eval(pt)?;
        let m = DMatrix::from_row_slice(n, n, sa.of(&v));
        let ev = m.complex_eigenvalues();
        let mut gap = f64::INFINITY;
        let mut complex = false;
        for i in 0..n {
            if ev[i].im.abs() > SEMISIMPLE_GAP {
                complex = true;
            }
            for j in (i + 1)..n {
                gap = gap.min((ev[i] - ev[j]).norm());
            }
        }
        let na = nijenhuis_at(n, sa.of(&v), sda.of(&v))
            .iter()
            .map(|t| t.value().abs())
            .fold(0.0, f64::max);
        Ok::<_, crate::expr::ExprError>((gap, complex, na))
    });
    let mut r = CheckReport::new(NAME);
    let mut min_gap = f64::INFINITY;
    let mut witness: Option<Witness> = None;
    let mut any_complex = false;
    let mut max_na: f64 = 0.0;
    for (pt, res) in prep.points.iter().zip(per_point) {
        let (gap, complex, na, detail) = match res {
            Ok((g, c, na)) => (g, c, na, format!("min eigenvalue gap {g:e}")),
            Err(e) => (0.0, false, f64::INFINITY, format!("evaluation failed: {e}")),
        };
        any_complex |= complex;
        max_na = max_na.max(na);
        let gap = if complex { 0.0 } else { gap };
        if witness.is_none() || gap < min_gap {
            min_gap = gap;
            witness = Some(Witness {
                point: pt.clone(),
                residual: gap,
                detail: if complex { format!("complex eigenvalues; {detail}") } else { detail },
            });
        }
    }
    let ok = n == 1 || (min_gap > SEMISIMPLE_GAP && !any_complex);
    r.push_sub(SubVerdict {
        name: "distinct-eigenvalues-of-a".into(),
        verdict: if ok { Verdict::Pass } else { Verdict::Fail },
        residual: if ok { 0.0 } else { 1.0 },
        witness: witness.clone(),
    });
    r.verdict = if ok { Verdict::Pass } else { Verdict::Fail };
    r.residual = if ok { 0.0 } else { 1.0 };
    r.witnesses.extend(witness);
    if any_complex {
        r.note("A has complex eigenvalues at some sample point: not semisimple");
    }
    r.note(format!(
        "the criterion uses the eigenvalues of A = g~* g; max |N_A| = {max_na:e}. Read literally with the tensor N_A, \
         every almost-compatible pair has N_A = 0 and so no distinct eigenvalues"
    ));
    r.note(format!(
        "min eigenvalue gap {min_gap:e}; pass requires gap > {SEMISIMPLE_GAP:e} at every point (residual 0 or 1)"
    ));
    r
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{Chart, MetricField, Variance};

    fn pair(bounds: Vec<(f64, f64)>, g: &[&[&str]], gt: &[&[&str]], var: Variance) -> PencilSpec {
        let c = Chart::boxed("x", bounds).unwrap();
        let m = |s: &[&[&str]]| {
            let rows: Vec<Vec<&str>> = s.iter().map(|r| r.to_vec()).collect();
            MetricField::from_strings(&c, &rows, var).unwrap()
        };
        PencilSpec::new(c.clone(), m(g), m(gt)).unwrap()
    }

    fn settings() -> Settings {
        Settings::default().with_points(30)
    }

    #[test]
    fn constant_pair_is_flat_and_compatible() {
        let p = pair(vec![(-1.0, 1.0); 2], &[&["1", "0"], &["0", "1"]], &[&["2", "1"], &["1", "3"]], Variance::Contravariant);
        let s = settings();
        for r in [
            check_almost_compatible(&p, &s),
            check_compatible(&p, &s),
            check_flat_pencil(&p, &s),
            check_prop_au(&p, &s),
        ] {
            assert_eq!(r.verdict, Verdict::Pass, "{r:?}");
            assert!(r.consistent);
        }
    }

    #[test]
    fn diagonal_semisimple_pair() {
        let p = pair(vec![(1.0, 2.0); 2], &[&["1", "0"], &["0", "1"]], &[&["x1", "0"], &["0", "x2"]], Variance::Contravariant);
        let s = settings();
        assert_eq!(check_almost_compatible(&p, &s).verdict, Verdict::Pass);
        let c = check_compatible(&p, &s);
        assert_eq!(c.verdict, Verdict::Pass, "{c:?}");
        assert_eq!(check_prop_au(&p, &s).verdict, Verdict::Pass);
        assert_eq!(check_flat_pencil(&p, &s).verdict, Verdict::Pass);
    }

    #[test]
    fn crossed_diagonal_fails_with_witness() {
        let p = pair(vec![(1.0, 2.0); 2], &[&["1", "0"], &["0", "1"]], &[&["x2", "0"], &["0", "x1"]], Variance::Contravariant);
        let r = check_almost_compatible(&p, &settings());
        assert_eq!(r.verdict, Verdict::Fail);
        assert!(r.consistent, "{r:?}");
        assert!(!r.witnesses.is_empty());
        assert_eq!(check_compatible(&p, &settings()).verdict, Verdict::PreconditionFailed);
    }

    #[test]
    fn sphere_is_not_flat() {
        let p = pair(
            vec![(0.4, 2.6), (0.0, 6.0)],
            &[&["1", "0"], &["0", "sin(x1)^2"]],
            &[&["1", "0"], &["0", "1"]],
            Variance::Covariant,
        );
        let r = check_flat_pencil(&p, &settings());
        assert_eq!(r.verdict, Verdict::Fail);
        assert_eq!(r.sub("curvature-g").unwrap().verdict, Verdict::Fail);
        assert_eq!(r.sub("curvature-g-tilde").unwrap().verdict, Verdict::Pass);
    }

    #[test]
    fn semisimple_gap() {
        let s = settings();
        let p = pair(vec![(1.0, 2.0); 2], &[&["1", "0"], &["0", "1"]], &[&["x1", "0"], &["0", "x2 + 3"]], Variance::Contravariant);
        assert_eq!(check_semisimple(&p, &s).verdict, Verdict::Pass);
        let q = pair(vec![(1.0, 2.0); 2], &[&["1", "0"], &["0", "1"]], &[&["x1", "0"], &["0", "x1"]], Variance::Contravariant);
        assert_eq!(check_semisimple(&q, &s).verdict, Verdict::Fail);
    }

    #[test]
    fn singular_lambda_is_skipped() {
        // g*_1 and g*_(-1/2) are singular everywhere
        let p = pair(vec![(1.0, 2.0); 2], &[&["1", "0"], &["0", "1"]], &[&["-1", "0"], &["0", "2"]], Variance::Contravariant);
        let r = check_almost_compatible(&p, &settings());
        assert_eq!(r.lambdas, vec![-2.0, 1.0 / 3.0, 3.0]);
        assert!(r.notes.iter().any(|n| n.contains("skipped")));
        assert_eq!(r.verdict, Verdict::Pass);
    }

    #[test]
    fn modes_agree() {
        let p = pair(vec![(1.0, 2.0); 2], &[&["1", "0"], &["0", "1"]], &[&["x2", "0"], &["0", "x1"]], Variance::Contravariant);
        let a = check_almost_compatible(&p, &settings());
        let b = check_almost_compatible(&p, &settings().sequential());
        assert_eq!(a, b);
    }
}

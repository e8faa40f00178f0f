use crate::circalg::CircProduct;
use crate::error::{Error, Result};
use crate::expr::{Expr, TapeBuilder};
use crate::geometry::numeric;
use crate::geometry::{
    covariant_derivative_vector, lie_bracket, lie_derivative_metric, linalg, MetricField,
    Variance, VectorFieldExpr,
};
use crate::pencil::{check_compatible, PencilSpec};
use crate::report::{CheckReport, SubVerdict, Verdict, Witness};
use crate::sampling::Settings;

use super::{identity_residuals, FManSpec, FmanSlots, Identity, QHPencilSpec, TOperator, REGULARITY_EPS};

/// The pencil with `g* g̃ = E·`, i.e. `g^{ij} = (E·)^i_k g̃^{kj}`.
pub fn build_pencil_from_fman(f: &FManSpec, s: &Settings) -> Result<PencilSpec> {
    let n = f.dim();
    let em = f.euler_multiplication();
    let gt_contra = &f.geometry_tilde().contra;
    let raw = linalg::matmul(&em, gt_contra, n);
    let points = f.sample(s)?;
    let mut tb = TapeBuilder::new();
    let se = tb.push_all(&em);
    let sg = tb.push_all(&raw);
    let tape = tb.finish();
    for p in &points {
        let v = tape.eval(p)?;
        if numeric::determinant(n, se.of(&v)).abs() <= REGULARITY_EPS {
            return Err(Error::NotInvertibleEulerMultiplication { point: p.clone() });
        }
        let g = sg.of(&v);
        for i in 0..n {
            for j in (i + 1)..n {
                let r = crate::report::rel(g[i * n + j], g[j * n + i]);
                if r > s.tol {
                    return Err(Error::AsymmetryDetected { point: p.clone(), residual: r });
                }
            }
        }
    }
    let mut comps = raw.clone();
    for i in 0..n {
        for j in 0..i {
            comps[i * n + j] = raw[j * n + i].clone();
        }
    }
    PencilSpec::new(f.chart().clone(), MetricField::contravariant(n, comps)?, f.g_tilde().clone())
}

/// The built pencil with its Euler data and bi-degree `(1 + k − D, D)`.
pub fn qh_pencil_from_fman(f: &FManSpec, s: &Settings) -> Result<QHPencilSpec> {
    Ok(QHPencilSpec {
        pencil: build_pencil_from_fman(f, s)?,
        euler: f.euler().clone(),
        potential: None,
        unity: f.unity().cloned(),
        d: 1.0 + f.k() - f.big_d(),
        big_d: f.big_d(),
    })
}

fn idx2(n: usize) -> impl Fn(usize) -> (usize, usize) {
    move |q| (q / n, q % n)
}

/// `L_E(g*) = (k − D) g*` for the built pencil.
pub fn check_pencil_degree(f: &FManSpec, s: &Settings) -> CheckReport {
    const NAME: &str = "pencil-degree";
    let p = match build_pencil_from_fman(f, s) {
        Ok(p) => p,
        Err(e) => return CheckReport::precondition_failed(NAME, e.to_string()),
    };
    let points = match f.sample(s) {
        Ok(x) => x,
        Err(e) => return CheckReport::precondition_failed(NAME, e.to_string()),
    };
    let n = f.dim();
    let at = idx2(n);
    let label = move |q: usize| {
        let (i, j) = at(q);
        format!("(L_E g* − (k−D) g*)^{}{}", i + 1, j + 1)
    };
    let c = f.k() - f.big_d();
    let aggs = identity_residuals(
        &points,
        s,
        &[Identity {
            lhs: lie_derivative_metric(f.euler(), p.g()),
            rhs: p.g().comps().iter().map(|e| e.scale(c)).collect(),
            label: &label,
        }],
    );
    CheckReport::from_aggregate(NAME, &aggs[0], s.tol)
}

fn t_sub(t: &TOperator, points: &[Vec<f64>]) -> SubVerdict {
    let n = t.dim();
    let mut tb = TapeBuilder::new();
    let slot = tb.push_all(t.matrix());
    let tape = tb.finish();
    let mut min = f64::INFINITY;
    let mut witness = None;
    for p in points {
        let det = match tape.eval(p) {
            Ok(v) => numeric::determinant(n, slot.of(&v)).abs(),
            Err(_) => 0.0,
        };
        let det = if det.is_finite() { det } else { 0.0 };
        if witness.is_none() || det < min {
            min = det;
            witness = Some(Witness {
                point: p.clone(),
                residual: det,
                detail: format!("|det T| = {det:e}"),
            });
        }
    }
    // a threshold, not an identity: the residual is 0 or 1 and the witness
    // carries the smallest |det T|
    let ok = min > REGULARITY_EPS;
    SubVerdict {
        name: "t-automorphism".into(),
        verdict: if ok { Verdict::Pass } else { Verdict::Fail },
        residual: if ok { 0.0 } else { 1.0 },
        witness,
    }
}

fn require_compatible(q: &QHPencilSpec, s: &Settings, name: &str) -> Option<CheckReport> {
    let c = check_compatible(&q.pencil, s);
    if c.verdict.is_pass() {
        return None;
    }
    let mut r = CheckReport::precondition_failed(
        name,
        format!("pencil compatibility is {} (residual {:e})", c.verdict.as_str(), c.residual),
    );
    r.residual = c.residual;
    r.witnesses = c.witnesses;
    Some(r)
}

/// `g(E)` as a 1-form.
fn lowered_euler(q: &QHPencilSpec) -> Vec<Expr> {
    let n = q.pencil.dim();
    let cov = &q.pencil.geometry().cov;
    (0..n)
        .map(|a| Expr::sum((0..n).map(|s| cov[a * n + s].mul(&q.euler.0[s]))))
        .collect()
}

/// `(ω∘dx^b)_j` for every `b`, at `[b][j]`.
fn circ_left(prod: &CircProduct, omega: &[Expr]) -> Vec<Expr> {
    let n = prod.dim();
    let mut out = Vec::with_capacity(n * n);
    for b in 0..n {
        for j in 0..n {
            out.push(Expr::sum((0..n).map(|a| omega[a].mul(prod.get(a, b, j)))));
        }
    }
    out
}

/// The two scaling laws, regularity of `T`, and `T(u) = g(E)∘u`.
pub fn check_weak_qh(q: &QHPencilSpec, s: &Settings) -> CheckReport {
    const NAME: &str = "weak-qh";
    if let Some(r) = require_compatible(q, s, NAME) {
        return r;
    }
    let points = match q.pencil.sample(s) {
        Ok(x) => x,
        Err(e) => return CheckReport::precondition_failed(NAME, e.to_string()),
    };
    let n = q.pencil.dim();
    let at = idx2(n);
    let t = TOperator::from_euler(q.pencil.geometry_tilde(), &q.euler, q.d);
    let prod = CircProduct::new(&q.pencil);
    let ge_circ = circ_left(&prod, &lowered_euler(q));
    let lg = |q2: usize| {
        let (i, j) = at(q2);
        format!("(L_E g* − (d−1) g*)^{}{}", i + 1, j + 1)
    };
    let lgt = |q2: usize| {
        let (i, j) = at(q2);
        format!("(L_E g~* + D g~*)^{}{}", i + 1, j + 1)
    };
    let lt = |q2: usize| {
        let (b, j) = at(q2);
        format!("(T(dx{}) − g(E)∘dx{})_{}", b + 1, b + 1, j + 1)
    };
    let aggs = identity_residuals(
        &points,
        s,
        &[
            Identity {
                lhs: lie_derivative_metric(&q.euler, q.pencil.g()),
                rhs: q.pencil.g().comps().iter().map(|e| e.scale(q.d - 1.0)).collect(),
                label: &lg,
            },
            Identity {
                lhs: lie_derivative_metric(&q.euler, q.pencil.g_tilde()),
                rhs: q.pencil.g_tilde().comps().iter().map(|e| e.scale(-q.big_d)).collect(),
                label: &lgt,
            },
            Identity {
                lhs: t.matrix().to_vec(),
                rhs: ge_circ,
                label: &lt,
            },
        ],
    );
    let mut r = CheckReport::new(NAME);
    r.push_sub(aggs[0].sub("lie-g", s.tol));
    r.push_sub(aggs[1].sub("lie-g-tilde", s.tol));
    r.push_sub(t_sub(&t, &points));
    r.push_sub(aggs[2].sub("t-equals-g-e-circ", s.tol));
    r.conjunction(&["lie-g", "lie-g-tilde", "t-automorphism", "t-equals-g-e-circ"]);
    r.note(format!("bi-degree (d, D) = ({}, {})", q.d, q.big_d));
    r
}

/// Quasi-homogeneity with a potential `f`, plus the consequences that follow
/// from it, reported as cross-checks.
pub fn check_qh(q: &QHPencilSpec, s: &Settings) -> CheckReport {
    const NAME: &str = "qh";
    let Some(f) = &q.potential else {
        return CheckReport::precondition_failed(NAME, Error::MissingPotential.to_string());
    };
    if let Some(r) = require_compatible(q, s, NAME) {
        return r;
    }
    let points = match q.pencil.sample(s) {
        Ok(x) => x,
        Err(e) => return CheckReport::precondition_failed(NAME, e.to_string()),
    };
    let p = &q.pencil;
    let n = p.dim();
    let at = idx2(n);
    let df: Vec<Expr> = (0..n).map(|i| f.differentiate(i)).collect();
    let grad = |m: &MetricField| -> Vec<Expr> {
        (0..n)
            .map(|i| Expr::sum((0..n).map(|j| m.get(i, j).mul(&df[j]))))
            .collect()
    };
    let e_grad = grad(p.g_tilde());
    let unity = q.unity.clone().unwrap_or_else(|| VectorFieldExpr(e_grad.clone()));
    let t = TOperator::from_euler(p.geometry_tilde(), &q.euler, q.d);
    let prod = CircProduct::new(p);
    let scaled = |m: &MetricField, c: f64| -> Vec<Expr> { m.comps().iter().map(|e| e.scale(c)).collect() };
    let zeros = vec![Expr::zero(); n * n];
    let bracket = lie_bracket(&unity, &q.euler);
    let nabla_e = covariant_derivative_vector(&p.geometry_tilde().conn, &unity);
    let nabla_big_e = covariant_derivative_vector(&p.geometry().conn, &q.euler);
    let identity_scaled: Vec<Expr> = (0..n * n)
        .map(|q2| {
            let (i, k) = at(q2);
            if i == k {
                Expr::constant(0.5 * (1.0 - q.d))
            } else {
                Expr::zero()
            }
        })
        .collect();
    let vec_label = |what: &'static str| move |i: usize| format!("{what}, component {}", i + 1);
    let mat_label = |what: &'static str| {
        move |q2: usize| {
            let (i, j) = (q2 / n, q2 % n);
            format!("{what} at ({}, {})", i + 1, j + 1)
        }
    };
    let (l0, l1, l2) = (vec_label("E − grad_g f"), vec_label("e − grad_g~ f"), vec_label("[e,E] − e"));
    let (l3, l4, l5) = (mat_label("L_e g* − g~*"), mat_label("L_e g~*"), mat_label("L_E g* − (d−1) g*"));
    let (l6, l7, l8, l9) = (
        mat_label("∇~_i e^k"),
        mat_label("∇_i E^k − ((1−d)/2) δ"),
        mat_label("L_E g~* − (d−2) g~*"),
        mat_label("T(dx^b)_j − (df∘dx^b)_j"),
    );
    let families = [
        Identity { lhs: q.euler.0.clone(), rhs: grad(p.g()), label: &l0 },
        Identity { lhs: unity.0.clone(), rhs: e_grad.clone(), label: &l1 },
        Identity { lhs: bracket.0, rhs: unity.0.clone(), label: &l2 },
        Identity { lhs: lie_derivative_metric(&unity, p.g()), rhs: p.g_tilde().comps().to_vec(), label: &l3 },
        Identity { lhs: lie_derivative_metric(&unity, p.g_tilde()), rhs: zeros.clone(), label: &l4 },
        Identity { lhs: lie_derivative_metric(&q.euler, p.g()), rhs: scaled(p.g(), q.d - 1.0), label: &l5 },
        Identity { lhs: nabla_e, rhs: zeros, label: &l6 },
        Identity { lhs: nabla_big_e, rhs: identity_scaled, label: &l7 },
        Identity {
            lhs: lie_derivative_metric(&q.euler, p.g_tilde()),
            rhs: scaled(p.g_tilde(), q.d - 2.0),
            label: &l8,
        },
        Identity { lhs: t.matrix().to_vec(), rhs: circ_left(&prod, &df), label: &l9 },
    ];
    let aggs = identity_residuals(&points, s, &families);
    let primary = [
        "euler-gradient",
        "unity-gradient",
        "bracket",
        "lie-e-g",
        "lie-e-g-tilde",
        "lie-euler-g",
    ];
    let cross = ["nabla-e", "covariant-euler", "lie-euler-g-tilde", "t-equals-df-circ"];
    let mut r = CheckReport::new(NAME);
    for (name, agg) in primary.iter().chain(&cross).zip(&aggs) {
        r.push_sub(agg.sub(name, s.tol));
    }
    r.push_sub(t_sub(&t, &points));
    let mut names: Vec<&str> = primary.to_vec();
    names.push("t-automorphism");
    r.conjunction(&names);
    if r.verdict.is_pass() {
        let failed: Vec<&str> = cross
            .iter()
            .copied()
            .filter(|c| r.sub(c).is_some_and(|x| !x.verdict.is_pass()))
            .collect();
        if !failed.is_empty() {
            r.consistent = false;
            r.verdict = Verdict::Fail;
            r.note(format!("consequences fail although the defining conditions hold: {}", failed.join(", ")));
        }
    }
    r
}

/// Multiplication `u·v = u∘T⁻¹(v)` moved to the tangent bundle through `g̃`,
/// with unity `e = g̃* g(E)` and `L_E(·) = (d + D − 1)·`.
pub fn build_fman_from_pencil(q: &QHPencilSpec, s: &Settings) -> Result<FManSpec> {
    let pre = check_weak_qh(q, s);
    if !pre.verdict.is_pass() {
        let why = pre
            .sub_verdicts
            .iter()
            .find(|x| !x.verdict.is_pass())
            .map(|x| format!("{} is {} ({:e})", x.name, x.verdict.as_str(), x.residual))
            .or_else(|| pre.notes.first().cloned())
            .unwrap_or_default();
        if let Some(w) = pre.sub("t-automorphism").filter(|x| !x.verdict.is_pass()) {
            let point = w.witness.as_ref().map(|w| w.point.clone()).unwrap_or_default();
            let det = w.witness.as_ref().map_or(0.0, |w| w.residual);
            return Err(Error::NotAutomorphism { point, det });
        }
        return Err(Error::PreconditionFailed(format!("not a weak quasi-homogeneous pencil: {why}")));
    }
    let p = &q.pencil;
    let n = p.dim();
    let t = TOperator::from_euler(p.geometry_tilde(), &q.euler, q.d);
    let tinv = linalg::inverse(t.matrix(), n)?;
    let prod = CircProduct::new(p);
    // cotangent product (dx^a · dx^b)_j = Σ_s (M⁻¹)^b_s (dx^a ∘ dx^s)_j
    let mut cot = Vec::with_capacity(n * n * n);
    for a in 0..n {
        for b in 0..n {
            for j in 0..n {
                cot.push(Expr::sum((0..n).map(|s2| tinv[b * n + s2].mul(prod.get(a, s2, j)))));
            }
        }
    }
    let gt = p.geometry_tilde();
    let mut c = Vec::with_capacity(n * n * n);
    for k in 0..n {
        for pp in 0..n {
            for qq in 0..n {
                let mut terms = Vec::new();
                for j in 0..n {
                    for a in 0..n {
                        for b in 0..n {
                            terms.push(
                                gt.contra[k * n + j]
                                    .mul(&gt.cov[pp * n + a])
                                    .mul(&gt.cov[qq * n + b])
                                    .mul(&cot[(a * n + b) * n + j]),
                            );
                        }
                    }
                }
                c.push(Expr::sum(terms));
            }
        }
    }
    let ge = lowered_euler(q);
    let unity: Vec<Expr> = (0..n)
        .map(|k| Expr::sum((0..n).map(|a| gt.contra[k * n + a].mul(&ge[a]))))
        .collect();
    FManSpec::new(
        p.chart().clone(),
        c,
        MetricField::new(n, gt.cov.clone(), Variance::Covariant)?,
        q.euler.clone(),
        Some(VectorFieldExpr(unity)),
        q.d + q.big_d - 1.0,
        q.big_d,
    )
}

/// Builds the pencil of `f`, builds the multiplication back from it, and
/// compares structure functions and unity; also checks that `g(E)` is the
/// unity on 1-forms and `g*(α,β) = (α·β)(E)`.
pub fn check_round_trip(f: &FManSpec, s: &Settings) -> CheckReport {
    const NAME: &str = "round-trip";
    let q = match qh_pencil_from_fman(f, s) {
        Ok(q) => q,
        Err(e) => return CheckReport::precondition_failed(NAME, e.to_string()),
    };
    let back = match build_fman_from_pencil(&q, s) {
        Ok(b) => b,
        Err(e) => {
            let mut r = CheckReport::precondition_failed(NAME, format!("pencil to multiplication failed: {e}"));
            if let Error::NotAutomorphism { point, det } = e {
                r.witnesses.push(Witness {
                    point,
                    residual: det,
                    detail: format!("|det T| = {det:e}"),
                });
            }
            return r;
        }
    };
    let points = match f.sample(s) {
        Ok(x) => x,
        Err(e) => return CheckReport::precondition_failed(NAME, e.to_string()),
    };
    let n = f.dim();
    let mut tb = TapeBuilder::new();
    let a = FmanSlots::new(&mut tb, f);
    let b = FmanSlots::new(&mut tb, &back);
    let su = f.unity().map(|u| tb.push_all(&u.0));
    let sub = tb.push_all(&back.unity().expect("built with a unity").0);
    let sg = tb.push_all(q.pencil.g().comps());
    let tape = tb.finish();
    let aggs = crate::sampling::reduce(&points, s.parallelism, 4, |pt| {
        let v = tape.eval(pt)?;
        let (pa, pb) = (a.at(&v), b.at(&v));
        let mut wc = crate::report::PointWorst::new();
        for (q2, (x, y)) in pa.c.iter().zip(pb.c).enumerate() {
            wc.offer(crate::report::rel(*x, *y), || {
                let (k, i, j) = (q2 / (n * n), (q2 / n) % n, q2 % n);
                format!("c^{}_{}{}", k + 1, i + 1, j + 1)
            });
        }
        let mut we = crate::report::PointWorst::new();
        let eb = sub.of(&v);
        match pa.unity(su.map(|x| x.of(&v))) {
            None => we.offer(f64::INFINITY, || "original multiplication has no unity".into()),
            Some(ea) => {
                for i in 0..n {
                    we.offer(crate::report::rel(ea[i], eb[i]), || format!("e^{}", i + 1));
                }
            }
        }
        // g(E) is the unity of the rebuilt product on 1-forms
        let mut wu = crate::report::PointWorst::new();
        let ge = pb.lower(eb);
        for bb in 0..n {
            let mut u = vec![0.0; n];
            u[bb] = 1.0;
            let prod = pb.mul_forms(&ge, &u);
            for j in 0..n {
                wu.offer(crate::report::rel(prod[j], u[j]), || format!("(g(E)·dx{})_{}", bb + 1, j + 1));
            }
        }
        // g*(α, β) = (α·β)(E)
        let mut wm = crate::report::PointWorst::new();
        let g = sg.of(&v);
        for aa in 0..n {
            for bb in 0..n {
                let (mut u, mut w) = (vec![0.0; n], vec![0.0; n]);
                u[aa] = 1.0;
                w[bb] = 1.0;
                let prod = pb.mul_forms(&u, &w);
                let val: f64 = (0..n).map(|j| prod[j] * pb.e[j]).sum();
                wm.offer(crate::report::rel(g[aa * n + bb], val), || {
                    format!("g*(dx{}, dx{}) vs (dx{}·dx{})(E)", aa + 1, bb + 1, aa + 1, bb + 1)
                });
            }
        }
        Ok(vec![wc, we, wu, wm])
    });
    let mut r = CheckReport::new(NAME);
    r.push_sub(aggs[0].sub("structure", s.tol));
    r.push_sub(aggs[1].sub("unity", s.tol));
    r.push_sub(aggs[2].sub("unity-on-forms", s.tol));
    r.push_sub(aggs[3].sub("metric-from-product", s.tol));
    r.conjunction(&["structure", "unity", "unity-on-forms", "metric-from-product"]);
    r.note(format!(
        "rebuilt scaling k = d + D − 1 = {}, original k = {}",
        back.k(),
        f.k()
    ));
    r
}

#[cfg(test)]
mod tests {
    use super::super::tests::p1;
    use super::*;
    use crate::geometry::Chart;
    use crate::pencil::check_flat_pencil;

    fn s() -> Settings {
        Settings::default().with_points(15)
    }

    /// `F = t1² t2 / 2 + t2⁴ / 72`: `∂2·∂2 = (t2/3) ∂1`, `E = t1 ∂1 + (2/3) t2 ∂2`.
    pub(crate) fn a2() -> FManSpec {
        let chart = Chart::new(vec!["t1".into(), "t2".into()], vec![(0.5, 1.5), (0.5, 1.5)]).unwrap();
        let eta = MetricField::from_strings(&chart, &[vec!["0", "1"], vec!["1", "0"]], Variance::Covariant).unwrap();
        let f = chart.parse("t1^2*t2/2 + t2^4/72").unwrap();
        let e = VectorFieldExpr(vec![chart.parse("t1").unwrap(), chart.parse("2*t2/3").unwrap()]);
        FManSpec::from_potential(chart, &f, eta, e, Some(VectorFieldExpr::coordinate(2, 0)), 1.0, 5.0 / 3.0).unwrap()
    }

    #[test]
    fn p1_pencil_is_flat_and_compatible_but_not_regular() {
        let f = p1("exp(t2)");
        let q = qh_pencil_from_fman(&f, &s()).unwrap();
        assert_eq!(check_compatible(&q.pencil, &s()).verdict, Verdict::Pass);
        assert_eq!(check_flat_pencil(&q.pencil, &s()).verdict, Verdict::Pass);
        assert_eq!(check_pencil_degree(&f, &s()).verdict, Verdict::Pass);
        let w = check_weak_qh(&q, &s());
        assert_eq!(w.sub("lie-g").unwrap().verdict, Verdict::Pass);
        assert_eq!(w.sub("lie-g-tilde").unwrap().verdict, Verdict::Pass);
        assert_eq!(w.sub("t-equals-g-e-circ").unwrap().verdict, Verdict::Pass);
        assert_eq!(w.sub("t-automorphism").unwrap().verdict, Verdict::Fail);
        assert!(matches!(build_fman_from_pencil(&q, &s()), Err(Error::NotAutomorphism { .. })));
    }

    #[test]
    fn a2_round_trip() {
        let f = a2();
        let q = qh_pencil_from_fman(&f, &s()).unwrap();
        let w = check_weak_qh(&q, &s());
        assert_eq!(w.verdict, Verdict::Pass, "{w:?}");
        let r = check_round_trip(&f, &s());
        assert_eq!(r.verdict, Verdict::Pass, "{r:?}");
        assert!(r.residual <= 1e-8);
    }

    #[test]
    fn p1_potential_checks() {
        let f = p1("exp(t2)");
        let mut q = qh_pencil_from_fman(&f, &s()).unwrap();
        q.potential = Some(f.chart().parse("t2").unwrap());
        let r = check_qh(&q, &s());
        for name in ["euler-gradient", "unity-gradient", "bracket", "lie-e-g", "lie-e-g-tilde", "lie-euler-g"] {
            assert_eq!(r.sub(name).unwrap().verdict, Verdict::Pass, "{name}: {r:?}");
        }
        for name in ["nabla-e", "covariant-euler", "lie-euler-g-tilde", "t-equals-df-circ"] {
            assert_eq!(r.sub(name).unwrap().verdict, Verdict::Pass, "{name}: {r:?}");
        }
        // regularity is the only failing condition
        assert_eq!(r.sub("t-automorphism").unwrap().verdict, Verdict::Fail);
    }

    #[test]
    fn wrong_degree_is_caught() {
        let f = a2();
        let mut q = qh_pencil_from_fman(&f, &s()).unwrap();
        q.potential = Some(f.chart().parse("t2").unwrap());
        assert_eq!(check_qh(&q, &s()).verdict, Verdict::Pass, "{:?}", check_qh(&q, &s()));
        q.d += 0.25;
        let r = check_qh(&q, &s());
        assert_eq!(r.sub("lie-euler-g").unwrap().verdict, Verdict::Fail);
    }

    #[test]
    fn missing_potential() {
        let q = qh_pencil_from_fman(&a2(), &s()).unwrap();
        let r = check_qh(&q, &s());
        assert_eq!(r.verdict, Verdict::PreconditionFailed);
    }

    #[test]
    fn trivial_algebra_gives_equal_metrics() {
        // one-dimensional: ∂·∂ = ∂, E = e = ∂, g̃ = 1
        let chart = Chart::boxed("x", vec![(0.0, 1.0)]).unwrap();
        let f = FManSpec::new(
            chart,
            vec![Expr::one()],
            MetricField::diagonal(vec![Expr::one()], Variance::Covariant),
            VectorFieldExpr(vec![Expr::one()]),
            Some(VectorFieldExpr(vec![Expr::one()])),
            0.0,
            0.0,
        )
        .unwrap();
        let p = build_pencil_from_fman(&f, &s()).unwrap();
        assert!(p.g().comps()[0].is_one());
        assert_eq!(check_compatible(&p, &s()).verdict, Verdict::Pass);
    }
}

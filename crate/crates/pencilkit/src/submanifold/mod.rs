//! Metric pairs induced on embedded submanifolds.
//!
//! An embedding is given by ambient coordinates `x^i(u)` over a parameter
//! chart. Ambient fields are pulled back by substitution, so every pointwise
//! quantity is evaluated on parameter samples. Normal data come from the
//! `g̃`-orthogonal projector `P = I − J h̃⁻¹ Jᵀ g̃` onto `TN^⊥`; a form `α` on
//! `N` extends to `ᾱ = α h̃⁻¹ Jᵀ g̃`, which vanishes on `TN^⊥`.

use nalgebra::{DMatrix, DVector};

use crate::circalg::CircProduct;
use crate::error::{Error, Result};
use crate::expr::{substitute, Expr, Slot, TapeBuilder};
use crate::fmanifold::{build_pencil_from_fman, check_weak_f_condition, FManSpec};
use crate::geometry::{gradient_table, numeric, Chart, MetricField, Variance};
use crate::pencil::{check_compatible, PencilSpec};
use crate::report::{CheckReport, PointWorst, SubVerdict, Terms, Verdict};
use crate::sampling::{reduce, sample_points, Settings};

/// Singular values of `J` below this count as rank loss.
pub const RANK_EPS: f64 = 1e-9;

#[derive(Clone, Debug)]
pub struct EmbeddingSpec {
    chart: Chart,
    x: Vec<Expr>,
    jac: Vec<Expr>,
}

impl EmbeddingSpec {
    /// `x[i]` is the ambient coordinate `x^i` as a function of the parameters.
    pub fn new(chart: Chart, x: Vec<Expr>) -> Result<Self> {
        let m = chart.dim();
        if x.len() < m {
            return Err(Error::Dimension(format!(
                "{} ambient coordinates cannot embed a {m}-dimensional parameter chart",
                x.len()
            )));
        }
        if let Some(i) = x.iter().position(|e| (m..m + 8).any(|v| e.depends_on(v))) {
            return Err(Error::Dimension(format!("component {} uses a variable outside the parameter chart", i + 1)));
        }
        let d = gradient_table(&x, m);
        let n = x.len();
        let jac = (0..n).flat_map(|i| (0..m).map(move |a| (i, a))).map(|(i, a)| d[a][i].clone()).collect();
        Ok(EmbeddingSpec { chart, x, jac })
    }

    pub fn from_strings(chart: Chart, x: &[&str]) -> Result<Self> {
        let x = x.iter().map(|s| chart.parse(s)).collect::<std::result::Result<Vec<_>, _>>()?;
        EmbeddingSpec::new(chart, x)
    }

    /// `N = M`.
    pub fn identity(chart: Chart) -> Self {
        let x = (0..chart.dim()).map(Expr::var).collect();
        EmbeddingSpec::new(chart, x).expect("identity embedding")
    }

    pub fn chart(&self) -> &Chart {
        &self.chart
    }

    /// Parameter dimension `m`.
    pub fn dim(&self) -> usize {
        self.chart.dim()
    }

    pub fn ambient_dim(&self) -> usize {
        self.x.len()
    }

    pub fn components(&self) -> &[Expr] {
        &self.x
    }

    /// `J^i_a = ∂x^i/∂u^a` at `[i][a]`.
    pub fn jacobian(&self) -> &[Expr] {
        &self.jac
    }

    /// An ambient expression as a function of the parameters.
    pub fn pull(&self, e: &Expr) -> Expr {
        substitute(e, &self.x)
    }

    pub fn pull_all(&self, es: &[Expr]) -> Vec<Expr> {
        es.iter().map(|e| self.pull(e)).collect()
    }

    /// Parameter samples where every pulled-back `nonzero` guard is admissible,
    /// with `J` of full rank at each.
    pub fn sample(&self, nonzero: &[Expr], s: &Settings) -> Result<Vec<Vec<f64>>> {
        let guards = self.pull_all(nonzero);
        let points = sample_points(&self.chart, &guards, s)?;
        let (n, m) = (self.ambient_dim(), self.dim());
        let mut tb = TapeBuilder::new();
        let sj = tb.push_all(&self.jac);
        let tape = tb.finish();
        for p in &points {
            let v = tape.eval(p)?;
            let sv = numeric::matrix(n, m, sj.of(&v)).singular_values();
            if sv.iter().any(|x| !x.is_finite() || *x <= RANK_EPS) {
                return Err(Error::RankDeficient { point: p.clone() });
            }
        }
        Ok(points)
    }

    fn check_ambient(&self, n: usize) -> Result<()> {
        if n != self.ambient_dim() {
            return Err(Error::Dimension(format!(
                "embedding has {} ambient coordinates, ambient chart has dimension {n}",
                self.ambient_dim()
            )));
        }
        Ok(())
    }
}

/// `h_ab = g_ij J^i_a J^j_b`, checked nondegenerate at the parameter samples.
pub fn pullback_metric(g: &MetricField, emb: &EmbeddingSpec, s: &Settings) -> Result<MetricField> {
    emb.check_ambient(g.dim())?;
    let cov = g.with_variance(Variance::Covariant)?;
    let pulled = emb.pull_all(cov.comps());
    let (n, m) = (emb.ambient_dim(), emb.dim());
    let j = emb.jacobian();
    let mut h = Vec::with_capacity(m * m);
    for a in 0..m {
        for b in 0..m {
            let mut terms = Vec::new();
            for i in 0..n {
                for k in 0..n {
                    terms.push(pulled[i * n + k].mul(&j[i * m + a]).mul(&j[k * m + b]));
                }
            }
            h.push(Expr::sum(terms));
        }
    }
    let h = MetricField::covariant(m, h)?;
    let points = emb.sample(&[], s)?;
    let det = h.determinant()?;
    let mut tb = TapeBuilder::new();
    let sd = tb.push(&det);
    let tape = tb.finish();
    for p in &points {
        let d = tape.eval(p)?[sd];
        if !d.is_finite() || d.abs() <= crate::sampling::EXCLUSION_EPS {
            return Err(Error::SingularInducedMetric { point: p.clone(), det: d.abs() });
        }
    }
    Ok(h)
}

/// The pair `(h, h̃)` induced on the parameter chart.
pub fn induced_pencil(p: &PencilSpec, emb: &EmbeddingSpec, s: &Settings) -> Result<PencilSpec> {
    let h = pullback_metric(p.g(), emb, s)?;
    let ht = pullback_metric(p.g_tilde(), emb, s)?;
    PencilSpec::new(emb.chart().clone(), h, ht)
}

/// Tangent/normal splitting at one point.
pub(crate) struct Frame {
    pub n: usize,
    pub m: usize,
    pub j: Vec<f64>,
    /// `h̃⁻¹ Jᵀ g̃` at `[a][i]`.
    pub l: Vec<f64>,
    /// Projector onto `TN^⊥` at `[i][k]`.
    pub p: Vec<f64>,
}

impl Frame {
    pub fn new(n: usize, m: usize, j: &[f64], gt_cov: &[f64]) -> Option<Frame> {
        let jm = numeric::matrix(n, m, j);
        let g = numeric::matrix(n, n, gt_cov);
        let jtg = jm.transpose() * &g;
        let ht = &jtg * &jm;
        let l = ht.try_inverse()? * jtg;
        let p = DMatrix::identity(n, n) - &jm * &l;
        Some(Frame {
            n,
            m,
            j: j.to_vec(),
            l: numeric::to_row_major(&l),
            p: numeric::to_row_major(&p),
        })
    }

    pub fn column(&self, a: usize) -> Vec<f64> {
        (0..self.n).map(|i| self.j[i * self.m + a]).collect()
    }

    /// `ᾱ`.
    pub fn extend(&self, alpha: &[f64]) -> Vec<f64> {
        (0..self.n)
            .map(|i| (0..self.m).map(|a| alpha[a] * self.l[a * self.n + i]).sum())
            .collect()
    }

    /// Component of a form in `(TN)⁰`: `ω ↦ ω∘P`.
    pub fn normal_form(&self, w: &[f64]) -> Vec<f64> {
        (0..self.n)
            .map(|k| (0..self.n).map(|i| w[i] * self.p[i * self.n + k]).sum())
            .collect()
    }

    pub fn normal_vector(&self, y: &[f64]) -> Vec<f64> {
        (0..self.n)
            .map(|i| (0..self.n).map(|k| self.p[i * self.n + k] * y[k]).sum())
            .collect()
    }

    pub fn span_residual(&self, v: &[f64]) -> f64 {
        numeric::span_residual(&numeric::matrix(self.n, self.m, &self.j), &DVector::from_column_slice(v))
    }
}

/// The `g̃`-orthogonal projector onto the complement of the column span of
/// `jac` (n×m, row-major), at `[i][k]`; `None` when `Jᵀ g̃ J` is singular.
pub fn normal_projector(n: usize, m: usize, jac: &[f64], gt_cov: &[f64]) -> Option<Vec<f64>> {
    Frame::new(n, m, jac, gt_cov).map(|f| f.p)
}

/// Pulled-back ambient pencil data on a tape.
struct Along {
    n: usize,
    m: usize,
    j: Slot,
    gt_cov: Slot,
    gt_con: Slot,
    g_con: Slot,
    a: Slot,
    k: Slot,
}

impl Along {
    fn new(tb: &mut TapeBuilder, p: &PencilSpec, emb: &EmbeddingSpec) -> Self {
        Along {
            n: emb.ambient_dim(),
            m: emb.dim(),
            j: tb.push_all(emb.jacobian()),
            gt_cov: tb.push_all(&emb.pull_all(&p.geometry_tilde().cov)),
            gt_con: tb.push_all(&emb.pull_all(&p.geometry_tilde().contra)),
            g_con: tb.push_all(&emb.pull_all(&p.geometry().contra)),
            a: tb.push_all(&emb.pull_all(&p.operator_a())),
            k: tb.push_all(&emb.pull_all(&p.contorsion().k)),
        }
    }

    fn frame(&self, v: &[f64]) -> Option<Frame> {
        Frame::new(self.n, self.m, self.j.of(v), self.gt_cov.of(v))
    }

    /// `(∇_X ᾱ − ∇̃_X ᾱ)_j = −X^i K^k_ij ᾱ_k`.
    fn difference(&self, v: &[f64], x: &[f64], abar: &[f64]) -> Vec<f64> {
        let n = self.n;
        let k = self.k.of(v);
        (0..n)
            .map(|j| {
                let mut s = 0.0;
                for i in 0..n {
                    for kk in 0..n {
                        s -= x[i] * k[(kk * n + i) * n + j] * abar[kk];
                    }
                }
                s
            })
            .collect()
    }
}

fn guards(p: &PencilSpec) -> [Expr; 2] {
    [p.geometry().det_contra.clone(), p.geometry_tilde().det_contra.clone()]
}

fn as_sub(name: &str, r: &CheckReport) -> SubVerdict {
    SubVerdict {
        name: name.to_string(),
        verdict: r.verdict,
        residual: r.residual,
        witness: r.witnesses.first().cloned(),
    }
}

const NO_FRAME: &str = "induced metric h~ is singular";

/// `A(TN) ⊂ TN` by least squares on `A J`, with the cross-check that the
/// tangential part of `A` on `TN` is `B = h̃* h`.
pub fn check_distinguished(p: &PencilSpec, emb: &EmbeddingSpec, s: &Settings) -> CheckReport {
    const NAME: &str = "distinguished";
    if let Err(e) = emb.check_ambient(p.dim()) {
        return CheckReport::precondition_failed(NAME, e.to_string());
    }
    let points = match emb.sample(&guards(p), s) {
        Ok(x) => x,
        Err(e) => return CheckReport::precondition_failed(NAME, e.to_string()),
    };
    let (n, m) = (emb.ambient_dim(), emb.dim());
    let mut tb = TapeBuilder::new();
    let al = Along::new(&mut tb, p, emb);
    let g_cov = tb.push_all(&emb.pull_all(&p.geometry().cov));
    let tape = tb.finish();
    let aggs = reduce(&points, s.parallelism, 2, |pt| {
        let v = tape.eval(pt)?;
        let (mut ws, mut wb) = (PointWorst::new(), PointWorst::new());
        let Some(fr) = al.frame(&v) else {
            ws.offer(f64::INFINITY, || NO_FRAME.into());
            wb.offer(f64::INFINITY, || NO_FRAME.into());
            return Ok(vec![ws, wb]);
        };
        let a = al.a.of(&v);
        let aj: Vec<Vec<f64>> = (0..m)
            .map(|c| {
                let col = fr.column(c);
                (0..n).map(|i| (0..n).map(|k| a[i * n + k] * col[k]).sum()).collect()
            })
            .collect();
        for (c, col) in aj.iter().enumerate() {
            ws.offer(fr.span_residual(col), || format!("A(∂u{}) leaves TN", c + 1));
        }
        // B = h̃⁻¹ h against the tangential coefficients L A J
        let jm = numeric::matrix(n, m, &fr.j);
        let h = jm.transpose() * numeric::matrix(n, n, g_cov.of(&v)) * &jm;
        let ht = jm.transpose() * numeric::matrix(n, n, al.gt_cov.of(&v)) * &jm;
        let Some(b) = ht.try_inverse().map(|x| x * h) else {
            wb.offer(f64::INFINITY, || NO_FRAME.into());
            return Ok(vec![ws, wb]);
        };
        for r in 0..m {
            for c in 0..m {
                let t: f64 = (0..n).map(|i| fr.l[r * n + i] * aj[c][i]).sum();
                wb.offer(crate::report::rel(t, b[(r, c)]), || format!("B^{}_{} vs tangential part of A(∂u{})", r + 1, c + 1, c + 1));
            }
        }
        Ok(vec![ws, wb])
    });
    let mut r = CheckReport::new(NAME);
    r.push_sub(aggs[0].sub("a-preserves-tn", s.tol));
    r.push_sub(aggs[1].sub("tangential-part", s.tol));
    r.conjunction(&["a-preserves-tn"]);
    if !aggs[1].verdict(s.tol).is_pass() {
        r.consistent = false;
        r.note("the tangential part of A differs from h~* h");
    }
    r
}

/// `S_X α − S̃_X α ∈ (TN)⁰` at one parameter point, for `X = ∂u_x` and a form
/// `α` on `N` given by its components.
pub fn second_ff_difference(
    p: &PencilSpec,
    emb: &EmbeddingSpec,
    s: &Settings,
    point: &[f64],
    x: usize,
    alpha: &[f64],
) -> Result<Vec<f64>> {
    emb.check_ambient(p.dim())?;
    let (n, m) = (emb.ambient_dim(), emb.dim());
    if point.len() != m || alpha.len() != m || x >= m {
        return Err(Error::Dimension(format!("expected a point and form of dimension {m} and x < {m}")));
    }
    let mut tb = TapeBuilder::new();
    let al = Along::new(&mut tb, p, emb);
    let tape = tb.finish();
    let v = tape.eval(point)?;
    let fr = al.frame(&v).ok_or_else(|| Error::SingularInducedMetric {
        point: point.to_vec(),
        det: 0.0,
    })?;
    let a = al.a.of(&v);
    for c in 0..m {
        let col = fr.column(c);
        let ac: Vec<f64> = (0..n).map(|i| (0..n).map(|k| a[i * n + k] * col[k]).sum()).collect();
        let r = fr.span_residual(&ac);
        if r > s.tol {
            return Err(Error::NotDistinguished { point: point.to_vec(), residual: r });
        }
    }
    let d = al.difference(&v, &fr.column(x), &fr.extend(alpha));
    Ok(fr.normal_form(&d))
}

fn require(name: &str, pre: CheckReport) -> Option<CheckReport> {
    if pre.verdict.is_pass() {
        return None;
    }
    let mut r = CheckReport::precondition_failed(
        name,
        format!("{} is {} (residual {:e})", pre.check, pre.verdict.as_str(), pre.residual),
    );
    r.residual = pre.residual;
    r.witnesses = pre.witnesses;
    Some(r)
}

/// Compatibility of the induced pair, decided through the second fundamental
/// forms and directly on `(h, h̃)`; the two verdicts must agree. Also checks
/// that the induced `∘` is the tangential part of the ambient one.
pub fn check_induced_compatibility(p: &PencilSpec, emb: &EmbeddingSpec, s: &Settings) -> CheckReport {
    const NAME: &str = "induced-compatibility";
    if let Err(e) = emb.check_ambient(p.dim()) {
        return CheckReport::precondition_failed(NAME, e.to_string());
    }
    if let Some(r) = require(NAME, check_compatible(p, s)) {
        return r;
    }
    if let Some(r) = require(NAME, check_distinguished(p, emb, s)) {
        return r;
    }
    let q = match induced_pencil(p, emb, s) {
        Ok(q) => q,
        Err(e) => return CheckReport::precondition_failed(NAME, e.to_string()),
    };
    let points = match emb.sample(&guards(p), s) {
        Ok(x) => x,
        Err(e) => return CheckReport::precondition_failed(NAME, e.to_string()),
    };
    let (n, m) = (emb.ambient_dim(), emb.dim());
    let circ_n = CircProduct::new(&q);
    let mut tb = TapeBuilder::new();
    let al = Along::new(&mut tb, p, emb);
    let sc = tb.push_all(circ_n.structure());
    let tape = tb.finish();
    let aggs = reduce(&points, s.parallelism, 2, |pt| {
        let v = tape.eval(pt)?;
        let (mut we, mut wc) = (PointWorst::new(), PointWorst::new());
        let Some(fr) = al.frame(&v) else {
            we.offer(f64::INFINITY, || NO_FRAME.into());
            wc.offer(f64::INFINITY, || NO_FRAME.into());
            return Ok(vec![we, wc]);
        };
        let gt_con = al.gt_con.of(&v);
        let unit = |a: usize| -> Vec<f64> { (0..m).map(|b| if a == b { 1.0 } else { 0.0 }).collect() };
        let bars: Vec<Vec<f64>> = (0..m).map(|a| fr.extend(&unit(a))).collect();
        // S̃_X α − S_X α for X = ∂u_x, α = du_a, at [x][a]
        let mut delta = Vec::with_capacity(m * m);
        for x in 0..m {
            let col = fr.column(x);
            for bar in &bars {
                let d = al.difference(&v, &col, bar);
                delta.push(fr.normal_form(&d).iter().map(|t| -t).collect::<Vec<f64>>());
            }
        }
        let pair = |u: &[f64], w: &[f64]| -> Terms {
            let mut t = Terms::new();
            for j in 0..n {
                for l in 0..n {
                    t.push(gt_con[j * n + l] * u[j] * w[l]);
                }
            }
            t
        };
        for x in 0..m {
            for y in (x + 1)..m {
                for a in 0..m {
                    for b in 0..m {
                        let lhs = pair(&delta[x * m + a], &delta[y * m + b]);
                        let rhs = pair(&delta[y * m + a], &delta[x * m + b]);
                        let mut t = Terms::new();
                        t.push_scaled(lhs.value(), lhs.scale());
                        t.push_scaled(-rhs.value(), rhs.scale());
                        we.offer_terms(&t, || {
                            format!("X = ∂u{}, Y = ∂u{}, α = du{}, β = du{}", x + 1, y + 1, a + 1, b + 1)
                        });
                    }
                }
            }
        }
        // α ∘_N β against the restriction of ᾱ ∘ β̄
        let g_con = al.g_con.of(&v);
        let k = al.k.of(&v);
        let cn = sc.of(&v);
        for a in 0..m {
            for b in 0..m {
                let (ab, bb) = (&bars[a], &bars[b]);
                let mut amb = vec![Terms::new(); n];
                for (j, t) in amb.iter_mut().enumerate() {
                    for pp in 0..n {
                        for qq in 0..n {
                            for i in 0..n {
                                t.push(-ab[pp] * bb[qq] * g_con[pp * n + i] * k[(qq * n + i) * n + j]);
                            }
                        }
                    }
                }
                for c in 0..m {
                    let mut t = Terms::new();
                    for (i, ti) in amb.iter().enumerate() {
                        t.push_scaled(ti.value() * fr.j[i * m + c], ti.scale() * fr.j[i * m + c]);
                    }
                    t.push(-cn[(a * m + b) * m + c]);
                    wc.offer_terms(&t, || format!("(du{} ∘_N du{})_{} vs tangential part of the ambient product", a + 1, b + 1, c + 1));
                }
            }
        }
        Ok(vec![we, wc])
    });
    let mut r = CheckReport::new(NAME);
    r.push_sub(aggs[0].sub("second-fundamental-forms", s.tol));
    r.push_sub(as_sub("induced-pencil", &check_compatible(&q, s)));
    r.push_sub(aggs[1].sub("circ-restriction", s.tol));
    r.equivalence(&["second-fundamental-forms", "induced-pencil"]);
    if !aggs[1].verdict(s.tol).is_pass() {
        r.consistent = false;
        r.verdict = Verdict::Fail;
        r.note("the induced product is not the tangential part of the ambient one");
    }
    r
}

/// Closure of `TN` under the multiplication and under `E·`, the projector
/// identity `X·P(Y) = P(X·Y)`, and compatibility of the pair induced by the
/// pencil of `f`; all four must hold.
pub fn check_fman_submanifold(f: &FManSpec, emb: &EmbeddingSpec, s: &Settings) -> CheckReport {
    const NAME: &str = "fman-submanifold";
    if let Err(e) = emb.check_ambient(f.dim()) {
        return CheckReport::precondition_failed(NAME, e.to_string());
    }
    if let Some(r) = require(NAME, check_weak_f_condition(f, s)) {
        return r;
    }
    let aggs = match closure_aggregates(f, emb, s) {
        Ok(a) => a,
        Err(e) => return CheckReport::precondition_failed(NAME, e.to_string()),
    };
    let induced = match build_pencil_from_fman(f, s) {
        Ok(p) => check_induced_compatibility(&p, emb, s),
        Err(e) => CheckReport::precondition_failed("induced-compatibility", e.to_string()),
    };
    let mut r = CheckReport::new(NAME);
    r.push_sub(aggs[0].sub("closure", s.tol));
    r.push_sub(aggs[1].sub("euler-closure", s.tol));
    r.push_sub(aggs[2].sub("projector-identity", s.tol));
    r.push_sub(as_sub("induced-compatibility", &induced));
    r.conjunction(&["closure", "euler-closure", "projector-identity", "induced-compatibility"]);
    if !induced.consistent {
        r.consistent = false;
    }
    r
}

const HYPOTHESES: [&str; 3] = ["X·Y ∈ TN", "E·TN ⊂ TN", "X·P(Y) = P(X·Y)"];

fn closure_aggregates(f: &FManSpec, emb: &EmbeddingSpec, s: &Settings) -> Result<Vec<crate::report::Aggregate>> {
    let points = emb.sample(std::slice::from_ref(&f.geometry_tilde().det_contra), s)?;
    let (n, m) = (emb.ambient_dim(), emb.dim());
    let mut tb = TapeBuilder::new();
    let sj = tb.push_all(emb.jacobian());
    let sc = tb.push_all(&emb.pull_all(f.structure()));
    let se = tb.push_all(&emb.pull_all(&f.euler().0));
    let sg = tb.push_all(&emb.pull_all(&f.geometry_tilde().cov));
    let tape = tb.finish();
    Ok(reduce(&points, s.parallelism, 3, |pt| {
        let v = tape.eval(pt)?;
        let mut ws = vec![PointWorst::new(), PointWorst::new(), PointWorst::new()];
        let Some(fr) = Frame::new(n, m, sj.of(&v), sg.of(&v)) else {
            for w in &mut ws {
                w.offer(f64::INFINITY, || NO_FRAME.into());
            }
            return Ok(ws);
        };
        let c = sc.of(&v);
        let mul = |x: &[f64], y: &[f64]| -> Vec<f64> {
            (0..n)
                .map(|k| {
                    let mut t = 0.0;
                    for i in 0..n {
                        for j in 0..n {
                            t += x[i] * y[j] * c[(k * n + i) * n + j];
                        }
                    }
                    t
                })
                .collect()
        };
        for a in 0..m {
            let xa = fr.column(a);
            for b in a..m {
                let prod = mul(&xa, &fr.column(b));
                ws[0].offer(fr.span_residual(&prod), || format!("{}: ∂u{}·∂u{}", HYPOTHESES[0], a + 1, b + 1));
            }
            let ex = mul(se.of(&v), &xa);
            ws[1].offer(fr.span_residual(&ex), || format!("{}: E·∂u{}", HYPOTHESES[1], a + 1));
            for i in 0..n {
                let mut y = vec![0.0; n];
                y[i] = 1.0;
                let lhs = mul(&xa, &fr.normal_vector(&y));
                let rhs = fr.normal_vector(&mul(&xa, &y));
                for k in 0..n {
                    ws[2].offer(crate::report::rel(lhs[k], rhs[k]), || {
                        format!("{}: X = ∂u{}, Y = ∂x{}, component {}", HYPOTHESES[2], a + 1, i + 1, k + 1)
                    });
                }
            }
        }
        Ok(ws)
    }))
}

/// The pair induced on `N` by the pencil of `f`, after checking the closure
/// hypotheses; `ClosureFailed` names the first one violated.
pub fn induced_fman_pencil(f: &FManSpec, emb: &EmbeddingSpec, s: &Settings) -> Result<PencilSpec> {
    emb.check_ambient(f.dim())?;
    let aggs = closure_aggregates(f, emb, s)?;
    for (h, agg) in HYPOTHESES.iter().zip(&aggs) {
        if !agg.verdict(s.tol).is_pass() {
            return Err(Error::ClosureFailed {
                hypothesis: h.to_string(),
                point: agg.witness.as_ref().map(|w| w.point.clone()).unwrap_or_default(),
                residual: agg.value,
            });
        }
    }
    induced_pencil(&build_pencil_from_fman(f, s)?, emb, s)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::VectorFieldExpr;

    fn s() -> Settings {
        Settings::default().with_points(20)
    }

    fn box3() -> Chart {
        Chart::boxed("x", vec![(1.0, 2.0); 3]).unwrap()
    }

    /// `g* = I`, `g̃* = diag(x1, x2, x3)`.
    pub(crate) fn semisimple3() -> PencilSpec {
        let c = box3();
        let g = MetricField::diagonal(vec![Expr::one(); 3], Variance::Contravariant);
        let gt = MetricField::diagonal((0..3).map(Expr::var).collect(), Variance::Contravariant);
        PencilSpec::new(c, g, gt).unwrap()
    }

    fn plane(c3: &str) -> EmbeddingSpec {
        let chart = Chart::boxed("u", vec![(1.0, 2.0); 2]).unwrap();
        EmbeddingSpec::from_strings(chart, &["u1", "u2", c3]).unwrap()
    }

    /// Idempotent algebra on flat space with `E = Σ x_i ∂_i`.
    pub(crate) fn idempotent3() -> FManSpec {
        let chart = box3();
        let n = 3;
        let mut c = vec![Expr::zero(); n * n * n];
        for i in 0..n {
            c[(i * n + i) * n + i] = Expr::one();
        }
        let eta = MetricField::diagonal(vec![Expr::one(); 3], Variance::Covariant);
        let e = VectorFieldExpr((0..n).map(Expr::var).collect());
        FManSpec::new(chart, c, eta, e, Some(VectorFieldExpr(vec![Expr::one(); 3])), 1.0, 2.0).unwrap()
    }

    #[test]
    fn circle_has_unit_metric() {
        let chart = Chart::new(vec!["u".into()], vec![(0.0, 6.0)]).unwrap();
        let emb = EmbeddingSpec::from_strings(chart, &["cos(u)", "sin(u)"]).unwrap();
        let g = MetricField::diagonal(vec![Expr::one(); 2], Variance::Covariant);
        let h = pullback_metric(&g, &emb, &s()).unwrap();
        for u in [0.1, 1.7, 4.0] {
            assert!((h.get(0, 0).evaluate(&[u]).unwrap() - 1.0).abs() < 1e-14);
        }
    }

    #[test]
    fn graph_metric() {
        let chart = Chart::boxed("u", vec![(-1.0, 1.0); 2]).unwrap();
        let emb = EmbeddingSpec::from_strings(chart, &["u1", "u2", "u1*u2"]).unwrap();
        let g = MetricField::diagonal(vec![Expr::one(); 3], Variance::Covariant);
        let h = pullback_metric(&g, &emb, &s()).unwrap();
        let (u1, u2) = (0.3, -0.7);
        let grad = [u2, u1];
        for a in 0..2 {
            for b in 0..2 {
                let want = if a == b { 1.0 } else { 0.0 } + grad[a] * grad[b];
                assert!((h.get(a, b).evaluate(&[u1, u2]).unwrap() - want).abs() < 1e-14);
            }
        }
    }

    #[test]
    fn rank_loss_is_reported() {
        let chart = Chart::boxed("u", vec![(-1.0, 1.0); 2]).unwrap();
        let emb = EmbeddingSpec::from_strings(chart, &["u1", "u1", "0"]).unwrap();
        assert!(matches!(emb.sample(&[], &s()), Err(Error::RankDeficient { .. })));
    }

    #[test]
    fn projector_is_idempotent_and_self_adjoint() {
        let j = [1.0, 0.0, 0.5, 1.0, 0.2, -0.3];
        let g = [2.0, 0.1, 0.0, 0.1, 1.5, 0.2, 0.0, 0.2, 1.0];
        let p = numeric::matrix(3, 3, &normal_projector(3, 2, &j, &g).unwrap());
        let gm = numeric::matrix(3, 3, &g);
        assert!((&p * &p - &p).norm() < 1e-12);
        assert!((gm.clone() * &p - p.transpose() * gm).norm() < 1e-12);
    }

    #[test]
    fn coordinate_plane_is_distinguished_tilted_line_is_not() {
        let p = semisimple3();
        assert_eq!(check_distinguished(&p, &plane("1.5"), &s()).verdict, Verdict::Pass);
        let chart = Chart::new(vec!["u".into()], vec![(1.0, 2.0)]).unwrap();
        let line = EmbeddingSpec::from_strings(chart, &["u", "1 + u/2", "1.5"]).unwrap();
        let r = check_distinguished(&p, &line, &s());
        assert_eq!(r.verdict, Verdict::Fail);
        assert!(!r.witnesses.is_empty());
        assert!(r.consistent);
    }

    #[test]
    fn second_ff_difference_on_coordinate_plane() {
        // only the du3 component survives; it is −K^a_{x3} for α = du_a
        let p = semisimple3();
        let emb = plane("1.5");
        let k = p.contorsion();
        let pt = [1.2, 1.7];
        let amb = [1.2, 1.7, 1.5];
        for x in 0..2 {
            for a in 0..2 {
                let mut alpha = [0.0; 2];
                alpha[a] = 1.0;
                let d = second_ff_difference(&p, &emb, &s(), &pt, x, &alpha).unwrap();
                assert!(d[0].abs() < 1e-14 && d[1].abs() < 1e-14);
                let want = -k.get(a, x, 2).evaluate(&amb).unwrap();
                assert!((d[2] - want).abs() < 1e-12, "{x} {a}: {} vs {want}", d[2]);
            }
        }
    }

    #[test]
    fn induced_compatibility_agrees() {
        let p = semisimple3();
        for emb in [plane("1.5"), EmbeddingSpec::identity(box3())] {
            let r = check_induced_compatibility(&p, &emb, &s());
            assert_eq!(r.verdict, Verdict::Pass, "{r:?}");
            assert!(r.consistent);
        }
    }

    #[test]
    fn not_distinguished_is_a_precondition() {
        let chart = Chart::new(vec!["u".into()], vec![(1.0, 2.0)]).unwrap();
        let line = EmbeddingSpec::from_strings(chart, &["u", "1 + u/2", "1.5"]).unwrap();
        let r = check_induced_compatibility(&semisimple3(), &line, &s());
        assert_eq!(r.verdict, Verdict::PreconditionFailed);
        assert!(matches!(
            second_ff_difference(&semisimple3(), &line, &s(), &[1.3], 0, &[1.0]),
            Err(Error::NotDistinguished { .. })
        ));
    }

    #[test]
    fn fman_plane_passes_tilted_plane_fails_euler_closure() {
        let f = idempotent3();
        let r = check_fman_submanifold(&f, &plane("1.5"), &s());
        assert_eq!(r.verdict, Verdict::Pass, "{r:?}");
        let tilted = plane("u1 + 0.5");
        let r = check_fman_submanifold(&f, &tilted, &s());
        assert_eq!(r.sub("closure").unwrap().verdict, Verdict::Pass);
        assert_eq!(r.sub("euler-closure").unwrap().verdict, Verdict::Fail);
        assert_eq!(r.verdict, Verdict::Fail);
        assert!(r.witnesses.iter().any(|w| w.detail.contains("E·")));
        match induced_fman_pencil(&f, &tilted, &s()) {
            Err(Error::ClosureFailed { hypothesis, .. }) => assert!(hypothesis.contains("E·")),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn identity_embedding_of_fman() {
        let f = idempotent3();
        let r = check_fman_submanifold(&f, &EmbeddingSpec::identity(box3()), &s());
        assert_eq!(r.verdict, Verdict::Pass, "{r:?}");
    }
}

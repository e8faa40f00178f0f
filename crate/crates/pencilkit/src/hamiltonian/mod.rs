//! Hydrodynamic-type Poisson brackets from metrics.
//!
//! The bracket kernel is `g^{ij} d/dX + b^{ij}_k u^k_X` with
//! `b^{ij}_k = −g^{is} Γ^j_sk`. Only the finite conditions on `(g, b)` are
//! checked: symmetry of `g`, that `b` comes from the Levi-Civita connection,
//! and flatness. The Jacobi identity on loop space is not re-derived.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::expr::{Expr, TapeBuilder};
use crate::geometry::{numeric, Chart, MetricField, MetricGeometry};
use crate::pencil::{check_compatible, check_flat_pencil, push_geo, PencilSpec};
use crate::report::{CheckReport, PointWorst, Terms, Witness};
use crate::sampling::{reduce, sample_points, Settings};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum OperatorKind {
    /// Flat metric: a local bracket of Dubrovin/Novikov type.
    Local,
    /// Curved metric: a local bracket does not exist and a nonlocal tail is needed.
    NonlocalRequired,
}

#[derive(Clone, Debug)]
pub struct DNOperatorData {
    n: usize,
    g: Vec<Expr>,
    b: Vec<Expr>,
    /// Sub-verdicts `symmetric`, `metric-derivative`, `torsion-free`, `flat`,
    /// plus the reconstruction of `Γ` from `b`.
    pub report: CheckReport,
    pub kind: OperatorKind,
    /// Largest `|R^l_kij|` over the samples.
    pub curvature_norm: f64,
    pub curvature_witness: Option<Witness>,
}

impl DNOperatorData {
    pub fn dim(&self) -> usize {
        self.n
    }

    /// `g^{ij}` at `[i][j]`.
    pub fn g(&self) -> &[Expr] {
        &self.g
    }

    /// `b^{ij}_k` at `[i][j][k]`.
    pub fn b(&self) -> &[Expr] {
        &self.b
    }

    pub fn b_at(&self, i: usize, j: usize, k: usize) -> &Expr {
        &self.b[(i * self.n + j) * self.n + k]
    }
}

/// Operator data of `g`, decided at the samples of `chart`.
pub fn assemble_dn_operator(chart: &Chart, g: &MetricField, s: &Settings) -> Result<DNOperatorData> {
    let n = chart.dim();
    if g.dim() != n {
        return Err(Error::Dimension(format!("metric has dimension {}, chart {n}", g.dim())));
    }
    let geo = MetricGeometry::new(g)?;
    let points = sample_points(chart, &[], s)?;
    let contra = MetricField::contravariant(n, geo.contra.clone())?;
    contra.check_nonsingular(&points)?;
    Ok(assemble(&geo, &points, s))
}

fn assemble(geo: &MetricGeometry, points: &[Vec<f64>], s: &Settings) -> DNOperatorData {
    const NAME: &str = "dn-operator";
    let n = geo.n;
    let gam = &geo.conn.gamma;
    let mut b = Vec::with_capacity(n * n * n);
    for i in 0..n {
        for j in 0..n {
            for k in 0..n {
                b.push(Expr::sum((0..n).map(|sx| geo.contra[i * n + sx].neg().mul(&gam[(j * n + sx) * n + k]))));
            }
        }
    }
    let dg: Vec<Expr> = crate::geometry::gradient_table(&geo.contra, n).into_iter().flatten().collect();
    let mut tb = TapeBuilder::new();
    let slots = push_geo(&mut tb, geo, true);
    let sb = tb.push_all(&b);
    let sdg = tb.push_all(&dg);
    let scov = tb.push_all(&geo.cov);
    let tape = tb.finish();
    let q3 = |i: usize, j: usize, k: usize| (i * n + j) * n + k;
    let aggs = reduce(points, s.parallelism, 6, |pt| {
        let v = tape.eval(pt)?;
        let g = slots.contra.of(&v);
        let bv = sb.of(&v);
        let d = sdg.of(&v);
        let cov = scov.of(&v);
        let gm = slots.gamma.of(&v);
        let mut ws = vec![PointWorst::new(); 6];
        for i in 0..n {
            for j in (i + 1)..n {
                ws[0].offer(crate::report::rel(g[i * n + j], g[j * n + i]), || format!("g^{}{} vs g^{}{}", i + 1, j + 1, j + 1, i + 1));
            }
        }
        for i in 0..n {
            for j in 0..n {
                for k in 0..n {
                    let mut t = Terms::new();
                    t.push(d[k * n * n + i * n + j]);
                    t.push(-bv[q3(i, j, k)]);
                    t.push(-bv[q3(j, i, k)]);
                    ws[1].offer_terms(&t, || format!("∂{} g^{}{} vs b^{}{}_{} + b^{}{}_{}", k + 1, i + 1, j + 1, i + 1, j + 1, k + 1, j + 1, i + 1, k + 1));
                    let mut t = Terms::new();
                    for sx in 0..n {
                        t.push(g[i * n + sx] * bv[q3(j, k, sx)]);
                        t.push(-g[j * n + sx] * bv[q3(i, k, sx)]);
                    }
                    ws[2].offer_terms(&t, || format!("g^{}s b^{}{}_s vs g^{}s b^{}{}_s", i + 1, j + 1, k + 1, j + 1, i + 1, k + 1));
                    // −g_is b^{sj}_k = Γ^j_ik
                    let mut t = Terms::new();
                    for sx in 0..n {
                        t.push(-cov[i * n + sx] * bv[q3(sx, j, k)]);
                    }
                    t.push(-gm[q3(j, i, k)]);
                    ws[3].offer_terms(&t, || format!("−g_{}s b^s{}_{} vs Γ^{}_{}{}", i + 1, j + 1, k + 1, j + 1, i + 1, k + 1));
                }
            }
        }
        let (r, rs) = numeric::riemann_at(n, gm, slots.dgamma.as_ref().expect("derivatives").of(&v));
        for (q, (x, sc)) in r.iter().zip(&rs).enumerate() {
            let detail = || {
                let (l, k, i, j) = (q / (n * n * n), (q / (n * n)) % n, (q / n) % n, q % n);
                format!("R^{}_{}{}{}", l + 1, k + 1, i + 1, j + 1)
            };
            ws[4].offer(crate::report::normalized(*x, *sc), detail);
            ws[5].offer(x.abs(), detail);
        }
        Ok(ws)
    });
    let mut report = CheckReport::new(NAME);
    report.push_sub(aggs[0].sub("symmetric", s.tol));
    report.push_sub(aggs[1].sub("metric-derivative", s.tol));
    report.push_sub(aggs[2].sub("torsion-free", s.tol));
    report.push_sub(aggs[3].sub("christoffel-from-b", s.tol));
    report.push_sub(aggs[4].sub("flat", s.tol));
    report.conjunction(&["symmetric", "metric-derivative", "torsion-free", "christoffel-from-b", "flat"]);
    let kind = if aggs[4].verdict(s.tol).is_pass() {
        OperatorKind::Local
    } else {
        OperatorKind::NonlocalRequired
    };
    match kind {
        OperatorKind::Local => report.note("flat: local bracket of Dubrovin/Novikov type"),
        OperatorKind::NonlocalRequired => report.note(format!(
            "curved (max |R| = {:e}): no local bracket; a nonlocal tail is required",
            aggs[5].value
        )),
    }
    report.note("only the finite conditions on (g, b) are checked, not the Jacobi identity");
    DNOperatorData {
        n,
        g: geo.contra.clone(),
        b,
        report,
        kind,
        curvature_norm: aggs[5].value,
        curvature_witness: aggs[5].witness.clone(),
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum PencilKind {
    LocalBiHamiltonian,
    NonlocalCompatible,
    NonlocalIncompatible,
}

impl PencilKind {
    pub fn label(self) -> &'static str {
        match self {
            PencilKind::LocalBiHamiltonian => "local bi-Hamiltonian (Dubrovin/Novikov type)",
            PencilKind::NonlocalCompatible => "nonlocal bi-Hamiltonian (compatibility verified)",
            PencilKind::NonlocalIncompatible => "nonlocal bi-Hamiltonian (compatibility failed)",
        }
    }
}

#[derive(Clone, Debug)]
pub struct PencilOperators {
    pub g: DNOperatorData,
    pub g_tilde: DNOperatorData,
    pub flat_pencil: CheckReport,
    pub compatible: CheckReport,
    pub kind: PencilKind,
}

impl PencilOperators {
    /// One report: the two operator verdicts and the pencil verdicts as
    /// sub-verdicts, passing when the pair is at least compatible.
    pub fn report(&self) -> CheckReport {
        let mut r = CheckReport::new("bi-hamiltonian");
        for (name, x) in [
            ("operator-g", &self.g.report),
            ("operator-g-tilde", &self.g_tilde.report),
            ("flat-pencil", &self.flat_pencil),
            ("compatible", &self.compatible),
        ] {
            r.push_sub(crate::report::SubVerdict {
                name: name.into(),
                verdict: x.verdict,
                residual: x.residual,
                witness: x.witnesses.first().cloned(),
            });
        }
        r.conjunction(&["compatible"]);
        r.lambdas = self.flat_pencil.lambdas.clone();
        r.note(self.kind.label());
        r
    }
}

/// Operators of both metrics and the bi-Hamiltonian label of the pencil.
pub fn assemble_pencil_operators(p: &PencilSpec, s: &Settings) -> Result<PencilOperators> {
    let points = p.sample(s)?;
    let (lambdas, notes) = p.usable_lambdas(&points, s)?;
    if lambdas.len() < 3 && lambdas.len() < s.lambdas.len() {
        return Err(Error::SingularPencil(notes.join("; ")));
    }
    let g = assemble(p.geometry(), &points, s);
    let g_tilde = assemble(p.geometry_tilde(), &points, s);
    let flat_pencil = check_flat_pencil(p, s);
    let compatible = check_compatible(p, s);
    let kind = if flat_pencil.verdict.is_pass() {
        PencilKind::LocalBiHamiltonian
    } else if compatible.verdict.is_pass() {
        PencilKind::NonlocalCompatible
    } else {
        PencilKind::NonlocalIncompatible
    };
    Ok(PencilOperators {
        g,
        g_tilde,
        flat_pencil,
        compatible,
        kind,
    })
}

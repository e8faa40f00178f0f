//! Multiplications on the tangent bundle with an invariant metric and an Euler
//! field, the quasi-homogeneous pencils they correspond to, and the curvature
//! criteria relating the two.
//!
//! Structure functions are stored as `c^k_ij` at `[k][i][j]`, so
//! `∂_i · ∂_j = c^k_ij ∂_k`. The `T` operator is a matrix `M^a_j` acting on
//! 1-forms by `T(u)_j = u_a M^a_j`.

mod checks;
mod correspond;
mod curvature;

use crate::error::{Error, Result};
use crate::expr::{Expr, Slot, TapeBuilder};
use crate::geometry::numeric;
use crate::geometry::{
    covariant_derivative_vector, gradient_table, Chart, MetricField, MetricGeometry, OneFormExpr, Variance,
    VectorFieldExpr,
};
use crate::pencil::PencilSpec;
use crate::report::Terms;
use crate::sampling::{sample_points, Settings};

pub use checks::{
    check_algebra, check_euler_scaling, check_f_condition, check_invariant_metric, check_nijenhuis_euler,
    check_weak_f_condition,
};
pub use correspond::{
    build_fman_from_pencil, build_pencil_from_fman, check_pencil_degree, check_qh, check_round_trip, qh_pencil_from_fman,
    check_weak_qh,
};
pub use curvature::{check_curvature_relation, check_ec_identity};

/// `|det T|` must exceed this at every sample for `T` to count as an automorphism.
pub const REGULARITY_EPS: f64 = 1e-9;

#[derive(Clone, Debug)]
pub struct FManSpec {
    chart: Chart,
    c: Vec<Expr>,
    gt: MetricField,
    geo_t: std::sync::Arc<MetricGeometry>,
    euler: VectorFieldExpr,
    unity: Option<VectorFieldExpr>,
    k: f64,
    big_d: f64,
}

impl FManSpec {
    /// `c` holds `c^k_ij` at `[k][i][j]`; `gt` may be given in either variance.
    pub fn new(
        chart: Chart,
        c: Vec<Expr>,
        gt: MetricField,
        euler: VectorFieldExpr,
        unity: Option<VectorFieldExpr>,
        k: f64,
        big_d: f64,
    ) -> Result<Self> {
        let n = chart.dim();
        if c.len() != n * n * n {
            return Err(Error::Dimension(format!("expected {} structure functions, got {}", n * n * n, c.len())));
        }
        if gt.dim() != n || euler.0.len() != n || unity.as_ref().is_some_and(|e| e.0.len() != n) {
            return Err(Error::Dimension(format!("metric or vector fields do not match dimension {n}")));
        }
        let gt = gt.with_variance(Variance::Covariant)?;
        let geo_t = std::sync::Arc::new(MetricGeometry::new(&gt)?);
        Ok(FManSpec {
            chart,
            c,
            gt,
            geo_t,
            euler,
            unity,
            k,
            big_d,
        })
    }

    /// Structure functions from a potential: `c_ijk = ∂_i∂_j∂_k F`, raised
    /// with `η`.
    pub fn from_potential(
        chart: Chart,
        potential: &Expr,
        eta: MetricField,
        euler: VectorFieldExpr,
        unity: Option<VectorFieldExpr>,
        k: f64,
        big_d: f64,
    ) -> Result<Self> {
        let n = chart.dim();
        let eta_inv = eta.with_variance(Variance::Contravariant)?;
        let mut third = vec![Expr::zero(); n * n * n];
        for i in 0..n {
            let fi = potential.differentiate(i);
            for j in i..n {
                let fij = fi.differentiate(j);
                for l in j..n {
                    let f = fij.differentiate(l);
                    for (a, b, cc) in [(i, j, l), (i, l, j), (j, i, l), (j, l, i), (l, i, j), (l, j, i)] {
                        third[(a * n + b) * n + cc] = f.clone();
                    }
                }
            }
        }
        let mut c = Vec::with_capacity(n * n * n);
        for kk in 0..n {
            for i in 0..n {
                for j in 0..n {
                    c.push(Expr::sum((0..n).map(|l| eta_inv.get(kk, l).mul(&third[(i * n + j) * n + l]))));
                }
            }
        }
        FManSpec::new(chart, c, eta, euler, unity, k, big_d)
    }

    /// Same data with different structure functions.
    pub fn with_structure(&self, c: Vec<Expr>) -> Result<Self> {
        FManSpec::new(
            self.chart.clone(),
            c,
            self.gt.clone(),
            self.euler.clone(),
            self.unity.clone(),
            self.k,
            self.big_d,
        )
    }

    pub fn with_euler(&self, euler: VectorFieldExpr) -> Result<Self> {
        FManSpec::new(
            self.chart.clone(),
            self.c.clone(),
            self.gt.clone(),
            euler,
            self.unity.clone(),
            self.k,
            self.big_d,
        )
    }

    pub fn chart(&self) -> &Chart {
        &self.chart
    }

    pub fn dim(&self) -> usize {
        self.chart.dim()
    }

    pub fn structure(&self) -> &[Expr] {
        &self.c
    }

    pub fn get(&self, k: usize, i: usize, j: usize) -> &Expr {
        let n = self.dim();
        &self.c[(k * n + i) * n + j]
    }

    /// `g̃`, covariant.
    pub fn g_tilde(&self) -> &MetricField {
        &self.gt
    }

    pub fn geometry_tilde(&self) -> &MetricGeometry {
        &self.geo_t
    }

    pub fn euler(&self) -> &VectorFieldExpr {
        &self.euler
    }

    pub fn unity(&self) -> Option<&VectorFieldExpr> {
        self.unity.as_ref()
    }

    /// `L_E(·) = k·`.
    pub fn k(&self) -> f64 {
        self.k
    }

    /// `L_E g̃ = D g̃`.
    pub fn big_d(&self) -> f64 {
        self.big_d
    }

    /// `(E·)^k_j = E^i c^k_ij`.
    pub fn euler_multiplication(&self) -> Vec<Expr> {
        let n = self.dim();
        let mut out = Vec::with_capacity(n * n);
        for k in 0..n {
            for j in 0..n {
                out.push(Expr::sum((0..n).map(|i| self.euler.0[i].mul(self.get(k, i, j)))));
            }
        }
        out
    }

    /// Product of two vector fields.
    pub fn multiply(&self, x: &VectorFieldExpr, y: &VectorFieldExpr) -> VectorFieldExpr {
        let n = self.dim();
        VectorFieldExpr(
            (0..n)
                .map(|k| {
                    Expr::sum((0..n).flat_map(|i| (0..n).map(move |j| x.0[i].mul(&y.0[j]).mul(self.get(k, i, j)))))
                })
                .collect(),
        )
    }

    pub fn sample(&self, s: &Settings) -> Result<Vec<Vec<f64>>> {
        sample_points(&self.chart, std::slice::from_ref(&self.geo_t.det_contra), s)
    }
}

/// A pencil together with its Euler data.
#[derive(Debug)]
pub struct QHPencilSpec {
    pub pencil: PencilSpec,
    pub euler: VectorFieldExpr,
    pub potential: Option<Expr>,
    pub unity: Option<VectorFieldExpr>,
    pub d: f64,
    pub big_d: f64,
}

/// `T(u)_j = u_a M^a_j`.
#[derive(Clone, Debug)]
pub struct TOperator {
    n: usize,
    m: Vec<Expr>,
}

impl TOperator {
    /// `T(u) = ((D+k)/2) u − g̃(∇̃_{g̃* u} E)`.
    pub fn from_fman(f: &FManSpec) -> Self {
        let n = f.dim();
        let geo = f.geometry_tilde();
        let ne = covariant_derivative_vector(&geo.conn, &f.euler); // [i][l] = ∇̃_i E^l
        let half = 0.5 * (f.big_d + f.k);
        let mut m = Vec::with_capacity(n * n);
        for a in 0..n {
            for j in 0..n {
                let corr = Expr::sum((0..n).flat_map(|i| {
                    let ne = &ne;
                    (0..n).map(move |l| geo.contra[a * n + i].mul(&ne[i * n + l]).mul(&geo.cov[l * n + j]))
                }));
                let diag = if a == j { Expr::constant(half) } else { Expr::zero() };
                m.push(diag.sub(&corr));
            }
        }
        TOperator { n, m }
    }

    /// `T(u) = ((d−1)/2) u + u(∇̃E)`.
    pub fn from_euler(geo_t: &MetricGeometry, euler: &VectorFieldExpr, d: f64) -> Self {
        let n = geo_t.n;
        let ne = covariant_derivative_vector(&geo_t.conn, euler);
        let half = 0.5 * (d - 1.0);
        let mut m = Vec::with_capacity(n * n);
        for a in 0..n {
            for j in 0..n {
                let diag = if a == j { Expr::constant(half) } else { Expr::zero() };
                m.push(diag.add(&ne[j * n + a]));
            }
        }
        TOperator { n, m }
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    /// `M^a_j` at `[a][j]`.
    pub fn matrix(&self) -> &[Expr] {
        &self.m
    }

    pub fn apply(&self, u: &OneFormExpr) -> OneFormExpr {
        let n = self.n;
        OneFormExpr(
            (0..n)
                .map(|j| Expr::sum((0..n).map(|a| u.0[a].mul(&self.m[a * n + j]))))
                .collect(),
        )
    }

    /// Smallest `|det M|` over the points, or `NotAutomorphism` at the first
    /// point where it drops to [`REGULARITY_EPS`].
    pub fn verify_invertible(&self, points: &[Vec<f64>]) -> Result<f64> {
        let mut tb = TapeBuilder::new();
        let slot = tb.push_all(&self.m);
        let tape = tb.finish();
        let mut min = f64::INFINITY;
        for p in points {
            let v = tape.eval(p)?;
            let det = numeric::determinant(self.n, slot.of(&v));
            if det.abs() <= REGULARITY_EPS || !det.is_finite() {
                return Err(Error::NotAutomorphism { point: p.clone(), det });
            }
            min = min.min(det.abs());
        }
        Ok(min)
    }
}

/// `T` of a spec in its own form, checked invertible at the samples.
pub fn t_operator_fman(f: &FManSpec, s: &Settings) -> Result<TOperator> {
    let t = TOperator::from_fman(f);
    t.verify_invertible(&f.sample(s)?)?;
    Ok(t)
}

/// `T` of a pencil with Euler data, checked invertible at the samples.
pub fn t_operator_pencil(q: &QHPencilSpec, s: &Settings) -> Result<TOperator> {
    let t = TOperator::from_euler(q.pencil.geometry_tilde(), &q.euler, q.d);
    t.verify_invertible(&q.pencil.sample(s)?)?;
    Ok(t)
}

/// Tape slots for the pointwise data every 𝔉-manifold check needs.
pub(crate) struct FmanSlots {
    n: usize,
    c: Slot,
    dc: Slot,
    gcov: Slot,
    gcon: Slot,
    gam: Slot,
    e: Slot,
    de: Slot,
}

impl FmanSlots {
    pub(crate) fn new(tb: &mut TapeBuilder, f: &FManSpec) -> Self {
        let n = f.dim();
        let geo = f.geometry_tilde();
        let dc: Vec<Expr> = gradient_table(&f.c, n).into_iter().flatten().collect();
        let de: Vec<Expr> = gradient_table(&f.euler.0, n).into_iter().flatten().collect();
        FmanSlots {
            n,
            c: tb.push_all(&f.c),
            dc: tb.push_all(&dc),
            gcov: tb.push_all(&geo.cov),
            gcon: tb.push_all(&geo.contra),
            gam: tb.push_all(&geo.conn.gamma),
            e: tb.push_all(&f.euler.0),
            de: tb.push_all(&de),
        }
    }

    pub(crate) fn at<'a>(&self, v: &'a [f64]) -> FmanPoint<'a> {
        FmanPoint {
            n: self.n,
            c: self.c.of(v),
            dc: self.dc.of(v),
            gcov: self.gcov.of(v),
            gcon: self.gcon.of(v),
            gam: self.gam.of(v),
            e: self.e.of(v),
            de: self.de.of(v),
        }
    }
}

/// Values of an [`FManSpec`]'s fields at one point.
pub(crate) struct FmanPoint<'a> {
    pub n: usize,
    pub c: &'a [f64],
    pub dc: &'a [f64],
    pub gcov: &'a [f64],
    pub gcon: &'a [f64],
    pub gam: &'a [f64],
    pub e: &'a [f64],
    pub de: &'a [f64],
}

impl FmanPoint<'_> {
    pub fn c(&self, k: usize, i: usize, j: usize) -> f64 {
        self.c[(k * self.n + i) * self.n + j]
    }

    pub fn gam(&self, k: usize, i: usize, j: usize) -> f64 {
        self.gam[(k * self.n + i) * self.n + j]
    }

    /// `(∇̃_i c)^l_jk` and its term scale.
    pub fn nabla_c(&self, i: usize, l: usize, j: usize, k: usize) -> (f64, f64) {
        let n = self.n;
        let mut t = Terms::new();
        t.push(self.dc[i * n * n * n + (l * n + j) * n + k]);
        for s in 0..n {
            t.push(self.gam(l, i, s) * self.c(s, j, k));
            t.push(-self.gam(s, i, j) * self.c(l, s, k));
            t.push(-self.gam(s, i, k) * self.c(l, j, s));
        }
        (t.value(), t.scale())
    }

    /// `∇̃(·)(∂_i, ∂_j, ∂_k, ∂_v) = g̃_lv (∇̃_i c)^l_jk` for all indices, with scales.
    pub fn t4(&self) -> (Vec<f64>, Vec<f64>) {
        let n = self.n;
        let mut nc = vec![0.0; n * n * n * n];
        let mut ns = vec![0.0; n * n * n * n];
        for i in 0..n {
            for l in 0..n {
                for j in 0..n {
                    for k in 0..n {
                        let (v, s) = self.nabla_c(i, l, j, k);
                        let q = ((i * n + l) * n + j) * n + k;
                        nc[q] = v;
                        ns[q] = s;
                    }
                }
            }
        }
        let mut out = vec![0.0; n * n * n * n];
        let mut sc = vec![0.0; n * n * n * n];
        for i in 0..n {
            for j in 0..n {
                for k in 0..n {
                    for v in 0..n {
                        let mut t = Terms::new();
                        for l in 0..n {
                            let q = ((i * n + l) * n + j) * n + k;
                            t.push_scaled(self.gcov[l * n + v] * nc[q], self.gcov[l * n + v] * ns[q]);
                        }
                        let q = ((i * n + j) * n + k) * n + v;
                        out[q] = t.value();
                        sc[q] = t.scale();
                    }
                }
            }
        }
        (out, sc)
    }

    /// `∇̃_i E^l` at `[i][l]`.
    pub fn nabla_e(&self) -> Vec<f64> {
        let n = self.n;
        let mut out = vec![0.0; n * n];
        for i in 0..n {
            for l in 0..n {
                out[i * n + l] = self.de[i * n + l] + (0..n).map(|s| self.gam(l, i, s) * self.e[s]).sum::<f64>();
            }
        }
        out
    }

    /// Product of tangent vectors.
    pub fn mul(&self, x: &[f64], y: &[f64]) -> Vec<f64> {
        let n = self.n;
        (0..n)
            .map(|k| {
                let mut s = 0.0;
                for i in 0..n {
                    for j in 0..n {
                        s += x[i] * y[j] * self.c(k, i, j);
                    }
                }
                s
            })
            .collect()
    }

    pub fn lower(&self, x: &[f64]) -> Vec<f64> {
        mat_vec(self.n, self.gcov, x)
    }

    pub fn raise(&self, u: &[f64]) -> Vec<f64> {
        mat_vec(self.n, self.gcon, u)
    }

    /// Product of 1-forms induced through `g̃`.
    pub fn mul_forms(&self, u: &[f64], w: &[f64]) -> Vec<f64> {
        self.lower(&self.mul(&self.raise(u), &self.raise(w)))
    }

    /// `(E·)^k_j`.
    pub fn euler_mult(&self) -> Vec<f64> {
        let n = self.n;
        let mut out = vec![0.0; n * n];
        for k in 0..n {
            for j in 0..n {
                out[k * n + j] = (0..n).map(|i| self.e[i] * self.c(k, i, j)).sum();
            }
        }
        out
    }

    /// The unity, from supplied values or by least squares on
    /// `e^i c^k_ij = δ^k_j`; `None` when the system has no solution.
    pub fn unity(&self, supplied: Option<&[f64]>) -> Option<Vec<f64>> {
        if let Some(e) = supplied {
            return Some(e.to_vec());
        }
        let n = self.n;
        let mut a = nalgebra::DMatrix::zeros(n * n, n);
        let mut b = nalgebra::DVector::zeros(n * n);
        for k in 0..n {
            for j in 0..n {
                for i in 0..n {
                    a[(k * n + j, i)] = self.c(k, i, j);
                }
                b[k * n + j] = if k == j { 1.0 } else { 0.0 };
            }
        }
        let sol = a.clone().svd(true, true).solve(&b, 1e-12).ok()?;
        let r = (&a * &sol - &b).norm();
        (r <= 1e-9 * (1.0 + a.norm())).then(|| sol.iter().copied().collect())
    }
}

/// One symbolic identity family `lhs[i] = rhs[i]`.
pub(crate) struct Identity<'a> {
    pub lhs: Vec<Expr>,
    pub rhs: Vec<Expr>,
    pub label: &'a (dyn Fn(usize) -> String + Sync),
}

/// Max-reduced residuals of symbolic identities, one aggregate per family.
pub(crate) fn identity_residuals(
    points: &[Vec<f64>],
    s: &Settings,
    families: &[Identity<'_>],
) -> Vec<crate::report::Aggregate> {
    let mut tb = TapeBuilder::new();
    let slots: Vec<(Slot, Slot)> = families
        .iter()
        .map(|f| (tb.push_all(&f.lhs), tb.push_all(&f.rhs)))
        .collect();
    let tape = tb.finish();
    crate::sampling::reduce(points, s.parallelism, families.len(), |pt| {
        let v = tape.eval(pt)?;
        Ok(families
            .iter()
            .zip(&slots)
            .map(|(f, (a, b))| {
                let mut w = crate::report::PointWorst::new();
                for (i, (x, y)) in a.of(&v).iter().zip(b.of(&v)).enumerate() {
                    let mut t = Terms::new();
                    t.push(*x);
                    t.push(-*y);
                    w.offer_terms(&t, || (f.label)(i));
                }
                w
            })
            .collect())
    })
}

pub(crate) fn mat_vec(n: usize, m: &[f64], x: &[f64]) -> Vec<f64> {
    (0..n).map(|i| (0..n).map(|j| m[i * n + j] * x[j]).sum()).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    /// On `t2 ≥ 1.5` every member `g* + λg̃*` with `|λ| ≤ 3` stays far from degenerate.
    pub(crate) fn p1(c22: &str) -> FManSpec {
        let chart = Chart::new(vec!["t1".into(), "t2".into()], vec![(-1.0, 1.0), (1.5, 2.5)]).unwrap();
        let z = Expr::zero;
        let one = Expr::one;
        let c = vec![
            // k = 1
            one(),
            z(),
            z(),
            chart.parse(c22).unwrap(),
            // k = 2
            z(),
            one(),
            one(),
            z(),
        ];
        let eta = MetricField::from_strings(&chart, &[vec!["0", "1"], vec!["1", "0"]], Variance::Covariant).unwrap();
        let e = VectorFieldExpr(vec![chart.parse("t1").unwrap(), Expr::constant(2.0)]);
        FManSpec::new(chart, c, eta, e, Some(VectorFieldExpr::coordinate(2, 0)), 1.0, 1.0).unwrap()
    }

    #[test]
    fn potential_loader_matches_direct_structure() {
        let chart = Chart::new(vec!["t1".into(), "t2".into()], vec![(-1.0, 1.0), (-1.0, 1.0)]).unwrap();
        let eta = MetricField::from_strings(&chart, &[vec!["0", "1"], vec!["1", "0"]], Variance::Covariant).unwrap();
        let f = chart.parse("t1^2*t2/2 + exp(t2)").unwrap();
        let e = VectorFieldExpr(vec![chart.parse("t1").unwrap(), Expr::constant(2.0)]);
        let a = FManSpec::from_potential(chart, &f, eta, e, None, 1.0, 1.0).unwrap();
        let b = p1("exp(t2)");
        let pt = [0.3, -0.4];
        for (x, y) in a.structure().iter().zip(b.structure()) {
            assert!((x.evaluate(&pt).unwrap() - y.evaluate(&pt).unwrap()).abs() < 1e-14);
        }
    }

    #[test]
    fn flat_linear_euler_gives_diagonal_t() {
        // flat g̃, E = Σ d_i x_i ∂_i: T = diag((d−1)/2 + d_i)
        let chart = Chart::boxed("x", vec![(-1.0, 1.0); 2]).unwrap();
        let g = MetricField::diagonal(vec![Expr::one(), Expr::one()], Variance::Covariant);
        let geo = MetricGeometry::new(&g).unwrap();
        let e = VectorFieldExpr(vec![Expr::var(0).scale(0.5), Expr::var(1).scale(1.5)]);
        let t = TOperator::from_euler(&geo, &e, 0.2);
        let m: Vec<f64> = t.matrix().iter().map(|x| x.evaluate(&[0.1, 0.2]).unwrap()).collect();
        assert!((m[0] - (-0.4 + 0.5)).abs() < 1e-15);
        assert!((m[3] - (-0.4 + 1.5)).abs() < 1e-15);
        assert_eq!(m[1], 0.0);
        let _ = chart;
    }

    #[test]
    fn degenerate_t_is_flagged() {
        // ∇̃E = ((1−d)/2) Id makes T vanish
        let g = MetricField::diagonal(vec![Expr::one(), Expr::one()], Variance::Covariant);
        let geo = MetricGeometry::new(&g).unwrap();
        let e = VectorFieldExpr(vec![Expr::var(0).scale(0.25), Expr::var(1).scale(0.25)]);
        let t = TOperator::from_euler(&geo, &e, 0.5);
        assert!(matches!(t.verify_invertible(&[vec![0.3, 0.1]]), Err(Error::NotAutomorphism { .. })));
    }

    #[test]
    fn p1_t_operator_is_singular() {
        // d = 1 + k − D = 1 and ∇̃E = diag(1, 0)
        let f = p1("exp(t2)");
        let t = TOperator::from_fman(&f);
        let m: Vec<f64> = t.matrix().iter().map(|x| x.evaluate(&[0.2, 0.3]).unwrap()).collect();
        assert_eq!(m, vec![1.0, 0.0, 0.0, 0.0]);
        assert!(t_operator_fman(&f, &Settings::default().with_points(5)).is_err());
    }
}

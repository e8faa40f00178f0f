//! Metric pairs: the pencil `g*_λ = g* + λ g̃*`, the endomorphism `A = g̃* g`,
//! its Nijenhuis tensor, the contorsion `K = Γ − Γ̃`, and the pencil checks.

mod checks;

use std::sync::{Arc, Mutex};

use crate::error::{Error, Result};
use crate::expr::Expr;
use crate::geometry::{gradient_table, Chart, MetricField, MetricGeometry, Variance};
use crate::report::Terms;
use crate::sampling::{sample_points, Settings};

pub(crate) use checks::{push_geo, require_almost, GeoSlots};
pub use checks::{
    check_almost_compatible, check_compatible, check_flat_pencil, check_prop_au, check_semisimple,
};

pub struct PencilSpec {
    chart: Chart,
    g: MetricField,
    gt: MetricField,
    geo: MetricGeometry,
    geo_t: MetricGeometry,
    members: Mutex<Vec<(u64, Arc<MetricGeometry>)>>,
}

impl std::fmt::Debug for PencilSpec {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("PencilSpec")
            .field("chart", &self.chart)
            .field("g", &self.g)
            .field("gt", &self.gt)
            .finish()
    }
}

/// Contorsion `K^k_ij = Γ^k_ij − Γ̃^k_ij` at `[k][i][j]`.
#[derive(Clone, Debug)]
pub struct ContorsionField {
    pub n: usize,
    pub k: Vec<Expr>,
}

impl ContorsionField {
    pub fn get(&self, k: usize, i: usize, j: usize) -> &Expr {
        &self.k[(k * self.n + i) * self.n + j]
    }
}

impl PencilSpec {
    /// Metrics may be given in either variance; they are stored contravariantly.
    pub fn new(chart: Chart, g: MetricField, gt: MetricField) -> Result<Self> {
        let n = chart.dim();
        if g.dim() != n || gt.dim() != n {
            return Err(Error::Dimension(format!(
                "chart has dimension {n}, metrics have {} and {}",
                g.dim(),
                gt.dim()
            )));
        }
        let g = g.with_variance(Variance::Contravariant)?;
        let gt = gt.with_variance(Variance::Contravariant)?;
        let geo = MetricGeometry::new(&g)?;
        let geo_t = MetricGeometry::new(&gt)?;
        Ok(PencilSpec {
            chart,
            g,
            gt,
            geo,
            geo_t,
            members: Mutex::new(Vec::new()),
        })
    }

    pub fn chart(&self) -> &Chart {
        &self.chart
    }

    pub fn dim(&self) -> usize {
        self.chart.dim()
    }

    /// `g*` (contravariant).
    pub fn g(&self) -> &MetricField {
        &self.g
    }

    /// `g̃*` (contravariant).
    pub fn g_tilde(&self) -> &MetricField {
        &self.gt
    }

    pub fn geometry(&self) -> &MetricGeometry {
        &self.geo
    }

    pub fn geometry_tilde(&self) -> &MetricGeometry {
        &self.geo_t
    }

    /// The pair in the opposite order.
    pub fn swapped(&self) -> Result<PencilSpec> {
        PencilSpec::new(self.chart.clone(), self.gt.clone(), self.g.clone())
    }

    /// Geometry of `g*_λ = g* + λ g̃*`, built once per λ.
    pub fn member(&self, lambda: f64) -> Result<Arc<MetricGeometry>> {
        let key = lambda.to_bits();
        if let Some((_, m)) = self.lock_members().iter().find(|(k, _)| *k == key) {
            return Ok(m.clone());
        }
        let m = Arc::new(MetricGeometry::new(&self.g.add_scaled(&self.gt, lambda)?)?);
        self.lock_members().push((key, m.clone()));
        Ok(m)
    }

    fn lock_members(&self) -> std::sync::MutexGuard<'_, Vec<(u64, Arc<MetricGeometry>)>> {
        self.members.lock().unwrap_or_else(|e| e.into_inner())
    }

    /// Admitted sample points: chart exclusions plus nonzero determinants of both metrics.
    pub fn sample(&self, settings: &Settings) -> Result<Vec<Vec<f64>>> {
        sample_points(
            &self.chart,
            &[self.geo.det_contra.clone(), self.geo_t.det_contra.clone()],
            settings,
        )
    }

    /// λ-samples whose pencil member stays nondegenerate at every point, and
    /// a note for each one dropped.
    pub fn usable_lambdas(&self, points: &[Vec<f64>], settings: &Settings) -> Result<(Vec<f64>, Vec<String>)> {
        let n = self.dim();
        let mut tb = crate::expr::TapeBuilder::new();
        let sg = tb.push_all(self.g.comps());
        let st = tb.push_all(self.gt.comps());
        let tape = tb.finish();
        let values = points
            .iter()
            .map(|p| tape.eval(p))
            .collect::<std::result::Result<Vec<_>, _>>()?;
        let mut keep = Vec::new();
        let mut notes = Vec::new();
        for &lam in &settings.lambdas {
            let bad = points.iter().zip(&values).find_map(|(p, v)| {
                let m: Vec<f64> = sg.of(v).iter().zip(st.of(v)).map(|(a, b)| a + lam * b).collect();
                let d = crate::geometry::numeric::determinant(n, &m);
                (d.abs() <= crate::sampling::EXCLUSION_EPS).then(|| (p.clone(), d))
            });
            match bad {
                None => keep.push(lam),
                Some((p, d)) => notes.push(format!("λ = {lam} skipped: g*_λ singular at {p:?} (det {d:e})")),
            }
        }
        Ok((keep, notes))
    }

    /// `A^i_j = g̃^{ik} g_kj`.
    pub fn operator_a(&self) -> Vec<Expr> {
        operator_a(self.gt.comps(), &self.geo.cov, self.dim())
    }

    pub fn contorsion(&self) -> ContorsionField {
        ContorsionField {
            n: self.dim(),
            k: self
                .geo
                .conn
                .gamma
                .iter()
                .zip(&self.geo_t.conn.gamma)
                .map(|(a, b)| a.sub(b))
                .collect(),
        }
    }
}

fn operator_a(gt_contra: &[Expr], g_cov: &[Expr], n: usize) -> Vec<Expr> {
    crate::geometry::linalg::matmul(gt_contra, g_cov, n)
}

/// Symbolic Nijenhuis tensor of an endomorphism `a[i][j] = A^i_j`, stored at
/// `[k][i][j]`:
/// `N^k_ij = A^s_i ∂_s A^k_j − A^s_j ∂_s A^k_i − A^k_s (∂_i A^s_j − ∂_j A^s_i)`.
pub fn nijenhuis(a: &[Expr], n: usize) -> Vec<Expr> {
    let da = gradient_table(a, n);
    let at = |i: usize, j: usize| &a[i * n + j];
    let d = |v: usize, i: usize, j: usize| &da[v][i * n + j];
    let mut out = Vec::with_capacity(n * n * n);
    for k in 0..n {
        for i in 0..n {
            for j in 0..n {
                out.push(Expr::sum((0..n).flat_map(|s| {
                    [
                        at(s, i).mul(d(s, k, j)),
                        at(s, j).mul(d(s, k, i)).neg(),
                        at(k, s).mul(&d(i, s, j).sub(d(j, s, i))).neg(),
                    ]
                })));
            }
        }
    }
    out
}

/// Numeric Nijenhuis tensor from values of `A` and `∂A` (`da[v*n*n + i*n + j]`),
/// one [`Terms`] per `[k][i][j]`.
pub fn nijenhuis_at(n: usize, a: &[f64], da: &[f64]) -> Vec<Terms> {
    let at = |i: usize, j: usize| a[i * n + j];
    let d = |v: usize, i: usize, j: usize| da[(v * n + i) * n + j];
    let mut out = Vec::with_capacity(n * n * n);
    for k in 0..n {
        for i in 0..n {
            for j in 0..n {
                let mut t = Terms::new();
                for s in 0..n {
                    t.push(at(s, i) * d(s, k, j));
                    t.push(-at(s, j) * d(s, k, i));
                    t.push(-at(k, s) * d(i, s, j));
                    t.push(at(k, s) * d(j, s, i));
                }
                out.push(t);
            }
        }
    }
    out
}

//! Single-metric differential geometry on a coordinate chart.
//!
//! Conventions: `Γ^k_ij` is stored at `[k][i][j]`, `R^l_kij` at `[l][k][i][j]`
//! with `R(X,Y) = [∇_X, ∇_Y] - ∇_[X,Y]`, and curvature acts on 1-forms by
//! `(R_{X,Y} α)(Z) = -α(R(X,Y) Z)`.

mod killing;
pub mod linalg;
pub mod numeric;

use std::sync::{Arc, OnceLock};

use crate::error::{Error, Result};
use crate::expr::{self, Differentiator, Expr, ExprError};

pub use killing::check_killing_identity;

#[derive(Clone, Debug)]
pub struct Chart {
    names: Vec<String>,
    bounds: Vec<(f64, f64)>,
    exclusions: Vec<Expr>,
}

impl Chart {
    pub fn new(names: Vec<String>, bounds: Vec<(f64, f64)>) -> Result<Self> {
        if names.is_empty() {
            return Err(Error::Chart("a chart needs at least one coordinate".into()));
        }
        if names.len() != bounds.len() {
            return Err(Error::Chart(format!(
                "{} coordinates but {} box intervals",
                names.len(),
                bounds.len()
            )));
        }
        for (n, (a, b)) in names.iter().zip(&bounds) {
            if !(a < b) || !a.is_finite() || !b.is_finite() {
                return Err(Error::Chart(format!("empty interval [{a}, {b}] for {n}")));
            }
        }
        for (i, n) in names.iter().enumerate() {
            if names[..i].contains(n) {
                return Err(Error::Chart(format!("duplicate coordinate {n}")));
            }
        }
        Ok(Chart {
            names,
            bounds,
            exclusions: Vec::new(),
        })
    }

    /// Chart with coordinates named `prefix1 … prefixN`.
    pub fn boxed(prefix: &str, bounds: Vec<(f64, f64)>) -> Result<Self> {
        let names = (1..=bounds.len()).map(|i| format!("{prefix}{i}")).collect();
        Chart::new(names, bounds)
    }

    pub fn with_exclusion(mut self, e: Expr) -> Self {
        self.exclusions.push(e);
        self
    }

    pub fn with_exclusion_src(self, src: &str) -> Result<Self> {
        let e = self.parse(src)?;
        Ok(self.with_exclusion(e))
    }

    pub fn dim(&self) -> usize {
        self.names.len()
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn bounds(&self) -> &[(f64, f64)] {
        &self.bounds
    }

    pub fn exclusions(&self) -> &[Expr] {
        &self.exclusions
    }

    pub fn parse(&self, src: &str) -> std::result::Result<Expr, ExprError> {
        expr::parse(src, &self.names)
    }

    pub fn coordinate(&self, name: &str) -> std::result::Result<usize, ExprError> {
        self.names
            .iter()
            .position(|n| n == name)
            .ok_or_else(|| ExprError::UnknownIdentifier {
                name: name.to_string(),
                position: 0,
            })
    }

    /// Partial derivative with respect to a named coordinate.
    pub fn differentiate(&self, e: &Expr, name: &str) -> std::result::Result<Expr, ExprError> {
        Ok(e.differentiate(self.coordinate(name)?))
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Variance {
    Covariant,
    Contravariant,
}

impl Variance {
    pub fn flip(self) -> Variance {
        match self {
            Variance::Covariant => Variance::Contravariant,
            Variance::Contravariant => Variance::Covariant,
        }
    }
}

/// Symmetric n×n matrix of expressions, row-major, with a variance tag.
/// The symbolic inverse is computed once and shared with the inverted field,
/// so inverting twice returns the original components.
#[derive(Clone, Debug)]
pub struct MetricField {
    n: usize,
    comps: Vec<Expr>,
    variance: Variance,
    inverse: Arc<OnceLock<Vec<Expr>>>,
}

impl MetricField {
    pub fn new(n: usize, comps: Vec<Expr>, variance: Variance) -> Result<Self> {
        if comps.len() != n * n {
            return Err(Error::Dimension(format!(
                "metric of dimension {n} needs {} components, got {}",
                n * n,
                comps.len()
            )));
        }
        Ok(MetricField {
            n,
            comps,
            variance,
            inverse: Arc::new(OnceLock::new()),
        })
    }

    pub fn contravariant(n: usize, comps: Vec<Expr>) -> Result<Self> {
        Self::new(n, comps, Variance::Contravariant)
    }

    pub fn covariant(n: usize, comps: Vec<Expr>) -> Result<Self> {
        Self::new(n, comps, Variance::Covariant)
    }

    pub fn diagonal(entries: Vec<Expr>, variance: Variance) -> Self {
        let n = entries.len();
        let mut comps = vec![Expr::zero(); n * n];
        for (i, e) in entries.into_iter().enumerate() {
            comps[i * n + i] = e;
        }
        MetricField {
            n,
            comps,
            variance,
            inverse: Arc::new(OnceLock::new()),
        }
    }

    pub fn from_strings(chart: &Chart, rows: &[Vec<&str>], variance: Variance) -> Result<Self> {
        let n = chart.dim();
        if rows.len() != n || rows.iter().any(|r| r.len() != n) {
            return Err(Error::Dimension(format!("metric must be {n}×{n}")));
        }
        let comps = rows
            .iter()
            .flatten()
            .map(|s| chart.parse(s))
            .collect::<std::result::Result<Vec<_>, _>>()?;
        Self::new(n, comps, variance)
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn variance(&self) -> Variance {
        self.variance
    }

    pub fn comps(&self) -> &[Expr] {
        &self.comps
    }

    pub fn get(&self, i: usize, j: usize) -> &Expr {
        &self.comps[i * self.n + j]
    }

    pub fn determinant(&self) -> Result<Expr> {
        linalg::determinant(&self.comps, self.n)
    }

    pub fn inverse_comps(&self) -> Result<&[Expr]> {
        if let Some(v) = self.inverse.get() {
            return Ok(v);
        }
        let inv = linalg::inverse(&self.comps, self.n)?;
        Ok(self.inverse.get_or_init(|| inv))
    }

    pub fn invert(&self) -> Result<MetricField> {
        let inv = self.inverse_comps()?.to_vec();
        let back = OnceLock::new();
        let _ = back.set(self.comps.clone());
        Ok(MetricField {
            n: self.n,
            comps: inv,
            variance: self.variance.flip(),
            inverse: Arc::new(back),
        })
    }

    pub fn with_variance(&self, v: Variance) -> Result<MetricField> {
        if v == self.variance {
            Ok(self.clone())
        } else {
            self.invert()
        }
    }

    /// `self + λ·other`, componentwise; both must share variance.
    pub fn add_scaled(&self, other: &MetricField, lambda: f64) -> Result<MetricField> {
        if self.n != other.n || self.variance != other.variance {
            return Err(Error::Dimension("pencil members must share dimension and variance".into()));
        }
        let comps = self
            .comps
            .iter()
            .zip(&other.comps)
            .map(|(a, b)| a.add(&b.scale(lambda)))
            .collect();
        Self::new(self.n, comps, self.variance)
    }

    /// Checks that the determinant stays away from zero at the given points.
    pub fn check_nonsingular(&self, points: &[Vec<f64>]) -> Result<()> {
        let det = self.determinant()?;
        for p in points {
            let d = det.evaluate(p)?;
            if d.abs() <= crate::sampling::EXCLUSION_EPS {
                return Err(Error::SingularMetric {
                    point: p.clone(),
                    det: d,
                });
            }
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct VectorFieldExpr(pub Vec<Expr>);

#[derive(Clone, Debug, PartialEq)]
pub struct OneFormExpr(pub Vec<Expr>);

impl VectorFieldExpr {
    pub fn coordinate(n: usize, i: usize) -> Self {
        VectorFieldExpr((0..n).map(|k| if k == i { Expr::one() } else { Expr::zero() }).collect())
    }
}

impl OneFormExpr {
    pub fn coordinate(n: usize, i: usize) -> Self {
        OneFormExpr((0..n).map(|k| if k == i { Expr::one() } else { Expr::zero() }).collect())
    }
}

#[derive(Clone, Debug)]
pub struct ConnectionField {
    pub n: usize,
    /// `Γ^k_ij` at `[k][i][j]`.
    pub gamma: Vec<Expr>,
}

impl ConnectionField {
    pub fn get(&self, k: usize, i: usize, j: usize) -> &Expr {
        &self.gamma[(k * self.n + i) * self.n + j]
    }
}

#[derive(Clone, Debug)]
pub struct CurvatureField {
    pub n: usize,
    /// `R^l_kij` at `[l][k][i][j]`.
    pub r: Vec<Expr>,
}

impl CurvatureField {
    pub fn get(&self, l: usize, k: usize, i: usize, j: usize) -> &Expr {
        let n = self.n;
        &self.r[((l * n + k) * n + i) * n + j]
    }
}

/// `d[v][c]` is the partial of component `c` with respect to coordinate `v`.
pub fn gradient_table(comps: &[Expr], n: usize) -> Vec<Vec<Expr>> {
    (0..n)
        .map(|v| {
            let mut d = Differentiator::new(v);
            comps.iter().map(|c| d.diff(c)).collect()
        })
        .collect()
}

/// Levi-Civita connection, accepting either variance.
pub fn christoffel(g: &MetricField) -> Result<ConnectionField> {
    let n = g.dim();
    let (cov, contra) = match g.variance() {
        Variance::Covariant => (g.comps().to_vec(), g.inverse_comps()?.to_vec()),
        Variance::Contravariant => (g.inverse_comps()?.to_vec(), g.comps().to_vec()),
    };
    let dg = gradient_table(&cov, n);
    let d = |l: usize, i: usize, j: usize| &dg[l][i * n + j];
    let mut first = vec![Expr::zero(); n * n * n];
    for l in 0..n {
        for i in 0..n {
            for j in i..n {
                let e = d(i, j, l).add(d(j, i, l)).sub(d(l, i, j)).scale(0.5);
                first[(l * n + i) * n + j] = e.clone();
                first[(l * n + j) * n + i] = e;
            }
        }
    }
    let mut gamma = vec![Expr::zero(); n * n * n];
    for k in 0..n {
        for i in 0..n {
            for j in i..n {
                let e = Expr::sum((0..n).map(|l| contra[k * n + l].mul(&first[(l * n + i) * n + j])));
                gamma[(k * n + i) * n + j] = e.clone();
                gamma[(k * n + j) * n + i] = e;
            }
        }
    }
    Ok(ConnectionField { n, gamma })
}

/// Symbolic `∂_m Γ^k_ij` at `[m][k][i][j]`.
pub fn connection_derivatives(conn: &ConnectionField) -> Vec<Expr> {
    gradient_table(&conn.gamma, conn.n).into_iter().flatten().collect()
}

/// `R^l_kij = ∂_i Γ^l_jk − ∂_j Γ^l_ik + Γ^l_is Γ^s_jk − Γ^l_js Γ^s_ik`.
pub fn riemann(conn: &ConnectionField) -> CurvatureField {
    let n = conn.n;
    let dg = connection_derivatives(conn);
    let d = |m: usize, k: usize, i: usize, j: usize| &dg[((m * n + k) * n + i) * n + j];
    let g = |k: usize, i: usize, j: usize| conn.get(k, i, j);
    let mut r = vec![Expr::zero(); n * n * n * n];
    for l in 0..n {
        for k in 0..n {
            for i in 0..n {
                for j in (i + 1)..n {
                    let e = Expr::sum(
                        [d(i, l, j, k).clone(), d(j, l, i, k).neg()]
                            .into_iter()
                            .chain((0..n).map(|s| g(l, i, s).mul(g(s, j, k))))
                            .chain((0..n).map(|s| g(l, j, s).mul(g(s, i, k)).neg())),
                    );
                    r[((l * n + k) * n + j) * n + i] = e.neg();
                    r[((l * n + k) * n + i) * n + j] = e;
                }
            }
        }
    }
    CurvatureField { n, r }
}

/// `(∇α)_ij = ∂_i α_j − Γ^k_ij α_k`, row-major in (i, j).
pub fn covariant_derivative_oneform(conn: &ConnectionField, alpha: &OneFormExpr) -> Vec<Expr> {
    let n = conn.n;
    let da = gradient_table(&alpha.0, n);
    let mut out = Vec::with_capacity(n * n);
    for i in 0..n {
        for j in 0..n {
            let corr = Expr::sum((0..n).map(|k| conn.get(k, i, j).mul(&alpha.0[k])));
            out.push(da[i][j].sub(&corr));
        }
    }
    out
}

/// `(∇X)_i^k = ∂_i X^k + Γ^k_ij X^j`, stored at `[i][k]`.
pub fn covariant_derivative_vector(conn: &ConnectionField, x: &VectorFieldExpr) -> Vec<Expr> {
    let n = conn.n;
    let dx = gradient_table(&x.0, n);
    let mut out = Vec::with_capacity(n * n);
    for i in 0..n {
        for k in 0..n {
            let corr = Expr::sum((0..n).map(|j| conn.get(k, i, j).mul(&x.0[j])));
            out.push(dx[i][k].add(&corr));
        }
    }
    out
}

fn contract(m: &[Expr], v: &[Expr], n: usize) -> Vec<Expr> {
    (0..n)
        .map(|i| Expr::sum((0..n).map(|j| m[i * n + j].mul(&v[j]))))
        .collect()
}

pub fn raise(m: &MetricField, alpha: &OneFormExpr) -> Result<VectorFieldExpr> {
    let g = m.with_variance(Variance::Contravariant)?;
    Ok(VectorFieldExpr(contract(g.comps(), &alpha.0, m.dim())))
}

pub fn lower(m: &MetricField, x: &VectorFieldExpr) -> Result<OneFormExpr> {
    let g = m.with_variance(Variance::Covariant)?;
    Ok(OneFormExpr(contract(g.comps(), &x.0, m.dim())))
}

/// Lie derivative of a metric along `e`, in the metric's own variance.
pub fn lie_derivative_metric(e: &VectorFieldExpr, m: &MetricField) -> Vec<Expr> {
    let n = m.dim();
    let dm = gradient_table(m.comps(), n);
    let de = gradient_table(&e.0, n);
    let sign = match m.variance() {
        Variance::Contravariant => -1.0,
        Variance::Covariant => 1.0,
    };
    let mut out = Vec::with_capacity(n * n);
    for i in 0..n {
        for j in 0..n {
            let transport = Expr::sum((0..n).map(|k| e.0[k].mul(&dm[k][i * n + j])));
            let frame = match m.variance() {
                Variance::Contravariant => Expr::sum((0..n).flat_map(|k| {
                    [
                        m.get(k, j).mul(&de[k][i]),
                        m.get(i, k).mul(&de[k][j]),
                    ]
                })),
                Variance::Covariant => Expr::sum((0..n).flat_map(|k| {
                    [
                        m.get(k, j).mul(&de[i][k]),
                        m.get(i, k).mul(&de[j][k]),
                    ]
                })),
            };
            out.push(transport.add(&frame.scale(sign)));
        }
    }
    out
}

/// `[X, Y]^i = X^k ∂_k Y^i − Y^k ∂_k X^i`.
pub fn lie_bracket(x: &VectorFieldExpr, y: &VectorFieldExpr) -> VectorFieldExpr {
    let n = x.0.len();
    let dx = gradient_table(&x.0, n);
    let dy = gradient_table(&y.0, n);
    VectorFieldExpr(
        (0..n)
            .map(|i| {
                Expr::sum((0..n).flat_map(|k| [x.0[k].mul(&dy[k][i]), y.0[k].mul(&dx[k][i]).neg()]))
            })
            .collect(),
    )
}

/// Symbolic data of one metric that checks evaluate repeatedly.
#[derive(Debug)]
pub struct MetricGeometry {
    pub n: usize,
    pub contra: Vec<Expr>,
    pub cov: Vec<Expr>,
    pub det_contra: Expr,
    pub conn: ConnectionField,
    dgamma: OnceLock<Vec<Expr>>,
}

impl MetricGeometry {
    pub fn new(m: &MetricField) -> Result<Self> {
        let contra = m.with_variance(Variance::Contravariant)?;
        let cov = contra.invert()?;
        let conn = christoffel(&contra)?;
        Ok(MetricGeometry {
            n: m.dim(),
            det_contra: contra.determinant()?,
            contra: contra.comps().to_vec(),
            cov: cov.comps().to_vec(),
            conn,
            dgamma: OnceLock::new(),
        })
    }

    /// `∂_m Γ^k_ij` at `[m][k][i][j]`.
    pub fn dgamma(&self) -> &[Expr] {
        self.dgamma.get_or_init(|| connection_derivatives(&self.conn))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn chart2() -> Chart {
        Chart::boxed("x", vec![(0.5, 2.0), (0.2, 1.2)]).unwrap()
    }

    fn polar() -> MetricField {
        let c = chart2();
        MetricField::from_strings(&c, &[vec!["1", "0"], vec!["0", "x1^2"]], Variance::Covariant).unwrap()
    }

    #[test]
    fn chart_validation() {
        assert!(Chart::new(vec!["x".into()], vec![(1.0, 1.0)]).is_err());
        assert!(Chart::new(vec!["x".into(), "x".into()], vec![(0.0, 1.0); 2]).is_err());
        assert!(Chart::new(vec!["x".into()], vec![]).is_err());
    }

    #[test]
    fn inversion_round_trip_is_exact() {
        let c = chart2();
        let g = MetricField::from_strings(
            &c,
            &[vec!["1 + x1^2", "x1*x2"], vec!["x1*x2", "2"]],
            Variance::Covariant,
        )
        .unwrap();
        let back = g.invert().unwrap().invert().unwrap();
        assert_eq!(back.comps(), g.comps());
        assert_eq!(back.variance(), Variance::Covariant);
        let inv = polar().invert().unwrap();
        let p = [1.5, 0.3];
        assert!((inv.get(1, 1).evaluate(&p).unwrap() - 1.0 / 2.25).abs() < 1e-15);
    }

    #[test]
    fn polar_christoffel() {
        let conn = christoffel(&polar()).unwrap();
        let p = [1.7, 0.4];
        assert!((conn.get(0, 1, 1).evaluate(&p).unwrap() + 1.7).abs() < 1e-14);
        assert!((conn.get(1, 0, 1).evaluate(&p).unwrap() - 1.0 / 1.7).abs() < 1e-14);
        assert!(conn.get(0, 0, 0).is_zero());
        let flat = riemann(&conn);
        for e in &flat.r {
            assert!(e.evaluate(&p).unwrap().abs() < 1e-12);
        }
    }

    #[test]
    fn sphere_curvature_magnitude() {
        let c = chart2();
        let g = MetricField::from_strings(&c, &[vec!["1", "0"], vec!["0", "sin(x1)^2"]], Variance::Covariant)
            .unwrap();
        let r = riemann(&christoffel(&g).unwrap());
        let p = [1.1, 0.5];
        let r1212 = r.get(0, 1, 0, 1).evaluate(&p).unwrap();
        assert!((r1212.abs() - 1.1f64.sin().powi(2)).abs() < 1e-12);
        // antisymmetry in the last pair
        assert!((r.get(0, 1, 1, 0).evaluate(&p).unwrap() + r1212).abs() < 1e-14);
    }

    #[test]
    fn polar_covariant_derivative_of_dtheta() {
        let conn = christoffel(&polar()).unwrap();
        let d = covariant_derivative_oneform(&conn, &OneFormExpr::coordinate(2, 1));
        let p = [1.25, 0.1];
        assert!((d[1].evaluate(&p).unwrap() + 1.0 / 1.25).abs() < 1e-14);
    }

    #[test]
    fn lie_derivative_examples() {
        let c = chart2();
        let id = MetricField::diagonal(vec![Expr::one(), Expr::one()], Variance::Covariant);
        let e = VectorFieldExpr(vec![Expr::var(0), Expr::var(1)]);
        let l = lie_derivative_metric(&e, &id);
        assert_eq!(l[0].as_const(), Some(2.0));
        assert_eq!(l[3].as_const(), Some(2.0));
        let eta = MetricField::from_strings(&c, &[vec!["0", "1"], vec!["1", "0"]], Variance::Covariant).unwrap();
        let e = VectorFieldExpr(vec![Expr::var(0), Expr::constant(2.0)]);
        let l = lie_derivative_metric(&e, &eta);
        assert_eq!(l[1].as_const(), Some(1.0));
        assert!(l[0].is_zero() && l[3].is_zero());
        let lc = lie_derivative_metric(&e, &eta.invert().unwrap());
        assert_eq!(lc[1].as_const(), Some(-1.0));
    }

    #[test]
    fn raise_lower() {
        let g = MetricField::diagonal(vec![Expr::one(), Expr::constant(4.0)], Variance::Covariant);
        let x = VectorFieldExpr(vec![Expr::one(), Expr::one()]);
        let a = lower(&g, &x).unwrap();
        assert_eq!(a.0[1].as_const(), Some(4.0));
        let back = raise(&g, &a).unwrap();
        assert_eq!(back.0[1].evaluate(&[0.0, 0.0]).unwrap(), 1.0);
    }
}

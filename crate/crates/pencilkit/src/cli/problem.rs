//! Problem files: TOML with expression strings in the `expr` grammar.

use serde::Deserialize;

use crate::error::{Error, Result};
use crate::expr::Expr;
use crate::fmanifold::{qh_pencil_from_fman, build_pencil_from_fman, FManSpec, QHPencilSpec};
use crate::geometry::{Chart, MetricField, Variance, VectorFieldExpr};
use crate::pencil::PencilSpec;
use crate::sampling::Settings;
use crate::submanifold::EmbeddingSpec;

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProblemFile {
    pub name: Option<String>,
    pub description: Option<String>,
    pub chart: ChartBlock,
    pub g: Option<MetricBlock>,
    pub g_tilde: Option<MetricBlock>,
    pub fman: Option<FManBlock>,
    pub qh: Option<QhBlock>,
    pub embedding: Option<EmbeddingBlock>,
    #[serde(default)]
    pub sampling: SamplingBlock,
    pub checks: Vec<String>,
}

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ChartBlock {
    pub coords: Vec<String>,
    #[serde(rename = "box")]
    pub bounds: Vec<[f64; 2]>,
    #[serde(default)]
    pub exclusions: Vec<String>,
}

#[derive(Clone, Copy, Debug, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum VarianceName {
    Contravariant,
    Covariant,
}

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MetricBlock {
    pub variance: VarianceName,
    pub matrix: Vec<Vec<String>>,
}

/// One structure function `c^k_ij`; indices are coordinate names and the
/// entry is written to both `(i, j)` and `(j, i)`.
#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CEntry {
    pub k: String,
    pub i: String,
    pub j: String,
    pub value: String,
}

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FManBlock {
    /// Defaults to the `g_tilde` block.
    pub eta: Option<MetricBlock>,
    pub potential: Option<String>,
    #[serde(default)]
    pub c: Vec<CEntry>,
    pub euler: Vec<String>,
    pub unity: Option<Vec<String>>,
    pub k: f64,
    #[serde(rename = "D")]
    pub big_d: f64,
}

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct QhBlock {
    pub d: Option<f64>,
    #[serde(rename = "D")]
    pub big_d: Option<f64>,
    pub euler: Option<Vec<String>>,
    pub f: Option<String>,
    pub unity: Option<Vec<String>>,
}

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EmbeddingBlock {
    pub parameters: Vec<String>,
    #[serde(rename = "box")]
    pub bounds: Vec<[f64; 2]>,
    pub components: Vec<String>,
}

#[derive(Clone, Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SamplingBlock {
    pub seed: Option<u64>,
    pub points: Option<usize>,
    pub tol: Option<f64>,
    pub lambdas: Option<Vec<f64>>,
}

fn config(msg: impl Into<String>) -> Error {
    Error::Config(msg.into())
}

impl ProblemFile {
    pub fn parse(src: &str) -> Result<Self> {
        toml::from_str(src).map_err(|e| config(e.to_string()))
    }

    pub fn settings(&self) -> Settings {
        let mut s = Settings::default();
        let b = &self.sampling;
        if let Some(x) = b.seed {
            s.seed = x;
        }
        if let Some(x) = b.points {
            s.points = x;
        }
        if let Some(x) = b.tol {
            s.tol = x;
        }
        if let Some(x) = &b.lambdas {
            s.lambdas = x.clone();
        }
        s
    }
}

/// The objects a problem file describes, built once.
pub struct Problem {
    pub chart: Chart,
    pub g: Option<MetricField>,
    pub g_tilde: Option<MetricField>,
    pub fman: Option<FManSpec>,
    pub pencil: Option<PencilSpec>,
    pub qh: Option<QHPencilSpec>,
    pub embedding: Option<EmbeddingSpec>,
    /// Construction errors of derived objects, reported by the checks that need them.
    pub pencil_error: Option<String>,
    pub qh_error: Option<String>,
}

fn chart_of(names: &[String], bounds: &[[f64; 2]]) -> Result<Chart> {
    if names.len() != bounds.len() {
        return Err(config(format!("{} coordinates but {} box intervals", names.len(), bounds.len())));
    }
    Chart::new(names.to_vec(), bounds.iter().map(|b| (b[0], b[1])).collect())
}

fn metric(chart: &Chart, b: &MetricBlock) -> Result<MetricField> {
    let rows: Vec<Vec<&str>> = b.matrix.iter().map(|r| r.iter().map(String::as_str).collect()).collect();
    let v = match b.variance {
        VarianceName::Contravariant => Variance::Contravariant,
        VarianceName::Covariant => Variance::Covariant,
    };
    MetricField::from_strings(chart, &rows, v)
}

fn vector(chart: &Chart, what: &str, comps: &[String]) -> Result<VectorFieldExpr> {
    if comps.len() != chart.dim() {
        return Err(config(format!("{what} has {} components, chart has {}", comps.len(), chart.dim())));
    }
    Ok(VectorFieldExpr(
        comps.iter().map(|c| chart.parse(c)).collect::<std::result::Result<Vec<_>, _>>()?,
    ))
}

fn fman(chart: &Chart, b: &FManBlock, gt: Option<&MetricField>) -> Result<FManSpec> {
    let eta = match (&b.eta, gt) {
        (Some(e), _) => metric(chart, e)?,
        (None, Some(g)) => g.clone(),
        (None, None) => return Err(config("fman block needs eta or a g_tilde block")),
    };
    let euler = vector(chart, "fman.euler", &b.euler)?;
    let unity = b.unity.as_ref().map(|u| vector(chart, "fman.unity", u)).transpose()?;
    match (&b.potential, b.c.is_empty()) {
        (Some(f), true) => {
            let f = chart.parse(f)?;
            FManSpec::from_potential(chart.clone(), &f, eta, euler, unity, b.k, b.big_d)
        }
        (None, false) => {
            let n = chart.dim();
            let mut c = vec![Expr::zero(); n * n * n];
            for e in &b.c {
                let k = chart.coordinate(&e.k)?;
                let i = chart.coordinate(&e.i)?;
                let j = chart.coordinate(&e.j)?;
                let v = chart.parse(&e.value)?;
                c[(k * n + i) * n + j] = v.clone();
                c[(k * n + j) * n + i] = v;
            }
            FManSpec::new(chart.clone(), c, eta, euler, unity, b.k, b.big_d)
        }
        _ => Err(config("fman block needs exactly one of potential or c entries")),
    }
}

impl Problem {
    pub fn build(file: &ProblemFile, s: &Settings) -> Result<Self> {
        let chart = chart_of(&file.chart.coords, &file.chart.bounds)?;
        let chart = file
            .chart
            .exclusions
            .iter()
            .try_fold(chart, |c, e| c.with_exclusion_src(e))?;
        let g = file.g.as_ref().map(|b| metric(&chart, b)).transpose()?;
        let g_tilde = file.g_tilde.as_ref().map(|b| metric(&chart, b)).transpose()?;
        let fm = file.fman.as_ref().map(|b| fman(&chart, b, g_tilde.as_ref())).transpose()?;

        let mut pencil_error = None;
        let pencil = match (&g, &g_tilde, &fm) {
            (Some(a), Some(b), _) => Some(PencilSpec::new(chart.clone(), a.clone(), b.clone())?),
            (_, _, Some(f)) => match build_pencil_from_fman(f, s) {
                Ok(p) => Some(p),
                Err(e) => {
                    pencil_error = Some(e.to_string());
                    None
                }
            },
            _ => None,
        };

        let mut qh_error = None;
        let qh = match (&file.qh, &fm) {
            (None, None) => None,
            (block, Some(f)) if g.is_none() || g_tilde.is_none() => match qh_pencil_from_fman(f, s) {
                Ok(mut q) => {
                    if let Some(b) = block {
                        override_qh(&chart, &mut q, b)?;
                    }
                    Some(q)
                }
                Err(e) => {
                    qh_error = Some(e.to_string());
                    None
                }
            },
            (Some(b), _) => {
                let Some(p) = &pencil else {
                    return Err(config("qh block needs g and g_tilde blocks"));
                };
                let Some(euler) = &b.euler else {
                    return Err(config("qh block needs euler when the pencil is given explicitly"));
                };
                let (Some(d), Some(big_d)) = (b.d, b.big_d) else {
                    return Err(config("qh block needs d and D"));
                };
                let mut q = QHPencilSpec {
                    pencil: PencilSpec::new(chart.clone(), p.g().clone(), p.g_tilde().clone())?,
                    euler: vector(&chart, "qh.euler", euler)?,
                    potential: None,
                    unity: None,
                    d,
                    big_d,
                };
                override_qh(&chart, &mut q, b)?;
                Some(q)
            }
            // explicit metrics win over the pencil an F-manifold would build
            (None, Some(_)) => None,
        };

        let embedding = match &file.embedding {
            None => None,
            Some(b) => {
                let pc = chart_of(&b.parameters, &b.bounds)?;
                if b.components.len() != chart.dim() {
                    return Err(config(format!(
                        "embedding has {} components, chart has {}",
                        b.components.len(),
                        chart.dim()
                    )));
                }
                let comps: Vec<&str> = b.components.iter().map(String::as_str).collect();
                Some(EmbeddingSpec::from_strings(pc, &comps)?)
            }
        };

        Ok(Problem {
            chart,
            g,
            g_tilde,
            fman: fm,
            pencil,
            qh,
            embedding,
            pencil_error,
            qh_error,
        })
    }
}

fn override_qh(chart: &Chart, q: &mut QHPencilSpec, b: &QhBlock) -> Result<()> {
    if let Some(d) = b.d {
        q.d = d;
    }
    if let Some(d) = b.big_d {
        q.big_d = d;
    }
    if let Some(e) = &b.euler {
        q.euler = vector(chart, "qh.euler", e)?;
    }
    if let Some(u) = &b.unity {
        q.unity = Some(vector(chart, "qh.unity", u)?);
    }
    if let Some(f) = &b.f {
        q.potential = Some(chart.parse(f)?);
    }
    Ok(())
}

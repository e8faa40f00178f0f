//! Sample-point generation and the pointwise execution policy.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::expr::{Expr, ExprError, TapeBuilder};
use crate::geometry::Chart;
use crate::report::{Aggregate, PointWorst};

/// Points where any exclusion or nonzero-guard is smaller than this are rejected.
pub const EXCLUSION_EPS: f64 = 1e-9;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Default)]
pub enum Parallelism {
    #[default]
    Parallel,
    Sequential,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Settings {
    pub seed: u64,
    pub points: usize,
    pub tol: f64,
    pub lambdas: Vec<f64>,
    pub parallelism: Parallelism,
}

pub const DEFAULT_LAMBDAS: [f64; 5] = [-2.0, -0.5, 1.0 / 3.0, 1.0, 3.0];

impl Default for Settings {
    fn default() -> Self {
        Settings {
            seed: 42,
            points: 100,
            tol: 1e-8,
            lambdas: DEFAULT_LAMBDAS.to_vec(),
            parallelism: Parallelism::default(),
        }
    }
}

impl Settings {
    pub fn with_points(mut self, n: usize) -> Self {
        self.points = n;
        self
    }

    pub fn sequential(mut self) -> Self {
        self.parallelism = Parallelism::Sequential;
        self
    }
}

/// Rejection-samples `settings.points` points from the chart box. A point is
/// admitted when every chart exclusion and every expression in `nonzero`
/// evaluates to something of magnitude at least [`EXCLUSION_EPS`].
pub fn sample_points(chart: &Chart, nonzero: &[Expr], settings: &Settings) -> Result<Vec<Vec<f64>>> {
    let mut tb = TapeBuilder::new();
    tb.push_all(chart.exclusions());
    tb.push_all(nonzero);
    let tape = tb.finish();
    let mut rng = ChaCha8Rng::seed_from_u64(settings.seed);
    let mut out = Vec::with_capacity(settings.points);
    let budget = 1000 * settings.points.max(1);
    let mut scratch = Vec::new();
    let mut vals = Vec::new();
    for _ in 0..budget {
        if out.len() == settings.points {
            break;
        }
        let p: Vec<f64> = chart
            .bounds()
            .iter()
            .map(|&(a, b)| rng.random_range(a..b))
            .collect();
        if tape.eval_into(&p, &mut scratch, &mut vals).is_ok()
            && vals.iter().all(|v| v.abs() >= EXCLUSION_EPS)
        {
            out.push(p);
        }
    }
    if out.len() < settings.points {
        return Err(Error::Sampling(format!(
            "only {} of {} admissible points found in the chart box",
            out.len(),
            settings.points
        )));
    }
    Ok(out)
}

/// Maps `f` over the points, preserving order. Runs on the rayon pool when the
/// `parallel` feature is enabled and `mode` asks for it.
pub fn map_points<T, F>(points: &[Vec<f64>], mode: Parallelism, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(&[f64]) -> T + Sync + Send,
{
    #[cfg(feature = "parallel")]
    if mode == Parallelism::Parallel {
        use rayon::prelude::*;
        return points.par_iter().map(|p| f(p)).collect();
    }
    let _ = mode;
    points.iter().map(|p| f(p)).collect()
}

/// Evaluates `k` residual families per point and max-reduces each over the
/// points. `f` returns one [`PointWorst`] per family.
pub fn reduce<F>(points: &[Vec<f64>], mode: Parallelism, k: usize, f: F) -> Vec<Aggregate>
where
    F: Fn(&[f64]) -> std::result::Result<Vec<PointWorst>, ExprError> + Sync + Send,
{
    let per_point = map_points(points, mode, f);
    let mut families: Vec<Vec<std::result::Result<PointWorst, ExprError>>> =
        (0..k).map(|_| Vec::with_capacity(points.len())).collect();
    for r in per_point {
        match r {
            Ok(ws) => {
                debug_assert_eq!(ws.len(), k);
                for (fam, w) in families.iter_mut().zip(ws) {
                    fam.push(Ok(w));
                }
            }
            Err(e) => {
                for fam in families.iter_mut() {
                    fam.push(Err(e.clone()));
                }
            }
        }
    }
    families
        .into_iter()
        .map(|fam| Aggregate::collect(points, fam))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sampling_is_deterministic_and_respects_exclusions() {
        let chart = Chart::new(vec!["x".into(), "y".into()], vec![(-1.0, 1.0), (-1.0, 1.0)])
            .unwrap()
            .with_exclusion_src("x - y")
            .unwrap();
        let s = Settings::default().with_points(50);
        let a = sample_points(&chart, &[], &s).unwrap();
        let b = sample_points(&chart, &[], &s).unwrap();
        assert_eq!(a, b);
        assert!(a.iter().all(|p| (p[0] - p[1]).abs() >= EXCLUSION_EPS));
        assert!(a.iter().all(|p| p.iter().all(|c| (-1.0..1.0).contains(c))));
    }

    #[test]
    fn impossible_guard_is_reported() {
        let chart = Chart::new(vec!["x".into()], vec![(0.0, 1.0)]).unwrap();
        let zero = Expr::zero();
        assert!(matches!(
            sample_points(&chart, &[zero], &Settings::default().with_points(3)),
            Err(Error::Sampling(_))
        ));
    }

    #[test]
    fn both_modes_agree() {
        let pts: Vec<Vec<f64>> = (0..64).map(|i| vec![i as f64]).collect();
        let a = map_points(&pts, Parallelism::Parallel, |p| p[0] * 2.0);
        let b = map_points(&pts, Parallelism::Sequential, |p| p[0] * 2.0);
        assert_eq!(a, b);
    }
}

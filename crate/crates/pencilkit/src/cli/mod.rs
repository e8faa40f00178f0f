//! Problem-file runner behind the `pencilkit` binary.
//!
//! Checks run one after another in a fixed dependency order; each check is
//! data-parallel over its sample points. Dependencies of requested checks are
//! added automatically and a dependent whose prerequisite did not pass is
//! reported as `precondition-failed`.

pub mod corpus;
pub mod problem;

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::time::Instant;

use serde::Serialize;

use crate::circalg::{check_invariance, check_right_symmetry, curvature_circ_residual};
use crate::error::{Error, Result};
use crate::fmanifold::{
    check_algebra, check_curvature_relation, check_ec_identity, check_euler_scaling, check_f_condition,
    check_invariant_metric, check_nijenhuis_euler, check_pencil_degree, check_qh, check_round_trip,
    check_weak_f_condition, check_weak_qh,
};
use crate::geometry::check_killing_identity;
use crate::hamiltonian::{assemble_dn_operator, assemble_pencil_operators, DNOperatorData, OperatorKind};
use crate::pencil::{check_almost_compatible, check_compatible, check_flat_pencil, check_prop_au, check_semisimple};
use crate::report::{CheckReport, Verdict};
use crate::sampling::{sample_points, Parallelism, Settings};
use crate::submanifold::{check_distinguished, check_fman_submanifold, check_induced_compatibility};

pub use problem::{Problem, ProblemFile};

pub const EXIT_PASS: i32 = 0;
pub const EXIT_FAIL: i32 = 1;
pub const EXIT_CONFIG: i32 = 2;
pub const EXIT_INCONSISTENT: i32 = 3;

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum CheckKind {
    AlmostCompatible,
    Compatible,
    FlatPencil,
    PropAu,
    Semisimple,
    Invariance,
    RightSymmetry,
    CurvatureCirc,
    DnOperator,
    BiHamiltonian,
    Algebra,
    InvariantMetric,
    EulerScaling,
    WeakFCondition,
    FCondition,
    NijenhuisEuler,
    KillingIdentity,
    PencilDegree,
    RoundTrip,
    EcIdentity,
    CurvatureRelation,
    WeakQh,
    Qh,
    Distinguished,
    InducedCompatibility,
    FmanSubmanifold,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
enum Needs {
    Pencil,
    Metric,
    FMan,
    EulerData,
    Qh,
    PencilEmbedding,
    FManEmbedding,
}

impl CheckKind {
    /// Declaration order, which is also a valid execution order.
    pub const ALL: [CheckKind; 26] = [
        CheckKind::AlmostCompatible,
        CheckKind::Compatible,
        CheckKind::FlatPencil,
        CheckKind::PropAu,
        CheckKind::Semisimple,
        CheckKind::Invariance,
        CheckKind::RightSymmetry,
        CheckKind::CurvatureCirc,
        CheckKind::DnOperator,
        CheckKind::BiHamiltonian,
        CheckKind::Algebra,
        CheckKind::InvariantMetric,
        CheckKind::EulerScaling,
        CheckKind::WeakFCondition,
        CheckKind::FCondition,
        CheckKind::NijenhuisEuler,
        CheckKind::KillingIdentity,
        CheckKind::PencilDegree,
        CheckKind::RoundTrip,
        CheckKind::EcIdentity,
        CheckKind::CurvatureRelation,
        CheckKind::WeakQh,
        CheckKind::Qh,
        CheckKind::Distinguished,
        CheckKind::InducedCompatibility,
        CheckKind::FmanSubmanifold,
    ];

    pub fn name(self) -> &'static str {
        use CheckKind::*;
        match self {
            AlmostCompatible => "almost-compatible",
            Compatible => "compatible",
            FlatPencil => "flat-pencil",
            PropAu => "prop-au",
            Semisimple => "semisimple",
            Invariance => "invariance",
            RightSymmetry => "right-symmetry",
            CurvatureCirc => "curvature-circ",
            DnOperator => "dn-operator",
            BiHamiltonian => "bi-hamiltonian",
            Algebra => "algebra",
            InvariantMetric => "invariant-metric",
            EulerScaling => "euler-scaling",
            WeakFCondition => "weak-f-condition",
            FCondition => "f-condition",
            NijenhuisEuler => "nijenhuis-euler",
            KillingIdentity => "killing-identity",
            PencilDegree => "pencil-degree",
            RoundTrip => "round-trip",
            EcIdentity => "ec-identity",
            CurvatureRelation => "curvature-relation",
            WeakQh => "weak-qh",
            Qh => "qh",
            Distinguished => "distinguished",
            InducedCompatibility => "induced-compatibility",
            FmanSubmanifold => "fman-submanifold",
        }
    }

    /// Accepts `almost-compatible` and `almost_compatible`.
    pub fn from_name(s: &str) -> Option<CheckKind> {
        let s = s.trim().replace('_', "-");
        CheckKind::ALL.into_iter().find(|c| c.name() == s)
    }

    pub fn dependencies(self) -> &'static [CheckKind] {
        use CheckKind::*;
        match self {
            Compatible | PropAu | RightSymmetry | CurvatureCirc => &[AlmostCompatible],
            WeakQh | Qh => &[Compatible],
            WeakFCondition | RoundTrip => &[Algebra],
            FCondition | FmanSubmanifold => &[WeakFCondition],
            EcIdentity => &[Algebra, InvariantMetric, EulerScaling],
            CurvatureRelation => &[WeakFCondition, EulerScaling],
            InducedCompatibility => &[Compatible, Distinguished],
            _ => &[],
        }
    }

    fn needs(self) -> Needs {
        use CheckKind::*;
        match self {
            AlmostCompatible | Compatible | FlatPencil | PropAu | Semisimple | Invariance | RightSymmetry
            | CurvatureCirc | BiHamiltonian => Needs::Pencil,
            DnOperator => Needs::Metric,
            Algebra | InvariantMetric | EulerScaling | WeakFCondition | FCondition | NijenhuisEuler
            | PencilDegree | RoundTrip | EcIdentity | CurvatureRelation => Needs::FMan,
            KillingIdentity => Needs::EulerData,
            WeakQh | Qh => Needs::Qh,
            Distinguished | InducedCompatibility => Needs::PencilEmbedding,
            FmanSubmanifold => Needs::FManEmbedding,
        }
    }
}

/// Command-line values that replace the file's sampling block.
#[derive(Clone, Debug, Default)]
pub struct Overrides {
    pub points: Option<usize>,
    pub seed: Option<u64>,
    pub tol: Option<f64>,
    pub lambdas: Option<Vec<f64>>,
    pub sequential: bool,
    pub timings: bool,
}

impl Overrides {
    pub fn apply(&self, mut s: Settings) -> Settings {
        if let Some(x) = self.points {
            s.points = x;
        }
        if let Some(x) = self.seed {
            s.seed = x;
        }
        if let Some(x) = self.tol {
            s.tol = x;
        }
        if let Some(x) = &self.lambdas {
            s.lambdas = x.clone();
        }
        if self.sequential {
            s.parallelism = Parallelism::Sequential;
        }
        s
    }
}

/// Printed components of a DN operator plus their values at one sample.
#[derive(Clone, Debug, Serialize)]
pub struct OperatorExport {
    pub metric: String,
    pub kind: &'static str,
    pub curvature_norm: f64,
    pub g: Vec<String>,
    pub b: Vec<String>,
    pub sample_point: Vec<f64>,
    pub g_values: Vec<f64>,
    pub b_values: Vec<f64>,
}

#[derive(Clone, Debug, Serialize)]
pub struct RunReport {
    pub problem: Option<String>,
    pub seed: u64,
    pub points: usize,
    pub tol: f64,
    pub lambdas: Vec<f64>,
    pub requested: Vec<String>,
    pub reports: Vec<CheckReport>,
    pub operators: Vec<OperatorExport>,
}

impl RunReport {
    pub fn exit_code(&self) -> i32 {
        if self.reports.iter().any(|r| !r.consistent) {
            EXIT_INCONSISTENT
        } else if self.reports.iter().all(|r| r.verdict.is_pass()) {
            EXIT_PASS
        } else {
            EXIT_FAIL
        }
    }

    pub fn get(&self, check: &str) -> Option<&CheckReport> {
        self.reports.iter().find(|r| r.check == check)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }

    pub fn render_text(&self) -> String {
        let mut out = String::new();
        if let Some(name) = &self.problem {
            let _ = writeln!(out, "problem {name}");
        }
        let _ = writeln!(
            out,
            "seed {}  points {}  tol {:e}  lambdas {:?}",
            self.seed, self.points, self.tol, self.lambdas
        );
        for r in &self.reports {
            let _ = write!(out, "{:<24} {:<20} residual {:.3e}", r.check, r.verdict.as_str(), r.residual);
            if let Some(ms) = r.millis {
                let _ = write!(out, "  {ms} ms");
            }
            if !r.consistent {
                let _ = write!(out, "  INCONSISTENT");
            }
            out.push('\n');
            for s in &r.sub_verdicts {
                let _ = writeln!(out, "    {:<32} {:<20} {:.3e}", s.name, s.verdict.as_str(), s.residual);
            }
            if r.verdict != Verdict::Pass {
                for w in &r.witnesses {
                    let _ = writeln!(out, "    witness {:?}: {}", w.point, w.detail);
                }
            }
            for n in &r.notes {
                let _ = writeln!(out, "    note: {n}");
            }
        }
        for op in &self.operators {
            let _ = writeln!(out, "operator of {} ({}), |R| = {:.3e}", op.metric, op.kind, op.curvature_norm);
        }
        out
    }
}

fn require(p: &Problem, file: &ProblemFile, check: CheckKind) -> Result<()> {
    let missing = |what: &str| Err(Error::Config(format!("check {} needs {what}", check.name())));
    let pencil_source = (file.g.is_some() && file.g_tilde.is_some()) || file.fman.is_some();
    match check.needs() {
        Needs::Pencil if !pencil_source => missing("g and g_tilde blocks or an fman block"),
        Needs::Metric if file.g.is_none() && !pencil_source => missing("a g block"),
        Needs::FMan if p.fman.is_none() => missing("an fman block"),
        Needs::EulerData if file.fman.is_none() && file.qh.is_none() => missing("an fman or qh block"),
        Needs::Qh if file.qh.is_none() && file.fman.is_none() => missing("a qh or fman block"),
        Needs::PencilEmbedding if !pencil_source || p.embedding.is_none() => {
            missing("a pencil and an embedding block")
        }
        Needs::FManEmbedding if p.fman.is_none() || p.embedding.is_none() => {
            missing("an fman block and an embedding block")
        }
        _ => Ok(()),
    }
}

fn export(metric: &str, d: &DNOperatorData, p: &Problem, s: &Settings) -> OperatorExport {
    let names = p.chart.names();
    let show = |v: &[crate::expr::Expr]| v.iter().map(|e| e.display(names).to_string()).collect::<Vec<_>>();
    let probe = Settings {
        points: 1,
        ..s.clone()
    };
    let point = sample_points(&p.chart, &[], &probe)
        .ok()
        .and_then(|v| v.into_iter().next())
        .unwrap_or_default();
    let eval = |v: &[crate::expr::Expr]| v.iter().map(|e| e.evaluate(&point).unwrap_or(f64::NAN)).collect();
    OperatorExport {
        metric: metric.to_string(),
        kind: match d.kind {
            OperatorKind::Local => "local",
            OperatorKind::NonlocalRequired => "nonlocal-required",
        },
        curvature_norm: d.curvature_norm,
        g: show(d.g()),
        b: show(d.b()),
        g_values: eval(d.g()),
        b_values: eval(d.b()),
        sample_point: point,
    }
}

struct Runner<'a> {
    p: &'a Problem,
    s: &'a Settings,
    operators: Vec<OperatorExport>,
}

impl Runner<'_> {
    fn unavailable(&self, check: CheckKind) -> Option<CheckReport> {
        let why = match check.needs() {
            Needs::Pencil | Needs::PencilEmbedding if self.p.pencil.is_none() => self.p.pencil_error.clone(),
            Needs::Qh if self.p.qh.is_none() => self.p.qh_error.clone(),
            _ => None,
        };
        why.map(|w| CheckReport::precondition_failed(check.name(), w))
    }

    fn run(&mut self, check: CheckKind) -> CheckReport {
        use CheckKind::*;
        if let Some(r) = self.unavailable(check) {
            return r;
        }
        let (p, s) = (self.p, self.s);
        let pencil = || p.pencil.as_ref().expect("pencil checked by require");
        let fman = || p.fman.as_ref().expect("fman checked by require");
        let qh = || p.qh.as_ref().expect("qh checked by require");
        let emb = || p.embedding.as_ref().expect("embedding checked by require");
        match check {
            AlmostCompatible => check_almost_compatible(pencil(), s),
            Compatible => check_compatible(pencil(), s),
            FlatPencil => check_flat_pencil(pencil(), s),
            PropAu => check_prop_au(pencil(), s),
            Semisimple => check_semisimple(pencil(), s),
            Invariance => check_invariance(pencil(), s),
            RightSymmetry => check_right_symmetry(pencil(), s),
            CurvatureCirc => curvature_circ_residual(pencil(), s),
            DnOperator => {
                let g = match (&p.g, &p.pencil) {
                    (Some(g), _) => g.clone(),
                    (None, Some(q)) => q.g().clone(),
                    (None, None) => {
                        return CheckReport::precondition_failed(
                            check.name(),
                            p.pencil_error.clone().unwrap_or_default(),
                        )
                    }
                };
                match assemble_dn_operator(&p.chart, &g, s) {
                    Ok(d) => {
                        self.operators.push(export("g", &d, p, s));
                        d.report
                    }
                    Err(e) => CheckReport::precondition_failed(check.name(), e.to_string()),
                }
            }
            BiHamiltonian => match assemble_pencil_operators(pencil(), s) {
                Ok(ops) => {
                    self.operators.push(export("g", &ops.g, p, s));
                    self.operators.push(export("g-tilde", &ops.g_tilde, p, s));
                    ops.report()
                }
                Err(e) => CheckReport::precondition_failed(check.name(), e.to_string()),
            },
            Algebra => check_algebra(fman(), s),
            InvariantMetric => check_invariant_metric(fman(), s),
            EulerScaling => check_euler_scaling(fman(), s),
            WeakFCondition => check_weak_f_condition(fman(), s),
            FCondition => check_f_condition(fman(), s),
            NijenhuisEuler => check_nijenhuis_euler(fman(), s),
            KillingIdentity => match (&p.fman, &p.qh) {
                (Some(f), _) => check_killing_identity(&p.chart, f.g_tilde(), f.euler(), f.big_d(), s),
                (None, Some(q)) => check_killing_identity(&p.chart, q.pencil.g_tilde(), &q.euler, q.big_d, s),
                (None, None) => CheckReport::precondition_failed(check.name(), "no Euler data"),
            },
            PencilDegree => check_pencil_degree(fman(), s),
            RoundTrip => check_round_trip(fman(), s),
            EcIdentity => check_ec_identity(fman(), s),
            CurvatureRelation => check_curvature_relation(fman(), s),
            WeakQh => check_weak_qh(qh(), s),
            Qh => check_qh(qh(), s),
            Distinguished => check_distinguished(pencil(), emb(), s),
            InducedCompatibility => check_induced_compatibility(pencil(), emb(), s),
            FmanSubmanifold => check_fman_submanifold(fman(), emb(), s),
        }
    }
}

/// Parses, builds and runs a problem. Errors are configuration errors.
pub fn run_source(src: &str, ov: &Overrides) -> Result<RunReport> {
    let file = ProblemFile::parse(src)?;
    let s = ov.apply(file.settings());
    if s.points == 0 {
        return Err(Error::Config("points must be positive".into()));
    }
    if file.checks.is_empty() {
        return Err(Error::Config("checks list is empty".into()));
    }
    let mut requested = Vec::new();
    for c in &file.checks {
        let k = CheckKind::from_name(c).ok_or_else(|| Error::Config(format!("unknown check {c:?}")))?;
        if !requested.contains(&k) {
            requested.push(k);
        }
    }
    let problem = Problem::build(&file, &s)?;

    let mut todo = std::collections::BTreeSet::new();
    let mut stack = requested.clone();
    while let Some(k) = stack.pop() {
        if todo.insert(k) {
            stack.extend_from_slice(k.dependencies());
        }
    }
    for &k in &todo {
        require(&problem, &file, k)?;
    }

    let mut runner = Runner {
        p: &problem,
        s: &s,
        operators: Vec::new(),
    };
    let mut done: BTreeMap<CheckKind, CheckReport> = BTreeMap::new();
    for &k in &todo {
        let blocked = k
            .dependencies()
            .iter()
            .find(|d| done.get(d).is_some_and(|r| !r.verdict.is_pass()));
        let start = Instant::now();
        let mut r = match blocked {
            Some(d) => CheckReport::precondition_failed(
                k.name(),
                format!("requires {} which is {}", d.name(), done[d].verdict.as_str()),
            ),
            None => runner.run(k),
        };
        r.millis = ov.timings.then(|| start.elapsed().as_millis() as u64);
        done.insert(k, r);
    }

    Ok(RunReport {
        problem: file.name.clone(),
        seed: s.seed,
        points: s.points,
        tol: s.tol,
        lambdas: s.lambdas.clone(),
        requested: requested.iter().map(|k| k.name().to_string()).collect(),
        reports: done.into_values().collect(),
        operators: runner.operators,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    const CONSTANT: &str = r#"
checks = ["flat-pencil", "compatible"]
[chart]
coords = ["x1", "x2"]
box = [[-1, 1], [-1, 1]]
[g]
variance = "contravariant"
matrix = [["1", "0"], ["0", "1"]]
[g_tilde]
variance = "contravariant"
matrix = [["2", "1"], ["1", "3"]]
[sampling]
points = 20
"#;

    #[test]
    fn dependencies_are_added_in_order() {
        let r = run_source(CONSTANT, &Overrides::default()).unwrap();
        let names: Vec<&str> = r.reports.iter().map(|r| r.check.as_str()).collect();
        assert_eq!(names, ["almost-compatible", "compatible", "flat-pencil"]);
        assert_eq!(r.exit_code(), EXIT_PASS);
        assert!(r.reports.iter().all(|r| r.millis.is_none()));
    }

    #[test]
    fn dependents_of_failures_are_blocked() {
        let src = CONSTANT.replace(r#"[["2", "1"], ["1", "3"]]"#, r#"[["x2", "0"], ["0", "x1"]]"#).replace(
            "[[-1, 1], [-1, 1]]",
            "[[1, 2], [1, 2]]",
        );
        let r = run_source(&src, &Overrides::default()).unwrap();
        assert_eq!(r.get("almost-compatible").unwrap().verdict, Verdict::Fail);
        assert_eq!(r.get("compatible").unwrap().verdict, Verdict::PreconditionFailed);
        assert_eq!(r.exit_code(), EXIT_FAIL);
    }

    #[test]
    fn missing_blocks_are_config_errors() {
        let src = "checks = [\"compatible\"]\n[chart]\ncoords = [\"x\"]\nbox = [[0, 1]]\n";
        assert!(matches!(run_source(src, &Overrides::default()), Err(Error::Config(_))));
        let bad = CONSTANT.replace("flat-pencil", "flatness");
        assert!(matches!(run_source(&bad, &Overrides::default()), Err(Error::Config(_))));
    }

    #[test]
    fn overrides_replace_sampling() {
        let ov = Overrides {
            points: Some(7),
            seed: Some(3),
            lambdas: Some(vec![2.0, 5.0, 7.0]),
            ..Default::default()
        };
        let r = run_source(CONSTANT, &ov).unwrap();
        assert_eq!((r.points, r.seed), (7, 3));
        assert_eq!(r.get("flat-pencil").unwrap().lambdas, vec![2.0, 5.0, 7.0]);
    }

    #[test]
    fn names_accept_underscores() {
        assert_eq!(CheckKind::from_name("almost_compatible"), Some(CheckKind::AlmostCompatible));
        for k in CheckKind::ALL {
            assert_eq!(CheckKind::from_name(k.name()), Some(k));
            assert!(k.dependencies().iter().all(|d| *d < k));
        }
    }
}

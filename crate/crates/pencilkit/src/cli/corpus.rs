//! Bundled problem files.

use super::{EXIT_FAIL, EXIT_PASS};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Expected {
    Pass,
    Fail,
    /// The truth value is computed; only agreement of equivalent verdicts is expected.
    Agree,
}

impl Expected {
    pub fn admits(self, exit: i32) -> bool {
        match self {
            Expected::Pass => exit == EXIT_PASS,
            Expected::Fail => exit == EXIT_FAIL,
            Expected::Agree => exit == EXIT_PASS || exit == EXIT_FAIL,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Expected::Pass => "pass",
            Expected::Fail => "fail",
            Expected::Agree => "agree",
        }
    }
}

#[derive(Clone, Copy, Debug)]
pub struct CorpusEntry {
    pub name: &'static str,
    pub source: &'static str,
    pub expected: Expected,
    pub outcome: &'static str,
    pub exercises: &'static str,
}

macro_rules! entry {
    ($name:literal, $expected:expr, $outcome:literal, $exercises:literal) => {
        CorpusEntry {
            name: $name,
            source: include_str!(concat!("../../corpus/", $name, ".toml")),
            expected: $expected,
            outcome: $outcome,
            exercises: $exercises,
        }
    };
}

pub const CORPUS: &[CorpusEntry] = &[
    entry!(
        "constant-pair",
        Expected::Pass,
        "flat pencil, local bi-Hamiltonian",
        "constant metrics form a flat pencil"
    ),
    entry!(
        "semisimple-diag-2d",
        Expected::Pass,
        "compatible",
        "semisimple almost-compatible pairs are compatible"
    ),
    entry!(
        "crossed-diagonal-2d",
        Expected::Fail,
        "not almost-compatible, Nijenhuis witness",
        "almost-compatibility via the Nijenhuis torsion of A"
    ),
    entry!(
        "conformal-pair",
        Expected::Agree,
        "three compatibility verdicts agree",
        "equivalent forms of compatibility"
    ),
    entry!(
        "sphere-euclidean",
        Expected::Fail,
        "not a flat pencil, curvature witness",
        "flat pencils"
    ),
    entry!(
        "polar-plane-dn",
        Expected::Pass,
        "local operator, b from the polar Christoffel symbols",
        "hydrodynamic Poisson brackets of flat metrics"
    ),
    entry!(
        "sphere-dn",
        Expected::Fail,
        "nonlocal tail required, nonzero curvature",
        "hydrodynamic Poisson brackets need flat metrics"
    ),
    entry!(
        "p1-frobenius",
        Expected::Pass,
        "flat pencil + Frobenius",
        "flatness of the built metric and total symmetry of the covariant derivative of c"
    ),
    entry!(
        "p1-regularity",
        Expected::Fail,
        "T is singular",
        "regularity of the quasi-homogeneous pencil"
    ),
    entry!(
        "a2-frobenius",
        Expected::Pass,
        "quasi-homogeneous flat pencil, round trip exact",
        "correspondence between F-manifolds and regular quasi-homogeneous pencils"
    ),
    entry!(
        "egorov-3d",
        Expected::Agree,
        "curvature relation consistent",
        "curvature of the built metric against the F-condition on a curved metric"
    ),
    entry!(
        "semisimple-3d-plane",
        Expected::Pass,
        "distinguished, induced pencil compatible",
        "induced pencils on distinguished submanifolds"
    ),
    entry!(
        "idempotent-plane",
        Expected::Pass,
        "closure hypotheses hold, induced pencil compatible",
        "F-submanifolds inherit compatible pencils"
    ),
    entry!(
        "idempotent-tilted",
        Expected::Fail,
        "E is not tangent, witness reported",
        "closure hypotheses for F-submanifolds"
    ),
];

pub fn find(name: &str) -> Option<&'static CorpusEntry> {
    CORPUS.iter().find(|e| e.name == name)
}

pub fn catalog() -> String {
    let mut out = String::new();
    for e in CORPUS {
        out.push_str(&format!(
            "{:<22} expect {:<6} {}\n{:<22} exercises {}\n",
            e.name,
            e.expected.as_str(),
            e.outcome,
            "",
            e.exercises
        ));
    }
    out
}

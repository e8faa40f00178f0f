//! Check reports and residual bookkeeping.
//!
//! Every identity is evaluated as a sum of terms at a sample point; its
//! residual is `|sum| / (1 + largest term magnitude)`. Per-point maxima are
//! reduced to a global maximum with the first maximal point as witness, so the
//! result does not depend on evaluation order.

use serde::Serialize;

use crate::expr::ExprError;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Verdict {
    Pass,
    Fail,
    PreconditionFailed,
    Skipped,
}

impl Verdict {
    pub fn from_residual(r: f64, tol: f64) -> Verdict {
        if r <= tol {
            Verdict::Pass
        } else {
            Verdict::Fail
        }
    }

    pub fn is_pass(self) -> bool {
        self == Verdict::Pass
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Verdict::Pass => "pass",
            Verdict::Fail => "fail",
            Verdict::PreconditionFailed => "precondition-failed",
            Verdict::Skipped => "skipped",
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Witness {
    pub point: Vec<f64>,
    pub residual: f64,
    pub detail: String,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SubVerdict {
    pub name: String,
    pub verdict: Verdict,
    pub residual: f64,
    pub witness: Option<Witness>,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct CheckReport {
    pub check: String,
    pub verdict: Verdict,
    pub residual: f64,
    pub witnesses: Vec<Witness>,
    pub sub_verdicts: Vec<SubVerdict>,
    /// False when sub-verdicts that should be equivalent disagree.
    pub consistent: bool,
    pub lambdas: Vec<f64>,
    pub notes: Vec<String>,
    pub millis: Option<u64>,
}

impl CheckReport {
    pub fn new(check: &str) -> Self {
        CheckReport {
            check: check.to_string(),
            verdict: Verdict::Skipped,
            residual: 0.0,
            witnesses: Vec::new(),
            sub_verdicts: Vec::new(),
            consistent: true,
            lambdas: Vec::new(),
            notes: Vec::new(),
            millis: None,
        }
    }

    pub fn precondition_failed(check: &str, why: impl Into<String>) -> Self {
        let mut r = CheckReport::new(check);
        r.verdict = Verdict::PreconditionFailed;
        r.notes.push(why.into());
        r
    }

    /// Single-identity report.
    pub fn from_aggregate(check: &str, agg: &Aggregate, tol: f64) -> Self {
        let mut r = CheckReport::new(check);
        r.verdict = agg.verdict(tol);
        r.residual = agg.value;
        r.witnesses.extend(agg.witness.clone());
        r
    }

    pub fn note(&mut self, s: impl Into<String>) {
        self.notes.push(s.into());
    }

    pub fn push_sub(&mut self, s: SubVerdict) {
        self.sub_verdicts.push(s);
    }

    pub fn sub(&self, name: &str) -> Option<&SubVerdict> {
        self.sub_verdicts.iter().find(|s| s.name == name)
    }

    /// Overall verdict: pass iff every listed sub-verdict passes. The worst
    /// residual and its witness are lifted to the top level.
    pub fn conjunction(&mut self, names: &[&str]) {
        self.combine(names, false);
    }

    /// Overall verdict for sub-verdicts that must agree: their common value,
    /// or fail with `consistent = false` when they differ.
    pub fn equivalence(&mut self, names: &[&str]) {
        self.combine(names, true);
    }

    fn combine(&mut self, names: &[&str], must_agree: bool) {
        let subs: Vec<SubVerdict> = names.iter().filter_map(|n| self.sub(n).cloned()).collect();
        let mut verdict = Verdict::Pass;
        let mut worst: Option<&SubVerdict> = None;
        for s in &subs {
            if s.verdict != Verdict::Pass {
                verdict = if verdict == Verdict::Pass { s.verdict } else { verdict };
            }
            if worst.is_none_or(|w| s.residual > w.residual) {
                worst = Some(s);
            }
        }
        if must_agree && subs.windows(2).any(|w| w[0].verdict != w[1].verdict) {
            self.consistent = false;
            verdict = Verdict::Fail;
        }
        let (residual, witnesses) = match worst {
            Some(w) => (w.residual, w.witness.iter().cloned().collect()),
            None => (0.0, Vec::new()),
        };
        self.verdict = verdict;
        self.residual = residual;
        self.witnesses = witnesses;
        for s in &subs {
            if s.verdict == Verdict::Fail {
                if let Some(w) = &s.witness {
                    if !self.witnesses.contains(w) {
                        self.witnesses.push(w.clone());
                    }
                }
            }
        }
    }
}

/// Accumulates the terms of one identity at one point.
#[derive(Clone, Copy, Debug, Default)]
pub struct Terms {
    sum: f64,
    scale: f64,
}

impl Terms {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn push(&mut self, v: f64) {
        self.sum += v;
        self.scale = self.scale.max(v.abs());
    }

    /// Adds a term whose own rounding scale is larger than its value, such as
    /// a product involving an entry that was itself a cancelling sum.
    pub fn push_scaled(&mut self, v: f64, scale: f64) {
        self.sum += v;
        self.scale = self.scale.max(scale.abs()).max(v.abs());
    }

    pub fn value(&self) -> f64 {
        self.sum
    }

    pub fn scale(&self) -> f64 {
        self.scale
    }

    pub fn residual(&self) -> f64 {
        normalized(self.sum, self.scale)
    }
}

pub fn normalized(v: f64, scale: f64) -> f64 {
    let r = v.abs() / (1.0 + scale.abs());
    if r.is_nan() {
        f64::INFINITY
    } else {
        r
    }
}

/// Residual of `lhs = rhs`.
pub fn rel(lhs: f64, rhs: f64) -> f64 {
    normalized(lhs - rhs, lhs.abs().max(rhs.abs()))
}

/// Largest residual seen at one point, with a description of where.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct PointWorst {
    pub value: f64,
    pub detail: String,
}

impl PointWorst {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn offer(&mut self, r: f64, detail: impl FnOnce() -> String) {
        let r = if r.is_nan() { f64::INFINITY } else { r };
        if r > self.value || (self.detail.is_empty() && r >= self.value) {
            self.value = r;
            self.detail = detail();
        }
    }

    pub fn offer_terms(&mut self, t: &Terms, detail: impl FnOnce() -> String) {
        self.offer(t.residual(), detail)
    }

    pub fn merge(&mut self, other: PointWorst) {
        if other.value > self.value || (self.detail.is_empty() && !other.detail.is_empty()) {
            *self = other;
        }
    }
}

/// Max-reduction over sample points.
#[derive(Clone, Debug, PartialEq)]
pub struct Aggregate {
    pub value: f64,
    pub witness: Option<Witness>,
}

impl Aggregate {
    pub fn empty() -> Self {
        Aggregate {
            value: 0.0,
            witness: None,
        }
    }

    pub fn collect(points: &[Vec<f64>], per_point: Vec<Result<PointWorst, ExprError>>) -> Self {
        let mut agg = Aggregate::empty();
        for (p, r) in points.iter().zip(per_point) {
            let (value, detail) = match r {
                Ok(w) => (w.value, w.detail),
                Err(e) => (f64::INFINITY, format!("evaluation failed: {e}")),
            };
            if agg.witness.is_none() || value > agg.value {
                agg.value = value;
                agg.witness = Some(Witness {
                    point: p.clone(),
                    residual: value,
                    detail,
                });
            }
        }
        agg
    }

    pub fn merge(&mut self, other: Aggregate) {
        if self.witness.is_none() || other.value > self.value {
            *self = other;
        }
    }

    pub fn verdict(&self, tol: f64) -> Verdict {
        Verdict::from_residual(self.value, tol)
    }

    pub fn sub(&self, name: &str, tol: f64) -> SubVerdict {
        SubVerdict {
            name: name.to_string(),
            verdict: self.verdict(tol),
            residual: self.value,
            witness: self.witness.clone(),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn normalization() {
        let mut t = Terms::new();
        t.push(1e6);
        t.push(-1e6);
        t.push(1e-3);
        assert!((t.residual() - 1e-3 / (1.0 + 1e6)).abs() < 1e-18);
        assert_eq!(normalized(f64::NAN, 1.0), f64::INFINITY);
    }

    #[test]
    fn first_maximum_wins() {
        let pts = vec![vec![0.0], vec![1.0], vec![2.0]];
        let w = |v: f64| {
            Ok(PointWorst {
                value: v,
                detail: format!("{v}"),
            })
        };
        let agg = Aggregate::collect(&pts, vec![w(0.5), w(2.0), w(2.0)]);
        assert_eq!(agg.value, 2.0);
        assert_eq!(agg.witness.unwrap().point, vec![1.0]);
    }

    #[test]
    fn disagreeing_equivalence_is_flagged() {
        let mut r = CheckReport::new("x");
        r.push_sub(Aggregate::empty().sub("a", 1e-8));
        r.push_sub(SubVerdict {
            name: "b".into(),
            verdict: Verdict::Fail,
            residual: 1.0,
            witness: None,
        });
        r.equivalence(&["a", "b"]);
        assert!(!r.consistent);
        assert_eq!(r.verdict, Verdict::Fail);
    }
}

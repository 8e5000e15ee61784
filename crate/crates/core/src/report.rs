//! Structured pass/fail evidence shared by every property checker.

use std::fmt;

use serde::{Deserialize, Serialize};

pub const MAX_WITNESSES: usize = 10;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Verdict {
    Pass,
    Fail,
    /// An existential search ran out of budget; no witness is not a disproof.
    Inconclusive,
}

impl fmt::Display for Verdict {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Verdict::Pass => "pass",
            Verdict::Fail => "fail",
            Verdict::Inconclusive => "inconclusive",
        })
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Witness {
    pub input: Vec<f64>,
    pub detail: String,
}

impl Witness {
    pub fn new(input: Vec<f64>, detail: impl Into<String>) -> Self {
        Witness {
            input,
            detail: detail.into(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct VerificationReport {
    pub checker: String,
    pub samples: usize,
    pub skipped: usize,
    pub violations: usize,
    pub worst_violation: f64,
    pub tolerance: f64,
    pub verdict: Verdict,
    #[serde(default)]
    pub notes: Vec<String>,
    #[serde(default)]
    pub witnesses: Vec<Witness>,
    #[serde(skip)]
    violation_verdict: Option<Verdict>,
}

impl VerificationReport {
    pub fn new(checker: impl Into<String>, tolerance: f64) -> Self {
        VerificationReport {
            checker: checker.into(),
            samples: 0,
            skipped: 0,
            violations: 0,
            worst_violation: 0.0,
            tolerance,
            verdict: Verdict::Pass,
            notes: Vec::new(),
            witnesses: Vec::new(),
            violation_verdict: None,
        }
    }

    /// Records one sample. `violation` above the tolerance counts as a
    /// failure; the witness closure only runs for failures.
    pub fn record(&mut self, violation: f64, witness: impl FnOnce() -> Witness) {
        self.samples += 1;
        let v = if violation.is_nan() { f64::INFINITY } else { violation };
        if v > self.worst_violation {
            self.worst_violation = v;
        }
        if v > self.tolerance {
            self.violations += 1;
            if self.witnesses.len() < MAX_WITNESSES {
                self.witnesses.push(witness());
            }
        }
    }

    pub fn record_bool(&mut self, ok: bool, witness: impl FnOnce() -> Witness) {
        self.record(if ok { 0.0 } else { 1.0 }, witness);
    }

    pub fn skip(&mut self, reason: &str) {
        self.skipped += 1;
        if !self.notes.iter().any(|n| n.starts_with("skipped: ") && n.ends_with(reason)) {
            self.notes.push(format!("skipped: {reason}"));
        }
    }

    pub fn note(&mut self, note: impl Into<String>) {
        self.notes.push(note.into());
    }

    /// Violations from now on yield `inconclusive` rather than `fail`.
    pub fn existential(mut self) -> Self {
        self.violation_verdict = Some(Verdict::Inconclusive);
        self
    }

    pub fn force_fail(&mut self) {
        self.violation_verdict = Some(Verdict::Fail);
    }

    /// Folds a sub-report in; the combined verdict is the worst of both.
    pub fn absorb(&mut self, other: &VerificationReport) {
        self.samples += other.samples;
        self.skipped += other.skipped;
        self.violations += other.violations;
        self.worst_violation = self.worst_violation.max(other.worst_violation);
        for w in &other.witnesses {
            if self.witnesses.len() < MAX_WITNESSES {
                self.witnesses.push(w.clone());
            }
        }
        for n in &other.notes {
            self.notes.push(format!("{}: {n}", other.checker));
        }
        if other.verdict == Verdict::Fail {
            self.violation_verdict = Some(Verdict::Fail);
        } else if other.verdict == Verdict::Inconclusive && self.violation_verdict.is_none() {
            self.violation_verdict = Some(Verdict::Inconclusive);
        }
    }

    pub fn finish(mut self) -> Self {
        self.verdict = if self.violations == 0 {
            Verdict::Pass
        } else {
            self.violation_verdict.unwrap_or(Verdict::Fail)
        };
        self
    }

    pub fn passed(&self) -> bool {
        self.verdict == Verdict::Pass
    }

    pub fn summary_line(&self) -> String {
        format!(
            "{:<40} {:<12} samples={:<7} violations={:<5} worst={:.3e} tol={:.1e}",
            self.checker, self.verdict, self.samples, self.violations, self.worst_violation, self.tolerance
        )
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn verdict_tracks_violations() {
        let mut r = VerificationReport::new("x", 1e-12);
        r.record(0.0, || unreachable!());
        r.record(1e-13, || unreachable!());
        let r = r.finish();
        assert!(r.passed());
        assert!(r.witnesses.is_empty());

        let mut r = VerificationReport::new("x", 1e-12);
        for _ in 0..20 {
            r.record(1.0, || Witness::new(vec![1.0], "bad"));
        }
        let r = r.finish();
        assert_eq!(r.verdict, Verdict::Fail);
        assert_eq!(r.violations, 20);
        assert_eq!(r.witnesses.len(), MAX_WITNESSES);
    }

    #[test]
    fn existential_reports_are_inconclusive() {
        let mut r = VerificationReport::new("search", 0.0).existential();
        r.record_bool(false, || Witness::new(vec![], "no witness"));
        assert_eq!(r.finish().verdict, Verdict::Inconclusive);
    }

    #[test]
    fn nan_counts_as_violation() {
        let mut r = VerificationReport::new("x", 1.0);
        r.record(f64::NAN, || Witness::new(vec![], "nan"));
        assert_eq!(r.finish().violations, 1);
    }

    #[test]
    fn toml_round_trip() {
        let mut r = VerificationReport::new("x", 1e-12);
        r.record(2.0, || Witness::new(vec![1.5, -0.25], "w"));
        r.note("hello");
        let r = r.finish();
        let text = toml::to_string(&r).unwrap();
        let back: VerificationReport = toml::from_str(&text).unwrap();
        assert_eq!(back, r);
    }
}

//! Verification report plumbing: named checks with pass/fail state and
//! a JSON rendering that keeps the deterministic payload separate from
//! timing metadata.

use std::time::Instant;

use serde_json::{json, Map, Value};

/// One verified claim. The textual fields are fully determined by the
/// inputs and the seed; only `runtime_ms` varies between runs, and the
/// renderer routes it into the metadata block.
#[derive(Debug, Clone)]
pub struct Check {
    /// Stable machine-readable identifier, unique within a report.
    pub name: String,
    /// The mathematical statement being verified, in plain words.
    pub claim: String,
    /// What the computation is held against.
    pub target: String,
    /// What the library produced.
    pub computed: String,
    /// How closely the two must agree.
    pub tolerance: String,
    pub pass: bool,
    pub runtime_ms: u128,
}

/// Collects checks while timing the gap between consecutive pushes, so
/// each check records roughly the time its computation took.
pub struct CheckList {
    checks: Vec<Check>,
    mark: Instant,
}

impl CheckList {
    pub fn new() -> Self {
        CheckList {
            checks: Vec::new(),
            mark: Instant::now(),
        }
    }

    pub fn push(
        &mut self,
        name: impl Into<String>,
        claim: impl Into<String>,
        target: impl Into<String>,
        computed: impl Into<String>,
        tolerance: impl Into<String>,
        pass: bool,
    ) {
        let now = Instant::now();
        self.checks.push(Check {
            name: name.into(),
            claim: claim.into(),
            target: target.into(),
            computed: computed.into(),
            tolerance: tolerance.into(),
            pass,
            runtime_ms: now.duration_since(self.mark).as_millis(),
        });
        self.mark = now;
    }

    /// Convenience for |computed - target| <= tol checks.
    pub fn push_abs(
        &mut self,
        name: impl Into<String>,
        claim: impl Into<String>,
        target: f64,
        computed: f64,
        tol: f64,
    ) {
        let pass = (computed - target).abs() <= tol;
        self.push(
            name,
            claim,
            target.to_string(),
            computed.to_string(),
            format!("abs {tol:e}"),
            pass,
        );
    }

    pub fn into_checks(self) -> Vec<Check> {
        self.checks
    }
}

impl Default for CheckList {
    fn default() -> Self {
        Self::new()
    }
}

/// A named batch of checks, reported in declaration order.
#[derive(Debug, Clone)]
pub struct GroupOutcome {
    pub name: &'static str,
    pub checks: Vec<Check>,
    pub elapsed_ms: u128,
}

impl GroupOutcome {
    pub fn all_pass(&self) -> bool {
        self.checks.iter().all(|c| c.pass)
    }
}

/// Results of a full verification run.
#[derive(Debug, Clone)]
pub struct VerificationReport {
    pub seed: u64,
    pub groups: Vec<GroupOutcome>,
}

impl VerificationReport {
    pub fn all_pass(&self) -> bool {
        self.groups.iter().all(GroupOutcome::all_pass)
    }

    pub fn total_checks(&self) -> usize {
        self.groups.iter().map(|g| g.checks.len()).sum()
    }

    /// The deterministic part of the report: identical configuration and
    /// seed reproduce these bytes exactly.
    pub fn result_payload(&self) -> Value {
        let groups: Vec<Value> = self
            .groups
            .iter()
            .map(|g| {
                let checks: Vec<Value> = g
                    .checks
                    .iter()
                    .map(|c| {
                        json!({
                            "name": c.name,
                            "claim": c.claim,
                            "target": c.target,
                            "computed": c.computed,
                            "tolerance": c.tolerance,
                            "pass": c.pass,
                        })
                    })
                    .collect();
                json!({ "name": g.name, "all_pass": g.all_pass(), "checks": checks })
            })
            .collect();
        json!({
            "seed": self.seed,
            "all_pass": self.all_pass(),
            "total_checks": self.total_checks(),
            "groups": groups,
        })
    }

    /// Canonical bytes of the deterministic payload, for byte-for-byte
    /// reproducibility comparisons.
    pub fn result_bytes(&self) -> Vec<u8> {
        serde_json::to_vec_pretty(&self.result_payload()).expect("payload has no non-finite numbers")
    }

    /// Timing metadata, kept out of the deterministic payload.
    pub fn meta_payload(&self) -> Value {
        let mut group_ms = Map::new();
        let mut check_ms = Map::new();
        for g in &self.groups {
            group_ms.insert(g.name.to_string(), Value::from(g.elapsed_ms as u64));
            for c in &g.checks {
                check_ms.insert(c.name.clone(), Value::from(c.runtime_ms as u64));
            }
        }
        json!({
            "group_runtimes_ms": group_ms,
            "check_runtimes_ms": check_ms,
            "total_runtime_ms": self.groups.iter().map(|g| g.elapsed_ms).sum::<u128>() as u64,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn absolute_checks_compare_against_their_tolerance() {
        let mut list = CheckList::new();
        list.push_abs("close", "values within tolerance pass", 1.0, 1.0 + 5e-9, 1e-8);
        list.push_abs("far", "values beyond tolerance fail", 1.0, 1.01, 1e-8);
        let checks = list.into_checks();
        assert!(checks[0].pass);
        assert!(!checks[1].pass);
        assert_eq!(checks[1].tolerance, "abs 1e-8");
    }

    fn small_report(runtime_ms: u128) -> VerificationReport {
        let mut list = CheckList::new();
        list.push("one", "a stands for a", "a", "a", "exact", true);
        let mut checks = list.into_checks();
        checks[0].runtime_ms = runtime_ms;
        VerificationReport {
            seed: 5,
            groups: vec![GroupOutcome {
                name: "demo",
                checks,
                elapsed_ms: runtime_ms,
            }],
        }
    }

    #[test]
    fn result_bytes_are_independent_of_timing() {
        let fast = small_report(1);
        let slow = small_report(900);
        assert_eq!(fast.result_bytes(), slow.result_bytes());
        assert_ne!(fast.meta_payload(), slow.meta_payload());
    }

    #[test]
    fn a_failing_check_fails_its_group_and_report() {
        let mut list = CheckList::new();
        list.push("bad", "one differs from two", "1", "2", "exact", false);
        let report = VerificationReport {
            seed: 5,
            groups: vec![GroupOutcome {
                name: "demo",
                checks: list.into_checks(),
                elapsed_ms: 0,
            }],
        };
        assert!(!report.all_pass());
        assert_eq!(report.total_checks(), 1);
        assert!(!report.groups[0].all_pass());
    }
}

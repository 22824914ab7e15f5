//! Bundled invariant suites: fixed-size runs of the checks in
//! [`crate::checks`], reported as records and as a pass/fail table.

use crate::checks::{Check, CRITERIA};
use crate::error::{invalid, Result};
use crate::output::{Record, Status};

/// Suite name, description and the numbered checks it runs.
pub const SUITES: &[(&str, &str, &[u8])] = &[
    (
        "axioms",
        "Jacobi identity, reparametrization, length pseudo-norm, leaf restriction",
        &[1, 5, 6, 7],
    ),
    (
        "flows",
        "flow oracles, conservation laws, group laws of composite flows",
        &[2, 3, 4],
    ),
    (
        "groupoid",
        "lift projection, target fibers, (anti-)morphisms, cutoff displacement",
        &[9, 10],
    ),
    (
        "energy",
        "displacement-energy search on the disk against half its capacity",
        &[8],
    ),
];

pub fn suite_names() -> Vec<&'static str> {
    SUITES.iter().map(|s| s.0).collect()
}

/// Runs every check of the named suite with the given seed.
pub fn run_suite(name: &str, seed: u64) -> Result<Vec<Record>> {
    let (_, _, ids) = SUITES.iter().find(|s| s.0 == name).ok_or_else(|| {
        invalid(format!(
            "unknown suite `{name}` (expected one of {})",
            suite_names().join(", ")
        ))
    })?;
    let id = format!("suite:{name}");
    let mut records = Vec::new();
    for n in *ids {
        let (_, _, check) = CRITERIA.iter().find(|c| c.0 == *n).expect("suite ids are criteria");
        for c in check(seed) {
            records.push(to_record(&id, records.len(), &c));
        }
    }
    Ok(records)
}

fn to_record(id: &str, index: usize, c: &Check) -> Record {
    Record::new(id, index, &c.name)
        .value(c.value)
        .tolerance(c.threshold)
        .status(if c.passed { Status::Pass } else { Status::Fail })
        .note(c.detail.clone())
}

/// Fixed-width pass/fail table.
pub fn table(records: &[Record]) -> String {
    let width = records.iter().map(|r| r.op.len()).max().unwrap_or(5).max(5);
    let mut out = format!(
        "{:<6} {:<width$} {:>12} {:>12}\n",
        "status", "check", "value", "threshold"
    );
    for r in records {
        let num = |v: Option<crate::output::Num>| v.map(|n| format!("{:.3e}", n.0)).unwrap_or_default();
        out.push_str(&format!(
            "{:<6} {:<width$} {:>12} {:>12}\n",
            r.status.as_str(),
            r.op,
            num(r.value),
            num(r.tolerance)
        ));
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn unknown_suite_is_rejected() {
        let e = run_suite("nope", 0).unwrap_err();
        assert_eq!(e.exit_code(), 2);
    }

    #[test]
    fn every_criterion_belongs_to_a_suite() {
        for (n, _, _) in CRITERIA {
            assert!(SUITES.iter().any(|s| s.2.contains(n)), "criterion {n}");
        }
    }
}

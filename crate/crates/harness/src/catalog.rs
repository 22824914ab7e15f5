//! Text for `list-structures`, `list-families` and `describe`.

use std::fmt::Write;

use hoferlab_core::groupoid::{GroupoidRealization, BUILTIN_REALIZATIONS};
use hoferlab_core::poisson::BUILTIN_STRUCTURES;
use hoferlab_core::PoissonStructure;

use crate::error::{invalid, Result};
use crate::scenario::{CANDIDATE_FAMILIES, HAMILTONIAN_FAMILIES, OPS};
use crate::suites::SUITES;

fn rows(out: &mut String, title: &str, items: &[(&str, &str)]) {
    let width = items.iter().map(|i| i.0.len()).max().unwrap_or(0);
    writeln!(out, "{title}:").unwrap();
    for (k, v) in items {
        writeln!(out, "  {k:<width$}  {v}").unwrap();
    }
}

pub fn list_structures() -> String {
    let mut out = String::new();
    rows(&mut out, "structures", BUILTIN_STRUCTURES);
    rows(&mut out, "groupoid realizations", BUILTIN_REALIZATIONS);
    out
}

pub fn list_families() -> String {
    let mut out = String::new();
    rows(&mut out, "hamiltonian families", HAMILTONIAN_FAMILIES);
    rows(&mut out, "displacement candidates", CANDIDATE_FAMILIES);
    rows(&mut out, "experiment ops", OPS);
    let suites: Vec<(&str, &str)> = SUITES.iter().map(|s| (s.0, s.1)).collect();
    rows(&mut out, "suites", &suites);
    out
}

fn describe_structure(p: &PoissonStructure) -> String {
    let mut out = String::new();
    let n = p.dim();
    writeln!(out, "structure {} (dimension {n})", p.label()).unwrap();
    let casimirs: Vec<String> = p.casimirs().iter().map(|c| c.to_string()).collect();
    if !casimirs.is_empty() {
        writeln!(out, "casimirs: {}", casimirs.join(", ")).unwrap();
    }
    let x = vec![1.0; n];
    let lam = p.bivector(&x);
    writeln!(out, "bivector at (1, ..., 1):").unwrap();
    for i in 0..n {
        let row: Vec<String> = (0..n).map(|j| format!("{:>5}", lam[(i, j)])).collect();
        writeln!(out, "  {}", row.join(" ")).unwrap();
    }
    if let Ok(leaf) = p.leaf_at(&x) {
        writeln!(out, "leaf through (1, ..., 1): dimension {}", leaf.dim).unwrap();
    }
    out
}

/// Description of a structure, realization, family, candidate kind, op or suite.
pub fn describe(label: &str) -> Result<String> {
    if let Ok(r) = GroupoidRealization::from_label(label) {
        let mut out = format!(
            "realization {} (total dimension {}, base {})\n",
            r.label(),
            r.total_dim(),
            r.base().label()
        );
        out.push_str(&describe_structure(r.total()));
        return Ok(out);
    }
    if let Ok(p) = PoissonStructure::from_label(label) {
        return Ok(describe_structure(&p));
    }
    let tables: [(&str, &[(&str, &str)]); 3] = [
        ("hamiltonian family", HAMILTONIAN_FAMILIES),
        ("displacement candidate", CANDIDATE_FAMILIES),
        ("experiment op", OPS),
    ];
    for (kind, table) in tables {
        if let Some((k, v)) = table.iter().find(|(k, _)| *k == label) {
            return Ok(format!("{kind} {k}: {v}\n"));
        }
    }
    if let Some((k, v, ids)) = SUITES.iter().find(|s| s.0 == label) {
        return Ok(format!("suite {k}: {v} (checks {ids:?})\n"));
    }
    Err(invalid(format!(
        "nothing is called `{label}`; see list-structures and list-families"
    )))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn describes_builtins() {
        assert!(describe("heisenberg3").unwrap().contains("casimirs: x3"));
        assert!(describe("symplectic2n:2").unwrap().contains("dimension 4"));
        assert!(describe("cotangent:heisenberg3").unwrap().contains("total dimension 6"));
        assert!(describe("bump").unwrap().starts_with("hamiltonian family"));
        assert!(describe("axioms").unwrap().starts_with("suite"));
        assert_eq!(describe("bogus").unwrap_err().exit_code(), 2);
    }
}

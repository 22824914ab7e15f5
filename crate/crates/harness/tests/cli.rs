use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn hoferlab(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_hoferlab"))
        .args(args)
        .env_remove("HOFERLAB_JOBS")
        .output()
        .unwrap()
}

fn bundled(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("scenarios").join(name)
}

fn write(dir: &Path, name: &str, body: &str) -> PathBuf {
    let p = dir.join(name);
    fs::write(&p, body).unwrap();
    p
}

fn code(o: &Output) -> i32 {
    o.status.code().unwrap()
}

#[test]
fn empty_scenario_gives_empty_report() {
    let out = tempfile::tempdir().unwrap();
    let o = hoferlab(&[
        "run",
        bundled("empty.toml").to_str().unwrap(),
        "--out",
        out.path().to_str().unwrap(),
    ]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    assert_eq!(fs::read(out.path().join("empty.jsonl")).unwrap(), b"");
    let csv = fs::read_to_string(out.path().join("empty.csv")).unwrap();
    assert_eq!(csv.lines().count(), 1, "header only");
}

#[test]
fn malformed_structure_label_exits_2() {
    let dir = tempfile::tempdir().unwrap();
    let p = write(dir.path(), "bad.toml", "id = \"bad\"\nstructure = \"symplectic2n:x\"\n");
    let o = hoferlab(&["run", p.to_str().unwrap(), "--out", dir.path().to_str().unwrap()]);
    assert_eq!(code(&o), 2);
}

#[test]
fn parse_errors_report_line_and_column() {
    let dir = tempfile::tempdir().unwrap();
    let body = "id = \"bad\"\nstructure = \"symplectic2n:1\"\n\n[[experiments]]\nop = \"no_such_op\"\n";
    let p = write(dir.path(), "bad.toml", body);
    let o = hoferlab(&["run", p.to_str().unwrap(), "--out", dir.path().to_str().unwrap()]);
    assert_eq!(code(&o), 2);
    let err = String::from_utf8_lossy(&o.stderr);
    assert!(err.contains("bad.toml:5:"), "{err}");
}

#[test]
fn dangling_hamiltonian_reference_exits_2() {
    let dir = tempfile::tempdir().unwrap();
    let body = "id = \"bad\"\nstructure = \"symplectic2n:1\"\n\n[[experiments]]\nop = \"oscillation\"\nhamiltonian = \"nope\"\n";
    let p = write(dir.path(), "bad.toml", body);
    let o = hoferlab(&["run", p.to_str().unwrap(), "--out", dir.path().to_str().unwrap()]);
    assert_eq!(code(&o), 2, "{}", String::from_utf8_lossy(&o.stderr));
}

#[test]
fn unknown_suite_and_label_exit_2() {
    assert_eq!(code(&hoferlab(&["suite", "nonesuch"])), 2);
    assert_eq!(code(&hoferlab(&["describe", "nonesuch"])), 2);
    assert_eq!(code(&hoferlab(&["run", "x.toml", "--format", "xml"])), 2);
}

#[test]
fn listings_and_descriptions() {
    let o = hoferlab(&["list-structures"]);
    assert_eq!(code(&o), 0);
    let s = String::from_utf8_lossy(&o.stdout);
    for label in ["symplectic2n", "heisenberg3", "product2x1", "pair:", "cotangent:"] {
        assert!(s.contains(label), "{label} missing from\n{s}");
    }
    let o = hoferlab(&["list-families"]);
    assert_eq!(code(&o), 0);
    assert!(String::from_utf8_lossy(&o.stdout).contains("cutoff-shift"));
    assert_eq!(code(&hoferlab(&["describe", "heisenberg3"])), 0);
    assert_eq!(code(&hoferlab(&["describe", "displacement_upper_bound"])), 0);
}

#[test]
fn repeated_runs_are_byte_identical() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    let s = bundled("plane-flows.toml");
    for (dir, jobs) in [(&a, "1"), (&b, "0")] {
        let o = Command::new(env!("CARGO_BIN_EXE_hoferlab"))
            .args(["run", s.to_str().unwrap(), "--out", dir.path().to_str().unwrap()])
            .env("HOFERLAB_JOBS", jobs)
            .output()
            .unwrap();
        assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    }
    for f in ["plane-flows.jsonl", "plane-flows.csv"] {
        assert_eq!(
            fs::read(a.path().join(f)).unwrap(),
            fs::read(b.path().join(f)).unwrap(),
            "{f}"
        );
    }
}

#[test]
fn format_selects_outputs() {
    let out = tempfile::tempdir().unwrap();
    let o = hoferlab(&[
        "run",
        bundled("poisson-basics.toml").to_str().unwrap(),
        "--out",
        out.path().to_str().unwrap(),
        "--format",
        "jsonl",
    ]);
    assert_eq!(code(&o), 0);
    assert!(out.path().join("poisson-basics.jsonl").exists());
    assert!(!out.path().join("poisson-basics.csv").exists());
    let text = fs::read_to_string(out.path().join("poisson-basics.jsonl")).unwrap();
    for line in text.lines() {
        let v: serde_json::Value = serde_json::from_str(line).unwrap();
        assert_eq!(v["schema_version"], 1);
        assert!(v["runtime_ms"].is_null());
    }
}

//! Runs every acceptance criterion once and prints one line per criterion.
//! Exits non-zero if any criterion fails.

use std::process::ExitCode;
use std::time::{Duration, Instant};

use hoferlab::checks::CRITERIA;
use hoferlab::output::to_jsonl;
use hoferlab::suites::run_suite;

const SEED: u64 = 0;

fn time_limit(id: u8) -> Option<Duration> {
    match id {
        1 | 2 => Some(Duration::from_secs(5)),
        8 => Some(Duration::from_secs(60)),
        _ => None,
    }
}

fn main() -> ExitCode {
    let mut failed = 0;
    for (id, name, run) in CRITERIA {
        let start = Instant::now();
        let checks = run(SEED);
        let elapsed = start.elapsed();
        let mut bad: Vec<String> = checks
            .iter()
            .filter(|c| !c.passed)
            .map(|c| format!("{} = {:.3e} (threshold {:.3e})", c.name, c.value, c.threshold))
            .collect();
        if checks.is_empty() {
            bad.push("no checks ran".into());
        }
        if let Some(limit) = time_limit(*id) {
            if elapsed > limit {
                bad.push(format!(
                    "runtime {:.1} s over {} s",
                    elapsed.as_secs_f64(),
                    limit.as_secs()
                ));
            }
        }
        report(*id, name, elapsed, &bad);
        failed += usize::from(!bad.is_empty());
    }

    let start = Instant::now();
    let mut bad = Vec::new();
    match (run_suite("energy", SEED), run_suite("energy", SEED)) {
        (Ok(a), Ok(b)) => {
            if to_jsonl(&a) != to_jsonl(&b) {
                bad.push("suite `energy` reports differ between runs".to_string());
            }
        }
        (Err(e), _) | (_, Err(e)) => bad.push(e.to_string()),
    }
    report(11, "determinism", start.elapsed(), &bad);
    failed += usize::from(!bad.is_empty());

    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        println!("{failed} criteria failed");
        ExitCode::FAILURE
    }
}

fn report(id: u8, name: &str, elapsed: Duration, bad: &[String]) {
    let status = if bad.is_empty() { "PASS" } else { "FAIL" };
    println!("{status} {id:>2} {name} ({:.1} s)", elapsed.as_secs_f64());
    for b in bad {
        println!("        {b}");
    }
}

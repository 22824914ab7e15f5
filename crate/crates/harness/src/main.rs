use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use hoferlab::output::{self, write_file, write_records, Format};
use hoferlab::{catalog, run_scenario, suites, HarnessError, Overrides, Scenario};

#[derive(Parser)]
#[command(
    name = "hoferlab",
    version,
    about = "Numerical experiments in Hofer geometry on Poisson manifolds"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Common {
    /// Output directory for reports and plot data.
    #[arg(long, default_value = "out")]
    out: PathBuf,
    /// Overrides the scenario seed.
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long, value_enum, default_value = "both")]
    format: Format,
    /// Worker threads; 0 uses every core.
    #[arg(long, env = "HOFERLAB_JOBS", default_value_t = 0)]
    jobs: usize,
}

#[derive(Subcommand)]
enum Command {
    /// Run a scenario file.
    Run {
        scenario: PathBuf,
        #[command(flatten)]
        common: Common,
        /// Grid resolution per axis for oscillations and lengths.
        #[arg(long)]
        grid: Option<usize>,
        /// RK45 tolerance.
        #[arg(long)]
        tol: Option<f64>,
        /// Record wall-clock time per experiment (makes reports non-reproducible).
        #[arg(long)]
        timing: bool,
    },
    /// Run a bundled invariant suite: axioms, flows, groupoid or energy.
    Suite {
        name: String,
        #[command(flatten)]
        common: Common,
    },
    ListStructures,
    ListFamilies,
    /// Describe a structure, realization, family, op or suite.
    Describe {
        label: String,
    },
}

fn configure_jobs(jobs: usize) {
    #[cfg(feature = "parallel")]
    if jobs > 0 {
        // fails only if a pool already exists, in which case it is kept
        let _ = rayon::ThreadPoolBuilder::new().num_threads(jobs).build_global();
    }
    #[cfg(not(feature = "parallel"))]
    let _ = jobs;
}

fn run(path: &Path, common: &Common, o: &Overrides) -> Result<bool, HarnessError> {
    let scenario = Scenario::load(path)?;
    let report = run_scenario(&scenario, o)?;
    for r in &report.records {
        println!("{}", r.summary());
    }
    write_records(&common.out, &scenario.id, &report.records, common.format)?;
    for p in &report.plots {
        write_file(&common.out.join(format!("{}.csv", p.name)), &p.to_csv()?)?;
    }
    let failed: Vec<_> = report
        .records
        .iter()
        .filter(|r| r.status == hoferlab::Status::Fail)
        .collect();
    for r in &failed {
        eprintln!(
            "failed: {}",
            String::from_utf8_lossy(&output::to_jsonl(std::slice::from_ref(*r))).trim_end()
        );
    }
    Ok(failed.is_empty())
}

fn suite(name: &str, common: &Common) -> Result<bool, HarnessError> {
    let records = suites::run_suite(name, common.seed.unwrap_or(0))?;
    print!("{}", suites::table(&records));
    write_records(&common.out, &format!("suite-{name}"), &records, common.format)?;
    Ok(records.iter().all(|r| r.status != hoferlab::Status::Fail))
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let outcome = match &cli.command {
        Command::Run {
            scenario,
            common,
            grid,
            tol,
            timing,
        } => {
            configure_jobs(common.jobs);
            let o = Overrides {
                seed: common.seed,
                grid: *grid,
                tol: *tol,
                timing: *timing,
            };
            run(scenario, common, &o)
        }
        Command::Suite { name, common } => {
            configure_jobs(common.jobs);
            suite(name, common)
        }
        Command::ListStructures => {
            print!("{}", catalog::list_structures());
            Ok(true)
        }
        Command::ListFamilies => {
            print!("{}", catalog::list_families());
            Ok(true)
        }
        Command::Describe { label } => catalog::describe(label).map(|s| {
            print!("{s}");
            true
        }),
    };
    match outcome {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}

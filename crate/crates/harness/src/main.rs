use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use speedlimit_harness::config::{ExperimentConfig, ExperimentKind};
use speedlimit_harness::error::{HarnessError, Result, EXIT_PASS, EXIT_VIOLATION};
use speedlimit_harness::report::{ensure_dir, write_json};
use speedlimit_harness::run::run;
use speedlimit_harness::suite::{run_suite, CRITERIA};

/// Quantum speed limits for long-range bosons: simulations, bound checks and oracles.
#[derive(Debug, Parser)]
#[command(name = "speedlimit", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
    #[command(flatten)]
    common: Common,
}

#[derive(Debug, Args)]
struct Common {
    /// TOML experiment file.
    #[arg(long, global = true, value_name = "PATH")]
    config: Option<PathBuf>,
    /// Master seed; overrides `seed` in the config file.
    #[arg(long, global = true, value_name = "N")]
    seed: Option<u64>,
    /// Output directory; overrides `[output] dir`.
    #[arg(long, global = true, value_name = "DIR")]
    out: Option<PathBuf>,
    /// Worker threads (default: all cores). Results do not depend on this.
    #[arg(long, global = true, value_name = "N")]
    threads: Option<usize>,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Evolve one protocol, write the trajectory CSV and check the bounds on it.
    Simulate,
    /// Transport distances, explicit or over random instances, with duality checks.
    Ot,
    /// Seeded sweep of random protocols against the selected bounds.
    BoundCheck,
    /// Run a named transfer protocol and score it.
    Protocol,
    /// Exact spectral checks and finite-U convergence.
    Oracle,
    /// The acceptance matrix.
    Suite {
        /// Comma-separated criterion ids; all when omitted.
        #[arg(long, value_delimiter = ',')]
        only: Vec<u8>,
    },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let code = match execute(cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("speedlimit: {e}");
            e.exit_code()
        }
    };
    ExitCode::from(code as u8)
}

fn execute(cli: Cli) -> Result<i32> {
    let common = cli.common;
    if let Some(n) = common.threads {
        if n == 0 {
            return Err(HarnessError::validation("--threads", "must be at least 1"));
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| HarnessError::validation("--threads", e))?;
    }
    let config = match &common.config {
        Some(path) => ExperimentConfig::load(path)?,
        None => ExperimentConfig::default(),
    };
    let seed = common.seed.or(config.seed).unwrap_or(0);
    let out = common
        .out
        .clone()
        .or_else(|| config.output.as_ref().map(|o| o.dir.clone()))
        .unwrap_or_else(|| PathBuf::from("out"));

    let kind = match cli.command {
        Command::Simulate => ExperimentKind::Simulate,
        Command::Ot => ExperimentKind::Ot,
        Command::BoundCheck => ExperimentKind::BoundCheck,
        Command::Protocol => ExperimentKind::Protocol,
        Command::Oracle => ExperimentKind::Oracle,
        Command::Suite { only } => return suite(seed, &out, only),
    };
    let report = run(kind, &config, seed, &out)?;
    let s = report.summary;
    println!(
        "{}: {} checks, {} passed, {} failed, {} out of scope -> {}",
        kind.name(),
        s.total,
        s.passed,
        s.failed,
        s.out_of_scope,
        out.join(format!("{}.json", kind.name())).display()
    );
    for c in report.checks.iter().filter(|c| c.failed()) {
        eprintln!("violation: {} bound {:e} measured {:e} margin {:e}", c.name, c.bound, c.measured, c.margin);
    }
    Ok(report.exit_code())
}

fn suite(seed: u64, out: &std::path::Path, only: Vec<u8>) -> Result<i32> {
    let ids: Vec<u8> = if only.is_empty() { CRITERIA.iter().map(|c| c.id).collect() } else { only };
    if let Some(bad) = ids.iter().find(|&&id| id == 0 || id as usize > CRITERIA.len()) {
        return Err(HarnessError::validation("--only", format!("no criterion {bad}")));
    }
    let report = run_suite(seed, &ids, |outcome, secs| {
        println!("{}", outcome.line(secs));
        for note in &outcome.notes {
            eprintln!("    {note}");
        }
    })?;
    ensure_dir(out)?;
    write_json(&out.join("suite.json"), &report)?;
    Ok(if report.passed { EXIT_PASS } else { EXIT_VIOLATION })
}

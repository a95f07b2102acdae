//! The ten acceptance criteria at their stated tolerances and time budgets.
//!
//! Runs sequentially so each wall-clock measurement belongs to one criterion. Exits nonzero
//! when any criterion fails or overruns.

use std::process::ExitCode;

use speedlimit_harness::suite::{run_suite, CRITERIA};

const SEED: u64 = 20_240_601;

fn main() -> ExitCode {
    let ids: Vec<u8> = CRITERIA.iter().map(|c| c.id).collect();
    let mut failures = Vec::new();
    let report = run_suite(SEED, &ids, |outcome, secs| {
        println!("{}", outcome.line(secs));
        let c = CRITERIA[outcome.id as usize - 1];
        if !outcome.passed || secs > c.limit_secs {
            failures.push(outcome.id);
            for check in outcome.checks.iter().filter(|r| r.failed()).take(5) {
                println!(
                    "    {} bound {:e} measured {:e} margin {:e} {:?}",
                    check.name, check.bound, check.measured, check.margin, check.params
                );
            }
            for note in &outcome.notes {
                println!("    {note}");
            }
        }
    });
    match report {
        Ok(r) if r.passed => {
            println!("acceptance: all {} criteria passed", r.criteria.len());
            ExitCode::SUCCESS
        }
        Ok(_) => {
            println!("acceptance: failed criteria {failures:?}");
            ExitCode::FAILURE
        }
        Err(e) => {
            println!("acceptance: aborted: {e}");
            ExitCode::FAILURE
        }
    }
}

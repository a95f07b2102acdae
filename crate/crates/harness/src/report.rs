//! JSON run reports and CSV time series.

use std::fs;
use std::path::Path;

use serde::Serialize;
use serde_json::Value;

use speedlimit::bounds::{BoundReport, CheckStatus};
use speedlimit::evolve::Trajectory;

use crate::config::ExperimentConfig;
use crate::error::{HarnessError, Result, EXIT_PASS, EXIT_VIOLATION};

pub const VERSION: &str = env!("CARGO_PKG_VERSION");

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize)]
pub struct Summary {
    pub total: usize,
    pub passed: usize,
    pub failed: usize,
    pub out_of_scope: usize,
}

impl Summary {
    pub fn of(checks: &[BoundReport]) -> Self {
        let count = |s: CheckStatus| checks.iter().filter(|c| c.status == s).count();
        Self {
            total: checks.len(),
            passed: count(CheckStatus::Pass),
            failed: count(CheckStatus::Fail),
            out_of_scope: count(CheckStatus::OutOfScope),
        }
    }
}

/// Everything a run produced except wall-clock time, so identical inputs give identical bytes.
#[derive(Debug, Clone, Serialize)]
pub struct RunReport {
    pub version: &'static str,
    pub command: String,
    pub seed: u64,
    pub config: ExperimentConfig,
    pub summary: Summary,
    pub checks: Vec<BoundReport>,
    pub results: Value,
    pub artifacts: Vec<String>,
}

impl RunReport {
    pub fn new(command: &str, seed: u64, config: ExperimentConfig, checks: Vec<BoundReport>, results: Value) -> Self {
        Self {
            version: VERSION,
            command: command.to_string(),
            seed,
            config,
            summary: Summary::of(&checks),
            checks,
            results,
            artifacts: Vec::new(),
        }
    }

    pub fn exit_code(&self) -> i32 {
        if self.summary.failed > 0 {
            EXIT_VIOLATION
        } else {
            EXIT_PASS
        }
    }
}

pub fn to_json<T: Serialize>(value: &T) -> String {
    // Non-finite floats (out-of-scope placeholders) serialize as null.
    let mut s = serde_json::to_string_pretty(value).expect("report types serialize");
    s.push('\n');
    s
}

fn io_error(path: &Path) -> impl FnOnce(std::io::Error) -> HarnessError + '_ {
    move |source| HarnessError::Io { path: path.display().to_string(), source }
}

pub fn ensure_dir(dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).map_err(io_error(dir))
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    fs::write(path, to_json(value)).map_err(io_error(path))
}

/// `t, x_0 .. x_{n-1}, Φ_t, fidelity`, one row per sample.
pub fn write_trajectory_csv(path: &Path, trajectory: &Trajectory) -> Result<()> {
    let mut w = csv::Writer::from_path(path).map_err(|e| HarnessError::Io {
        path: path.display().to_string(),
        source: e.into(),
    })?;
    let wrap = |e: csv::Error| HarnessError::Io { path: path.display().to_string(), source: e.into() };
    w.write_record(trajectory.csv_header()).map_err(wrap)?;
    for row in trajectory.csv_rows() {
        w.write_record(&row).map_err(wrap)?;
    }
    w.flush().map_err(io_error(path))
}

#[cfg(test)]
mod tests {
    use super::*;
    use speedlimit::bounds::Direction;

    #[test]
    fn summary_counts_statuses() {
        let checks = vec![
            BoundReport::new("a", Direction::AtLeast, 1.0, 2.0, 0.0),
            BoundReport::new("b", Direction::AtMost, 1.0, 2.0, 0.0),
            BoundReport::out_of_scope("c", Direction::AtLeast, "tunneling"),
        ];
        let r = RunReport::new("test", 1, ExperimentConfig::default(), checks, Value::Null);
        assert_eq!(r.summary, Summary { total: 3, passed: 1, failed: 1, out_of_scope: 1 });
        assert_eq!(r.exit_code(), EXIT_VIOLATION);
        let json = to_json(&r);
        assert!(json.contains("\"margin\": null"));
        assert!(json.contains("\"uncertainty\""));
    }
}

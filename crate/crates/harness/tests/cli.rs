use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_speedlimit"))
}

fn scratch(name: &str) -> PathBuf {
    let dir = std::env::temp_dir().join(format!("speedlimit-cli-{}-{name}", std::process::id()));
    let _ = fs::remove_dir_all(&dir);
    fs::create_dir_all(&dir).unwrap();
    dir
}

fn write_config(dir: &Path, text: &str) -> PathBuf {
    let path = dir.join("experiment.toml");
    fs::write(&path, text).unwrap();
    path
}

fn run(args: &[&str], config: &Path, out: &Path) -> Output {
    bin().args(args).arg("--config").arg(config).arg("--out").arg(out).output().unwrap()
}

fn sample_config(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("configs").join(name)
}

const SWEEP: &str = r#"
[lattice]
extents = [4]
[system]
bosons = 2
alpha = 2.5
[random]
stage_count = 2
horizon = 1.5
[regions]
x = [0]
y = [3]
[sweep]
seeds = 12
"#;

#[test]
fn overlapping_regions_exit_with_validation_code() {
    let dir = scratch("overlap");
    let cfg = write_config(&dir, &SWEEP.replace("y = [3]", "y = [0, 3]"));
    let out = run(&["bound-check"], &cfg, &dir);
    assert_eq!(out.status.code(), Some(2));
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("regions.y"), "{err}");
    assert!(!dir.join("bound-check.json").exists());
}

#[test]
fn unknown_keys_and_bad_flags_are_validation_errors() {
    let dir = scratch("unknown");
    let cfg = write_config(&dir, &format!("{SWEEP}\n[system_extra]\nfoo = 1\n"));
    assert_eq!(run(&["bound-check"], &cfg, &dir).status.code(), Some(2));

    let cfg = write_config(&dir, SWEEP);
    let out = bin().args(["bound-check", "--threads", "0", "--config"]).arg(&cfg).output().unwrap();
    assert_eq!(out.status.code(), Some(2));

    let missing = bin().args(["simulate", "--config", "/nonexistent/experiment.toml"]).output().unwrap();
    assert_eq!(missing.status.code(), Some(2));
}

#[test]
fn sweep_report_is_identical_across_thread_counts() {
    let dir = scratch("threads");
    let cfg = write_config(&dir, SWEEP);
    let mut reports = Vec::new();
    for threads in ["1", "4"] {
        let out_dir = dir.join(threads);
        let out = bin()
            .args(["bound-check", "--seed", "99", "--threads", threads, "--config"])
            .arg(&cfg)
            .arg("--out")
            .arg(&out_dir)
            .output()
            .unwrap();
        assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
        reports.push(fs::read(out_dir.join("bound-check.json")).unwrap());
    }
    assert_eq!(reports[0], reports[1]);

    let other = dir.join("other");
    let out = bin().args(["bound-check", "--seed", "100", "--config"]).arg(&cfg).arg("--out").arg(&other).output().unwrap();
    assert_eq!(out.status.code(), Some(0));
    assert_ne!(reports[0], fs::read(other.join("bound-check.json")).unwrap());
}

#[test]
fn simulate_writes_plot_ready_csv() {
    let dir = scratch("simulate");
    let out = run(&["simulate"], &sample_config("simulate.toml"), &dir);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let csv = fs::read_to_string(dir.join("simulate.csv")).unwrap();
    let mut lines = csv.lines();
    assert_eq!(lines.next().unwrap(), "t,x_0,x_1,x_2,x_3,x_4,Φ_t,fidelity");
    let rows: Vec<&str> = lines.collect();
    assert_eq!(rows.len(), 3 * 32 + 1);
    for row in &rows {
        let cells: Vec<&str> = row.split(',').collect();
        assert_eq!(cells.len(), 8);
        let total: f64 = cells[1..6].iter().map(|c| c.parse::<f64>().unwrap()).sum();
        assert!((total - 1.0).abs() < 1e-9);
    }
    let json: serde_json::Value = serde_json::from_slice(&fs::read(dir.join("simulate.json")).unwrap()).unwrap();
    assert_eq!(json["command"], "simulate");
    assert_eq!(json["seed"], 7);
    assert_eq!(json["artifacts"], serde_json::json!(["simulate.csv", "simulate.json"]));
}

#[test]
fn supersonic_protocol_is_out_of_scope_not_a_violation() {
    let dir = scratch("supersonic");
    let out = run(&["protocol"], &sample_config("supersonic.toml"), &dir);
    assert_eq!(out.status.code(), Some(0));
    let json: serde_json::Value = serde_json::from_slice(&fs::read(dir.join("protocol.json")).unwrap()).unwrap();
    let checks = json["checks"].as_array().unwrap();
    let min_time = checks.iter().find(|c| c["name"] == "min_transfer_time").unwrap();
    assert_eq!(min_time["status"], "out_of_scope");
    assert!(min_time["note"].as_str().unwrap().contains("tunneling"));
    assert_eq!(json["summary"]["failed"], 0);
}

#[test]
fn failed_protocol_exits_with_violation_code() {
    let dir = scratch("violation");
    // At U = 10 J the resonant stages are far from their limit and the transfer fails.
    let cfg = write_config(
        &dir,
        "[protocol]\nname = \"sequential\"\nsites = 3\nbosons = 3\nu = 10.0\nmin_fidelity = 0.999\n",
    );
    let out = run(&["protocol"], &cfg, &dir);
    assert_eq!(out.status.code(), Some(1), "{}", String::from_utf8_lossy(&out.stdout));
    assert!(dir.join("protocol.json").exists());
}

#[test]
fn unwritable_output_exits_with_abort_code() {
    let dir = scratch("unwritable");
    let blocker = dir.join("file");
    fs::write(&blocker, "").unwrap();
    let out = run(&["ot"], &sample_config("ot.toml"), &blocker);
    assert_eq!(out.status.code(), Some(3));
}

#[test]
fn explicit_transport_reports_both_values() {
    let dir = scratch("ot");
    let out = run(&["ot"], &sample_config("ot.toml"), &dir);
    assert_eq!(out.status.code(), Some(0));
    let json: serde_json::Value = serde_json::from_slice(&fs::read(dir.join("ot.json")).unwrap()).unwrap();
    let primal = json["results"]["primal"].as_f64().unwrap();
    let dual = json["results"]["dual"].as_f64().unwrap();
    assert!((primal - dual).abs() < 1e-12);
    // Site 0 ships everything to site 3; site 1 splits between 2 and 3.
    let expected = 0.5 * 3f64.powf(0.7) + 0.25 + 0.25 * 2f64.powf(0.7);
    assert!((primal - expected).abs() < 1e-12, "{primal} vs {expected}");
}

#[test]
fn suite_rejects_unknown_criterion() {
    let dir = scratch("suite");
    let out = bin().args(["suite", "--only", "11", "--out"]).arg(&dir).output().unwrap();
    assert_eq!(out.status.code(), Some(2));
    let out = bin().args(["suite", "--only", "3,10", "--out"]).arg(&dir).output().unwrap();
    assert_eq!(out.status.code(), Some(0));
    let stdout = String::from_utf8_lossy(&out.stdout);
    assert_eq!(stdout.lines().filter(|l| l.starts_with("[PASS]")).count(), 2);
    assert!(dir.join("suite.json").exists());
}

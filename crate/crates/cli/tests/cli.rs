//! End-to-end checks of the `poisson-bandit` binary: artifacts, error
//! diagnostics, determinism, and echo-header reproducibility.

use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_poisson-bandit"))
}

fn run_command(subcommand: &str, config_path: &Path) -> Output {
    bin()
        .arg(subcommand)
        .arg("--config")
        .arg(config_path)
        .output()
        .expect("binary runs")
}

fn write_file(dir: &Path, name: &str, contents: &str) -> std::path::PathBuf {
    let path = dir.join(name);
    fs::write(&path, contents).unwrap();
    path
}

const SYMMETRIC_PRIOR: &str = "1.0 2.0 0.5\n2.0 1.0 0.5\n";

#[test]
fn solve_single_atom_reports_zero_risk() {
    let tmp = tempfile::tempdir().unwrap();
    let prior = write_file(tmp.path(), "prior.txt", "1.0 2.0 1.0\n");
    let out = tmp.path().join("out");
    let config = write_file(
        tmp.path(),
        "run.cfg",
        &format!(
            "command = solve\nprior_path = {}\nhorizon_T = 1.0\nsteps_N = 3\nxmax = 22\noutput_dir = {}\n",
            prior.display(),
            out.display()
        ),
    );
    let output = run_command("solve", &config);
    assert!(output.status.success(), "{}", String::from_utf8_lossy(&output.stderr));
    let summary = fs::read_to_string(out.join("summary.txt")).unwrap();
    assert!(summary.contains("root_risk = 0.00000000000e0"), "{summary}");
    assert!(out.join("risk_table.txt").exists());
    assert!(out.join("strategy_table.txt").exists());
}

#[test]
fn unknown_key_is_a_validation_error() {
    let tmp = tempfile::tempdir().unwrap();
    let config = write_file(tmp.path(), "run.cfg", "command = solve\nxmx = 40\n");
    let output = run_command("solve", &config);
    assert!(!output.status.success());
    let stderr = String::from_utf8_lossy(&output.stderr);
    assert!(stderr.contains("validation error"), "{stderr}");
    assert!(stderr.contains("line 2") && stderr.contains("xmx"), "{stderr}");
}

#[test]
fn command_mismatch_is_rejected() {
    let tmp = tempfile::tempdir().unwrap();
    let prior = write_file(tmp.path(), "prior.txt", SYMMETRIC_PRIOR);
    let config = write_file(
        tmp.path(),
        "run.cfg",
        &format!(
            "command = solve\nprior_path = {}\nhorizon_T = 1.0\nsteps_N = 2\nxmax = 25\noutput_dir = {}\n",
            prior.display(),
            tmp.path().join("out").display()
        ),
    );
    let output = run_command("audit", &config);
    assert!(!output.status.success());
}

#[test]
fn missing_prior_file_is_an_io_error() {
    let tmp = tempfile::tempdir().unwrap();
    let config = write_file(
        tmp.path(),
        "run.cfg",
        &format!(
            "command = solve\nprior_path = {}\nhorizon_T = 1.0\nsteps_N = 2\nxmax = 25\noutput_dir = {}\n",
            tmp.path().join("absent.txt").display(),
            tmp.path().join("out").display()
        ),
    );
    let output = run_command("solve", &config);
    assert!(!output.status.success());
    assert!(String::from_utf8_lossy(&output.stderr).contains("io error"));
}

#[test]
fn audit_reports_tiny_discrepancy() {
    let tmp = tempfile::tempdir().unwrap();
    let prior = write_file(tmp.path(), "prior.txt", SYMMETRIC_PRIOR);
    let out = tmp.path().join("out");
    let config = write_file(
        tmp.path(),
        "run.cfg",
        &format!(
            "command = audit\nprior_path = {}\nhorizon_T = 1.0\nsteps_N = 3\nxmax = 25\ntail_eps = 1e-12\noutput_dir = {}\n",
            prior.display(),
            out.display()
        ),
    );
    let output = run_command("audit", &config);
    assert!(output.status.success(), "{}", String::from_utf8_lossy(&output.stderr));
    let report = fs::read_to_string(out.join("audit.txt")).unwrap();
    let max_rel: f64 = report
        .lines()
        .find_map(|l| l.strip_prefix("max_relative_discrepancy = "))
        .unwrap()
        .parse()
        .unwrap();
    assert!(max_rel <= 1e-9, "{report}");
}

#[test]
fn simulate_same_seed_is_byte_identical() {
    let tmp = tempfile::tempdir().unwrap();
    let prior = write_file(tmp.path(), "prior.txt", SYMMETRIC_PRIOR);
    let make = |out: &Path| {
        format!(
            "command = simulate\nprior_path = {}\nhorizon_T = 1.0\nsteps_N = 4\nxmax = 25\n\
             replications = 5000\nseed = 9\noutput_dir = {}\n",
            prior.display(),
            out.display()
        )
    };
    let out_a = tmp.path().join("a");
    let out_b = tmp.path().join("b");
    let cfg_a = write_file(tmp.path(), "a.cfg", &make(&out_a));
    let cfg_b = write_file(tmp.path(), "b.cfg", &make(&out_a));
    assert!(run_command("simulate", &cfg_a).status.success());
    let first = fs::read(out_a.join("simulate.csv")).unwrap();
    assert!(run_command("simulate", &cfg_b).status.success());
    let second = fs::read(out_a.join("simulate.csv")).unwrap();
    assert_eq!(first, second);
    // Different seed changes the estimate.
    let cfg_c = write_file(tmp.path(), "c.cfg", &make(&out_b).replace("seed = 9", "seed = 10"));
    assert!(run_command("simulate", &cfg_c).status.success());
    let third = fs::read(out_b.join("simulate.csv")).unwrap();
    assert_ne!(first, third);
}

#[test]
fn echo_header_reproduces_the_run() {
    let tmp = tempfile::tempdir().unwrap();
    let prior = write_file(tmp.path(), "prior.txt", SYMMETRIC_PRIOR);
    let out = tmp.path().join("out");
    let config = write_file(
        tmp.path(),
        "run.cfg",
        &format!(
            "command = solve\nprior_path = {}\nhorizon_T = 1.0\nsteps_N = 3\nxmax = 25\nseed = 4\noutput_dir = {}\n",
            prior.display(),
            out.display()
        ),
    );
    assert!(run_command("solve", &config).status.success());
    let summary = fs::read_to_string(out.join("summary.txt")).unwrap();
    let original = fs::read(out.join("risk_table.txt")).unwrap();

    // Strip the echo header back into a config document and re-run it.
    let echoed: String = summary
        .lines()
        .take_while(|l| l.starts_with("# "))
        .map(|l| format!("{}\n", &l[2..]))
        .collect();
    let config2 = write_file(tmp.path(), "echo.cfg", &echoed);
    assert!(run_command("solve", &config2).status.success());
    let rerun = fs::read(out.join("risk_table.txt")).unwrap();
    assert_eq!(original, rerun);
}

#[test]
fn evaluate_writes_csv_rows_per_atom() {
    let tmp = tempfile::tempdir().unwrap();
    let prior = write_file(tmp.path(), "prior.txt", SYMMETRIC_PRIOR);
    let out = tmp.path().join("out");
    let config = write_file(
        tmp.path(),
        "run.cfg",
        &format!(
            "command = evaluate\nprior_path = {}\nhorizon_T = 1.0\nsteps_N = 4\nxmax = 25\n\
             tail_eps = 1e-12\noutput_dir = {}\n",
            prior.display(),
            out.display()
        ),
    );
    assert!(run_command("evaluate", &config).status.success());
    let csv = fs::read_to_string(out.join("evaluate.csv")).unwrap();
    let rows: Vec<&str> = csv.lines().filter(|l| !l.starts_with('#')).collect();
    assert_eq!(rows[0], "theta1,theta2,mean,std_error,replications,seed");
    assert_eq!(rows.len(), 3);
    // Prior-weighted regret equals the dynamic-programming root risk.
    let summary = fs::read_to_string(out.join("summary.txt")).unwrap();
    let get = |key: &str| -> f64 {
        summary
            .lines()
            .find_map(|l| l.strip_prefix(key))
            .unwrap()
            .parse()
            .unwrap()
    };
    let weighted = get("prior_weighted_regret = ");
    let root = get("root_risk = ");
    assert!((weighted - root).abs() <= 1e-9 * root.max(1e-12), "{summary}");
}

#[test]
fn minimax_single_point_grid() {
    let tmp = tempfile::tempdir().unwrap();
    let grid = write_file(tmp.path(), "grid.txt", "1.0 2.0\n");
    let out = tmp.path().join("out");
    let config = write_file(
        tmp.path(),
        "run.cfg",
        &format!(
            "command = minimax\ngrid_path = {}\nhorizon_T = 1.0\nsteps_N = 2\nxmax = 22\n\
             max_iterations = 3\noutput_dir = {}\n",
            grid.display(),
            out.display()
        ),
    );
    let output = run_command("minimax", &config);
    assert!(output.status.success(), "{}", String::from_utf8_lossy(&output.stderr));
    let report = fs::read_to_string(out.join("minimax.json")).unwrap();
    let json_start = report.find('{').unwrap();
    let value: serde_json::Value = serde_json::from_str(&report[json_start..]).unwrap();
    assert_eq!(value["lower_bound"], 0.0);
    assert_eq!(value["upper_bound"], 0.0);
}

#[test]
fn prior_written_by_tool_round_trips() {
    use poisson_bandit_core::Prior;
    let prior = Prior::parse(SYMMETRIC_PRIOR).unwrap();
    let text = prior.to_text();
    assert_eq!(Prior::parse(&text).unwrap(), prior);
}

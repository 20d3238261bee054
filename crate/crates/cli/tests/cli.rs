use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;

fn run(dir: &Path, config: &str, extra: &[&str]) -> Output {
    let cfg = dir.join("run.cfg");
    fs::write(&cfg, config).unwrap();
    Command::new(env!("CARGO_BIN_EXE_hjb-bdf2"))
        .arg("--config")
        .arg(&cfg)
        .arg("--out-dir")
        .arg(dir.join("out"))
        .args(extra)
        .output()
        .unwrap()
}

fn report(dir: &Path) -> Value {
    serde_json::from_str(&fs::read_to_string(dir.join("out/report.json")).unwrap()).unwrap()
}

fn table(dir: &Path) -> String {
    fs::read_to_string(dir.join("out/table.csv")).unwrap()
}

fn without_cpu(csv: &str) -> String {
    csv.lines()
        .map(|l| l.rsplit_once(',').map_or(l, |(head, _)| head))
        .collect::<Vec<_>>()
        .join("\n")
}

#[test]
fn table_one_run_writes_expected_rows() {
    let dir = tempfile::tempdir().unwrap();
    let out = run(
        dir.path(),
        "scenario = eikonal\nscheme = bdf2\nladder = 5, 10, 8\ncfl = 0.1\n",
        &["--dump-profiles", "--threads", "2"],
    );
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    let csv = table(dir.path());
    let last = csv.lines().last().unwrap();
    assert!(
        last.starts_with("640,1280,1.03E-04,1.99,1.78E-05,2.00,2.05E-05,2.00,"),
        "{last}"
    );
    assert!(dir
        .path()
        .join("out/profiles/profile_N640_I1280.csv")
        .exists());
    let rep = report(dir.path());
    assert_eq!(rep["success"], true);
    let rows = rep["rows"].as_array().unwrap();
    assert_eq!(rows.len(), 8);
    assert_eq!(rows[7]["steps"].as_array().unwrap().len(), 640);
    assert!(rows[7]["worst_certificate_ratio"].as_f64().unwrap() < 1.0);
    assert_eq!(rows[0]["assumptions"]["a1_bounded"], true);
}

#[test]
fn runs_are_deterministic_up_to_timings() {
    let cfg = "scenario = eikonal-neg\nladder = 5, 10, 5\ncfl = 0.1\n";
    let (a, b) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
    assert!(run(a.path(), cfg, &[]).status.success());
    assert!(run(b.path(), cfg, &["--threads", "1"]).status.success());
    assert_eq!(without_cpu(&table(a.path())), without_cpu(&table(b.path())));
}

#[test]
fn centered_drift_profile_oscillates() {
    let oscillation = |scheme: &str| {
        let dir = tempfile::tempdir().unwrap();
        let cfg = format!("scenario = eikonal\nscheme = {scheme}\nladder = 20, 200, 1\n");
        let out = run(dir.path(), &cfg, &["--dump-profiles"]);
        assert!(out.status.success());
        let profile =
            fs::read_to_string(dir.path().join("out/profiles/profile_N20_I200.csv")).unwrap();
        assert!(profile.starts_with("t,x,u\n"));
        assert_eq!(profile.lines().count(), 200);
        report(dir.path())["rows"][0]["oscillation"]
            .as_f64()
            .unwrap()
    };
    let (upwind, centered) = (oscillation("bdf2"), oscillation("bdf2-centered-drift"));
    assert!(centered >= 10.0 * upwind, "{centered} vs {upwind}");
}

#[test]
fn zero_dynamics_custom_problem_has_zero_errors() {
    let dir = tempfile::tempdir().unwrap();
    let out = run(
        dir.path(),
        "scenario = custom\ncustom.controls = -1, 1\ncustom.drift = -1, 1\nladder = 8, 4, 3\n",
        &["--dump-matrices"],
    );
    assert!(out.status.success());
    let csv = table(dir.path());
    let rows: Vec<&str> = csv.lines().skip(1).collect();
    assert!(
        rows[0].starts_with("8,4,0.00E+00,,0.00E+00,,0.00E+00,,"),
        "{}",
        rows[0]
    );
    assert!(
        rows[2].starts_with("32,16,0.00E+00,--,0.00E+00,--,0.00E+00,--,"),
        "{}",
        rows[2]
    );
    assert!(dir.path().join("out/matrices/step1_control1.txt").exists());
}

#[test]
fn failed_rows_are_marked_and_exit_nonzero() {
    let dir = tempfile::tempdir().unwrap();
    // tau/h = 2.5 breaks the step-size bound on every row
    let out = run(dir.path(), "scenario = eikonal\nladder = 2, 100, 3\n", &[]);
    assert_eq!(out.status.code(), Some(1));
    let csv = table(dir.path());
    assert_eq!(csv.lines().count(), 4);
    assert!(csv.lines().nth(1).unwrap().contains("FAILED"));
    let rep = report(dir.path());
    assert_eq!(rep["success"], false);
    assert!(rep["first_failure"].as_str().unwrap().contains("CFL"));
}

#[test]
fn bad_config_reports_the_line() {
    let dir = tempfile::tempdir().unwrap();
    let out = run(dir.path(), "scenario = eikonal\nscheme = rk4\n", &[]);
    assert_eq!(out.status.code(), Some(2));
    let msg = String::from_utf8_lossy(&out.stderr);
    assert!(msg.contains("line 2") && msg.contains("rk4"), "{msg}");
}

#[test]
fn seed_alone_runs_the_solver_self_check() {
    let dir = tempfile::tempdir().unwrap();
    let out = Command::new(env!("CARGO_BIN_EXE_hjb-bdf2"))
        .args(["--seed", "3", "--out-dir"])
        .arg(dir.path())
        .output()
        .unwrap();
    assert!(out.status.success());
    let rep: Value =
        serde_json::from_str(&fs::read_to_string(dir.path().join("selfcheck.json")).unwrap())
            .unwrap();
    assert_eq!(rep["passed"], true);
    assert!(rep["max_deviation"].as_f64().unwrap() <= 1e-9);
}

use std::path::PathBuf;
use std::process::{Command, Output};

use qpsolver::harness::parse_csv;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_qpsolver"))
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().expect("spawn qpsolver")
}

fn small_config(dir: &tempfile::TempDir, extra: &str) -> PathBuf {
    let path = dir.path().join("exp.json");
    let text = format!(
        r#"{{
  "d": 1, "n": 2,
  "projection": [["2*pi", "2*sqrt(5)*pi"]],
  "alpha": [[[0, 0], 6], [[1, 0], 0.5], [[-1, 0], 0.5], [[0, 1], 0.5], [[0, -1], 0.5]],
  "exact_solution": {{ "modes": [[[1, 0], 1], [[0, 1], 1]], "carrier": {{ "re": 0, "im": "-2*pi" }} }},
  {extra}
}}"#
    );
    std::fs::write(&path, text).unwrap();
    path
}

#[test]
fn missing_config_is_a_usage_error() {
    let out = run(&["space-sweep", "--config", "/nonexistent/exp.json"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("exp.json"));
}

#[test]
fn unknown_subcommand_exits_two() {
    assert_eq!(run(&["frobnicate"]).status.code(), Some(2));
}

#[test]
fn malformed_config_names_the_field() {
    let dir = tempfile::tempdir().unwrap();
    let path = small_config(&dir, r#""T": 1e-4, "N_list": [8], "tau_list": [-1e-5]"#);
    let out = run(&["solve", "--config", path.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("tau"));
}

#[test]
fn time_sweep_writes_one_row_per_step_size() {
    let dir = tempfile::tempdir().unwrap();
    let path = small_config(
        &dir,
        r#""T": 1e-4, "N_list": [8], "tau_list": [1e-5, 5e-6, 2.5e-6, 1.25e-6]"#,
    );
    let table = dir.path().join("time.csv");
    let out = run(&[
        "time-sweep",
        "--config",
        path.to_str().unwrap(),
        "--output",
        table.to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let text = std::fs::read_to_string(&table).unwrap();
    assert!(text.starts_with("tau,err,kappa,wall_seconds,iters\n"));
    let rows = parse_csv(&text).unwrap();
    assert_eq!(rows.len(), 4);
    assert_eq!(rows[0].kappa, None);
    for r in &rows[1..] {
        let k = r.kappa.unwrap();
        assert!((k - 2.0).abs() < 0.1, "kappa {k}");
    }
}

#[test]
fn space_sweep_json_to_stdout() {
    let dir = tempfile::tempdir().unwrap();
    let path = small_config(&dir, r#""T": 1e-4, "N_list": [4, 8], "tau_list": [1e-5]"#);
    let out = run(&["space-sweep", "--config", path.to_str().unwrap(), "--format", "json"]);
    assert_eq!(out.status.code(), Some(0));
    let v: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(v.as_array().unwrap().len(), 2);
    assert_eq!(v[1]["N"], 8);
    assert_eq!(v[1]["M"], 10);
}

#[test]
fn solve_overrides_and_config_output() {
    let dir = tempfile::tempdir().unwrap();
    let table = dir.path().join("solve.csv");
    let extra = format!(
        r#""T": 1e-4, "N_list": [4, 8], "tau_list": [1e-5], "output": {}"#,
        serde_json::to_string(table.to_str().unwrap()).unwrap()
    );
    let path = small_config(&dir, &extra);
    let ambiguous = run(&["solve", "--config", path.to_str().unwrap()]);
    assert_eq!(ambiguous.status.code(), Some(2));

    let out = run(&[
        "solve",
        "--config",
        path.to_str().unwrap(),
        "--modes",
        "8",
        "--threads",
        "2",
    ]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let rows = parse_csv(&std::fs::read_to_string(&table).unwrap()).unwrap();
    assert_eq!(rows.len(), 1);
    assert_eq!(rows[0].n_modes, Some(8));
    assert_eq!(rows[0].steps, Some(10));
}

#[test]
fn solver_failure_exits_three() {
    let dir = tempfile::tempdir().unwrap();
    let path = small_config(
        &dir,
        r#""N_list": [16], "tau_list": [1e-1], "T": 0.2, "solver": { "max_iter": 1, "rel_tol": 1e-14 }"#,
    );
    let out = run(&["solve", "--config", path.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(3), "{}", String::from_utf8_lossy(&out.stderr));
}

#[test]
fn selftest_passes() {
    let out = run(&["selftest"]);
    assert_eq!(out.status.code(), Some(0));
    let text = String::from_utf8_lossy(&out.stdout);
    assert_eq!(text.lines().filter(|l| l.starts_with("PASS")).count(), 4);
}

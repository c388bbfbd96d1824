use std::path::PathBuf;
use std::process::{Command, Output};

use serde_json::Value;

fn bin() -> Command {
    let mut c = Command::new(env!("CARGO_BIN_EXE_emergence-lab"));
    c.env_remove("EMERGENCE_LAB_THREADS");
    c
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().expect("binary runs")
}

fn stdout(args: &[&str]) -> String {
    let out = run(args);
    assert!(out.status.success(), "{args:?} failed: {}", String::from_utf8_lossy(&out.stderr));
    String::from_utf8(out.stdout).unwrap()
}

fn json(args: &[&str]) -> Value {
    serde_json::from_str(&stdout(args)).unwrap()
}

fn scratch(name: &str) -> PathBuf {
    let dir = PathBuf::from(env!("CARGO_TARGET_TMPDIR")).join("cli");
    std::fs::create_dir_all(&dir).unwrap();
    dir.join(name)
}

/// Writes a built-in fixture to disk through the CLI and returns its path.
fn fixture(name: &str) -> String {
    let path = scratch(&format!("{name}.json"));
    let p = path.to_str().unwrap();
    stdout(&["fixtures", name, "--out", p]);
    p.to_string()
}

fn write(name: &str, body: &str) -> String {
    let path = scratch(name);
    std::fs::write(&path, body).unwrap();
    path.to_str().unwrap().to_string()
}

fn f(v: &Value) -> f64 {
    v.as_f64().unwrap()
}

#[test]
fn analyze_examples() {
    assert_eq!(f(&json(&["analyze", &fixture("m1")])["ei"]), 2.0);
    assert_eq!(f(&json(&["analyze", &fixture("uniform8")])["ei"]), 0.0);
    let absorbing = json(&["analyze", &fixture("absorbing8")]);
    assert!((f(&absorbing["ei"]) - 0.5435).abs() < 5e-4);
}

#[test]
fn search_examples() {
    let r = json(&["search", &fixture("absorbing8"), "--level", "1"]);
    assert_eq!(f(&r["best_ei"]), 1.0);
    assert_eq!(r["best_choice"]["partition"], serde_json::json!([0, 0, 0, 0, 0, 0, 0, 1]));

    let r = json(&["search", &fixture("permutation4"), "--level", "2"]);
    assert!((f(&r["best_ei"]) - 2.0).abs() < 1e-12);

    // lumping the six random states beats restricting to the two fixed points
    let r = json(&["search", &fixture("exogenous8"), "--level", "2"]);
    assert!((f(&r["best_ei"]) - 1.2075187496394217).abs() < 1e-12);
    assert_eq!(r["best_choice"]["partition"], serde_json::json!([0, 0, 0, 0, 0, 0, 1, 2]));
    assert!(r["skipped"].as_u64().unwrap() > 0);
}

#[test]
fn analyze_agrees_with_level_zero_search() {
    let path = fixture("hetero8");
    let a = json(&["analyze", &path]);
    let s = json(&["search", &path, "--level", "0"]);
    assert_eq!(a["ei"], s["best_ei"]);
    assert_eq!(a, s["report"]);
}

#[test]
fn report_examples() {
    let r = json(&["report", &fixture("coding4")]);
    assert!((f(&r["gap"]["micro_ei"]) - 0.811).abs() < 5e-4);
    assert!((f(&r["gap"]["cc"]) - 1.0).abs() < 1e-9);
    assert!((f(&r["gap"]["capacity"]) - 1.0).abs() < 1e-6);

    let r = json(&["report", &fixture("uniform8")]);
    for key in ["micro_ei", "cc", "capacity", "emergence", "capacity_gap"] {
        assert!(f(&r["gap"][key]).abs() < 1e-12, "{key}");
    }

    let r = json(&["report", &fixture("absorbing8"), "--ladder", "1"]);
    assert!((f(&r["gap"]["emergence"]) - 0.4565).abs() < 5e-4);
    assert_eq!(r["ladder"].as_array().unwrap().len(), 2);
}

#[test]
fn report_csv_layout() {
    let csv = stdout(&["report", &fixture("coding4"), "--ladder", "2", "--format", "csv"]);
    let lines: Vec<&str> = csv.lines().collect();
    assert_eq!(lines[0], "level,ei_max,capacity,emd,choices_evaluated");
    assert_eq!(lines.len(), 4);
}

#[test]
fn fixtures_are_exact() {
    let m2 = json(&["fixtures", "m2"]);
    let third = 1.0 / 3.0;
    assert_eq!(
        m2["rows"],
        serde_json::json!([[third, third, third, 0.0], [third, third, third, 0.0], [0.0, 0.0, 0.0, 1.0], [0.0, 0.0, 0.0, 1.0]])
    );
    let hetero = json(&["fixtures", "hetero8"]);
    let ninth = 1.0 / 9.0;
    let two = 2.0 / 9.0;
    assert_eq!(hetero["rows"][4], serde_json::json!([ninth, two, two, ninth, 0.0, two, ninth, 0.0]));
    let coding = json(&["fixtures", "coding4"]);
    assert_eq!(coding["rows"][3], serde_json::json!([0.0, 0.0, 0.0, 1.0]));
    assert_eq!(coding["n"], 4);
    assert!(stdout(&["fixtures"]).lines().any(|l| l == "exogenous8"));
}

#[test]
fn input_errors_exit_two_with_row() {
    let bad = write("bad_row.json", r#"{"n": 3, "rows": [[1, 0, 0], [0.5, 0.6, 0], [0, 0, 1]]}"#);
    let out = run(&["analyze", &bad]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("row 1"));
    assert_eq!(run(&["fixtures", "nope"]).status.code(), Some(2));
    assert_eq!(run(&["analyze", "/nonexistent/file.json"]).status.code(), Some(2));
    assert_eq!(run(&["search", &fixture("m1"), "--level", "3"]).status.code(), Some(2));
}

#[test]
fn budget_refusal_exits_three() {
    let path = fixture("absorbing8");
    let out = run(&["search", &path, "--level", "1", "--budget", "100"]);
    assert_eq!(out.status.code(), Some(3));
    let annealed = json(&["search", &path, "--level", "1", "--budget", "100", "--anneal", "--steps", "4000"]);
    assert_eq!(annealed["method"], "annealing");
    assert!((f(&annealed["best_ei"]) - 1.0).abs() < 1e-9);
}

#[test]
fn non_convergence_exits_four() {
    let out = run(&["capacity", &fixture("hetero8"), "--max-iter", "2"]);
    assert_eq!(out.status.code(), Some(4));
}

#[test]
fn byte_identical_across_runs_and_threads() {
    let path = fixture("hetero8");
    let args = ["search", &path, "--level", "2", "--anneal", "--seed", "5", "--steps", "3000"];
    let one = stdout(&[&args[..], &["--threads", "1"]].concat());
    let four = stdout(&[&args[..], &["--threads", "4"]].concat());
    let again = stdout(&[&args[..], &["--threads", "4"]].concat());
    assert_eq!(one, four);
    assert_eq!(four, again);
    let env = bin().args(args).env("EMERGENCE_LAB_THREADS", "3").output().unwrap();
    assert_eq!(String::from_utf8(env.stdout).unwrap(), one);
    let exhaustive = ["report", &path];
    assert_eq!(stdout(&[&exhaustive[..], &["--threads", "1"]].concat()), stdout(&[&exhaustive[..], &["--threads", "8"]].concat()));
}

#[test]
fn code_sim_macro_code_is_error_free() {
    let r = json(&["code-sim", &fixture("coding4"), "--symbols", "10000"]);
    assert_eq!(f(&r["macro"]["result"]["symbol_error_rate"]), 0.0);
    assert_eq!(f(&r["macro"]["result"]["rate"]), 1.0);
    assert_eq!(f(&r["micro"]["result"]["rate"]), 2.0);
    assert_eq!(f(&r["micro"]["exact_symbol_error"]), 0.5);
    let explicit = json(&["code-sim", &fixture("coding4"), "--code", "0,0,0,1", "--symbols", "100"]);
    assert_eq!(f(&explicit["macro"]["result"]["symbol_error_rate"]), 0.0);
}

#[test]
fn capacity_examples() {
    let r = json(&["capacity", &fixture("coding4")]);
    assert!((f(&r["capacity"]) - 1.0).abs() < 1e-6);
    let r = json(&["capacity", &fixture("m1"), "--random-search", "200"]);
    assert!((f(&r["capacity"]) - 2.0).abs() < 1e-6);
}

const TWO_AND: &str = r#"{"elements": [
    {"name": "A", "rule": "AND", "inputs": [0, 1]},
    {"name": "B", "rule": "AND", "inputs": [0, 1]}
]}"#;

#[test]
fn networks_compile_and_search() {
    let net = write("two_and.json", TWO_AND);
    let t = json(&["compile-net", &net]);
    assert_eq!(t["n"], 4);
    assert_eq!(t["labels"], serde_json::json!(["00", "10", "01", "11"]));
    assert_eq!(t["rows"][3], serde_json::json!([0.0, 0.0, 0.0, 1.0]));
    let micro = json(&["analyze", &net]);
    assert!((f(&micro["ei"]) - 0.8113).abs() < 1e-4);
    let r = json(&["search", &net, "--level", "3"]);
    assert!((f(&r["best_ei"]) - 1.0).abs() < 1e-9);
    assert_eq!(run(&["compile-net", &fixture("m1")]).status.code(), Some(2));
}

#[test]
fn reference_network_check_reports_targets() {
    let wiring = write("wiring.json", "[[1, 2], [0, 2], [0, 1], [4, 5], [3, 5], [3, 4]]");
    let r = json(&["compile-net", &wiring, "--fixture", "six-and"]);
    let checks = r["checks"].as_array().unwrap();
    assert_eq!(checks.len(), 6);
    assert_eq!(checks[2]["name"], "micro_determinism");
    assert_eq!(f(&checks[2]["actual"]), 1.0);
    assert!(r["pass"].is_boolean());
}

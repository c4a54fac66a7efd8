use std::path::Path;
use std::process::{Command, Output};

use commsplit::evaluator::ScanResult;
use commsplit::formula::ProductFormula;

fn commsplit(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_commsplit"))
        .args(args)
        .env_remove("COMMSPLIT_SEED")
        .output()
        .expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).unwrap()
}

fn build_to(dir: &Path, name: &str, family: &str, p2: u32, k: u32) -> std::path::PathBuf {
    let path = dir.join(name);
    let o = commsplit(&[
        "build",
        "--family",
        family,
        "--p2",
        &p2.to_string(),
        "--k",
        &k.to_string(),
        "--out",
        path.to_str().unwrap(),
    ]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    path
}

#[test]
fn build_reports_term_counts() {
    let dir = tempfile::tempdir().unwrap();
    for (family, p2, k, n) in [
        ("odd", 2, 1, 4),
        ("even", 2, 2, 5),
        ("nestgc", 4, 2, 1250),
        ("gc", 1, 3, 22),
    ] {
        let path = dir.path().join(format!("{family}.json"));
        let o = commsplit(&[
            "build",
            "--family",
            family,
            "--p2",
            &p2.to_string(),
            "--k",
            &k.to_string(),
            "--out",
            path.to_str().unwrap(),
        ]);
        assert!(o.status.success());
        assert!(stdout(&o).starts_with(&format!("N={n} ")), "{}", stdout(&o));
        let f = ProductFormula::from_json(&std::fs::read_to_string(&path).unwrap()).unwrap();
        assert_eq!(f.len(), n);
    }
}

#[test]
fn build_without_out_prints_json() {
    let o = commsplit(&["build", "--family", "odd", "--p2", "4", "--k", "1"]);
    assert!(o.status.success());
    let f = ProductFormula::from_json(&stdout(&o)).unwrap();
    assert_eq!(f.len(), 24);
}

#[test]
fn build_rejects_bad_parameters() {
    let o = commsplit(&["build", "--family", "odd", "--p2", "3", "--k", "1"]);
    assert_eq!(o.status.code(), Some(1));
    let o = commsplit(&["build", "--family", "teapot", "--p2", "2", "--k", "1"]);
    assert_eq!(o.status.code(), Some(1));
}

#[test]
fn scan_passes_and_writes_csv() {
    let dir = tempfile::tempdir().unwrap();
    let formula = build_to(dir.path(), "odd.json", "odd", 6, 1);
    let csv = dir.path().join("scan.csv");
    let o = commsplit(&[
        "scan",
        "--formula",
        formula.to_str().unwrap(),
        "--out",
        csv.to_str().unwrap(),
    ]);
    assert_eq!(o.status.code(), Some(0));
    let scan = ScanResult::from_csv(&std::fs::read_to_string(&csv).unwrap()).unwrap();
    assert!((scan.fitted_slope - 7.0).abs() < 0.25);
    assert_eq!(scan.rows.len(), 41);
}

#[test]
fn scan_window_failure_exits_two() {
    let dir = tempfile::tempdir().unwrap();
    let formula = build_to(dir.path(), "odd.json", "odd", 2, 1);
    let o = commsplit(&[
        "scan",
        "--formula",
        formula.to_str().unwrap(),
        "--tmin",
        "1e-9",
        "--tmax",
        "1e-8",
        "--points",
        "8",
    ]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn scan_below_claimed_order_exits_two() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("overclaimed.json");
    let text = commsplit::builders::build_odd(1, 1)
        .unwrap()
        .with_order(2, 4)
        .unwrap()
        .to_json();
    std::fs::write(&path, text).unwrap();
    let o = commsplit(&["scan", "--formula", path.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn scan_rejects_malformed_formula() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("bad.json");
    std::fs::write(&path, "{\"k\": 1, \"p2\": 2,").unwrap();
    let o = commsplit(&["scan", "--formula", path.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&o.stderr).contains("line"));
}

#[test]
fn random_scans_depend_only_on_seed() {
    let dir = tempfile::tempdir().unwrap();
    let formula = build_to(dir.path(), "even.json", "even", 2, 2);
    let run = |seed: &str, env: Option<&str>| {
        let mut cmd = Command::new(env!("CARGO_BIN_EXE_commsplit"));
        cmd.args([
            "scan",
            "--formula",
            formula.to_str().unwrap(),
            "--ops",
            "random:4",
        ]);
        cmd.env_remove("COMMSPLIT_SEED");
        if !seed.is_empty() {
            cmd.args(["--seed", seed]);
        }
        if let Some(v) = env {
            cmd.env("COMMSPLIT_SEED", v);
        }
        cmd.output().unwrap().stdout
    };
    let a = run("7", None);
    assert_eq!(a, run("7", None));
    assert_eq!(a, run("", Some("7")));
    assert_ne!(a, run("8", None));
}

#[test]
fn plan_canonical_instance() {
    let o = commsplit(&[
        "plan", "--family", "odd", "--p2", "4", "--k", "1", "--lambda", "2", "--t", "1", "--eps",
        "1e-6",
    ]);
    assert!(o.status.success());
    let v: serde_json::Value = serde_json::from_str(&stdout(&o)).unwrap();
    assert_eq!(v["r"], 7_257_022_041u64);
    assert_eq!(v["n_exp"], 24 * 7_257_022_041u64);
    assert_eq!(v["assumption_path"], "corollary");
}

#[test]
fn plan_optimize_and_explicit_path() {
    let o = commsplit(&[
        "plan",
        "--family",
        "nestf",
        "--optimize",
        "--k",
        "1",
        "--t",
        "1",
        "--eps",
        "1e-6",
    ]);
    let v: serde_json::Value = serde_json::from_str(&stdout(&o)).unwrap();
    assert_eq!(v["p2"], 4);
    assert_eq!(v["n_exp"], 19_440_031_296u64);
    let o = commsplit(&[
        "plan", "--family", "odd", "--p2", "4", "--k", "1", "--t", "0.01", "--eps", "0.5",
    ]);
    let v: serde_json::Value = serde_json::from_str(&stdout(&o)).unwrap();
    assert_eq!(v["assumption_path"], "explicit");
}

#[test]
fn infeasible_plan_exits_three() {
    let o = commsplit(&[
        "plan", "--family", "nestf", "--p2", "2", "--k", "3", "--t", "0.5", "--eps", "1e-20",
    ]);
    assert_eq!(o.status.code(), Some(3));
    let o = commsplit(&[
        "plan", "--family", "odd", "--p2", "4", "--k", "3", "--t", "1", "--eps", "1e-6",
    ]);
    assert_eq!(o.status.code(), Some(1));
}

#[test]
fn usage_errors_exit_one() {
    let o = commsplit(&[
        "plan", "--family", "odd", "--k", "1", "--t", "1", "--eps", "1e-6",
    ]);
    assert_eq!(o.status.code(), Some(1));
    let o = commsplit(&["--help"]);
    assert_eq!(o.status.code(), Some(0));
}

#[test]
fn outputs_are_byte_identical_across_runs() {
    let dir = tempfile::tempdir().unwrap();
    let a = dir.path().join("a.json");
    let b = dir.path().join("b.json");
    for path in [&a, &b] {
        let o = commsplit(&[
            "--seed",
            "3",
            "demo",
            "anticomm",
            "--out",
            path.to_str().unwrap(),
        ]);
        assert!(o.status.success());
    }
    assert_eq!(std::fs::read(&a).unwrap(), std::fs::read(&b).unwrap());
}

#[test]
fn atomic_write_replaces_existing_file() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("f.json");
    std::fs::write(&path, "stale").unwrap();
    build_to(dir.path(), "f.json", "odd", 2, 1);
    let text = std::fs::read_to_string(&path).unwrap();
    assert!(ProductFormula::from_json(&text).is_ok());
    assert_eq!(std::fs::read_dir(dir.path()).unwrap().count(), 1);
}

#[test]
fn control_demo_prints_verdicts() {
    let o = commsplit(&["demo", "control"]);
    assert!(o.status.success());
    let text = stdout(&o);
    assert!(text.contains("error ratio t vs t/2"));
    assert!(text.lines().filter(|l| l.ends_with("[PASS]")).count() >= 3);
}

#[test]
fn compare_emits_curves() {
    let o = commsplit(&[
        "compare",
        "--families",
        "nestf,nestgc",
        "--p2s",
        "2",
        "--max-log2-r",
        "4",
    ]);
    let text = stdout(&o);
    assert!(text.starts_with("family,p2,r,n_exp,error"));
    assert_eq!(text.lines().count(), 1 + 2 * 5);
    let o = commsplit(&["compare", "--workload", "other"]);
    assert_eq!(o.status.code(), Some(1));
}

use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use tempfile::TempDir;

fn run(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_condind")).args(args).output().expect("binary runs")
}

fn code(out: &Output) -> i32 {
    out.status.code().expect("exit code")
}

fn stdout(out: &Output) -> String {
    String::from_utf8_lossy(&out.stdout).into_owned()
}

fn write(dir: &Path, name: &str, text: &str) -> PathBuf {
    let path = dir.join(name);
    fs::write(&path, text).unwrap();
    path
}

fn arg(p: &Path) -> &str {
    p.to_str().unwrap()
}

const D0: &str = r#"{"rows":2,"cols":2,"p":[[0.5,0.0],[0.0,0.5]]}"#;
const UNIFORM: &str = r#"{"rows":2,"cols":2,"p":[[0.25,0.25],[0.25,0.25]]}"#;

#[test]
fn analyze_exit_codes() {
    let dir = TempDir::new().unwrap();
    let d0 = write(dir.path(), "d0.json", D0);
    let out = run(&["analyze", arg(&d0)]);
    assert_eq!(code(&out), 2);
    assert!(stdout(&out).contains("rows1 [0]"));

    let pos = write(dir.path(), "pos.csv", "0.1,0.2,0.1\n0.05,0.1,0.15\n0.1,0.1,0.1\n");
    let out = run(&["analyze", arg(&pos)]);
    assert_eq!(code(&out), 0);
    assert!(stdout(&out).contains("r-complexity bound 1"));

    let bad = write(dir.path(), "bad.json", r#"{"rows": 2, "cols""#);
    assert_eq!(code(&run(&["analyze", arg(&bad)])), 1);
    assert_eq!(code(&run(&["analyze", "/nonexistent/matrix.json"])), 1);
}

#[test]
fn derive_then_verify() {
    let dir = TempDir::new().unwrap();
    let tri = write(dir.path(), "tri.csv", "0.4,0.3\n0,0.3\n");
    let witness = dir.path().join("w.json");
    let out = run(&["derive", arg(&tri), "-o", arg(&witness)]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    assert!(stdout(&out).starts_with("order "));

    let out = run(&["verify", arg(&witness)]);
    assert_eq!(code(&out), 0);
    assert!(stdout(&out).contains("verdict valid"));

    let d0 = write(dir.path(), "d0.json", D0);
    let out = run(&["derive", arg(&d0)]);
    assert_eq!(code(&out), 2);
    assert!(stdout(&out).contains("cols2 [1]"));
}

#[test]
fn edited_witness_is_flagged() {
    let dir = TempDir::new().unwrap();
    let tri = write(dir.path(), "tri.csv", "0.4,0.3\n0,0.3\n");
    let witness = dir.path().join("w.json");
    assert_eq!(code(&run(&["derive", arg(&tri), "-o", arg(&witness), "--json"])), 0);

    let mut doc: serde_json::Value = serde_json::from_str(&fs::read_to_string(&witness).unwrap()).unwrap();
    let entry = &mut doc["steps"][0]["t"][0];
    *entry = serde_json::json!(entry.as_f64().unwrap() + 1e-3);
    let edited = write(dir.path(), "edited.json", &doc.to_string());
    let out = run(&["verify", arg(&edited)]);
    assert_eq!(code(&out), 4);
    assert!(stdout(&out).lines().any(|l| l.starts_with("0 ") && l.ends_with("FAIL")));

    let text = fs::read_to_string(&witness).unwrap();
    let truncated = write(dir.path(), "cut.json", &text[..text.len() / 2]);
    assert_eq!(code(&run(&["verify", arg(&truncated)])), 1);
}

#[test]
fn tiny_budget_reports_no_convergence() {
    let dir = TempDir::new().unwrap();
    let m = write(dir.path(), "m.csv", "0.3,0.0,0.05\n0.0,0.3,0.05\n0.05,0.05,0.2\n");
    let out = run(&["derive", arg(&m), "--delta", "1e-9", "--max-order", "3"]);
    assert_eq!(code(&out), 3, "{}", stdout(&out));
}

#[test]
fn check_sweeps_and_single_maps() {
    let dir = TempDir::new().unwrap();
    let d0 = write(dir.path(), "d0.json", D0);
    let out = run(&["check", arg(&d0), "--sweep", "--k", "10", "--range", "2"]);
    assert_eq!(code(&out), 5);
    assert!(stdout(&out).contains("violated"));

    let u = write(dir.path(), "u.json", UNIFORM);
    assert_eq!(code(&run(&["check", arg(&u), "--sweep", "--k", "0"])), 0);

    let d = write(dir.path(), "d.json", r#"{"rows":2,"cols":2,"p":[[0.3125,0.1875],[0.1875,0.3125]]}"#);
    let g = write(dir.path(), "g.json", r#"{"rows":2,"cols":2,"range":2,"q":[1,0,1,0,0,1,0,1]}"#);
    let one = run(&["check", arg(&d), "--gamma", arg(&g), "--k", "1", "--thm", "1", "--json"]);
    let three = run(&["check", arg(&d), "--gamma", arg(&g), "--k", "1", "--thm", "3", "--json"]);
    assert_eq!(code(&one), 0);
    assert_eq!(code(&three), 0);
    let v1: serde_json::Value = serde_json::from_str(&stdout(&one)).unwrap();
    let v3: serde_json::Value = serde_json::from_str(&stdout(&three)).unwrap();
    assert!((v1["rhs"].as_f64().unwrap() - 1.908868).abs() < 1e-6);
    assert!((v1["rhs"].as_f64().unwrap() - v3["rhs"].as_f64().unwrap()).abs() < 1e-12);
}

#[test]
fn rate_bounds() {
    let base = ["rate", "--u", "1", "--v", "1", "--w", "1", "--k", "1"];
    let out = run(&[&base[..], &["--h-alpha", "1", "--h-beta", "1"]].concat());
    assert_eq!(code(&out), 0);
    let text = stdout(&out);
    assert!(text.contains("rhs 3.500000") && text.contains("rhs 4.000000"));
    assert_eq!(code(&run(&[&base[..], &["--h-alpha", "2", "--h-beta", "2"]].concat())), 5);
    let negative = ["rate", "--u", "-1", "--v", "1", "--w", "1", "--k", "1", "--h-alpha", "1", "--h-beta", "1"];
    assert_eq!(code(&run(&negative)), 1);
}

#[test]
fn reports_are_deterministic() {
    let dir = TempDir::new().unwrap();
    let m = write(dir.path(), "m.csv", "0.2,0.1,0\n0.1,0.2,0.1\n0,0.1,0.2\n");
    let first = run(&["derive", arg(&m), "--json"]);
    let second = run(&["derive", arg(&m), "--json"]);
    assert_eq!(code(&first), 0);
    assert_eq!(first.stdout, second.stdout);
    let a = run(&["analyze", arg(&m)]);
    assert_eq!(a.stdout, run(&["analyze", arg(&m)]).stdout);
}

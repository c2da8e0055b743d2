//! End-to-end checks of the binary: wiring, byte-identical audit output
//! and the exit-code contract.

use std::path::PathBuf;
use std::process::{Command, Output};

fn hoca() -> Command {
    Command::new(env!("CARGO_BIN_EXE_hoca"))
}

fn write_temp(name: &str, contents: &str) -> PathBuf {
    let dir = std::env::temp_dir().join("hoca-cli-tests");
    std::fs::create_dir_all(&dir).unwrap();
    let path = dir.join(name);
    std::fs::write(&path, contents).unwrap();
    path
}

fn run(args: &[&str]) -> Output {
    hoca().args(args).output().expect("binary runs")
}

#[test]
fn schouten_wiring() {
    let a = write_temp(
        "a.json",
        r#"{"schema":"hoca/1","type":"polyvector","d":2,"terms":[{"coef":"1/1","mono":[0,0],"wedge":[1]}]}"#,
    );
    let b = write_temp(
        "b.json",
        r#"{"schema":"hoca/1","type":"polyvector","d":2,"terms":[{"coef":"1/1","mono":[1,0],"wedge":[1]}]}"#,
    );
    let out = run(&["schouten", a.to_str().unwrap(), b.to_str().unwrap()]);
    assert!(out.status.success());
    let v: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(v["type"], "polyvector");
    // [d1, t1 d1] = d1
    assert_eq!(v["terms"][0]["coef"], "1/1");
    assert_eq!(v["terms"][0]["wedge"][0], 1);
}

#[test]
fn audit_is_byte_identical_across_runs() {
    let args = ["audit", "--seed", "42", "--quick", "--hbar-order", "2"];
    let first = run(&args);
    let second = run(&args);
    assert!(first.status.success(), "{}", String::from_utf8_lossy(&first.stderr));
    assert_eq!(first.stdout, second.stdout);
    let text = String::from_utf8(first.stdout).unwrap();
    assert!(text.contains("all criteria passed"));
}

#[test]
fn exit_codes() {
    // argument error: malformed input file
    let bad = write_temp("bad.json", "{\"schema\": \"hoca/1\"}");
    let out = run(&["hochschild", bad.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));

    // argument error: dimension mismatch between files
    let a = write_temp(
        "dim_a.json",
        r#"{"schema":"hoca/1","type":"polyvector","d":2,"terms":[{"coef":"1/1","mono":[0,0],"wedge":[1]}]}"#,
    );
    let b = write_temp(
        "dim_b.json",
        r#"{"schema":"hoca/1","type":"polyvector","d":3,"terms":[{"coef":"1/1","mono":[0,0,0],"wedge":[1]}]}"#,
    );
    let out = run(&["wedge", a.to_str().unwrap(), b.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));

    // resource error: homotopy block outside bounds
    let big = write_temp(
        "big.json",
        r#"{"schema":"hoca/1","type":"polydiff","d":2,"terms":[{"coef":"1/1","mono":[0,0],"word":[[5,5]]}]}"#,
    );
    let out = run(&[
        "hkr",
        "h",
        big.to_str().unwrap(),
        "--max-order",
        "2",
        "--max-words",
        "2",
    ]);
    assert_eq!(out.status.code(), Some(3));

    // success path
    let out = run(&["cohomology", "--word-length", "2", "--order", "2"]);
    assert!(out.status.success());
    let v: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(v["dimension"], v["exterior_dimension"]);
    assert_eq!(v["dimension"], 1);
}

#[test]
fn transfer_check_reports_clean_residuals() {
    let out = run(&["transfer", "check", "--arity", "2", "--samples", "4"]);
    assert!(out.status.success());
    let v: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(v["morphism_failures"], 0);
    assert_eq!(v["square_failures"], 0);
    assert_eq!(v["passed"], true);
}

#[test]
fn moyal_and_maurer_cartan_round_trip() {
    let out = run(&["twist", "moyal", "--hbar-order", "2"]);
    assert!(out.status.success());
    let omega = write_temp("omega.json", &String::from_utf8(out.stdout).unwrap());
    let out = run(&["twist", "mc", omega.to_str().unwrap()]);
    assert!(out.status.success());
    let v: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(v["maurer_cartan"], true);
    assert_eq!(v["residual_terms"], 0);
    // group-like identity for the same element
    let out = run(&["twist", "grouplike", omega.to_str().unwrap()]);
    assert!(out.status.success());
    let v: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(v["grouplike"], true);
}

#[test]
fn graphs_enumeration_and_span() {
    let out = run(&["graphs", "enum", "--out", "2", "--n", "2"]);
    assert!(out.status.success());
    let v: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(v["count"], 4);
    let out = run(&[
        "graphs", "span", "--out", "1", "--n", "1", "--coeff-bound", "1", "--deriv-bound", "1",
        "--slot-bound", "1",
    ]);
    assert!(out.status.success());
    let v: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(v["equal"], true);
}

use std::path::PathBuf;
use std::process::{Command, Output};

use serde_json::Value;

fn fixture(name: &str) -> String {
    let root = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../fixtures");
    root.join(name).to_string_lossy().into_owned()
}

fn run(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_minimax-fdiv"))
        .args(args)
        .env_remove("MINIMAX_FDIV_SEED")
        .output()
        .expect("binary runs")
}

fn json(args: &[&str]) -> Value {
    let out = run(args);
    assert!(
        out.status.success(),
        "{args:?}: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    serde_json::from_slice(&out.stdout).expect("json output")
}

#[test]
fn chi2_divergence_of_fixtures() {
    let v = json(&["divergence", "--gen", "chi2", &fixture("p.json"), &fixture("q.json")]);
    assert!((v["value"].as_f64().unwrap() - 1.0 / 3.0).abs() < 1e-12);
}

#[test]
fn product_divergence_tensorizes() {
    let one = json(&["divergence", "--gen", "kl", &fixture("p.json"), &fixture("q.json")]);
    let three = json(&[
        "divergence",
        "--gen",
        "kl",
        "--product",
        "3",
        &fixture("p.json"),
        &fixture("q.json"),
    ]);
    let (a, b) = (one["value"].as_f64().unwrap(), three["value"].as_f64().unwrap());
    assert!((b - 3.0 * a).abs() < 1e-12);
}

#[test]
fn fano_from_stats() {
    let v = json(&["bound", "--family", "fano", "--stats", "N=16,avgKL=1"]);
    assert!((v["lower_bound"].as_f64().unwrap() - 0.3893).abs() < 1e-4);
}

#[test]
fn bayes_and_minimax_risk() {
    let b = json(&["bayes-risk", &fixture("ensemble.json")]);
    let m = json(&["minimax-risk", &fixture("ensemble.json")]);
    let r = b["lower_bound"].as_f64().unwrap();
    assert!(r > 0.0 && r < 1.0);
    assert!(m.is_object());
}

#[test]
fn named_bound_from_pair() {
    let v = json(&["bound", "--family", "chi2", "--from-ensemble", &fixture("pair.json")]);
    assert!(v["lower_bound"].as_f64().unwrap() >= 0.0);
}

#[test]
fn jf_and_covering() {
    let jf = json(&["jf", "--gen", "kl", &fixture("ensemble.json")]);
    let cover = json(&[
        "jf-cover",
        "--kind",
        "kl",
        "--candidates",
        &fixture("candidates.json"),
        &fixture("ensemble.json"),
    ]);
    assert!(jf["value"].as_f64().unwrap() > 0.0);
    assert!(cover.is_object());
}

#[test]
fn entropy_from_table() {
    let v = json(&["entropy-bound", "--kind", "chi2", "--profile", &fixture("profile.json")]);
    assert_eq!(v["family"], "theorem3_chi2");
}

#[test]
fn entropy_grid_as_csv() {
    let out = run(&[
        "--format",
        "csv",
        "entropy-bound",
        "--kind",
        "chi2",
        "--model",
        "gaussian_ball",
        "--d",
        "2",
        "--gamma",
        "10",
        "--sigma",
        "1",
        "--eta-grid",
        "0.1:5:8",
        "--eps-grid",
        "0.5,1,1.3",
    ]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let text = String::from_utf8(out.stdout).unwrap();
    assert!(text.lines().count() > 1);
}

#[test]
fn vg_code_is_checked() {
    let v = json(&["vg", "--k", "16"]);
    assert!(v.is_object());
}

#[test]
fn verify_passes() {
    let out = run(&["verify", "--suite", "entropy"]);
    assert_eq!(out.status.code(), Some(0));
}

#[test]
fn output_is_deterministic() {
    let a = run(&["--seed", "11", "verify", "--suite", "constructions"]);
    let b = run(&["--seed", "11", "verify", "--suite", "constructions"]);
    assert_eq!(a.stdout, b.stdout);
}

#[test]
fn usage_errors_exit_two() {
    assert_eq!(run(&["no-such-command"]).status.code(), Some(2));
    assert_eq!(
        run(&["bound", "--family", "nope", "--stats", "N=2"]).status.code(),
        Some(2)
    );
    assert_eq!(
        run(&["bound", "--family", "fano", "--stats", "N=4"]).status.code(),
        Some(2)
    );
}

#[test]
fn computation_errors_exit_one() {
    let out = run(&["bound", "--family", "fano", "--stats", "N=1,avgKL=1"]);
    assert_eq!(out.status.code(), Some(1));
    assert!(!out.stderr.is_empty());
}

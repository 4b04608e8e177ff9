use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use qhc::calculus::ProofBuilder;
use qhc::syntax::Formula;
use serde_json::Value;

fn fixture(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures").join(name)
}

fn qhc(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_qhc")).args(args).output().expect("qhc runs")
}

fn code(o: &Output) -> i32 {
    o.status.code().expect("exit code")
}

fn json(o: &Output) -> Value {
    serde_json::from_slice(&o.stdout).expect("json on stdout")
}

fn model() -> String {
    fixture("i3-fork.json").display().to_string()
}

#[test]
fn eval_reports_validity() {
    let o = qhc(&["--json", "eval", "--model", &model(), "--formula", "?a"]);
    assert_eq!(code(&o), 0);
    assert_eq!(json(&o)["valid"], true);

    let o = qhc(&["--json", "eval", "--model", &model(), "--formula", "a \\/ (a -> bot)"]);
    assert_eq!(code(&o), 0);
    assert_eq!(json(&o)["valid"], false);
}

#[test]
fn eval_rejects_wrong_class() {
    let o = qhc(&["eval", "--model", &model(), "--formula", "a", "--class", "et"]);
    assert_eq!(code(&o), 3);
}

#[test]
fn parse_errors_exit_3() {
    assert_eq!(code(&qhc(&["parse", "a -> "])), 3);
    assert_eq!(code(&qhc(&["parse", "p /\\ !p"])), 3);
    assert_eq!(code(&qhc(&["eval", "--model", "missing.json", "--formula", "a"])), 3);
}

#[test]
fn parse_prints_sorts() {
    let o = qhc(&["--json", "parse", "!p -> !?a"]);
    assert_eq!(code(&o), 0);
    let text = String::from_utf8_lossy(&o.stdout);
    assert!(text.contains("problem"), "{text}");
}

#[test]
fn countermodel_found_and_exhausted() {
    let o = qhc(&["--json", "countermodel", "--principle", "top-rule", "--class", "sheaf", "--max-points", "3"]);
    assert_eq!(code(&o), 0);
    assert!(json(&o).is_object());

    let o = qhc(&["countermodel", "--principle", "top-rule", "--class", "et", "--max-points", "2"]);
    assert_eq!(code(&o), 4);

    let o = qhc(&["countermodel", "--principle", "no-such-principle", "--class", "et"]);
    assert_eq!(code(&o), 3);
}

#[test]
fn found_countermodel_evaluates_as_invalid() {
    let o = qhc(&["--json", "countermodel", "--principle", "top-rule", "--class", "sheaf", "--max-points", "3"]);
    let v = json(&o);
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("witness.json");
    std::fs::write(&path, v["model"].to_string()).unwrap();
    let o = qhc(&["--json", "eval", "--model", path.to_str().unwrap(), "--formula", "a"]);
    assert_eq!(code(&o), 0);
    assert_eq!(json(&o)["valid"], false);
}

#[test]
fn status_disagreement_exits_2() {
    assert_eq!(code(&qhc(&["principles", "status", "--max-points", "3"])), 2);
}

#[test]
fn check_accepts_and_rejects_scripts() {
    let a = Formula::prob("a", &[]);
    let mut pb = ProofBuilder::new(None);
    pb.dn_intro(&a);
    let script = pb.finish();
    let dir = tempfile::tempdir().unwrap();
    let good = dir.path().join("good.jsonl");
    std::fs::write(&good, script.to_jsonl()).unwrap();
    let o = qhc(&["--json", "check", good.to_str().unwrap()]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stdout));
    assert_eq!(json(&o)["verdict"], "accepted");

    let mut bad = script.clone();
    bad.lines.last_mut().unwrap().formula = "a -> a".into();
    let path = dir.path().join("bad.jsonl");
    std::fs::write(&path, bad.to_jsonl()).unwrap();
    let o = qhc(&["--json", "check", path.to_str().unwrap()]);
    assert_eq!(code(&o), 2);
    assert_eq!(json(&o)["verdict"], "rejected");

    let path = dir.path().join("garbled.jsonl");
    std::fs::write(&path, "{not json").unwrap();
    assert_eq!(code(&qhc(&["check", path.to_str().unwrap()])), 3);
}

#[test]
fn translate_and_rewrite() {
    let o = qhc(&["translate", "--to", "qc", "!p -> !q"]);
    assert_eq!(code(&o), 0);
    assert_eq!(String::from_utf8_lossy(&o.stdout).trim(), "p -> q");
    let o = qhc(&["translate", "--to", "s4", "?(!p -> bot)"]);
    assert_eq!(code(&o), 0);
    assert_eq!(code(&qhc(&["translate", "--to", "s4", "?a"])), 3);
    assert_eq!(code(&qhc(&["translate", "--to", "qh", "?a -> p"])), 0);
    let o = qhc(&["rewrite", "--pass", "push-wn", "?(forall x. !p(x))"]);
    assert_eq!(code(&o), 0);
    assert_eq!(String::from_utf8_lossy(&o.stdout).trim(), "forall x. p(x)");
    assert_eq!(code(&qhc(&["rewrite", "--pass", "push-wn", "?a"])), 3);
}

#[test]
fn geometry_verifies() {
    let o = qhc(&["--json", "theory", "verify", "geometry"]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stdout));
}

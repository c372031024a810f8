//! End-to-end behaviour of the `codegraph` binary.

use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::Value;

const METHOD: &str = "class C { int getLarger(int a, int b) { int m = a; if (b > a) { m = b; } return Math.abs(m); } }";

fn run(args: &[&str], cwd: &Path, env: &[(&str, &Path)]) -> Output {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_codegraph"));
    cmd.args(args).current_dir(cwd).env_remove("CODEGRAPH_CONFIG");
    for (k, v) in env {
        cmd.env(k, v);
    }
    cmd.output().unwrap()
}

fn json(out: &Output) -> Value {
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    serde_json::from_slice(&out.stdout).unwrap()
}

fn workspace() -> (tempfile::TempDir, PathBuf) {
    let dir = tempfile::tempdir().unwrap();
    let file = dir.path().join("C.java");
    std::fs::write(&file, METHOD).unwrap();
    (dir, file)
}

#[test]
fn missing_file_is_a_domain_error() {
    let dir = tempfile::tempdir().unwrap();
    let out = run(&["parse", "missing.java"], dir.path(), &[]);
    assert_eq!(out.status.code(), Some(1));
    let diag: Value = serde_json::from_slice(&out.stderr).unwrap();
    assert_eq!(diag["error"]["kind"], "FileNotFound");
    assert_eq!(diag["schema_version"], 1);
}

#[test]
fn usage_errors_exit_two() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(run(&["frobnicate"], dir.path(), &[]).status.code(), Some(2));
    assert_eq!(run(&["partition", "C.java", "--lambda", "0"], dir.path(), &[]).status.code(), Some(2));
    assert_eq!(run(&[], dir.path(), &[]).status.code(), Some(2));
    assert_eq!(run(&["--help"], dir.path(), &[]).status.code(), Some(0));
}

#[test]
fn parse_errors_name_the_failing_side() {
    let (dir, _) = workspace();
    std::fs::write(dir.path().join("bad.java"), "class X { void f( }").unwrap();
    let out = run(&["clone-score", "C.java", "bad.java", "--dims", "8"], dir.path(), &[]);
    assert_eq!(out.status.code(), Some(1));
    let diag: Value = serde_json::from_slice(&out.stderr).unwrap();
    assert_eq!(diag["error"]["kind"], "ParseError");
    assert_eq!(diag["error"]["side"], "B");
}

#[test]
fn parse_sast_and_partition_outputs() {
    let (dir, _) = workspace();
    let d = dir.path();
    let ast = json(&run(&["parse", "C.java"], d, &[]));
    assert_eq!(ast["schema_version"], 1);
    assert!(ast["nodes"].as_array().unwrap().len() > 10);

    let out = run(&["sast", "C.java", "--out", "g.json", "--dot", "g.dot"], d, &[]);
    assert!(out.status.success());
    let g: Value = serde_json::from_str(&std::fs::read_to_string(d.join("g.json")).unwrap()).unwrap();
    assert!(g["edge_counts"]["Subtoken"].as_u64().unwrap() >= 2);
    assert!(std::fs::read_to_string(d.join("g.dot")).unwrap().starts_with("digraph"));

    let p = json(&run(&["partition", "C.java", "--lambda", "4"], d, &[]));
    assert_eq!(p["lambda_used"], 4);
    assert!(p["subgraphs"].as_array().unwrap().len() > 1);
}

#[test]
fn config_file_precedence() {
    let (dir, _) = workspace();
    let d = dir.path();
    let conf = d.join("run.conf");
    std::fs::write(&conf, "lambda = 4\n").unwrap();
    let from_env = json(&run(&["partition", "C.java"], d, &[("CODEGRAPH_CONFIG", &conf)]));
    assert_eq!(from_env["lambda_used"], 4);
    let flag_wins = json(&run(&["partition", "C.java", "--lambda", "6"], d, &[("CODEGRAPH_CONFIG", &conf)]));
    assert_eq!(flag_wins["lambda_used"], 6);
    std::fs::write(d.join("codegraph.conf"), "lambda = 9\n").unwrap();
    assert_eq!(json(&run(&["partition", "C.java"], d, &[]))["lambda_used"], 9);

    std::fs::write(&conf, "lambda = 4\nshape = round\n").unwrap();
    let out = run(&["partition", "C.java", "--config", conf.to_str().unwrap()], d, &[]);
    assert_eq!(out.status.code(), Some(1));
    let diag: Value = serde_json::from_slice(&out.stderr).unwrap();
    assert_eq!(diag["error"]["kind"], "FormatError");
}

#[test]
fn checkpoint_round_trip_through_embed() {
    let (dir, _) = workspace();
    let d = dir.path();
    assert!(run(&["init-params", "--dims", "8", "--seed", "4", "--out", "m.ckpt"], d, &[]).status.success());
    let from_file = json(&run(&["embed", "C.java", "--params", "m.ckpt"], d, &[]));
    let seeded = json(&run(&["embed", "C.java", "--dims", "8", "--seed", "4"], d, &[]));
    assert_eq!(from_file["embeddings"], seeded["embeddings"]);
    let e = &from_file["embeddings"][0];
    assert_eq!(e["ep"].as_array().unwrap().len(), 8);
    assert_eq!(e["ef"].as_array().unwrap().len(), 8);
}

#[test]
fn inputs_are_never_overwritten() {
    let (dir, file) = workspace();
    let out = run(&["parse", "C.java", "--out", "C.java"], dir.path(), &[]);
    assert_eq!(out.status.code(), Some(1));
    assert_eq!(std::fs::read_to_string(file).unwrap(), METHOD);
}

#[test]
fn transform_text_and_json() {
    let (dir, _) = workspace();
    let d = dir.path();
    std::fs::write(d.join("api.tsv"), "Math.abs\tReturns the absolute value of an int value.\n").unwrap();
    let out = run(&["transform", "C.java", "--api", "api.tsv", "--out", "ctx.txt"], d, &[]);
    assert!(out.status.success());
    let text = std::fs::read_to_string(d.join("ctx.txt")).unwrap();
    assert!(text.trim_end().ends_with("Returns the absolute value of an int value."));
    let j = json(&run(&["transform", "C.java", "--api", "api.tsv", "--json", "--truncate", "--max-tokens", "3"], d, &[]));
    assert_eq!(j["apis"][0], "Math.abs");
    assert_eq!(j["text"], "MethodDeclaration int getLarger");
}

#[test]
fn stats_is_independent_of_jobs() {
    let (dir, _) = workspace();
    let d = dir.path();
    let mut index = String::new();
    for i in 0..6 {
        std::fs::write(d.join(format!("m{i}.java")), METHOD.replace("getLarger", &format!("m{i}"))).unwrap();
        index.push_str(&format!("m{i},m{i}.java,{}\n", i / 2));
    }
    std::fs::write(d.join("broken.java"), "class {").unwrap();
    index.push_str("broken,broken.java,9\n");
    std::fs::write(d.join("index.csv"), index).unwrap();
    let one = run(&["stats", "--index", "index.csv", "--jobs", "1"], d, &[]);
    let four = run(&["stats", "--index", "index.csv", "--jobs", "4"], d, &[]);
    assert_eq!(one.stdout, four.stdout);
    let s = json(&one);
    assert_eq!((s["parsed"].as_u64(), s["failed"].as_u64()), (Some(6), Some(1)));
    assert_eq!(s["recommended_lambda"], 10);
}

#[test]
fn selfcheck_reports_both_suites() {
    let dir = tempfile::tempdir().unwrap();
    let r = json(&run(&["selfcheck", "--dims", "8", "--seed", "7"], dir.path(), &[]));
    assert_eq!(r["passed"], true);
    assert_eq!(r["gradient"]["nodes"], 12);
    assert_eq!(r["permutation"]["graphs"], 20);
}

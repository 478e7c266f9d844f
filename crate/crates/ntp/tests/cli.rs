use std::fs;
use std::path::Path;
use std::process::{Command, Output};

const FAMILY: &str = "\
fatherOf(abe, homer).
parentOf(homer, bart).
grandfatherOf(X, Y) :- fatherOf(X, Z), parentOf(Z, Y).
";

fn ntp(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_ntp")).args(args).output().unwrap()
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn write_kb(dir: &Path) -> String {
    let path = dir.join("family.ntp");
    fs::write(&path, FAMILY).unwrap();
    path.to_str().unwrap().to_string()
}

#[test]
fn symbolic_query_binds_variable() {
    let dir = tempfile::tempdir().unwrap();
    let kb = write_kb(dir.path());
    let out = ntp(&["prove", "--kb", &kb, "--query", "grandfatherOf(Q, bart)", "--symbolic"]);
    assert!(out.status.success(), "{out:?}");
    assert_eq!(stdout(&out).trim(), "Q = abe");

    let out = ntp(&["prove", "--kb", &kb, "--query", "grandfatherOf(abe, bart)", "--symbolic", "--depth", "1"]);
    assert_eq!(stdout(&out).trim(), "false.");
}

#[test]
fn usage_errors_exit_2() {
    assert_eq!(ntp(&["prove", "--query", "p(a)"]).status.code(), Some(2));
    let dir = tempfile::tempdir().unwrap();
    let kb = write_kb(dir.path());
    assert_eq!(ntp(&["prove", "--kb", &kb, "--query", "p(a)", "--depth", "0"]).status.code(), Some(2));
    assert_eq!(ntp(&["frobnicate"]).status.code(), Some(2));
}

#[test]
fn runtime_errors_exit_1() {
    let out = ntp(&["prove", "--kb", "/nonexistent/kb.ntp", "--query", "p(a)", "--symbolic"]);
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn train_prove_decode_roundtrip() {
    let dir = tempfile::tempdir().unwrap();
    let kb = write_kb(dir.path());
    let run = dir.path().join("run");
    let run = run.to_str().unwrap();
    let out = ntp(&["train", "--kb", &kb, "--epochs", "2", "--k", "4", "--model", "ntp", "--out", run]);
    assert!(out.status.success(), "{out:?}");
    for f in ["checkpoint.json", "log.jsonl", "metrics.json", "config.json"] {
        assert!(Path::new(run).join(f).exists(), "missing {f}");
    }
    assert_eq!(fs::read_to_string(Path::new(run).join("log.jsonl")).unwrap().lines().count(), 2);

    let out = ntp(&["prove", "--run", run, "--query", "fatherOf(abe, homer)"]);
    assert!(out.status.success(), "{out:?}");
    assert!(stdout(&out).starts_with("score 1.000000"), "{}", stdout(&out));

    // No parameterized rules, nothing to decode.
    let out = ntp(&["decode", "--run", run]);
    assert!(out.status.success(), "{out:?}");
    assert_eq!(stdout(&out), "");
}

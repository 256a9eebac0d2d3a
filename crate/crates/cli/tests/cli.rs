//! End-to-end checks of the command line: subcommand output, file formats,
//! error paths, and reproducibility.

use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_efgames"))
}

fn data(file: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR"))
        .join("../../data")
        .join(file)
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().expect("binary runs")
}

fn stdout(output: &Output) -> String {
    String::from_utf8_lossy(&output.stdout).trim().to_string()
}

#[test]
fn ordinal_eval() {
    let out = run(&["ordinal", "eval", "w # 1"]);
    assert!(out.status.success());
    assert_eq!(stdout(&out), "w+1");

    let json = run(&["--format", "json", "ordinal", "eval", "w^2*3+w+4 # w"]);
    let value: serde_json::Value = serde_json::from_str(&stdout(&json)).unwrap();
    assert_eq!(value["value"], "w^2*3+w*2+4");
}

#[test]
fn ordinal_eval_rejects_non_cnf() {
    let out = run(&["ordinal", "eval", "w+w^2"]);
    assert_eq!(out.status.code(), Some(1));
    let err: serde_json::Value =
        serde_json::from_str(String::from_utf8_lossy(&out.stderr).trim()).unwrap();
    assert_eq!(err["error"]["code"], "parse-error");
}

#[test]
fn formula_commands() {
    let out = run(&[
        "formula",
        "size",
        "--text",
        "E x0. (P(x0) & Q(x0))",
        "--measure",
        "size",
    ]);
    assert_eq!(stdout(&out), "3");

    let out = run(&["formula", "qr", "--text", "E x0. A x1. x0 != x1"]);
    assert_eq!(stdout(&out), "2");

    let out = run(&["formula", "nnf", "--text", "~(p0 & ~p1)"]);
    assert_eq!(stdout(&out), "(~p0 | p1)");
}

#[test]
fn efd_solve_pure_sets() {
    let out = run(&[
        "efd",
        "solve",
        "--file",
        data("sets_2_vs_3.json").to_str().unwrap(),
        "--rank",
        "3",
    ]);
    assert!(stdout(&out).contains("player I wins"));
}

#[test]
fn efb_minsize_and_referee_round_trip() {
    let dir = std::env::temp_dir().join("efgames-cli-test");
    std::fs::create_dir_all(&dir).unwrap();
    let trace = dir.join("parity_trace.json");
    let strategy = dir.join("parity_strategy.json");
    let out = run(&[
        "--format",
        "json",
        "efb",
        "minsize",
        "--classA",
        data("parity_a.json").to_str().unwrap(),
        "--classB",
        data("parity_b.json").to_str().unwrap(),
        "--budget",
        "6",
        "--jmax",
        "0",
        "--strategy-out",
        strategy.to_str().unwrap(),
        "--trace-out",
        trace.to_str().unwrap(),
    ]);
    assert!(out.status.success());
    let value: serde_json::Value = serde_json::from_str(&stdout(&out)).unwrap();
    assert_eq!(value["value"], 4);
    assert!(strategy.exists());

    let replay = run(&[
        "--format",
        "json",
        "efb",
        "referee",
        "--trace",
        trace.to_str().unwrap(),
        "--propositional",
    ]);
    assert!(replay.status.success(), "{:?}", replay);
    let report: serde_json::Value = serde_json::from_str(&stdout(&replay)).unwrap();
    assert_eq!(report["match"], true);
    assert_eq!(report["winner"], "I");
}

#[test]
fn search_minformula() {
    let out = run(&[
        "search",
        "minformula",
        "--classA",
        data("parity_a.json").to_str().unwrap(),
        "--classB",
        data("parity_b.json").to_str().unwrap(),
        "--max-value",
        "6",
        "--jmax",
        "0",
    ]);
    let line = stdout(&out);
    assert!(line.starts_with("value 4:"), "{line}");
}

#[test]
fn verify_adequacy_on_shipped_corpus() {
    let out = run(&[
        "verify",
        "adequacy",
        "--corpus",
        data("small_corpus.json").to_str().unwrap(),
        "--budget",
        "6",
        "--jmax",
        "2",
    ]);
    assert_eq!(stdout(&out), "agree: 9/9");
}

#[test]
fn strings_commands() {
    let out = run(&["strings", "truncate", "--property", "fin-ones", "--length", "2"]);
    assert_eq!(stdout(&out), "00 01 10 11");

    let out = run(&[
        "strings",
        "truncate",
        "--property",
        "odd-ones",
        "--length",
        "1",
        "--filter",
        r#"{"0": true}"#,
    ]);
    assert_eq!(stdout(&out), "1");

    let dense = run(&[
        "--format",
        "json",
        "strings",
        "dense-lb",
        "--L",
        "4",
        "--d",
        "3",
    ]);
    let value: serde_json::Value = serde_json::from_str(&stdout(&dense)).unwrap();
    assert_eq!(value["bothDense"], true);
    assert_eq!(value["minValueExceedsD"], true);
}

#[test]
fn caps_are_env_overridable() {
    let out = bin()
        .env("EFGAMES_LENGTH_CAP", "1")
        .args(["strings", "truncate", "--property", "fin-ones", "--length", "2"])
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(1));
    let err: serde_json::Value =
        serde_json::from_str(String::from_utf8_lossy(&out.stderr).trim()).unwrap();
    assert_eq!(err["error"]["code"], "cap-exceeded");
}

#[test]
fn simulate_is_reproducible_and_player_two_safe() {
    let args = [
        "--format",
        "json",
        "--seed",
        "11",
        "strings",
        "simulate",
        "--p1",
        "fin-ones",
        "--p2",
        "odd-ones",
        "--rank",
        "w*2+3",
    ];
    let first = run(&args);
    let second = run(&args);
    assert!(first.status.success());
    assert_eq!(first.stdout, second.stdout, "seeded runs must be identical");
    let report: serde_json::Value = serde_json::from_str(&stdout(&first)).unwrap();
    assert_eq!(report["playerTwoSafe"], true);
    assert_ne!(report["winner"], "I");
}

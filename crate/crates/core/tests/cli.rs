use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use gsdag::bundle::StrategyBundle;
use gsdag::oracle::strategy_eu;

fn model(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("models").join(name)
}

fn gsdag(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_gsdag")).args(args).output().expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn p(path: &Path) -> &str {
    path.to_str().unwrap()
}

#[test]
fn validate_accepts_and_rejects() {
    let ok = gsdag(&["validate", p(&model("king.json"))]);
    assert!(ok.status.success());
    assert_eq!(stdout(&ok).trim(), "ok");

    let dir = tempfile::tempdir().unwrap();
    let broken = dir.path().join("broken.json");
    std::fs::write(
        &broken,
        r#"{"variables": [
            {"id": "H", "kind": "chance-hidden", "states": ["a", "b"]},
            {"id": "D", "kind": "decision", "states": ["a", "b"], "parents": ["H"]},
            {"id": "U", "kind": "utility", "parents": ["D"]}],
          "cpts": [{"child": "H", "values": [0.5, 0.6]}],
          "utilities": [{"id": "U", "domain": ["D"], "values": [0, 1]}]}"#,
    )
    .unwrap();
    let bad = gsdag(&["validate", p(&broken)]);
    assert_eq!(bad.status.code(), Some(1));
    let out = stdout(&bad);
    assert!(out.contains("non-observable parent"), "{out}");
    assert!(out.contains("CPT not normalized"), "{out}");
    assert_eq!(out.lines().count(), 2);

    let solve = gsdag(&["solve", p(&broken)]);
    assert_eq!(solve.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&solve.stderr).starts_with("error:"));
}

#[test]
fn syntax_errors_exit_one() {
    let dir = tempfile::tempdir().unwrap();
    let f = dir.path().join("bad.json");
    std::fs::write(&f, "{\n\"variables\": [}").unwrap();
    let o = gsdag(&["validate", p(&f)]);
    assert_eq!(o.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&o.stderr).contains("line 2"));
}

#[test]
fn usage_errors_exit_two() {
    assert_eq!(gsdag(&["frobnicate"]).status.code(), Some(2));
    assert_eq!(gsdag(&["simulate", p(&model("king.json"))]).status.code(), Some(2));
    assert_eq!(gsdag(&[]).status.code(), Some(2));
}

#[test]
fn order_lists_edges() {
    let o = gsdag(&["order", p(&model("coin_match.json"))]);
    assert!(o.status.success());
    assert_eq!(stdout(&o).trim(), "X -> D");
}

#[test]
fn skeleton_summary_and_dot() {
    let dir = tempfile::tempdir().unwrap();
    let dot = dir.path().join("sk.dot");
    let sdag = dir.path().join("sdag.dot");
    let o = gsdag(&["skeleton", p(&model("king.json")), "--dot", p(&dot), "--sdag", p(&sdag)]);
    assert!(o.status.success());
    let out = stdout(&o);
    assert!(out.starts_with("nodes 15 "), "{out}");
    assert_eq!(out.lines().count(), 16);
    let text = std::fs::read_to_string(&dot).unwrap();
    assert!(text.starts_with("digraph skeleton"));
    assert!(std::fs::read_to_string(&sdag).unwrap().contains("doublecircle"));

    let trimmed = gsdag(&["skeleton", p(&model("king.json")), "--trim-relevance"]);
    assert!(trimmed.status.success());
}

#[test]
fn solve_bundle_eval_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let bundle = dir.path().join("king.bundle.json");
    let o = gsdag(&["solve", p(&model("king.json")), "--bundle", p(&bundle)]);
    assert!(o.status.success());
    let out = stdout(&o);
    assert_eq!(out.lines().count(), 1);
    let meu: f64 = out.trim().parse().unwrap();
    // 12 significant digits
    let digits = out.trim().trim_start_matches('-').replace('.', "");
    assert_eq!(digits.trim_start_matches('0').len(), 12, "{out}");

    let b = StrategyBundle::from_json(&std::fs::read_to_string(&bundle).unwrap()).unwrap();
    assert!((b.meu - meu).abs() < 1e-9);
    let (uid, s) = b.to_strategy().unwrap();
    assert!((strategy_eu(&uid, &s).unwrap() - meu).abs() < 1e-9);

    let e = gsdag(&["eval", p(&model("king.json")), "--bundle", p(&bundle)]);
    assert!(e.status.success());
    let lines: Vec<String> = stdout(&e).lines().map(String::from).collect();
    assert_eq!(lines.len(), 2);
    let value = |l: &str| l.split_whitespace().nth(1).unwrap().parse::<f64>().unwrap();
    assert!(lines[0].starts_with("brute_meu ") && (value(&lines[0]) - meu).abs() < 1e-9);
    assert!(lines[1].starts_with("strategy_eu ") && (value(&lines[1]) - meu).abs() < 1e-9);

    // a bundle for another model is refused
    let wrong = gsdag(&["eval", p(&model("coin_match.json")), "--bundle", p(&bundle)]);
    assert_eq!(wrong.status.code(), Some(1));
}

#[test]
fn bundles_are_deterministic_apart_from_the_timestamp() {
    let dir = tempfile::tempdir().unwrap();
    let read = |name: &str| {
        let path = dir.path().join(name);
        assert!(gsdag(&["solve", p(&model("four_decisions.json")), "--bundle", p(&path)]).status.success());
        let mut b = StrategyBundle::from_json(&std::fs::read_to_string(path).unwrap()).unwrap();
        b.meta.created_unix = 0;
        b.to_json()
    };
    assert_eq!(read("a.json"), read("b.json"));
}

#[test]
fn simulate_is_reproducible_and_close() {
    let dir = tempfile::tempdir().unwrap();
    let bundle = dir.path().join("b.json");
    let m = model("king.json");
    let o = gsdag(&["solve", p(&m), "--bundle", p(&bundle)]);
    let meu: f64 = stdout(&o).trim().parse().unwrap();
    let run = || stdout(&gsdag(&["simulate", p(&m), "--bundle", p(&bundle), "--n", "100000", "--seed", "7"]));
    let a = run();
    assert_eq!(a, run());
    let (mean, se) = a.trim().split_once(" ± ").unwrap();
    let (mean, se): (f64, f64) = (mean.parse().unwrap(), se.parse().unwrap());
    assert!((mean - meu).abs() <= 4.0 * se, "{mean} ± {se} vs {meu}");

    assert_eq!(gsdag(&["simulate", p(&m), "--bundle", p(&bundle), "--n", "0"]).status.code(), Some(1));
}

#[test]
fn dump_potentials_goes_to_stderr() {
    let o = gsdag(&["solve", p(&model("four_decisions.json")), "--dump-potentials"]);
    assert!(o.status.success());
    assert_eq!(stdout(&o).lines().count(), 1);
    let err = String::from_utf8_lossy(&o.stderr);
    let rows: Vec<serde_json::Value> = err.lines().map(|l| serde_json::from_str(l).unwrap()).collect();
    assert!(!rows.is_empty());
    for r in &rows {
        let size: usize = r["domain"].as_array().unwrap().len();
        assert!(r["values"].as_array().unwrap().len() >= 1 << size.min(1));
    }
    assert!(rows.iter().any(|r| r["step"] == "unified"));
}

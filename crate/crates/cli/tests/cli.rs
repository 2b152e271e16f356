use std::fs;
use std::process::{Command, Output};

use serde_json::Value;

fn promissory(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_promissory"))
        .args(args)
        .env_remove("PROMISSORY_ALPHA")
        .env_remove("PROMISSORY_BETA")
        .output()
        .expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn summary(o: &Output) -> Value {
    serde_json::from_slice(&o.stdout).expect("summary is JSON")
}

fn trust(s: &Value, observer: &str, promiser: &str) -> String {
    s["trust"]
        .as_array()
        .unwrap()
        .iter()
        .find(|t| t["observer"] == observer && t["promiser"] == promiser)
        .map(|t| t["trust"].as_str().unwrap().to_string())
        .unwrap()
}

#[test]
fn run_corpus_money_transfer() {
    let o = promissory(&["run", "corpus:money_transfer"]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let s = summary(&o);
    assert_eq!(trust(&s, "B", "A"), "11/20");
    assert!(s["verdicts"]
        .as_array()
        .unwrap()
        .iter()
        .any(|v| v["promise"] == "P9" && v["status"] == "kept"));
}

#[test]
fn run_writes_public_trace() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("trace.jsonl");
    let o = promissory(&["run", "corpus:inseq_usage", "--public", "--out", out.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let text = fs::read_to_string(&out).unwrap();
    assert!(!text.is_empty());
    for (i, line) in text.lines().enumerate() {
        let r: Value = serde_json::from_str(line).unwrap();
        assert_eq!(r["seq"], i as u64);
        assert!(r.get("partition").is_none());
        assert!(line.starts_with("{\"time\":"));
        let at = |k: &str| line.find(&format!("\"{k}\":")).unwrap();
        assert!(at("seq") < at("origin") && at("origin") < at("kind") && at("kind") < at("payload"));
    }
    assert!(!text.contains("idocc_loaded"));
}

#[test]
fn trust_flags_override_scenario_and_environment() {
    let o = Command::new(env!("CARGO_BIN_EXE_promissory"))
        .args(["run", "corpus:money_transfer"])
        .env("PROMISSORY_ALPHA", "1/5")
        .output()
        .unwrap();
    assert_eq!(trust(&summary(&o), "B", "A"), "3/5");

    let o = Command::new(env!("CARGO_BIN_EXE_promissory"))
        .args(["run", "corpus:money_transfer", "--alpha", "1/2"])
        .env("PROMISSORY_ALPHA", "1/5")
        .output()
        .unwrap();
    assert_eq!(trust(&summary(&o), "B", "A"), "3/4");

    let o = promissory(&["run", "corpus:money_transfer", "--alpha", "2"]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn scenario_errors_carry_line_and_column() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("bad.scn");
    fs::write(&path, "agents A, B\nat 1 promise A -> Z scope {B} body \"x\"\n").unwrap();
    let o = promissory(&["run", path.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains(":2:19:"), "{}", stderr(&o));

    let o = promissory(&["run", "/definitely/not/here.scn"]);
    assert_eq!(o.status.code(), Some(2));
    let o = promissory(&["run", "corpus:nope"]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn run_reports_engine_errors_with_exit_one() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("twice.scn");
    fs::write(
        &path,
        "agents A, B\nat 1 offer A -> B as O1 scope {B} body \"lend a bike\" condition \"B asks\"\n\
         at 2 accept O1 by B\nat 3 accept O1 by B\n",
    )
    .unwrap();
    let o = promissory(&["run", path.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(1), "{}", stdout(&o));
    assert!(!summary(&o)["errors"].as_array().unwrap().is_empty());
}

#[test]
fn meadow_eval() {
    let o = promissory(&["meadow", "eval", "1/0"]);
    assert_eq!(stdout(&o).trim(), "0");
    let o = promissory(&["meadow", "eval", "X/X = 1", "--env", "X=0", "--semantics", "kleene"]);
    assert_eq!(stdout(&o).trim(), "undefined");
    let o = promissory(&["meadow", "eval", "X/X = 1", "--env", "X=3/4"]);
    assert_eq!(stdout(&o).trim(), "true");
    assert_eq!(promissory(&["meadow", "eval", "Y + 1"]).status.code(), Some(1));
    assert_eq!(promissory(&["meadow", "eval", "1 +"]).status.code(), Some(2));
}

#[test]
fn meadow_solve_and_check() {
    let o = promissory(&["meadow", "solve", "0 <= X <= 2 and 0 <= X/(X-1) <= 2"]);
    assert_eq!(stdout(&o).trim(), "{0, 1, 2}");
    let o = promissory(&["meadow", "solve", "X/X != 1", "--bound", "8"]);
    assert_eq!(stdout(&o).trim(), "{0}");

    let ok = promissory(&["meadow", "check", "X/X != 1", "X = 0"]);
    assert_eq!(ok.status.code(), Some(0));
    let bad = promissory(&["meadow", "check", "0 <= X <= 2 and 0 < X/(X-1) < 2", "X = 1"]);
    assert_eq!(bad.status.code(), Some(1));
    assert!(stdout(&bad).contains("only simplified: {1}"), "{}", stdout(&bad));
}

#[test]
fn meadow_creep() {
    let o = promissory(&["meadow", "creep", "0 <= X <= 2 and 0 <= X/(X-1) <= 2", "--bound", "4"]);
    assert_eq!(o.status.code(), Some(0));
    assert!(stdout(&o).contains("X = 1"), "{}", stdout(&o));
    let o = promissory(&["meadow", "creep", "X != 0 sand X/X = 1", "--bound", "4"]);
    assert!(stdout(&o).contains("guarded"), "{}", stdout(&o));
}

#[test]
fn budget_conformance() {
    let dir = tempfile::tempdir().unwrap();
    let budget = dir.path().join("tq.tpx");
    let exact = dir.path().join("final.tpx");
    let over = dir.path().join("overrun.tpx");
    fs::write(&budget, "vars: n, p, c, k\nfees: n*p\nvenue: -c\ncatering: -(k*n)\n").unwrap();
    fs::write(&exact, "fees: 560\nvenue: -200\ncatering: -240\n").unwrap();
    fs::write(&over, "fees: 559\nvenue: -200\ncatering: -240\n").unwrap();
    let b = budget.to_str().unwrap();
    let args = |acct: &str| {
        promissory(&[
            "budget", b, acct, "--subst", "p = 20, k = 8", "--subst", "n = 30, c = 200", "--shortfall", "40",
        ])
    };
    let o = args(exact.to_str().unwrap());
    assert_eq!(o.status.code(), Some(0), "{}{}", stdout(&o), stderr(&o));
    assert!(stdout(&o).contains("budget net: 160"));
    assert_eq!(args(over.to_str().unwrap()).status.code(), Some(1));

    let open = promissory(&["budget", b, exact.to_str().unwrap()]);
    assert_eq!(open.status.code(), Some(1));

    fs::write(dir.path().join("broken.tpx"), "fees 560\n").unwrap();
    let bad = promissory(&["budget", b, dir.path().join("broken.tpx").to_str().unwrap()]);
    assert_eq!(bad.status.code(), Some(2));
}

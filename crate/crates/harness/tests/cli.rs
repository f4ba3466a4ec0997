use std::path::Path;
use std::process::{Command, Output};

use facloc_harness::ledger::{read_ledger, LedgerLine};

fn facloc(dir: &Path, args: &[&str]) -> Output {
    let out = Command::new(env!("CARGO_BIN_EXE_facloc")).current_dir(dir).args(args).output().unwrap();
    assert!(out.status.code().is_some());
    out
}

fn ok(dir: &Path, args: &[&str]) -> String {
    let out = facloc(dir, args);
    assert!(out.status.success(), "{args:?}: {}", String::from_utf8_lossy(&out.stderr));
    String::from_utf8(out.stdout).unwrap()
}

#[test]
fn line_stream_through_every_subcommand() {
    let tmp = tempfile::tempdir().unwrap();
    let d = tmp.path();
    ok(d, &["gen", "line", "--positions", "0,10", "--costs", "4,4", "--arrivals", "0,1,9,10", "--out", "a.jsonl"]);
    let first = std::fs::read_to_string(d.join("a.jsonl")).unwrap();
    ok(d, &["gen", "line", "--positions", "0,10", "--costs", "4,4", "--arrivals", "0,1,9,10", "--out", "b.jsonl"]);
    assert_eq!(first, std::fs::read_to_string(d.join("b.jsonl")).unwrap());

    let opt: serde_json::Value = serde_json::from_str(&ok(d, &["oracle", "--input", "a.jsonl"])).unwrap();
    assert_eq!(opt["cost"], 10.0);
    assert_eq!(opt["open"], serde_json::json!([0, 1]));

    let s: serde_json::Value =
        serde_json::from_str(&ok(d, &["run-online", "--input", "a.jsonl", "--report", "on.jsonl", "--check"])).unwrap();
    assert_eq!(s["max_ratio"], 1.0);
    let lines = read_ledger(std::fs::read(d.join("on.jsonl")).unwrap().as_slice()).unwrap();
    assert_eq!(lines.len(), 5);
    assert!(matches!(lines[0], LedgerLine::Meta(_)));

    ok(d, &["--seed", "3", "run-incremental", "--input", "a.jsonl", "--gamma", "64", "--check", "--quiet"]);
    ok(d, &["run-hst", "--input", "a.jsonl", "--check", "--quiet"]);

    let stats: serde_json::Value = serde_json::from_str(&ok(
        d,
        &["embed", "--input", "a.jsonl", "--samples", "20", "--stats", "--emit-tree", "t.json"],
    ))
    .unwrap();
    assert_eq!(stats["dominance_violations"], 0);
    ok(d, &["gen", "line", "--positions", "0,10", "--costs", "4,4", "--out", "empty.jsonl"]);
    std::fs::write(
        d.join("tree-stream.jsonl"),
        format!(
            "{}{}",
            std::fs::read_to_string(d.join("empty.jsonl")).unwrap(),
            "{\"type\":\"arrive\",\"client\":\"x\",\"nearest\":1}\n{\"type\":\"depart\",\"client\":\"x\"}\n"
        ),
    )
    .unwrap();
    ok(d, &["run-hst", "--tree", "t.json", "--input", "tree-stream.jsonl", "--check", "--quiet"]);
}

#[test]
fn tree_generation_and_bench() {
    let tmp = tempfile::tempdir().unwrap();
    let d = tmp.path();
    let gen: Vec<_> =
        "--seed 4 gen hst --leaves 8 --depth 3 --events 80 --tree-out t.json --out s.jsonl".split(' ').collect();
    ok(d, &gen);
    ok(d, &["run-hst", "--tree", "t.json", "--input", "s.jsonl", "--verify-every", "1", "--check", "--quiet"]);
    ok(d, &["--seed", "2", "gen", "random-metric", "--facilities", "6", "--clients", "30", "--out", "m.jsonl"]);
    std::fs::write(
        d.join("bench.json"),
        r#"{"cells":[{"algorithm":"online","input":"m.jsonl"},{"algorithm":"incremental","input":"m.jsonl","seeds":[1,2]},
            {"algorithm":"hst","input":"s.jsonl","tree":"t.json"}],"out_dir":"ledgers"}"#,
    )
    .unwrap();
    let table = ok(d, &["bench", "--config", "bench.json", "--check"]);
    assert_eq!(table.lines().count(), 5);
    assert_eq!(std::fs::read_dir(d.join("ledgers")).unwrap().count(), 4);
}

#[test]
fn errors_exit_nonzero() {
    let tmp = tempfile::tempdir().unwrap();
    let d = tmp.path();
    assert!(!facloc(d, &["run-online", "--input", "missing.jsonl"]).status.success());
    std::fs::write(d.join("bad.jsonl"), "{\"type\":\"header\",\"facilities\":[{\"id\":0,\"cost\":1.0}],\"fdist\":[[0]]}\n{\"type\":\"depart\",\"client\":\"nobody\"}\n").unwrap();
    let out = facloc(d, &["oracle", "--input", "bad.jsonl"]);
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("unknown client"));
    assert!(!facloc(d, &["gen", "random-metric", "--facilities", "50", "--grid", "2"]).status.success());
}

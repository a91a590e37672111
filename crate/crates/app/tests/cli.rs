//! The `scholarchat` binary end to end.

mod common;

use std::io::{BufRead, BufReader};
use std::path::Path;
use std::process::{Command, Stdio};

use common::{call, cli, repo_path};

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn json_out(out: &std::process::Output) -> serde_json::Value {
    assert!(
        out.status.success(),
        "stderr: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    serde_json::from_slice(&out.stdout).unwrap()
}

/// Runs synth-fixture, ingest, cluster, name-clusters and segment into `root`.
fn pipeline(root: &Path) -> std::path::PathBuf {
    let raw = root.join("raw");
    let snap = root.join("snap");
    json_out(&cli(&["synth-fixture", "--out", s(&raw)]));
    let ingest = json_out(&cli(&[
        "ingest",
        "--corpus",
        s(&raw.join("publications.jsonl")),
        "--taxonomy",
        s(&raw.join("taxonomy.json")),
        "--embeddings",
        s(&raw.join("embeddings.jsonl")),
        "--out",
        s(&snap),
    ]));
    assert_eq!(ingest["publications"], 200);
    let report = json_out(&cli(&["cluster", "--snapshot", s(&snap)]));
    assert_eq!(report["oversize_leaf_count"], 0);
    json_out(&cli(&["name-clusters", "--snapshot", s(&snap)]));
    json_out(&cli(&["segment", "--snapshot", s(&snap)]));
    snap
}

#[test]
fn missing_embeddings_exit_two_and_name_the_path() {
    let dir = tempfile::tempdir().unwrap();
    let raw = dir.path().join("raw");
    json_out(&cli(&["synth-fixture", "--out", s(&raw)]));
    let missing = raw.join("missing.jsonl");
    let out = cli(&[
        "ingest",
        "--corpus",
        s(&raw.join("publications.jsonl")),
        "--taxonomy",
        s(&raw.join("taxonomy.json")),
        "--embeddings",
        s(&missing),
        "--out",
        s(&dir.path().join("snap")),
    ]);
    assert_eq!(out.status.code(), Some(2));
    let err: serde_json::Value = serde_json::from_slice(&out.stderr).unwrap();
    assert_eq!(err["error"], "missing_input");
    assert_eq!(err["path"], s(&missing));
    assert!(err["message"].as_str().unwrap().contains(s(&missing)));
}

#[test]
fn pipeline_then_serve_answers_health() {
    let dir = tempfile::tempdir().unwrap();
    let snap = pipeline(dir.path());
    let report: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(snap.join("clusters.report.json")).unwrap())
            .unwrap();
    assert_eq!(report["name_uniqueness"], true);

    let mut child = Command::new(env!("CARGO_BIN_EXE_scholarchat"))
        .args(["serve", "--snapshot", s(&snap), "--port", "0"])
        .stdout(Stdio::piped())
        .spawn()
        .unwrap();
    let mut line = String::new();
    BufReader::new(child.stdout.take().unwrap())
        .read_line(&mut line)
        .unwrap();
    let base = line
        .trim()
        .strip_prefix("listening on ")
        .unwrap()
        .to_string();
    let (status, health) = call(common::agent().get(&format!("{base}/health")).call());
    child.kill().unwrap();
    child.wait().unwrap();
    assert_eq!(status, 200);
    assert_eq!(health["corpus_size"], 200);
}

#[test]
fn eval_commands() {
    let dir = tempfile::tempdir().unwrap();
    let snap = pipeline(dir.path());
    let gold = repo_path("fixtures/gold/classify_small.json");
    let metrics = json_out(&cli(&[
        "eval",
        "classify",
        "--snapshot",
        s(&snap),
        "--gold",
        s(&gold),
    ]));
    assert!((metrics["macro_f1"].as_f64().unwrap() - 0.7333).abs() < 1e-4);
    assert_eq!(metrics["accuracy"], 0.75);

    let clusters = json_out(&cli(&["eval", "clusters", "--snapshot", s(&snap)]));
    assert_eq!(clusters["oversize_leaf_count"], 0);

    let contradiction = repo_path("fixtures/scripts/contradiction.json");
    let out = cli(&["eval", "script", "--snapshot", s(&snap), s(&contradiction)]);
    assert_eq!(out.status.code(), Some(1));
    let reports: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(reports[0]["first_failure"]["turn"], 1);
}

#[test]
fn bad_config_is_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let config = dir.path().join("app.toml");
    std::fs::write(&config, "[server]\nprot = 80\n").unwrap();
    let out = cli(&[
        "--config",
        s(&config),
        "eval",
        "clusters",
        "--snapshot",
        "x",
    ]);
    assert_eq!(out.status.code(), Some(2));
    let err: serde_json::Value = serde_json::from_slice(&out.stderr).unwrap();
    assert_eq!(err["error"], "config");
}

#[test]
fn cluster_needs_an_ingested_snapshot() {
    let dir = tempfile::tempdir().unwrap();
    let out = cli(&["cluster", "--snapshot", s(&dir.path().join("absent"))]);
    assert_eq!(out.status.code(), Some(2));
}

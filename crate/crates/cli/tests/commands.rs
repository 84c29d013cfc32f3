use std::collections::BTreeMap;
use std::fs;
use std::io::{BufRead, BufReader};
use std::path::{Path, PathBuf};
use std::process::{Child, Command, Output, Stdio};

use serde_json::{json, Value};

const BIN: &str = env!("CARGO_BIN_EXE_eicharvest");

fn run(args: &[&str]) -> Output {
    Command::new(BIN).args(args).output().unwrap()
}

fn ok(args: &[&str]) -> String {
    let out = run(args);
    assert!(
        out.status.success(),
        "{args:?} failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    String::from_utf8(out.stdout).unwrap()
}

fn p(path: &Path) -> &str {
    path.to_str().unwrap()
}

fn tree(dir: &Path) -> BTreeMap<String, Vec<u8>> {
    fs::read_dir(dir)
        .unwrap()
        .map(|e| {
            let e = e.unwrap();
            (e.file_name().to_string_lossy().into_owned(), fs::read(e.path()).unwrap())
        })
        .collect()
}

/// synth -> ingest -> workload on a small collection.
fn pipeline(dir: &Path) -> (PathBuf, PathBuf, PathBuf) {
    let data = dir.join("data");
    let index = dir.join("index");
    let workload = dir.join("workload.jsonl");
    ok(&[
        "synth",
        "--seed",
        "5",
        "--out",
        p(&data),
        "--entities",
        "6",
        "--docs-per-entity",
        "15",
        "--kps-per-entity",
        "30",
        "--confusable-pairs",
        "3",
    ]);
    ok(&["ingest", p(&data.join("corpus.jsonl")), p(&index)]);
    ok(&[
        "workload",
        p(&index),
        p(&data.join("entities.jsonl")),
        "--min-kps",
        "10",
        "--out",
        p(&workload),
    ]);
    (data, index, workload)
}

#[test]
fn synth_is_reproducible() {
    let dir = tempfile::tempdir().unwrap();
    let (a, b) = (dir.path().join("a"), dir.path().join("b"));
    ok(&["synth", "--seed", "42", "--out", p(&a)]);
    ok(&["synth", "--seed", "42", "--out", p(&b)]);
    let (ta, tb) = (tree(&a), tree(&b));
    assert_eq!(ta.keys().collect::<Vec<_>>(), ["corpus.jsonl", "entities.jsonl", "kb.jsonl", "params.json"]);
    assert_eq!(ta, tb);
    let c = dir.path().join("c");
    ok(&["synth", "--seed", "43", "--out", p(&c)]);
    assert_ne!(tree(&c)["corpus.jsonl"], ta["corpus.jsonl"]);
}

#[test]
fn simulate_writes_one_row_per_query_strategy_and_depth() {
    let dir = tempfile::tempdir().unwrap();
    let (data, _, workload) = pipeline(dir.path());
    let queries = fs::read_to_string(&workload).unwrap().lines().count();
    assert!(queries >= 2);
    let config = dir.path().join("sim.json");
    fs::write(
        &config,
        json!({
            "corpus": "index",
            "workload": "workload.jsonl",
            "kb": "data/kb.jsonl",
            "output": "run",
            "max_k": 8,
            "checkpoints": [4, 8],
            "seed": 7
        })
        .to_string(),
    )
    .unwrap();
    let summary = ok(&["simulate", "--config", p(&config)]);
    assert!(summary.contains(&format!("{} rows", queries * 12 * 8)), "{summary}");

    let run_dir = dir.path().join("run");
    let csv = fs::read_to_string(run_dir.join("results.csv")).unwrap();
    let mut lines = csv.lines();
    assert_eq!(lines.next(), Some("query,strategy,k,coverage,engagement,accuracy"));
    assert_eq!(lines.count(), queries * 12 * 8);
    let traces = fs::read_to_string(run_dir.join("traces.jsonl")).unwrap();
    assert_eq!(traces.lines().count(), queries * 12);
    let manifest: Value = serde_json::from_str(&fs::read_to_string(run_dir.join("manifest.json")).unwrap()).unwrap();
    assert_eq!(manifest["rows"], queries * 12 * 8);

    // re-scoring the saved representations reproduces the runner's numbers
    let rescored = dir.path().join("disambig.csv");
    let means = ok(&["eval-disambig", p(&run_dir), p(&data.join("kb.jsonl")), "--out", p(&rescored)]);
    assert!(means.starts_with("strategy,k,mean_accuracy\n"));
    assert!(means.contains("ceiling,,"));
    let runner: Vec<String> = csv
        .lines()
        .skip(1)
        .filter_map(|l| {
            let f: Vec<&str> = l.rsplitn(2, ',').collect();
            (!f[0].is_empty()).then(|| f[0].to_string())
        })
        .collect();
    let again: Vec<String> = fs::read_to_string(&rescored)
        .unwrap()
        .lines()
        .skip(1)
        .map(|l| l.rsplit(',').next().unwrap().to_string())
        .collect();
    assert!(!runner.is_empty());
    assert_eq!(runner, again);

    // the same config with an explicit output override
    let other = dir.path().join("run2");
    ok(&["simulate", "--config", p(&config), "--out", p(&other)]);
    assert_eq!(fs::read(other.join("results.csv")).unwrap(), csv.into_bytes());
}

#[test]
fn workload_prints_to_stdout_by_default() {
    let dir = tempfile::tempdir().unwrap();
    let (data, index, workload) = pipeline(dir.path());
    let printed = ok(&["workload", p(&index), p(&data.join("entities.jsonl")), "--min-kps", "10"]);
    assert_eq!(printed, fs::read_to_string(workload).unwrap());
    let none = ok(&["workload", p(&index), p(&data.join("entities.jsonl")), "--max-df", "1"]);
    assert!(none.is_empty());
}

#[test]
fn failures_exit_nonzero_with_one_line() {
    let dir = tempfile::tempdir().unwrap();
    let missing = dir.path().join("missing.jsonl");
    let bad_json = dir.path().join("bad.json");
    fs::write(&bad_json, "{ not json").unwrap();
    let cases: Vec<Vec<&str>> = vec![
        vec!["ingest", p(&missing), p(dir.path())],
        vec!["simulate", "--config", p(&bad_json)],
        vec!["synth", "--seed", "1", "--out", p(dir.path()), "--entities", "0"],
        vec!["eval-disambig", p(dir.path()), p(&missing)],
        vec!["serve", "--index", p(&missing), "--port", "0"],
        vec!["synth", "--bogus"],
        vec!["frobnicate"],
    ];
    for args in cases {
        let out = run(&args);
        assert!(!out.status.success(), "{args:?}");
        let err = String::from_utf8(out.stderr).unwrap();
        assert_eq!(err.lines().count(), 1, "{args:?}: {err}");
        assert!(err.starts_with("eicharvest: "), "{err}");
    }
    assert!(run(&["--help"]).status.success());
}

struct Server(Child);

impl Drop for Server {
    fn drop(&mut self) {
        let _ = self.0.kill();
        let _ = self.0.wait();
    }
}

#[test]
fn serve_answers_over_tcp() {
    let dir = tempfile::tempdir().unwrap();
    let (_, index, _) = pipeline(dir.path());
    let mut child = Command::new(BIN)
        .args(["serve", "--index", p(&index)])
        .env("EICHARVEST_PORT", "0")
        .stdout(Stdio::piped())
        .stderr(Stdio::null())
        .spawn()
        .unwrap();
    let stdout = child.stdout.take().unwrap();
    let server = Server(child);
    let mut line = String::new();
    BufReader::new(stdout).read_line(&mut line).unwrap();
    let base = line.trim().strip_prefix("listening on ").expect("listen line").to_string();

    let client = reqwest::blocking::Client::new();
    let health: Value = client.get(format!("{base}/health")).send().unwrap().json().unwrap();
    assert_eq!(health["corpus"], "index");
    assert!(health["documents"].as_u64().unwrap() > 0);

    let bad = client
        .post(format!("{base}/sessions"))
        .json(&json!({"names": ["x"], "strategy": "NoSuchStrategy"}))
        .send()
        .unwrap();
    assert_eq!(bad.status().as_u16(), 422);

    let created: Value = client
        .post(format!("{base}/sessions"))
        .json(&json!({"names": ["x"], "strategy": "Lm"}))
        .send()
        .unwrap()
        .json()
        .unwrap();
    let id = created["session_id"].as_str().unwrap();
    let state = client.get(format!("{base}/sessions/{id}/state")).send().unwrap();
    assert_eq!(state.status().as_u16(), 200);
    drop(server);
}

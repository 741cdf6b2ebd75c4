use std::io::{BufRead, BufReader, Read, Write};
use std::net::TcpListener;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Arc;
use std::thread;

use serde_json::Value;

fn bin() -> Command {
    let mut c = Command::new(env!("CARGO_BIN_EXE_truelearn"));
    c.env_remove("WIKIFIER_API_KEY").env("RUST_LOG", "off");
    c
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().unwrap()
}

fn code(o: &Output) -> i32 {
    o.status.code().unwrap()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn read_json(path: &Path) -> Value {
    serde_json::from_str(&std::fs::read_to_string(path).unwrap()).unwrap()
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

/// One learner, labels + + - +, one topic per event.
fn toy_events(dir: &Path) -> PathBuf {
    let path = dir.join("toy.jsonl");
    let mut text = String::new();
    for (i, label) in [1, 1, -1, 1].iter().enumerate() {
        text += &format!(
            r#"{{"learner_id":"a","lecture_id":"v","fragment_index":{i},"order":{i},"topics":[{{"kc_id":{i},"cosine":0.5}}],"label":{label}}}"#
        );
        text.push('\n');
    }
    std::fs::write(&path, text).unwrap();
    path
}

fn synth(dir: &Path, learners: &str) -> PathBuf {
    let out = dir.join("synth");
    let o = run(&["synth", "--seed", "3", "--learners", learners, "--total-events", "400", "--out", s(&out)]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    out.join("events.jsonl")
}

#[test]
fn help_and_version_exit_zero() {
    assert_eq!(code(&run(&["--help"])), 0);
    assert_eq!(code(&run(&["--version"])), 0);
    assert_eq!(code(&run(&["evaluate", "--help"])), 0);
}

#[test]
fn bad_usage_exits_one() {
    assert_eq!(code(&run(&[])), 1);
    assert_eq!(code(&run(&["evaluate", "--bogus"])), 1);
    let dir = tempfile::tempdir().unwrap();
    let events = toy_events(dir.path());
    let o = run(&["evaluate", "--events", s(&events), "--model", "nope", "--out", s(dir.path())]);
    assert_eq!(code(&o), 1);
    assert!(stderr(&o).contains("truelearn-novelty"), "{}", stderr(&o));
    let o = run(&["evaluate", "--events", s(&events), "--out", s(dir.path())]);
    assert_eq!(code(&o), 1, "missing model");
}

#[test]
fn persistence_on_toy_file_matches_hand_count() {
    let dir = tempfile::tempdir().unwrap();
    let events = toy_events(dir.path());
    let out = dir.path().join("eval");
    let o = run(&["evaluate", "--events", s(&events), "--model", "persistence", "--out", s(&out)]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let report = read_json(&out.join("report.json"));
    // predictions for events 2..4 are the previous labels: + + -
    assert_eq!(report["totals"], serde_json::json!({"tp": 1, "fp": 1, "tn": 0, "fn": 1}));
    assert_eq!(report["evaluated_events"], 3);
    assert!(out.join("report.txt").exists());
    let manifest = read_json(&out.join("manifest.json"));
    assert_eq!(manifest["command"], "evaluate");
    assert_eq!(manifest["inputs"][0]["sha256"].as_str().unwrap().len(), 64);
}

#[test]
fn hypothesis_flag_is_echoed() {
    let dir = tempfile::tempdir().unwrap();
    let events = toy_events(dir.path());
    for (flag, expect) in [("--use-negative", true), ("--positive-only", false)] {
        let out = dir.path().join(flag.trim_start_matches('-'));
        let o = run(&["evaluate", "--events", s(&events), "--model", "truelearn-novelty", flag, "--out", s(&out)]);
        assert_eq!(code(&o), 0, "{}", stderr(&o));
        assert_eq!(read_json(&out.join("report.json"))["model"]["use_negative"], expect);
    }
    let o = run(&[
        "evaluate",
        "--events",
        s(&events),
        "--model",
        "truelearn-novelty",
        "--use-negative",
        "--positive-only",
        "--out",
        s(dir.path()),
    ]);
    assert_eq!(code(&o), 1);
}

#[test]
fn config_file_then_flags() {
    let dir = tempfile::tempdir().unwrap();
    let events = toy_events(dir.path());
    let cfg = dir.path().join("model.toml");
    std::fs::write(&cfg, "kind = \"truelearn-fixed-depth\"\ninitial_variance = 1.5\ntop_k = 2\n").unwrap();
    let out = dir.path().join("eval");
    let o = run(&["evaluate", "--events", s(&events), "--config", s(&cfg), "--top-k", "3", "--out", s(&out)]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let model = &read_json(&out.join("report.json"))["model"];
    assert_eq!(model["kind"], "truelearn-fixed-depth");
    assert_eq!(model["initial_variance"], 1.5);
    assert_eq!(model["top_k"], 3);

    std::fs::write(&cfg, "kind = \"persistence\"\nsigma = 1\n").unwrap();
    assert_eq!(code(&run(&["evaluate", "--events", s(&events), "--config", s(&cfg), "--out", s(&out)])), 1);
}

#[test]
fn data_errors_exit_two() {
    let dir = tempfile::tempdir().unwrap();
    let missing = dir.path().join("none.jsonl");
    assert_eq!(code(&run(&["evaluate", "--events", s(&missing), "--model", "majority", "--out", s(dir.path())])), 2);
    let bad = dir.path().join("bad.jsonl");
    std::fs::write(&bad, "{\"learner_id\": 1}\n").unwrap();
    assert_eq!(code(&run(&["evaluate", "--events", s(&bad), "--model", "majority", "--out", s(dir.path())])), 2);
}

#[test]
fn sweep_writes_grid_rows_and_records_seed() {
    let dir = tempfile::tempdir().unwrap();
    let events = synth(dir.path(), "20");
    let grid = dir.path().join("grid.toml");
    std::fs::write(&grid, "initial_variance = [0.5, 1.0]\ntau = [0.0, 0.05]\n").unwrap();
    let mut splits = Vec::new();
    for seed in ["1", "2"] {
        let out = dir.path().join(format!("sweep{seed}"));
        let o = run(&[
            "sweep",
            "--events",
            s(&events),
            "--model",
            "truelearn-fixed-depth",
            "--grid",
            s(&grid),
            "--seed",
            seed,
            "--out",
            s(&out),
        ]);
        assert_eq!(code(&o), 0, "{}", stderr(&o));
        let csv = std::fs::read_to_string(out.join("sweep.csv")).unwrap();
        assert_eq!(csv.lines().count(), 5);
        assert_eq!(read_json(&out.join("manifest.json"))["seed"], seed.parse::<u64>().unwrap());
        let report = read_json(&out.join("report.json"));
        assert_eq!(report["split"]["seed"], seed.parse::<u64>().unwrap());
        assert!(out.join("best_config.json").exists());
        let ids: Vec<String> =
            report["learners"].as_array().unwrap().iter().map(|l| l["learner_id"].to_string()).collect();
        splits.push(ids);
    }
    assert_ne!(splits[0], splits[1]);

    std::fs::write(&grid, "").unwrap();
    let o = run(&[
        "sweep",
        "--events",
        s(&events),
        "--model",
        "truelearn-fixed-depth",
        "--grid",
        s(&grid),
        "--out",
        s(dir.path()),
    ]);
    assert_eq!(code(&o), 1);
}

#[test]
fn report_compares_and_checks_versions() {
    let dir = tempfile::tempdir().unwrap();
    let events = synth(dir.path(), "10");
    let mut reports = Vec::new();
    for model in ["persistence", "truelearn-novelty"] {
        let out = dir.path().join(model);
        assert_eq!(code(&run(&["evaluate", "--events", s(&events), "--model", model, "--out", s(&out)])), 0);
        reports.push(out.join("report.json"));
    }
    let out = dir.path().join("cmp");
    let o = run(&["report", s(&reports[0]), s(&reports[1]), "--out", s(&out)]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let table = std::fs::read_to_string(out.join("comparison.txt")).unwrap();
    assert!(table.contains("persistence") && table.contains("truelearn-novelty"));
    let csv = std::fs::read_to_string(out.join("learners.csv")).unwrap();
    let rows = csv.lines().filter(|l| !l.starts_with('#')).count() - 1;
    assert_eq!(rows, 20);
    assert!(csv.starts_with("# topic_sparsity = unique_kcs / events"));

    let mut old = read_json(&reports[1]);
    old["schema_version"] = 999.into();
    let stale = dir.path().join("stale.json");
    std::fs::write(&stale, old.to_string()).unwrap();
    let o = run(&["report", s(&reports[0]), s(&stale), "--out", s(&out)]);
    assert_eq!(code(&o), 2);
    assert!(stderr(&o).contains("schema version"), "{}", stderr(&o));
}

#[test]
fn synth_is_deterministic() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    let ea = std::fs::read(synth(a.path(), "5")).unwrap();
    let eb = std::fs::read(synth(b.path(), "5")).unwrap();
    assert_eq!(ea, eb);
}

/// Answers every request with one annotation and counts requests.
fn mock_service() -> (String, Arc<AtomicUsize>) {
    let listener = TcpListener::bind("127.0.0.1:0").unwrap();
    let url = format!("http://{}/annotate-article", listener.local_addr().unwrap());
    let hits = Arc::new(AtomicUsize::new(0));
    let counter = hits.clone();
    thread::spawn(move || {
        for stream in listener.incoming() {
            let Ok(stream) = stream else { break };
            counter.fetch_add(1, Ordering::SeqCst);
            let mut reader = BufReader::new(stream.try_clone().unwrap());
            let mut len = 0;
            loop {
                let mut line = String::new();
                if reader.read_line(&mut line).unwrap_or(0) == 0 || line == "\r\n" {
                    break;
                }
                if let Some(v) = line.to_ascii_lowercase().strip_prefix("content-length:") {
                    len = v.trim().parse().unwrap();
                }
            }
            let mut body = vec![0; len];
            let _ = reader.read_exact(&mut body);
            let reply = r#"{"annotations":[{"title":"Entropy","url":"http://en.wikipedia.org/wiki/Entropy","pageRank":0.1,"cosine":0.3}]}"#;
            let mut stream = stream;
            let _ = write!(
                stream,
                "HTTP/1.1 200 OK\r\nContent-Type: application/json\r\nContent-Length: {}\r\nConnection: close\r\n\r\n{reply}",
                reply.len()
            );
        }
    });
    (url, hits)
}

#[test]
fn annotate_fills_cache_then_reruns_offline() {
    let dir = tempfile::tempdir().unwrap();
    let transcripts = dir.path().join("tx");
    std::fs::create_dir(&transcripts).unwrap();
    let words: String = (0..2000).map(|i| format!("word{i} ")).collect();
    let text: String = words.chars().take(12_345).collect();
    assert_eq!(text.chars().count(), 12_345);
    std::fs::write(transcripts.join("lec1.txt"), &text).unwrap();
    let cache = dir.path().join("cache");
    let out = dir.path().join("ann");

    let o = run(&["annotate", "--transcripts", s(&transcripts), "--cache", s(&cache), "--out", s(&out)]);
    assert_eq!(code(&o), 3);
    assert!(stderr(&o).contains("WIKIFIER_API_KEY"), "{}", stderr(&o));

    let (url, hits) = mock_service();
    let o = bin()
        .args([
            "annotate",
            "--transcripts",
            s(&transcripts),
            "--cache",
            s(&cache),
            "--endpoint",
            &url,
            "--out",
            s(&out),
        ])
        .env("WIKIFIER_API_KEY", "k")
        .output()
        .unwrap();
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    assert_eq!(hits.load(Ordering::SeqCst), 3);
    let lines = std::fs::read_to_string(out.join("annotations.jsonl")).unwrap();
    assert_eq!(lines.lines().count(), 3);

    // warm cache: no key, unreachable endpoint, still succeeds
    let o = run(&[
        "annotate",
        "--transcripts",
        s(&transcripts),
        "--cache",
        s(&cache),
        "--endpoint",
        "http://127.0.0.1:9/",
        "--out",
        s(&out),
    ]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    assert_eq!(hits.load(Ordering::SeqCst), 3);
    assert_eq!(std::fs::read_to_string(out.join("annotations.jsonl")).unwrap(), lines);
}

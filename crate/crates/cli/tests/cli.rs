use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};
use std::time::{Duration, Instant};

fn tadacap(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_tadacap"))
        .args(args)
        .env_remove("TADACAP_LLM_API_KEY")
        .env_remove("TADACAP_MM_API_KEY")
        .env_remove("TADACAP_EMBED_API_KEY")
        .output()
        .expect("binary runs")
}

fn ok(args: &[&str]) -> Output {
    let out = tadacap(args);
    assert!(out.status.success(), "{args:?} failed: {}", String::from_utf8_lossy(&out.stderr));
    out
}

fn code(out: &Output) -> i32 {
    out.status.code().unwrap()
}

fn stderr(out: &Output) -> String {
    String::from_utf8_lossy(&out.stderr).into_owned()
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

/// Generates, builds and selects; returns (data dir, db path).
fn prepared(root: &Path, seed: &str) -> (PathBuf, PathBuf) {
    let data = root.join("data");
    let db = root.join("db").join("db.jsonl");
    ok(&["--seed", seed, "synthgen", "stock", "--out", s(&data)]);
    ok(&["db", "build", "--dataset", s(&data.join("dataset.jsonl")), "--db", s(&db)]);
    ok(&["--seed", seed, "select", "--db", s(&db), "--k", "4"]);
    (data, db)
}

fn tree(dir: &Path) -> Vec<(String, Vec<u8>)> {
    let mut out = Vec::new();
    for e in fs::read_dir(dir).unwrap() {
        let p = e.unwrap().path();
        if p.is_dir() {
            out.extend(tree(&p).into_iter().map(|(n, b)| (format!("{}/{n}", p.file_name().unwrap().to_string_lossy()), b)));
        } else {
            out.push((p.file_name().unwrap().to_string_lossy().into_owned(), fs::read(&p).unwrap()));
        }
    }
    out.sort();
    out
}

#[test]
fn workflow_is_reproducible_and_bench_is_fast() {
    let runs: Vec<Vec<(String, Vec<u8>)>> = (0..2)
        .map(|_| {
            let tmp = tempfile::tempdir().unwrap();
            let (data, db) = prepared(tmp.path(), "7");
            ok(&["annotate", "simulate", "--db", s(&db)]);
            let out = tmp.path().join("out");
            let start = Instant::now();
            ok(&["--seed", "7", "bench", "--db", s(&db), "--modes", "diverse,zs", "--llm", "mock:oracle", "--out", s(&out)]);
            assert!(start.elapsed() < Duration::from_secs(10), "bench took {:?}", start.elapsed());
            let mut files = tree(&out);
            files.extend(tree(&data));
            files
        })
        .collect();
    assert!(runs[0].iter().any(|(n, _)| n == "results.md"));
    assert!(runs[0].iter().any(|(n, _)| n.starts_with("images/")));
    assert_eq!(runs[0].len(), runs[1].len());
    for (a, b) in runs[0].iter().zip(&runs[1]) {
        assert_eq!(a.0, b.0);
        assert!(a.1 == b.1, "{} differs between runs", a.0);
    }
    let traces = String::from_utf8(runs[0].iter().find(|(n, _)| n == "traces.jsonl").unwrap().1.clone()).unwrap();
    assert_eq!(traces.lines().filter(|l| l.contains("\"mode\":\"diverse\"")).count(), 196);
    assert_eq!(traces.lines().filter(|l| l.contains("\"mode\":\"zs\"")).count(), 200);
}

#[test]
fn exit_codes_separate_config_from_runtime_errors() {
    let tmp = tempfile::tempdir().unwrap();
    assert_eq!(code(&tadacap(&["synthgen", "stock", "-n", "0", "--out", s(&tmp.path().join("x"))])), 2);
    assert_eq!(code(&tadacap(&["synthgen", "stock"])), 2, "missing --out");
    let (_, db) = prepared(tmp.path(), "1");
    assert_eq!(code(&tadacap(&["select", "--db", s(&db), "--k", "1000"])), 2);
    assert_eq!(code(&tadacap(&["select", "--db", s(&db), "--strategy", "nn"])), 2);
    let bench = tadacap(&["bench", "--db", s(&db), "--modes", "zs", "--out", s(&tmp.path().join("o"))]);
    assert_eq!(code(&bench), 2, "no llm configured");
    let remote = tadacap(&["bench", "--db", s(&db), "--modes", "zs", "--llm", "https://example.invalid/v1", "--out", s(&tmp.path().join("o"))]);
    assert_eq!(code(&remote), 2, "missing api key: {}", stderr(&remote));
    assert!(stderr(&remote).contains("TADACAP_LLM_API_KEY"));
    let missing = tadacap(&["db", "validate", "--db", s(&tmp.path().join("nope.jsonl"))]);
    assert_eq!(code(&missing), 1);
}

#[test]
fn diverse_needs_annotated_exemplars_but_zs_does_not() {
    let tmp = tempfile::tempdir().unwrap();
    let (_, db) = prepared(tmp.path(), "2");
    let out = tmp.path().join("out");
    let diverse = tadacap(&["bench", "--db", s(&db), "--modes", "diverse", "--llm", "mock:echo", "--out", s(&out)]);
    assert_eq!(code(&diverse), 1);
    assert!(stderr(&diverse).contains("annotate"), "{}", stderr(&diverse));
    ok(&["bench", "--db", s(&db), "--modes", "zs", "--llm", "mock:echo", "--out", s(&out)]);
    assert!(out.join("results.csv").exists());
}

#[test]
fn annotation_round_trip() {
    let tmp = tempfile::tempdir().unwrap();
    let (_, db) = prepared(tmp.path(), "3");
    let tasks = tmp.path().join("tasks.jsonl");
    ok(&["annotate", "export", "--db", s(&db), "--out", s(&tasks)]);
    let lines: Vec<serde_json::Value> = fs::read_to_string(&tasks)
        .unwrap()
        .lines()
        .map(|l| serde_json::from_str(l).unwrap())
        .collect();
    assert_eq!(lines.len(), 4);
    for t in &lines {
        assert!(Path::new(t["image_path"].as_str().unwrap()).exists());
        assert!(t["instruction"].as_str().unwrap().contains("stock"));
    }

    let bad = tmp.path().join("bad.jsonl");
    fs::write(&bad, "{\"id\":\"stock-0001\",\"caption\":\"fine\"}\n{\"id\":\"nope\",\"caption\":\"x\"}\n").unwrap();
    let before = fs::read(&db).unwrap();
    let rejected = tadacap(&["annotate", "import", "--db", s(&db), "--file", s(&bad)]);
    assert_eq!(code(&rejected), 1);
    assert!(stderr(&rejected).contains("nope"));
    assert_eq!(fs::read(&db).unwrap(), before, "rejected import modified the database");

    let rows: String = lines
        .iter()
        .map(|t| format!("{{\"id\":{},\"caption\":\"The price rises.\"}}\n", t["id"]))
        .collect();
    let good = tmp.path().join("good.jsonl");
    fs::write(&good, rows).unwrap();
    ok(&["annotate", "import", "--db", s(&db), "--file", s(&good), "--annotator", "alice"]);
    ok(&["annotate", "export", "--db", s(&db), "--out", s(&tasks)]);
    assert_eq!(fs::read_to_string(&tasks).unwrap().lines().count(), 0);
    let text = fs::read_to_string(&db).unwrap();
    assert_eq!(text.matches("\"annotator\":\"alice\"").count(), 4);
    ok(&["bench", "--db", s(&db), "--modes", "diverse", "--llm", "mock:echo", "--out", s(&tmp.path().join("o"))]);
}

#[test]
fn dry_run_prints_config_and_writes_nothing() {
    let tmp = tempfile::tempdir().unwrap();
    let out_dir = tmp.path().join("never");
    let out = ok(&["--dry-run", "--seed", "42", "synthgen", "stock", "--out", s(&out_dir)]);
    let cfg: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(cfg["seed"], 42);
    assert!(!out_dir.exists());
    assert_eq!(fs::read_dir(tmp.path()).unwrap().count(), 0);
}

#[test]
fn config_file_is_overridden_by_flags() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = tmp.path().join("run.json");
    fs::write(&cfg, "{\"seed\": 5, \"k\": 6}").unwrap();
    let out = ok(&["--config", s(&cfg), "--seed", "9", "--dry-run", "select", "--db", "x.jsonl"]);
    let v: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(v["seed"], 9);
    assert_eq!(v["k"], 6);
    fs::write(&cfg, "{\"sead\": 5}").unwrap();
    assert_eq!(code(&tadacap(&["--config", s(&cfg), "--dry-run", "select"])), 2);
}

#[test]
fn caption_and_eval_agree() {
    let tmp = tempfile::tempdir().unwrap();
    let (data, db) = prepared(tmp.path(), "4");
    let out = tmp.path().join("cap");
    ok(&["caption", "--db", s(&db), "--mode", "zs", "--llm", "mock:oracle", "--id", "stock-0003", "--id", "stock-0010", "--out", s(&out)]);
    let caps = out.join("captions.jsonl");
    assert_eq!(fs::read_to_string(&caps).unwrap().lines().count(), 2);
    let ev = tmp.path().join("eval");
    ok(&["eval", "--candidates", s(&caps), "--references", s(&data.join("dataset.jsonl")), "--out", s(&ev)]);
    let csv = fs::read_to_string(ev.join("results.csv")).unwrap();
    assert_eq!(csv.lines().count(), 2, "{csv}");
    let unknown = tadacap(&["caption", "--db", s(&db), "--mode", "zs", "--llm", "mock:echo", "--id", "ghost", "--out", s(&out)]);
    assert_eq!(code(&unknown), 1);
}

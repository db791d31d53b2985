use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use tempfile::TempDir;

fn objforge(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_objforge"))
        .current_dir(dir)
        .env_remove("OBJFORGE_JOBS")
        .args(args)
        .output()
        .expect("binary runs")
}

fn ok(dir: &Path, args: &[&str]) -> String {
    let out = objforge(dir, args);
    assert!(
        out.status.success(),
        "{args:?} failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    String::from_utf8(out.stdout).unwrap()
}

fn code(out: &Output) -> i32 {
    out.status.code().expect("exit code")
}

fn files(dir: &Path) -> Vec<(String, Vec<u8>)> {
    let mut out: Vec<_> = fs::read_dir(dir)
        .unwrap()
        .map(|e| {
            let e = e.unwrap();
            (e.file_name().to_string_lossy().into_owned(), fs::read(e.path()).unwrap())
        })
        .collect();
    out.sort();
    out
}

#[test]
fn gen_twice_gives_identical_shards() {
    let tmp = TempDir::new().unwrap();
    ok(tmp.path(), &["gen", "ssp", "--seed", "7", "--shards", "2", "--out-dir", "a"]);
    ok(tmp.path(), &["gen", "ssp", "--seed", "7", "--shards", "2", "--out-dir", "b"]);
    let a = files(&tmp.path().join("a"));
    assert_eq!(a.iter().map(|(n, _)| n.as_str()).collect::<Vec<_>>(), ["ssp-00000.jsonl", "ssp-00001.jsonl"]);
    assert!(a.iter().all(|(_, bytes)| !bytes.is_empty()));
    assert_eq!(a, files(&tmp.path().join("b")));

    // rerunning into the same directory overwrites with the same bytes
    ok(tmp.path(), &["gen", "ssp", "--seed", "7", "--shards", "2", "--out-dir", "a"]);
    assert_eq!(a, files(&tmp.path().join("a")));

    ok(tmp.path(), &["gen", "ssp", "--seed", "8", "--shards", "2", "--out-dir", "c"]);
    assert_ne!(a, files(&tmp.path().join("c")));
}

#[test]
fn thread_count_does_not_change_output() {
    let tmp = TempDir::new().unwrap();
    ok(tmp.path(), &["gen", "mspp", "--jobs", "1", "--out-dir", "one"]);
    let out = Command::new(env!("CARGO_BIN_EXE_objforge"))
        .current_dir(tmp.path())
        .env("OBJFORGE_JOBS", "3")
        .args(["gen", "mspp", "--out-dir", "three"])
        .output()
        .unwrap();
    assert!(out.status.success());
    assert_eq!(files(&tmp.path().join("one")), files(&tmp.path().join("three")));
}

#[test]
fn flops_report_lists_head_sizes() {
    let tmp = TempDir::new().unwrap();
    let table = ok(tmp.path(), &["flops", "report", "--d", "768", "--vocab", "30522"]);
    assert!(table.contains("1536"), "{table}");
    assert!(table.contains("23,440,896"), "{table}");
    let row = |name: &str| table.lines().find(|l| l.starts_with(name)).unwrap().split_whitespace().nth(1).unwrap().to_owned();
    assert_eq!(row("MLM "), "23,440,896");
    assert_eq!(row("RTS "), "1536");
    assert_eq!(row("C-RTS "), "1536");
    let with_k = ok(tmp.path(), &["flops", "report", "--d", "768", "--vocab", "30522", "--k", "5"]);
    assert!(with_k.contains("k = 5: 1.8000"), "{with_k}");
}

#[test]
fn train_writes_a_trace_for_each_objective() {
    let tmp = TempDir::new().unwrap();
    let summary = ok(tmp.path(), &["train", "mlm:1.0", "ssp:1.0", "--steps", "500", "--out-dir", "run"]);
    let csv = fs::read_to_string(tmp.path().join("run/loss_trace.csv")).unwrap();
    let mut lines = csv.lines();
    assert_eq!(lines.next(), Some("step,objective,loss,lr"));
    let mut per = std::collections::BTreeMap::<String, Vec<f64>>::new();
    for line in lines {
        let f: Vec<&str> = line.split(',').collect();
        assert_eq!(f.len(), 4, "{line}");
        per.entry(f[1].to_owned()).or_default().push(f[2].parse().unwrap());
    }
    assert_eq!(per.keys().collect::<Vec<_>>(), ["mlm", "ssp", "total"]);
    for (name, losses) in &per {
        assert_eq!(losses.len(), 500, "{name}");
        assert!(losses.iter().all(|l| l.is_finite()), "{name}");
    }
    assert!(summary.contains("mlm:") && summary.contains("ssp:"), "{summary}");
    assert!(tmp.path().join("run/model.ckpt").is_file());
    assert!(tmp.path().join("run/vocab.json").is_file());
}

#[test]
fn exit_codes() {
    let tmp = TempDir::new().unwrap();
    let p = tmp.path();
    assert_eq!(code(&objforge(p, &["--no-such-flag", "corpus", "stats"])), 1);
    assert_eq!(code(&objforge(p, &["corpus", "explode"])), 1);

    let missing = objforge(p, &["eval", "rank", "--input", "absent.jsonl"]);
    assert_eq!(code(&missing), 1);
    assert!(String::from_utf8_lossy(&missing.stderr).contains("absent.jsonl"));

    fs::write(p.join("bad.toml"), "[model]\nn_heads = 5\n").unwrap();
    let bad = objforge(p, &["--config", "bad.toml", "corpus", "stats"]);
    assert_eq!(code(&bad), 1);
    assert!(String::from_utf8_lossy(&bad.stderr).contains("model.n_heads"));

    fs::write(p.join("typo.toml"), "[task.crts]\ngama = 1.0\n").unwrap();
    let typo = objforge(p, &["--config", "typo.toml", "corpus", "stats"]);
    assert_eq!(code(&typo), 1);
    assert!(String::from_utf8_lossy(&typo.stderr).contains("gama"));

    assert_eq!(code(&objforge(p, &["gen", "nsp"])), 1);

    // a file where the output directory should be is a failure of the run
    fs::write(p.join("blocked"), "").unwrap();
    assert_eq!(code(&objforge(p, &["gen", "sp", "--out-dir", "blocked"])), 2);

    // one document cannot supply PSD negatives from other documents
    fs::write(p.join("one.txt"), "A first line here.\nAnd a second one.\n\nAnother paragraph now.\n").unwrap();
    assert_eq!(code(&objforge(p, &["--corpus", "one.txt", "gen", "psd", "--out-dir", "psd"])), 2);
}

#[test]
fn dry_run_writes_nothing() {
    let tmp = TempDir::new().unwrap();
    let p = tmp.path();
    for args in [
        &["gen", "ssp", "--dry-run", "--out-dir", "out"][..],
        &["train", "mlm:1.0", "ssp:1.0", "--steps", "500", "--dry-run", "--out-dir", "out"],
        &["tok", "train", "--dry-run", "--out-dir", "out"],
    ] {
        let out = objforge(p, args);
        assert_eq!(code(&out), 0, "{args:?}: {}", String::from_utf8_lossy(&out.stderr));
        assert!(out.stdout.is_empty());
    }
    assert!(!p.join("out").exists());

    // invalid settings are still caught
    assert_eq!(code(&objforge(p, &["train", "mlm:-1", "--dry-run"])), 1);
    assert_eq!(code(&objforge(p, &["tok", "train", "--size", "0", "--dry-run"])), 1);
    assert_eq!(code(&objforge(p, &["--corpus", "gone.txt", "gen", "sp", "--dry-run"])), 1);
}

#[test]
fn config_seed_matches_flag_seed() {
    let tmp = TempDir::new().unwrap();
    let p = tmp.path();
    fs::write(p.join("run.toml"), "seed = 7\n").unwrap();
    fs::write(p.join("run.json"), r#"{"seed": 7, "paths": {"out_dir": "json"}}"#).unwrap();
    ok(p, &["--config", "run.toml", "gen", "sp", "--out-dir", "toml"]);
    ok(p, &["--config", "run.json", "gen", "sp"]);
    ok(p, &["gen", "sp", "--seed", "7", "--out-dir", "flag"]);
    let flag = files(&p.join("flag"));
    assert_eq!(files(&p.join("toml")), flag);
    assert_eq!(files(&p.join("json")), flag);
}

#[test]
fn token_pipeline_end_to_end() {
    let tmp = TempDir::new().unwrap();
    let p = tmp.path();
    fs::write(
        p.join("a.txt"),
        "The cat sat on the mat. The dog sat on the log.\n\nA bird flew over the tree. It sang a song.\n",
    )
    .unwrap();
    fs::write(p.join("b.txt"), "Rain fell on the town. People stayed in.\n\nThe sun came out later. Everyone went out.\n").unwrap();
    ok(p, &["corpus", "ingest", "a.txt", "b.txt"]);
    let stats: serde_json::Value =
        serde_json::from_str(&ok(p, &["--corpus", "out/corpus.jsonl", "corpus", "stats"])).unwrap();
    assert_eq!(stats["n_docs"], 2);
    assert_eq!(stats["n_paragraphs"], 4);
    assert_eq!(stats["n_sentences"], 8);

    let c = ["--corpus", "out/corpus.jsonl"];
    let with = |rest: &[&'static str]| -> Vec<&str> { c.iter().chain(rest).copied().collect() };
    ok(p, &with(&["tok", "train", "--size", "30"]));
    let enc: serde_json::Value = serde_json::from_str(ok(p, &with(&["tok", "encode", "the cat"])).lines().next().unwrap()).unwrap();
    assert_eq!(enc["ids"].as_array().unwrap().len(), enc["pieces"].as_array().unwrap().len());

    ok(p, &with(&["cluster", "embed"]));
    ok(p, &with(&["cluster", "kmeans", "--n", "3", "--restarts", "2"]));
    let clusters: serde_json::Value = serde_json::from_slice(&fs::read(p.join("out/clusters.json")).unwrap()).unwrap();
    assert_eq!(clusters["n"], 3);

    ok(p, &with(&["corrupt", "crts", "--clusters", "out/clusters.json"]));
    let first = fs::read(p.join("out/crts-corrupted.jsonl")).unwrap();
    let lines: Vec<serde_json::Value> =
        first.split(|&b| b == b'\n').filter(|l| !l.is_empty()).map(|l| serde_json::from_slice(l).unwrap()).collect();
    assert_eq!(lines.len(), 8);
    for l in &lines {
        let n = l["ids"].as_array().unwrap().len();
        assert_eq!(l["labels"].as_array().unwrap().len(), n);
        assert_eq!(l["mask"].as_array().unwrap().len(), n);
        let replaced = l["mask"].as_array().unwrap().iter().filter(|m| m.as_bool().unwrap()).count();
        assert_eq!(l["prov"].as_array().unwrap().len(), replaced);
    }
    ok(p, &with(&["corrupt", "crts", "--clusters", "out/clusters.json", "--jobs", "2"]));
    assert_eq!(fs::read(p.join("out/crts-corrupted.jsonl")).unwrap(), first);

    // crts without a cluster map is a usage error
    assert_eq!(code(&objforge(p, &with(&["corrupt", "crts"]))), 1);
    ok(p, &with(&["corrupt", "mlm"]));
    assert!(p.join("out/mlm-corrupted.jsonl").is_file());
}

#[test]
fn ranking_report() {
    let tmp = TempDir::new().unwrap();
    let p = tmp.path();
    fs::write(
        p.join("groups.jsonl"),
        "{\"scores\": [0.9, 0.1, 0.5], \"relevance\": [0, 1, 1]}\n{\"scores\": [0.3, 0.2], \"relevance\": [true, false]}\n{\"scores\": [0.4], \"relevance\": [0]}\n",
    )
    .unwrap();
    let printed: serde_json::Value = serde_json::from_str(&ok(p, &["eval", "rank", "--input", "groups.jsonl"])).unwrap();
    let written: serde_json::Value = serde_json::from_slice(&fs::read(p.join("out/eval_report.json")).unwrap()).unwrap();
    assert_eq!(printed, written);
    // group 1: relevant at ranks 2 and 3, AP = (1/2 + 2/3) / 2; group 2: AP = 1
    let ap1 = (0.5 + 2.0 / 3.0) / 2.0;
    assert!((written["map"].as_f64().unwrap() - (ap1 + 1.0) / 2.0).abs() < 1e-12);
    assert!((written["mrr"].as_f64().unwrap() - 0.75).abs() < 1e-12);
    assert_eq!(written["p@1"].as_f64(), Some(0.5));
    assert_eq!(written["n_groups"], 2);
    assert_eq!(written["excluded"], 1);
}

#[test]
fn cluster_count_selection() {
    let tmp = TempDir::new().unwrap();
    let p = tmp.path();
    fs::write(p.join("acc.json"), r#"{"30": 0.9, "100": 0.92, "300": 0.9}"#).unwrap();
    let picked: serde_json::Value = serde_json::from_str(&ok(p, &["cluster", "select", "--scores", "acc.json"])).unwrap();
    assert_eq!(picked["n"], 30);
}

use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use cnnindex::vecio;

fn cnnidx(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_cnnidx"))
        .current_dir(dir)
        .args(args)
        .output()
        .expect("binary runs")
}

fn ok(dir: &Path, args: &[&str]) -> String {
    let out = cnnidx(dir, args);
    assert!(
        out.status.success(),
        "{args:?} failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    String::from_utf8(out.stdout).unwrap()
}

fn synth(dir: &Path) {
    ok(
        dir,
        &["synth", "--clusters", "12", "--per-cluster", "8", "--dim", "16", "--seed", "3", "--out-dir", "d"],
    );
}

#[test]
fn synth_writes_three_files() {
    let tmp = tempfile::tempdir().unwrap();
    synth(tmp.path());
    let db = vecio::read_feature_file(tmp.path().join("d/database.bin")).unwrap();
    let q = vecio::read_feature_file(tmp.path().join("d/queries.bin")).unwrap();
    let gt = vecio::read_ground_truth(tmp.path().join("d/ground_truth.txt"), Some(db.len())).unwrap();
    assert_eq!((db.len(), db.dim(), q.len(), gt.len()), (96, 16, 12, 12));
}

#[test]
fn pipeline_is_reproducible() {
    let tmp = tempfile::tempdir().unwrap();
    let dir = tmp.path();
    synth(dir);
    for (scheme, idx) in [("ifc", "a.idx"), ("ifc", "b.idx"), ("tifc", "t.idx")] {
        let out = ok(
            dir,
            &["--threads", "1", "build", "--features", "d/database.bin", "--scheme", scheme, "--S", "4", "--L", "8", "--K", "8", "--M", "2", "--out", idx],
        );
        assert!(out.starts_with("config {"), "{out}");
    }
    assert_eq!(fs::read(dir.join("a.idx")).unwrap(), fs::read(dir.join("b.idx")).unwrap());

    for res in ["r1.txt", "r2.txt"] {
        let out = ok(dir, &["query", "--index", "a.idx", "--queries", "d/queries.bin", "--T", "4", "--out", res]);
        assert!(out.contains("\"W\":4") && out.contains("\"T\":4"), "{out}");
    }
    assert_eq!(fs::read(dir.join("r1.txt")).unwrap(), fs::read(dir.join("r2.txt")).unwrap());
    assert_eq!(
        fs::read(dir.join("r1.txt.summary.json")).unwrap(),
        fs::read(dir.join("r2.txt.summary.json")).unwrap()
    );
    let timing: serde_json::Value =
        serde_json::from_slice(&fs::read(dir.join("r1.txt.timing.json")).unwrap()).unwrap();
    assert_eq!(timing["per_query_seconds"].as_array().unwrap().len(), 12);

    let out = ok(dir, &["evaluate", "--results", "r1.txt", "--ground-truth", "d/ground_truth.txt", "--out", "rep.json"]);
    assert!(out.contains("MAP ") && out.contains("scan_fraction "), "{out}");
    let report: serde_json::Value = serde_json::from_slice(&fs::read(dir.join("rep.json")).unwrap()).unwrap();
    assert_eq!(report["per_query_ap"].as_array().unwrap().len(), 12);

    ok(dir, &["query", "--index", "t.idx", "--queries", "d/queries.bin", "--out", "t.txt"]);
    assert_eq!(vecio::read_id_lists(dir.join("t.txt")).unwrap().len(), 12);
}

#[test]
fn trained_codebook_matches_inline_training() {
    let tmp = tempfile::tempdir().unwrap();
    let dir = tmp.path();
    synth(dir);
    ok(dir, &["train", "--features", "d/database.bin", "--K", "8", "--M", "2", "--out", "cb.pq"]);
    let common = ["build", "--features", "d/database.bin", "--S", "4", "--L", "8", "--K", "8", "--M", "2"];
    ok(dir, &[&common[..], &["--codebook", "cb.pq", "--out", "x.idx"]].concat());
    ok(dir, &[&common[..], &["--out", "y.idx"]].concat());
    assert_eq!(fs::read(dir.join("x.idx")).unwrap(), fs::read(dir.join("y.idx")).unwrap());
}

#[test]
fn perfect_results_score_one() {
    let tmp = tempfile::tempdir().unwrap();
    let dir = tmp.path();
    synth(dir);
    let gt = vecio::read_ground_truth(dir.join("d/ground_truth.txt"), None).unwrap();
    let lists: Vec<Vec<u32>> = gt.iter().map(|(_, rel)| rel.iter().copied().collect()).collect();
    vecio::write_id_lists(&lists, dir.join("perfect.txt")).unwrap();
    let out = ok(dir, &["evaluate", "--results", "perfect.txt", "--ground-truth", "d/ground_truth.txt"]);
    assert!(out.lines().any(|l| l == "MAP 1.000000"), "{out}");

    ok(dir, &["baseline", "--method", "bf", "--features", "d/database.bin", "--queries", "d/queries.bin", "--out", "bf.txt"]);
    let out = ok(dir, &["evaluate", "--results", "bf.txt", "--ground-truth", "d/ground_truth.txt"]);
    assert!(out.contains("scan_fraction 1.000000"), "{out}");
    ok(dir, &["baseline", "--method", "lsh", "--features", "d/database.bin", "--queries", "d/queries.bin", "--tables", "4", "--bits", "8", "--out", "lsh.txt"]);
    ok(dir, &["evaluate", "--results", "lsh.txt", "--ground-truth", "d/ground_truth.txt"]);
}

#[test]
fn sweep_writes_csv_and_json() {
    let tmp = tempfile::tempdir().unwrap();
    let dir = tmp.path();
    synth(dir);
    fs::write(
        dir.join("spec.json"),
        r#"{"base": {"code_length": 8, "link_count": 4, "words_per_segment": 8, "kmeans_restarts": 1},
            "grid": [{"param": "T", "values": [0, 8]}],
            "database": "d/database.bin", "queries": "d/queries.bin", "ground_truth": "d/ground_truth.txt"}"#,
    )
    .unwrap();
    ok(dir, &["sweep", "--spec", "spec.json", "--out", "sw"]);
    let csv = fs::read_to_string(dir.join("sw.csv")).unwrap();
    let lines: Vec<&str> = csv.lines().collect();
    assert_eq!(lines[0], "T,map,mean_query_time_s,scan_fraction,index_bytes,error");
    assert_eq!(lines.len(), 3);
    assert!(lines[1].starts_with("0,0.000000,"));
    let json: serde_json::Value = serde_json::from_slice(&fs::read(dir.join("sw.json")).unwrap()).unwrap();
    assert_eq!(json["rows"].as_array().unwrap().len(), 2);
}

#[test]
fn exit_codes() {
    let tmp = tempfile::tempdir().unwrap();
    let dir = tmp.path();
    synth(dir);
    let code = |args: &[&str]| cnnidx(dir, args).status.code().unwrap();
    assert_eq!(code(&["--help"]), 0);
    assert_eq!(code(&["build", "--help"]), 0);
    assert_eq!(code(&["build", "--features", "d/database.bin", "--out", "x", "--bogus"]), 1);
    assert_eq!(code(&["frobnicate"]), 1);
    // L must divide D
    assert_eq!(code(&["build", "--features", "d/database.bin", "--L", "5", "--K", "4", "--out", "x.idx"]), 1);
    assert_eq!(code(&["build", "--features", "missing.bin", "--out", "x.idx"]), 2);
    fs::write(dir.join("junk.idx"), b"not an index").unwrap();
    assert_eq!(code(&["query", "--index", "junk.idx", "--queries", "d/queries.bin", "--out", "r"]), 2);
    let err = cnnidx(dir, &["query", "--index", "junk.idx", "--queries", "d/queries.bin", "--out", "r"]);
    assert!(!err.stderr.is_empty());
}

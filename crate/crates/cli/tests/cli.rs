use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::{json, Value};

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_morsedyn"))
}

fn manifest_dir() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR"))
}

fn iris_csv() -> PathBuf {
    manifest_dir().join("data/iris.csv")
}

fn write_config(dir: &Path, name: &str, value: &Value) -> PathBuf {
    let p = dir.join(name);
    std::fs::write(&p, serde_json::to_string_pretty(value).unwrap()).unwrap();
    p
}

/// Small Iris run: a handful of short cycles on a coarse grid.
fn small_iris(dir: &Path, cycles: usize) -> PathBuf {
    write_config(
        dir,
        "small.json",
        &json!({
            "dataset": { "path": iris_csv() },
            "network": { "epochs": 20 },
            "ensemble": { "cycles": cycles, "base_seed": 3 },
            "grid": { "initial_depth": 2, "max_depth": 4 }
        }),
    )
}

fn run(cmd: &mut Command) -> Output {
    cmd.output().expect("binary runs")
}

fn files(dir: &Path) -> BTreeMap<String, Vec<u8>> {
    std::fs::read_dir(dir)
        .unwrap()
        .map(|e| {
            let e = e.unwrap();
            (e.file_name().to_string_lossy().into_owned(), std::fs::read(e.path()).unwrap())
        })
        .collect()
}

fn json_file(path: &Path) -> Value {
    serde_json::from_str(&std::fs::read_to_string(path).unwrap()).unwrap()
}

#[test]
fn validate_config_prints_resolved_defaults() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), "c.json", &json!({ "network": { "epochs": 7 } }));
    let out = run(bin().args(["validate-config", "--config"]).arg(&cfg));
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let v: Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(v["network"]["epochs"], 7);
    assert_eq!(v["ensemble"]["cycles"], 100);
    assert_eq!(v["grid"]["domain"], "auto");
}

#[test]
fn invalid_config_exits_with_validation_code() {
    let tmp = tempfile::tempdir().unwrap();
    let bad = write_config(tmp.path(), "bad.json", &json!({ "network": { "learning_rate": -1.0 } }));
    let out = run(bin().args(["validate-config", "--config"]).arg(&bad));
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("network.learning_rate"));

    let unknown = write_config(tmp.path(), "unknown.json", &json!({ "netwrok": {} }));
    let out = run(bin().args(["validate-config", "--config"]).arg(&unknown));
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn missing_dataset_is_a_validation_error_with_no_outputs() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), "c.json", &json!({ "dataset": { "path": "nowhere.csv" } }));
    let out_dir = tmp.path().join("out");
    let out = run(bin().args(["train", "--config"]).arg(&cfg).arg("--out").arg(&out_dir));
    assert_eq!(out.status.code(), Some(1));
    assert!(!out_dir.exists() || files(&out_dir).is_empty());
}

#[test]
fn single_cycle_writes_one_record_line() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = small_iris(tmp.path(), 1);
    let out_dir = tmp.path().join("out");
    let out = run(bin().args(["train", "--config"]).arg(&cfg).arg("--out").arg(&out_dir));
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let text = std::fs::read_to_string(out_dir.join("records.jsonl")).unwrap();
    assert_eq!(text.lines().count(), 1);
    let line: Value = serde_json::from_str(text.lines().next().unwrap()).unwrap();
    assert_eq!(line["cycle"], 0);
    // 4 inputs, 1 hidden node, 3 classes: 4 + 1 + 3 + 3 weights.
    assert_eq!(line["initial"].as_array().unwrap().len(), 11);
    assert!(out_dir.join("entropy.csv").exists());
    assert!(out_dir.join("summary.json").exists());
}

#[test]
fn baseline_config_writes_one_hundred_records() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = manifest_dir().join("configs/iris-baseline.json");
    let out_dir = tmp.path().join("out");
    let out = run(bin().args(["train", "--config"]).arg(&cfg).arg("--out").arg(&out_dir));
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let text = std::fs::read_to_string(out_dir.join("records.jsonl")).unwrap();
    assert_eq!(text.lines().count(), 100);
}

#[test]
fn train_then_analyze_equals_pipeline() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = small_iris(tmp.path(), 12);
    let staged = tmp.path().join("staged");
    let together = tmp.path().join("together");

    let t = run(bin().args(["train", "--config"]).arg(&cfg).arg("--out").arg(&staged));
    assert_eq!(t.status.code(), Some(0), "{}", String::from_utf8_lossy(&t.stderr));
    let a = run(
        bin()
            .args(["analyze", "--config"])
            .arg(&cfg)
            .arg("--records")
            .arg(staged.join("records.jsonl"))
            .arg("--out")
            .arg(&staged),
    );
    assert_eq!(a.status.code(), Some(0), "{}", String::from_utf8_lossy(&a.stderr));
    let p = run(bin().args(["pipeline", "--config"]).arg(&cfg).arg("--out").arg(&together));
    assert_eq!(p.status.code(), Some(0), "{}", String::from_utf8_lossy(&p.stderr));

    let (s, w) = (files(&staged), files(&together));
    assert_eq!(s.keys().collect::<Vec<_>>(), w.keys().collect::<Vec<_>>());
    for (name, bytes) in &s {
        if name == "config.resolved.json" {
            continue; // echoes the output directory
        }
        assert_eq!(bytes, &w[name], "{name} differs");
    }
    let report = json_file(&together.join("report.json"));
    assert_eq!(report["source"]["kind"], "records");
    assert_eq!(report["source"]["coordinates"].as_array().unwrap().len(), 2);
}

#[test]
fn seed_flag_changes_the_ensemble() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = small_iris(tmp.path(), 2);
    let a = tmp.path().join("a");
    let b = tmp.path().join("b");
    run(bin().args(["train", "--config"]).arg(&cfg).arg("--out").arg(&a));
    run(bin().args(["train", "--config"]).arg(&cfg).arg("--out").arg(&b).args(["--seed", "99"]));
    let ra = std::fs::read(a.join("records.jsonl")).unwrap();
    let rb = std::fs::read(b.join("records.jsonl")).unwrap();
    assert_ne!(ra, rb);
}

#[test]
fn analyze_outputs_do_not_depend_on_thread_count() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = small_iris(tmp.path(), 10);
    let out_dir = tmp.path().join("out");
    let mut seen = Vec::new();
    for threads in ["1", "3"] {
        let _ = std::fs::remove_dir_all(&out_dir);
        let o = run(
            bin()
                .args(["pipeline", "--config"])
                .arg(&cfg)
                .arg("--out")
                .arg(&out_dir)
                .args(["--threads", threads]),
        );
        assert_eq!(o.status.code(), Some(0));
        seen.push(files(&out_dir));
    }
    assert_eq!(seen[0], seen[1]);
}

#[test]
fn contraction_system_has_a_single_attractor() {
    let tmp = tempfile::tempdir().unwrap();
    let out = run(bin().args(["analyze", "--system", "contraction", "--out"]).arg(tmp.path()));
    assert_eq!(out.status.code(), Some(0));
    let report = json_file(&tmp.path().join("report.json"));
    assert_eq!(report["minimal_nodes"].as_array().unwrap().len(), 1);
    assert_eq!(report["retraction_present"], true);
    assert_eq!(report["coverage"]["violations"], 0);
    assert_eq!(report["forward_invariant"], true);
}

#[test]
fn double_well_system_has_two_attractors() {
    let tmp = tempfile::tempdir().unwrap();
    let out = run(bin().args(["analyze", "--system", "double-well", "--out"]).arg(tmp.path()));
    assert_eq!(out.status.code(), Some(0));
    let report = json_file(&tmp.path().join("report.json"));
    assert_eq!(report["minimal_nodes"].as_array().unwrap().len(), 2);
    assert_eq!(report["retraction_present"], true);
    assert_eq!(report["lattice"]["matches_morse_graph"], true);
    let basins = std::fs::read_to_string(tmp.path().join("basins.csv")).unwrap();
    assert_eq!(basins.lines().next(), Some("cell,node,role"));
}

#[test]
fn unknown_system_is_rejected() {
    let tmp = tempfile::tempdir().unwrap();
    let out = run(bin().args(["analyze", "--system", "lorenz", "--out"]).arg(tmp.path()));
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn leaf_cap_gives_truncated_exit_code_with_outputs() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(
        tmp.path(),
        "cap.json",
        &json!({ "grid": { "initial_depth": 3, "max_depth": 12, "leaf_cap": 20 } }),
    );
    let out_dir = tmp.path().join("out");
    let out = run(
        bin()
            .args(["analyze", "--system", "double-well", "--config"])
            .arg(&cfg)
            .arg("--out")
            .arg(&out_dir),
    );
    assert_eq!(out.status.code(), Some(3));
    let report = json_file(&out_dir.join("report.json"));
    assert_eq!(report["truncated"], true);
    assert!(report["leaves"].as_u64().unwrap() <= 20);
}

#[test]
fn analyze_accepts_pair_files() {
    let tmp = tempfile::tempdir().unwrap();
    let mut csv = String::from("x1,y1\n");
    for i in 0..40 {
        let x = -1.0 + 2.0 * i as f64 / 39.0;
        csv.push_str(&format!("{x},{}\n", 0.5 * x));
    }
    let pairs = tmp.path().join("pairs.csv");
    std::fs::write(&pairs, csv).unwrap();
    let out_dir = tmp.path().join("out");
    let out = run(bin().arg("analyze").arg("--pairs").arg(&pairs).arg("--out").arg(&out_dir));
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let report = json_file(&out_dir.join("report.json"));
    assert_eq!(report["source"]["pairs"], 40);
    assert!(out_dir.join("surrogate.json").exists());
}

fn morse_file(dir: &Path, value: &Value) -> PathBuf {
    write_config(dir, "morse.json", value)
}

fn export(path: &Path, format: &str) -> Output {
    run(bin().arg("export").arg(path).args(["--format", format]))
}

#[test]
fn one_node_graph_exports_to_dot_without_edges() {
    let tmp = tempfile::tempdir().unwrap();
    let p = morse_file(
        tmp.path(),
        &json!({
            "cells": 2,
            "nodes": [{ "id": 0, "cells": [0], "minimal": true }],
            "order_edges": [],
            "components": [[0], [1]],
            "retraction": { "0": 0, "1": 0 }
        }),
    );
    let out = export(&p, "dot");
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let dot = String::from_utf8(out.stdout).unwrap();
    assert!(dot.starts_with("digraph morse"));
    assert_eq!(dot.matches("->").count(), 0);
    assert_eq!(dot.matches("[label=").count(), 1);
}

/// Idealised double-well graph: a top node at the origin above two minima.
fn three_node_graph() -> Value {
    json!({
        "cells": 5,
        "nodes": [
            { "id": 0, "cells": [0], "minimal": true },
            { "id": 1, "cells": [2], "minimal": false },
            { "id": 2, "cells": [4], "minimal": true }
        ],
        "order_edges": [[1, 0], [1, 2]],
        "components": [[0], [1], [2], [3], [4]],
        "retraction": { "0": 0, "1": 0, "2": 1, "3": 2, "4": 2 }
    })
}

#[test]
fn three_node_graph_has_two_covering_edges() {
    let tmp = tempfile::tempdir().unwrap();
    let p = morse_file(tmp.path(), &three_node_graph());
    let dot = String::from_utf8(export(&p, "dot").stdout).unwrap();
    let edges: Vec<&str> = dot.lines().filter(|l| l.contains("->")).map(str::trim).collect();
    assert_eq!(edges.len(), 2);
    assert!(edges.iter().any(|e| e.starts_with("n1 -> n0")));
    assert!(edges.iter().any(|e| e.starts_with("n1 -> n2")));

    let csv = String::from_utf8(export(&p, "csv").stdout).unwrap();
    let rows: Vec<&str> = csv.lines().collect();
    assert_eq!(rows[0], "cell,node,role");
    assert_eq!(rows.len(), 6);
    assert!(rows.contains(&"1,0,basin"));
    assert!(rows.contains(&"2,1,morse"));
}

#[test]
fn json_export_round_trips_byte_for_byte() {
    let tmp = tempfile::tempdir().unwrap();
    let p = morse_file(tmp.path(), &three_node_graph());
    let first = export(&p, "json");
    assert_eq!(first.status.code(), Some(0));
    let again_path = tmp.path().join("again.json");
    std::fs::write(&again_path, &first.stdout).unwrap();
    let second = export(&again_path, "json");
    assert_eq!(first.stdout, second.stdout);
}

#[test]
fn export_rejects_bad_input() {
    let tmp = tempfile::tempdir().unwrap();
    let p = morse_file(tmp.path(), &three_node_graph());
    assert_eq!(export(&p, "png").status.code(), Some(1));

    let mut cyclic = three_node_graph();
    cyclic["order_edges"] = json!([[1, 0], [0, 1]]);
    let q = write_config(tmp.path(), "cyclic.json", &cyclic);
    assert_eq!(export(&q, "dot").status.code(), Some(1));

    let missing = tmp.path().join("nope.json");
    assert_ne!(export(&missing, "dot").status.code(), Some(0));
}

mod common;

use std::path::Path;
use std::process::{Command, Output};

use common::data_path;
use serde_json::{json, Value};

fn psps(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_psps"))
        .args(args)
        .env("RUST_LOG", "error")
        .output()
        .expect("spawn psps")
}

fn write_config(dir: &Path, doc: &Value) -> String {
    let path = dir.join("run.json");
    std::fs::write(&path, doc.to_string()).unwrap();
    path.to_str().unwrap().to_owned()
}

fn small_config() -> Value {
    json!({
        "network": data_path("gap3.json"),
        "scenarios": {"generate": {"samples": 10, "seed": 3, "depth_limit": 1, "grid_cells": [4, 4], "fault_rate": 0.05}},
        "engine": {"family": "LC", "epsilon": 0.001, "max_iterations": 30}
    })
}

#[test]
fn malformed_config_exits_with_input_error() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("run.json");
    std::fs::write(&path, "{\"network\": ").unwrap();
    let out = psps(&["generate", "--config", path.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2), "{}", String::from_utf8_lossy(&out.stderr));
}

#[test]
fn missing_network_exits_with_input_error() {
    let dir = tempfile::tempdir().unwrap();
    let mut doc = small_config();
    doc["network"] = json!(dir.path().join("absent.json"));
    let cfg = write_config(dir.path(), &doc);
    let out = psps(&["generate", "--config", &cfg]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn empty_beta_list_is_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), &small_config());
    let out = psps(&["compare", "--config", &cfg, "--output", dir.path().to_str().unwrap(), "--betas", ""]);
    assert_eq!(out.status.code(), Some(2), "{}", String::from_utf8_lossy(&out.stderr));
}

#[test]
fn solve_then_evaluate_and_reject_a_broken_plan() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), &small_config());
    let out_dir = dir.path().join("out");
    let o = out_dir.to_str().unwrap();
    let run = psps(&["solve", "--config", &cfg, "--output", o]);
    assert!(run.status.success(), "{}", String::from_utf8_lossy(&run.stderr));
    for f in ["tree.json", "plan.json", "summary.json", "cuts.json", "convergence.csv", "fairness.csv"] {
        assert!(out_dir.join(f).exists(), "{f} missing");
    }
    let plan_path = out_dir.join("plan.json");
    let tree_path = out_dir.join("tree.json");
    let ok = psps(&[
        "evaluate", "--config", &cfg, "--output", o,
        "--plan", plan_path.to_str().unwrap(), "--test-tree", tree_path.to_str().unwrap(),
    ]);
    assert!(ok.status.success(), "{}", String::from_utf8_lossy(&ok.stderr));

    // every generator off with nothing shed cannot be dispatched
    let mut plan: Value = serde_json::from_str(&std::fs::read_to_string(&plan_path).unwrap()).unwrap();
    for (key, row) in plan["status"].as_object_mut().unwrap() {
        if key.starts_with("gen:") {
            *row = json!(vec![0; row.as_array().unwrap().len()]);
        }
    }
    for row in plan["shed"].as_object_mut().unwrap().values_mut() {
        *row = json!(vec![0.0; row.as_array().unwrap().len()]);
    }
    let broken = dir.path().join("broken.json");
    std::fs::write(&broken, plan.to_string()).unwrap();
    let bad = psps(&[
        "evaluate", "--config", &cfg, "--output", o,
        "--plan", broken.to_str().unwrap(), "--test-tree", tree_path.to_str().unwrap(),
    ]);
    assert_eq!(bad.status.code(), Some(3), "{}", String::from_utf8_lossy(&bad.stderr));
}

use std::process::{Command, Output};

use serde_json::Value;

fn fastsplit(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_fastsplit"))
        .args(args)
        .env_remove("FASTSPLIT_OUT_DIR")
        .output()
        .expect("binary runs")
}

fn json(out: &Output) -> Value {
    serde_json::from_slice(&out.stdout).expect("stdout is one JSON document")
}

#[test]
fn split_chain3() {
    let out = fastsplit(&["split", "--profile", "chain3", "--rate-up", "1000000", "--rate-down", "1000000", "--iters", "1"]);
    assert!(out.status.success());
    let doc = json(&out);
    assert_eq!(doc["device"], serde_json::json!(["input", "v1"]));
    assert_eq!(doc["delay_us"], 4_000_000);
    assert_eq!(doc["cut_value_us"], 4_000_000);
}

#[test]
fn split_from_file_with_dot() {
    let dir = tempfile::tempdir().unwrap();
    let profile = dir.path().join("fan.json");
    let gen = fastsplit(&["gen-fixture", "fan-block", "--out", profile.to_str().unwrap()]);
    assert!(gen.status.success());
    let dot = dir.path().join("g.dot");
    let args = [
        "split", "--profile", profile.to_str().unwrap(), "--rate-up", "200000", "--rate-down", "800000",
        "--iters", "5", "--blockwise", "--dot", dot.to_str().unwrap(),
    ];
    let out = fastsplit(&args);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let doc = json(&out);
    assert_eq!(doc["method"], "blockwise");
    assert_eq!(doc["abstracted_blocks"], serde_json::json!(["b1"]));
    assert!(std::fs::read_to_string(dot).unwrap().starts_with("digraph"));
}

#[test]
fn split_reports_weight_mode() {
    let base = ["split", "--profile", "chain3", "--rate-up", "1000000", "--rate-down", "500000", "--iters", "3"];
    let c = json(&fastsplit(&base));
    let mut lit = base.to_vec();
    lit.extend(["--mode", "paper-literal"]);
    let l = json(&fastsplit(&lit));
    assert_eq!(c["weight_mode"], "consistent");
    assert_eq!(l["weight_mode"], "paper-literal");
    assert_eq!(c["cut_value_us"], c["delay_us"]);
}

#[test]
fn oracle_check_reports_counts() {
    let out = fastsplit(&["oracle-check", "--seeds", "200", "--max-layers", "12"]);
    assert!(out.status.success());
    assert_eq!(json(&out)["result"], "200/200 match");
    assert!(fastsplit(&["oracle-check", "--max-layers", "40"]).status.code() == Some(1));
}

#[test]
fn gen_fixture_densenet121() {
    let out = fastsplit(&["gen-fixture", "densenet121"]);
    let doc = json(&out);
    assert_eq!(doc["layers"].as_array().unwrap().len(), 121);
    assert_eq!(doc["blocks"].as_array().unwrap().len(), 58);
}

#[test]
fn validate_flags_fast_devices() {
    let dir = tempfile::tempdir().unwrap();
    let bad = dir.path().join("bad.json");
    std::fs::write(
        &bad,
        r#"{"model_name":"bad","input":{"output_bytes":10},
            "layers":[{"id":"a","xi_device_us":1,"xi_server_us":5,"param_bytes":0,"output_bytes":3}],
            "edges":[["input","a"]]}"#,
    )
    .unwrap();
    let out = fastsplit(&["validate", "--profile", bad.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(1));
    assert_eq!(json(&out)["diagnostics"][0]["subject"], "a");
    assert!(String::from_utf8_lossy(&out.stderr).contains("model-profile"));

    let ok = fastsplit(&["validate", "--profile", "googlenet"]);
    assert!(ok.status.success());
}

#[test]
fn bad_input_exits_nonzero() {
    let out = fastsplit(&["split", "--profile", "missing", "--rate-up", "1", "--rate-down", "1"]);
    assert_eq!(out.status.code(), Some(1));
    let out = fastsplit(&["split", "--profile", "chain3", "--rate-up", "0", "--rate-down", "1"]);
    assert!(String::from_utf8_lossy(&out.stderr).contains("[delay-model]"));
    assert!(!fastsplit(&["bogus"]).status.success());
}

#[test]
fn simulate_writes_reports() {
    let dir = tempfile::tempdir().unwrap();
    let scenario = dir.path().join("sc.json");
    std::fs::write(&scenario, r#"{"band":"sub6","condition":"poor","num_devices":3,"epochs":12,"seed":4}"#).unwrap();
    let run = |out: &std::path::Path| {
        Command::new(env!("CARGO_BIN_EXE_fastsplit"))
            .args(["simulate", "--scenario", scenario.to_str().unwrap(), "--profile", "resnet18"])
            .env("FASTSPLIT_OUT_DIR", out)
            .output()
            .unwrap()
    };
    let a = dir.path().join("a");
    let out = run(&a);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let summary = json(&out);
    let totals = &summary["total_delay_us"];
    assert!(totals["proposed"].as_u64().unwrap() <= totals["oss"].as_u64().unwrap());
    let csv = std::fs::read_to_string(a.join("epochs.csv")).unwrap();
    let mut lines = csv.lines();
    assert_eq!(lines.next().unwrap(), "epoch,device,R_D,R_S,strategy,cut_size,delay_us");
    assert_eq!(lines.count(), 36);

    let b = dir.path().join("b");
    run(&b);
    assert_eq!(csv, std::fs::read_to_string(b.join("epochs.csv")).unwrap());
}

#[test]
fn simulate_with_rate_table() {
    let dir = tempfile::tempdir().unwrap();
    let table = dir.path().join("t.csv");
    std::fs::write(&table, "snr_db,rate_bps\n-100,50000\n0,1000000\n").unwrap();
    let out = fastsplit(&[
        "simulate", "--band", "mmwave", "--epochs", "4", "--profile", "chain3", "--strategy", "proposed",
        "--rate-table", table.to_str().unwrap(), "--out", dir.path().to_str().unwrap(),
    ]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let csv = std::fs::read_to_string(dir.path().join("epochs.csv")).unwrap();
    for row in csv.lines().skip(1) {
        let rate: u64 = row.split(',').nth(2).unwrap().parse().unwrap();
        assert!(rate == 50_000 || rate == 1_000_000, "{row}");
    }
}

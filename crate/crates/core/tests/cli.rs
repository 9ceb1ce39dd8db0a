use std::path::PathBuf;
use std::process::{Command, Output};

use uqbias::stub_judge::StubJudgeServer;

fn toy(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("data/toy").join(name)
}

fn uqbias(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_uqbias")).args(args).output().unwrap()
}

fn stdout(out: &Output) -> String {
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    String::from_utf8(out.stdout.clone()).unwrap()
}

#[test]
fn sweep_writes_csv() {
    let (records, annotations) = (toy("records.jsonl"), toy("annotations.jsonl"));
    let out = uqbias(&[
        "sweep",
        "--records",
        records.to_str().unwrap(),
        "--annotations",
        annotations.to_str().unwrap(),
        "--metric",
        "rougeL_f1",
    ]);
    let text = stdout(&out);
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some("threshold,kappa,degenerate,n"));
    assert_eq!(lines.count(), 10);
}

#[test]
fn agree_and_correlate_emit_json() {
    let server = StubJudgeServer::start().unwrap();
    let endpoint = server.endpoint();
    let (records, annotations, config) = (toy("records.jsonl"), toy("annotations.jsonl"), toy("config.toml"));
    let common = [
        "--records",
        records.to_str().unwrap(),
        "--config",
        config.to_str().unwrap(),
        "--judge-endpoint",
        &endpoint,
    ];
    let mut args = vec!["agree", "--annotations", annotations.to_str().unwrap()];
    args.extend(common);
    let table: serde_json::Value = serde_json::from_str(&stdout(&uqbias(&args))).unwrap();
    assert_eq!(table["excluded_ties"], 1);

    let mut args = vec!["correlate"];
    args.extend(common);
    let table: serde_json::Value = serde_json::from_str(&stdout(&uqbias(&args))).unwrap();
    let len = table["rows"]
        .as_array()
        .unwrap()
        .iter()
        .find(|r| r["method"] == "len_tokens")
        .unwrap();
    assert_eq!(len["tokens"]["rho"], 1.0);
}

#[test]
fn simulate_and_verify_run() {
    let csv = stdout(&uqbias(&["simulate", "--rho", "-0.8,0.8", "--seeds", "2", "--n-items", "2000"]));
    let lines: Vec<&str> = csv.lines().collect();
    assert_eq!(lines[0], "seed,rho,true_auroc,estimated_auroc,tpr,tnr,n");
    assert_eq!(lines.len(), 5);
    assert!(lines[1].starts_with("0,-0.8,"));

    let report: serde_json::Value =
        serde_json::from_str(&stdout(&uqbias(&["verify", "--n-items", "20000"]))).unwrap();
    assert_eq!(report["points"].as_array().unwrap().len(), 27);
}

#[test]
fn bad_input_fails_cleanly() {
    let out = uqbias(&["evaluate", "--records", "/nonexistent.jsonl"]);
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).starts_with("error:"));

    let dir = tempfile::tempdir().unwrap();
    let bad = dir.path().join("bad.toml");
    std::fs::write(&bad, "unknown_key = 1\n").unwrap();
    let records = toy("records.jsonl");
    let out = uqbias(&["evaluate", "--records", records.to_str().unwrap(), "--config", bad.to_str().unwrap()]);
    assert!(!out.status.success());
}

use std::fs;
use std::path::Path;

use assert_cmd::Command;
use tempfile::TempDir;

const SMALL_RUN: &str = "seed = 3\n[rl]\nsteps = 150\n[td3]\nbatch_size = 32\n[gnn]\nepochs = 30\n";

fn grain() -> Command {
    Command::cargo_bin("grain").unwrap()
}

fn stdout(args: &[&str]) -> String {
    let out = grain().args(args).assert().success().get_output().stdout.clone();
    String::from_utf8(out).unwrap()
}

fn gen_synth(dir: &Path, extra: &[&str]) {
    let out = dir.to_str().unwrap();
    let mut args = vec!["gen-synth", "--out", out, "--n", "120"];
    args.extend_from_slice(extra);
    grain().args(&args).assert().success();
}

fn setup() -> TempDir {
    let tmp = tempfile::tempdir().unwrap();
    gen_synth(&tmp.path().join("data"), &[]);
    fs::write(tmp.path().join("run.toml"), SMALL_RUN).unwrap();
    tmp
}

fn path(tmp: &TempDir, name: &str) -> String {
    tmp.path().join(name).to_str().unwrap().to_string()
}

#[test]
fn fully_homophilous_synthetic_prints_one() {
    let tmp = tempfile::tempdir().unwrap();
    gen_synth(tmp.path(), &["--h", "1.0"]);
    assert_eq!(stdout(&["homophily", "--data", tmp.path().to_str().unwrap()]), "1.000\n");
}

#[test]
fn unknown_subcommand_prints_usage() {
    let out = grain().arg("frobnicate").assert().failure().get_output().stderr.clone();
    assert!(String::from_utf8(out).unwrap().contains("Usage"));
    grain().assert().failure();
}

#[test]
fn missing_dataset_reports_io_error_line() {
    let tmp = tempfile::tempdir().unwrap();
    let missing = tmp.path().join("nope");
    let out = grain()
        .args(["homophily", "--data", missing.to_str().unwrap()])
        .assert()
        .code(1)
        .get_output()
        .stderr
        .clone();
    let text = String::from_utf8(out).unwrap();
    assert!(text.starts_with("error\tio\t"), "{text}");
    assert_eq!(text.lines().count(), 1);
}

#[test]
fn bad_config_reports_config_error() {
    let tmp = setup();
    fs::write(tmp.path().join("bad.toml"), "[gnn]\nalpha = 2.0\n").unwrap();
    let out = grain()
        .args(["train", "--data", &path(&tmp, "data"), "--config", &path(&tmp, "bad.toml"), "--out", &path(&tmp, "o")])
        .assert()
        .code(1)
        .get_output()
        .stderr
        .clone();
    assert!(String::from_utf8(out).unwrap().starts_with("error\tconfig\t"));
}

fn report_without_clock(dir: &Path) -> serde_json::Value {
    let mut v: serde_json::Value = serde_json::from_str(&fs::read_to_string(dir.join("report.json")).unwrap()).unwrap();
    v.as_object_mut().unwrap().remove("wall_clock_seconds");
    v
}

#[test]
fn train_twice_gives_identical_reports() {
    let tmp = setup();
    let run = |out: &str| {
        let text = stdout(&["train", "--data", &path(&tmp, "data"), "--config", &path(&tmp, "run.toml"), "--out", &path(&tmp, out)]);
        assert!(text.starts_with("grain\ttrain="), "{text}");
        assert_eq!(text.lines().count(), 3);
    };
    run("a");
    run("b");
    let (a, b) = (tmp.path().join("a"), tmp.path().join("b"));
    assert_eq!(report_without_clock(&a), report_without_clock(&b));
    assert_eq!(fs::read(a.join("actions.tsv")).unwrap(), fs::read(b.join("actions.tsv")).unwrap());
    let actions = fs::read_to_string(a.join("actions.tsv")).unwrap();
    assert_eq!(actions.lines().count(), 120);
    for line in actions.lines() {
        let a: f64 = line.split('\t').nth(1).unwrap().parse().unwrap();
        assert!((1.0..=8.0).contains(&a));
    }
    assert_eq!(fs::read_to_string(a.join("embedding.tsv")).unwrap().lines().count(), 121);
}

#[test]
fn seed_flag_overrides_config() {
    let tmp = setup();
    let out = path(&tmp, "s");
    stdout(&["baseline", "--data", &path(&tmp, "data"), "--config", &path(&tmp, "run.toml"), "--seed", "11", "--model", "mlp", "--out", &out]);
    let json: serde_json::Value = serde_json::from_str(&fs::read_to_string(tmp.path().join("s/baseline.json")).unwrap()).unwrap();
    assert!(json.get("mlp").is_some());
    assert!(json.get("gcn").is_none());
}

#[test]
fn baseline_all_writes_both_models() {
    let tmp = setup();
    let text = stdout(&["baseline", "--data", &path(&tmp, "data"), "--config", &path(&tmp, "run.toml"), "--out", &path(&tmp, "b")]);
    assert!(text.starts_with("gcn\t") && text.contains("\nmlp\t"), "{text}");
    let json: serde_json::Value = serde_json::from_str(&fs::read_to_string(tmp.path().join("b/baseline.json")).unwrap()).unwrap();
    for m in ["gcn", "mlp"] {
        let acc = json[m]["test_accuracy"].as_f64().unwrap();
        assert!((0.0..=1.0).contains(&acc));
    }
}

#[test]
fn embed_writes_one_row_per_node() {
    let tmp = setup();
    stdout(&["embed", "--data", &path(&tmp, "data"), "--config", &path(&tmp, "run.toml"), "--out", &path(&tmp, "e")]);
    let text = fs::read_to_string(tmp.path().join("e/embedding.tsv")).unwrap();
    assert_eq!(text.lines().next(), Some("node_id\tx\ty\tlabel"));
    assert_eq!(text.lines().count(), 121);
}

#[test]
fn convert_prints_log_and_output_loads() {
    let tmp = tempfile::tempdir().unwrap();
    // Ten papers in two alternating classes, cited along a chain.
    let content: String = (0..10).map(|i| format!("p{i} {} 1 {}\n", i % 3, ["X", "Y"][i % 2])).collect();
    let cites: String = (0..9).map(|i| format!("p{i} p{}\n", i + 1)).chain(["p9 ghost\n".into()]).collect();
    fs::write(tmp.path().join("c"), content).unwrap();
    fs::write(tmp.path().join("x"), cites).unwrap();
    let text = stdout(&[
        "convert",
        "--content",
        &path(&tmp, "c"),
        "--cites",
        &path(&tmp, "x"),
        "--out",
        &path(&tmp, "toy"),
    ]);
    let log: serde_json::Value = serde_json::from_str(&text).unwrap();
    assert_eq!(log["nodes"], 10);
    assert_eq!(log["edges"], 9);
    assert_eq!(log["dropped_edges"], 1);
    let h = stdout(&["homophily", "--data", &path(&tmp, "toy")]);
    assert_eq!(h, "0.000\n");
}

#[test]
fn gradcheck_passes_every_op() {
    let text = stdout(&["gradcheck", "--instances", "5"]);
    assert!(text.lines().count() >= 10);
    assert!(text.lines().all(|l| l.ends_with("\tok")), "{text}");
}

mod common;

use std::io::{BufRead, BufReader, Write};
use std::path::Path;
use std::process::{Command, Output, Stdio};

use common::*;
use gam_distill::data::Task;
use gam_distill::distill::{distill, DistillConfig};
use gam_distill::learners::{ExternalConfig, ExternalTeacher, GbtConfig, LearnerSpec, Predictor};
use serde_json::{json, Value};

fn run(args: &[&str]) -> Output {
    Command::new(bin()).args(args).env_remove("GAM_DISTILL_JOBS").output().unwrap()
}

fn path_str(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn read_json(p: &Path) -> Value {
    serde_json::from_str(&std::fs::read_to_string(p).unwrap()).unwrap()
}

fn xor_csv(dir: &Path, task: Task) -> std::path::PathBuf {
    let p = dir.join("xor.csv");
    write_csv(&p, &xor_dataset(600, 3, 21, task));
    p
}

/// Sends one request line and returns the parsed reply.
fn exchange(w: &mut impl Write, r: &mut impl BufRead, req: Value) -> Value {
    writeln!(w, "{req}").unwrap();
    w.flush().unwrap();
    let mut line = String::new();
    r.read_line(&mut line).unwrap();
    serde_json::from_str(&line).unwrap()
}

#[test]
fn echo_bridge_conformance() {
    let mut child = Command::new(bin())
        .args(["serve", "--learner", "echo"])
        .stdin(Stdio::piped())
        .stdout(Stdio::piped())
        .spawn()
        .unwrap();
    let mut w = child.stdin.take().unwrap();
    let mut r = BufReader::new(child.stdout.take().unwrap());

    let early = exchange(&mut w, &mut r, json!({"id": 1, "cmd": "fit", "X": [[0.0]], "y": [1.0]}));
    assert_eq!(early["id"], 1);
    assert!(early["error"].is_string());

    let init = exchange(&mut w, &mut r, json!({"id": 2, "cmd": "init", "task": "regression", "n_features": 2}));
    assert_eq!((init["ok"].clone(), init["v"].clone()), (json!(true), json!(1)));
    let fit = exchange(
        &mut w,
        &mut r,
        json!({"id": 3, "cmd": "fit", "X": [[0.0, 1.0], [1.0, 0.0], [2.0, 2.0]], "y": [1.0, 2.0, 6.0]}),
    );
    assert_eq!(fit["ok"], true);
    let pred = exchange(&mut w, &mut r, json!({"id": 4, "cmd": "predict", "X": [[5.0, 5.0], [9.0, 0.0]]}));
    assert_eq!(pred["id"], 4);
    assert_eq!(pred["pred"], json!([3.0, 3.0]));

    writeln!(w, "{{not json").unwrap();
    let mut line = String::new();
    r.read_line(&mut line).unwrap();
    assert!(serde_json::from_str::<Value>(&line).unwrap()["error"].is_string());
    let again = exchange(&mut w, &mut r, json!({"id": 5, "cmd": "predict", "X": [[1.0, 1.0]]}));
    assert_eq!(again["pred"], json!([3.0]));

    let bye = exchange(&mut w, &mut r, json!({"id": 6, "cmd": "shutdown"}));
    assert_eq!(bye["ok"], true);
    drop(w);
    assert!(child.wait().unwrap().success());
}

#[test]
fn external_classifier_rows_keep_order_and_sum_to_one() {
    let d = xor_dataset(200, 1, 22, Task::Binary);
    let cmd = format!("{} serve --learner gbt", bin());
    let mut t = ExternalTeacher::spawn(&cmd, ExternalConfig { batch_size: 7, ..ExternalConfig::default() }).unwrap();
    t.fit(&d).unwrap();
    let local = LearnerSpec::Gbt(GbtConfig::default()).fit(&d).unwrap();
    let (a, b) = (t.predict(&d.features).unwrap(), local.predict(&d.features).unwrap());
    assert_eq!(a, b);
    if let gam_distill::learners::Prediction::Proba(rows) = a {
        assert!(rows.iter().all(|r| (r.iter().sum::<f64>() - 1.0).abs() < 1e-6));
    } else {
        panic!("classifier replied without probabilities");
    }
}

#[test]
fn bridged_teacher_gives_identical_ranking() {
    let d = xor_dataset(300, 3, 23, Task::Binary);
    let cfg = DistillConfig { n_explain: Some(25), ..DistillConfig::default() };
    let local = LearnerSpec::Gbt(GbtConfig::default()).fit(&d).unwrap();
    let mut remote = ExternalTeacher::spawn(&format!("{} serve --learner gbt", bin()), ExternalConfig::default()).unwrap();
    remote.fit(&d).unwrap();
    let a = distill(&d, local.as_ref(), &cfg).unwrap();
    let b = distill(&d, &remote, &cfg).unwrap();
    assert_eq!(a.full, b.full);
    assert!(!a.ranking.is_empty());
}

#[test]
fn teacher_crash_names_the_request() {
    let d = xor_dataset(50, 1, 24, Task::Regression);
    let mut t = ExternalTeacher::spawn(
        &format!("{} serve --learner echo --fault exit-on-predict", bin()),
        ExternalConfig::default(),
    )
    .unwrap();
    t.fit(&d).unwrap();
    let msg = t.predict(&d.features).unwrap_err().to_string();
    assert!(msg.contains("request") && msg.contains("predict"), "{msg}");
    assert!(msg.chars().any(|c| c.is_ascii_digit()), "{msg}");
}

#[test]
fn one_failed_predict_is_retried() {
    let d = xor_dataset(50, 1, 25, Task::Regression);
    let mut t = ExternalTeacher::spawn(
        &format!("{} serve --learner echo --fault fail-first-predict", bin()),
        ExternalConfig::default(),
    )
    .unwrap();
    t.fit(&d).unwrap();
    let p = t.predict(&d.features).unwrap().point();
    let mean = d.target.iter().sum::<f64>() / d.target.len() as f64;
    assert!(p.iter().all(|v| (v - mean).abs() < 1e-12));
}

#[test]
fn distill_then_fit_solves_xor() {
    let dir = tempfile::tempdir().unwrap();
    let data = xor_csv(dir.path(), Task::Binary);
    let out = dir.path().join("d");
    let o = run(&[
        "distill", "--data", path_str(&data), "--target", "y", "--teacher", "gbt", "--index", "fbii", "--n-int", "8",
        "--budget", "500", "--max-order", "3", "--n-explain", "40", "--out", path_str(&out),
    ]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    for f in ["config.json", "ranking.json", "ranking.txt", "logs/run.log"] {
        assert!(out.join(f).exists(), "{f}");
    }
    let ranking = read_json(&out.join("ranking.json"));
    assert_eq!(ranking["interactions"][0]["indices"], json!([0, 1]));
    assert_eq!(ranking["interactions"][0]["features"], json!(["x0", "x1"]));

    let fit = dir.path().join("f");
    let o = run(&[
        "fit", "--data", path_str(&data), "--target", "y", "--ranking", path_str(&out.join("ranking.json")),
        "--n-int", "1", "--out", path_str(&fit),
    ]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let report = std::fs::read_to_string(fit.join("report.csv")).unwrap();
    let acc: f64 = report
        .lines()
        .find(|l| l.contains(",Accuracy,"))
        .and_then(|l| l.rsplit(',').next())
        .unwrap()
        .parse()
        .unwrap();
    assert!(acc >= 0.99, "{report}");
    assert!(fit.join("model.json").exists());
    assert!(std::fs::read_dir(fit.join("terms")).unwrap().count() >= 6);
}

#[test]
fn explicit_interaction_list_is_accepted() {
    let dir = tempfile::tempdir().unwrap();
    let data = xor_csv(dir.path(), Task::Regression);
    let out = dir.path().join("f");
    let o = run(&["fit", "--data", path_str(&data), "--target", "y", "--interactions", "0,1;2,3,4", "--out", path_str(&out)]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let model = read_json(&out.join("model.json"));
    assert!(model.to_string().contains("[2,3,4]"));
}

#[test]
fn exit_codes_and_no_output_on_config_errors() {
    let dir = tempfile::tempdir().unwrap();
    let data = xor_csv(dir.path(), Task::Binary);
    let out = dir.path().join("o");
    let d = path_str(&data);
    let o_s = path_str(&out);

    let o = run(&["distill", "--data", d, "--teacher", "gbt", "--out", o_s]);
    assert_eq!(o.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&o.stderr).contains("usage"));
    assert!(!out.exists());

    let ranking = dir.path().join("r.json");
    std::fs::write(&ranking, r#"{"interactions": [{"indices": [0, 1]}]}"#).unwrap();
    let o = run(&["fit", "--data", d, "--target", "y", "--ranking", path_str(&ranking), "--interactions", "0,1", "--out", o_s]);
    assert_eq!(o.status.code(), Some(1));
    assert!(!out.exists());

    let cfg = dir.path().join("c.json");
    std::fs::write(&cfg, r#"{"distill": {"bogus": 1}}"#).unwrap();
    let o = run(&["distill", "--config", path_str(&cfg), "--data", d, "--target", "y", "--out", o_s]);
    assert_eq!(o.status.code(), Some(1));
    assert!(!out.exists());

    let o = run(&["distill", "--data", path_str(&dir.path().join("missing.csv")), "--target", "y", "--out", o_s]);
    assert_eq!(o.status.code(), Some(2));

    let o = run(&["distill", "--data", d, "--target", "y", "--teacher-cmd", "false", "--out", o_s]);
    assert_eq!(o.status.code(), Some(3));

    assert_eq!(run(&["--help"]).status.code(), Some(0));
    assert_eq!(run(&["frobnicate"]).status.code(), Some(1));
}

#[test]
fn echo_teacher_command_yields_empty_ranking() {
    let dir = tempfile::tempdir().unwrap();
    let data = xor_csv(dir.path(), Task::Binary);
    let out = dir.path().join("o");
    let cmd = format!("{} serve --learner echo", bin());
    let o = run(&[
        "distill", "--data", path_str(&data), "--target", "y", "--teacher-cmd", &cmd, "--n-explain", "10", "--out",
        path_str(&out),
    ]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    assert_eq!(read_json(&out.join("ranking.json"))["interactions"], json!([]));
}

#[test]
fn config_file_is_archived_and_flags_win() {
    let dir = tempfile::tempdir().unwrap();
    let data = xor_csv(dir.path(), Task::Binary);
    let cfg = dir.path().join("c.json");
    std::fs::write(&cfg, json!({"distill": {"n_int": 2, "budget": 300, "n_explain": 10}}).to_string()).unwrap();
    let out = dir.path().join("o");
    let o = run(&[
        "distill", "--config", path_str(&cfg), "--data", path_str(&data), "--target", "y", "--n-int", "3", "--out",
        path_str(&out),
    ]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let archived = read_json(&out.join("config.json"));
    assert_eq!(archived["distill"]["n_int"], 3);
    assert_eq!(archived["distill"]["budget"], 300);

    // Replaying the archived config reproduces the ranking.
    let again = dir.path().join("again");
    let o = run(&["distill", "--config", path_str(&out.join("config.json")), "--out", path_str(&again)]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    assert_eq!(read_json(&out.join("ranking.json")), read_json(&again.join("ranking.json")));
}

#[test]
fn scenario_a_exp3_and_resume() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("a");
    let args = ["scenario", "a", "--experiment", "3", "--seeds", "1", "--out", path_str(&out)];
    let first = run(&args);
    assert!(first.status.success(), "{}", String::from_utf8_lossy(&first.stderr));
    let csv = std::fs::read_to_string(out.join("scenario_a_exp3.csv")).unwrap();
    let mut rdr = csv::Reader::from_reader(csv.as_bytes());
    let k_col = rdr.headers().unwrap().iter().position(|h| h == "k").unwrap();
    let ks: std::collections::BTreeSet<String> = rdr.records().map(|r| r.unwrap()[k_col].to_string()).collect();
    assert_eq!(ks.into_iter().collect::<Vec<_>>(), vec!["1", "2", "3"]);

    let second = run(&args);
    assert!(second.status.success());
    assert!(String::from_utf8_lossy(&second.stdout).contains("computed: 0"), "{}", String::from_utf8_lossy(&second.stdout));
    assert_eq!(csv, std::fs::read_to_string(out.join("scenario_a_exp3.csv")).unwrap());
}

#[test]
fn stability_defaults_to_five_sizes() {
    let dir = tempfile::tempdir().unwrap();
    let data = xor_csv(dir.path(), Task::Binary);
    let out = dir.path().join("s");
    let o = run(&["stability", "--data", path_str(&data), "--target", "y", "--out", path_str(&out)]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let cfg = read_json(&out.join("config.json"));
    assert_eq!(cfg["stability"]["sample_sizes"], json!([100, 200, 300, 400, 500]));
    let stdout = String::from_utf8_lossy(&o.stdout);
    assert!(stdout.lines().count() >= 7, "{stdout}");
}

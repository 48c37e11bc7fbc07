// SPDX-License-Identifier: MIT OR Apache-2.0

use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::{json, Value};
use tempfile::TempDir;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_riskcpd"))
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().expect("binary runs")
}

fn ok(args: &[&str]) -> Output {
    let o = run(args);
    assert!(
        o.status.success(),
        "{args:?} failed: {}",
        String::from_utf8_lossy(&o.stderr)
    );
    o
}

fn schema_path(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR"))
        .join("../../docs/schemas")
        .join(name)
}

fn read_json(path: &Path) -> Value {
    serde_json::from_str(&fs::read_to_string(path).unwrap()).unwrap()
}

fn assert_valid(schema: &str, instance: &Value) {
    let schema = read_json(&schema_path(schema));
    let compiled = jsonschema::JSONSchema::compile(&schema).expect("schema compiles");
    let msgs: Vec<String> = match compiled.validate(instance) {
        Ok(()) => Vec::new(),
        Err(errors) => errors.map(|e| format!("{} at {}", e, e.instance_path)).collect(),
    };
    assert!(msgs.is_empty(), "schema violations: {msgs:?}");
}

/// A small synthetic run so each command takes well under a second.
fn small_config(dir: &Path, attack_rate: f64, seed: u64) -> PathBuf {
    let cfg = json!({
        "stream": {"source": {"synthetic": {
            "dimension": 2, "length": 3000, "attack_rate": attack_rate, "seed": seed
        }}},
        "baselines": {"methods": ["ecod", "lof"], "lof_k": 10},
        "tuning": {"hazard_values": [0.004], "scale_inflation_values": [10.0], "objective": "log_evidence"}
    });
    let path = dir.join(format!("config_{seed}.json"));
    fs::write(&path, serde_json::to_string_pretty(&cfg).unwrap()).unwrap();
    path
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

#[test]
fn budget_reports_the_worked_example() {
    let dir = TempDir::new().unwrap();
    let o = ok(&[
        "budget",
        "--slo",
        "0.999",
        "--period-minutes",
        "43200",
        "--cost-fp",
        "1",
        "--cost-fn",
        "10",
        "--base-rate",
        "0.01",
        "--out",
        s(dir.path()),
    ]);
    let text = String::from_utf8(o.stdout).unwrap();
    assert!(text.contains("error budget: 43.2 min"), "{text}");
    assert!(text.contains("alert threshold: 0.91 (0.908257)"), "{text}");
    assert!(text.contains("max false alerts: 43\n"));
    assert!(text.contains("max missed incidents: 4\n"));
    let report = read_json(&dir.path().join("budget.json"));
    assert_valid("budget.schema.json", &report);
    assert_eq!(report["budget_minutes"], json!(43.2));
    assert_eq!(report["max_false_alerts"], json!(43));
    assert_eq!(report["max_missed_incidents"], json!(4));
    assert!((report["threshold"].as_f64().unwrap() - 0.99 / 1.09).abs() < 1e-12);
}

#[test]
fn budget_edge_cases() {
    let dir = TempDir::new().unwrap();
    ok(&["budget", "--slo", "1.0", "--out", s(dir.path())]);
    let r = read_json(&dir.path().join("budget.json"));
    assert_eq!(
        (r["budget_minutes"].as_f64(), r["max_false_alerts"].as_u64()),
        (Some(0.0), Some(0))
    );
    assert_eq!(r["max_missed_incidents"], json!(0));

    ok(&[
        "budget",
        "--slo",
        "0.99",
        "--cost-fn",
        "1",
        "--base-rate",
        "0.5",
        "--out",
        s(dir.path()),
    ]);
    let r = read_json(&dir.path().join("budget.json"));
    assert_eq!(r["budget_minutes"], json!(432.0));
    assert_eq!(r["threshold"], json!(0.5));
}

#[test]
fn budget_flags_override_config_file() {
    let dir = TempDir::new().unwrap();
    let cfg = dir.path().join("c.json");
    fs::write(&cfg, r#"{"budget": {"slo": 0.99, "period_minutes": 1000}, "policy": {"cost_fp": 2, "cost_fn": 10, "base_rate": 0.01}}"#).unwrap();
    ok(&[
        "budget",
        "--config",
        s(&cfg),
        "--period-minutes",
        "43200",
        "--out",
        s(dir.path()),
    ]);
    let r = read_json(&dir.path().join("budget.json"));
    assert_eq!(r["slo"], json!(0.99));
    assert_eq!(r["period_minutes"], json!(43200.0));
    assert_eq!(r["cost_fp"], json!(2.0));
}

#[test]
fn errors_exit_nonzero_with_one_line() {
    let dir = TempDir::new().unwrap();
    for args in [
        vec!["budget", "--slo", "1.5", "--out", s(dir.path())],
        vec!["budget", "--cost-fp", "-1", "--out", s(dir.path())],
        vec!["detect", "--config", "/nonexistent/config.json"],
        vec!["detect", "--no-such-flag"],
    ] {
        let o = run(&args);
        assert_eq!(o.status.code(), Some(1), "{args:?}");
        let err = String::from_utf8(o.stderr).unwrap();
        assert_eq!(err.trim_end().lines().count(), 1, "{err}");
        assert!(err.starts_with("riskcpd: error: "));
        assert!(o.stdout.is_empty());
    }
}

#[test]
fn malformed_config_is_rejected() {
    let dir = TempDir::new().unwrap();
    let cfg = dir.path().join("bad.json");
    fs::write(&cfg, r#"{"detector": {"hazard": 1.5}}"#).unwrap();
    let o = run(&["detect", "--config", s(&cfg), "--out", s(dir.path())]);
    assert_eq!(o.status.code(), Some(1));
    fs::write(&cfg, r#"{"not_a_key": 1}"#).unwrap();
    assert_eq!(
        run(&["detect", "--config", s(&cfg), "--out", s(dir.path())])
            .status
            .code(),
        Some(1)
    );
}

#[test]
fn default_config_validates_against_schema() {
    let dir = TempDir::new().unwrap();
    let cfg = small_config(dir.path(), 0.02, 1);
    assert_valid("run_config.schema.json", &read_json(&cfg));
    assert_valid("run_config.schema.json", &json!({}));
}

#[test]
fn synth_writes_header_and_rows() {
    let dir = TempDir::new().unwrap();
    let cfg = small_config(dir.path(), 0.02, 3);
    ok(&["synth", "--config", s(&cfg), "--out", s(dir.path())]);
    let text = fs::read_to_string(dir.path().join("stream.csv")).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some("t,f0,f1,label"));
    assert_eq!(lines.count(), 3000);
}

#[test]
fn seed_flag_changes_the_stream() {
    let dir = TempDir::new().unwrap();
    let cfg = small_config(dir.path(), 0.02, 3);
    let (a, b) = (dir.path().join("a"), dir.path().join("b"));
    ok(&["synth", "--config", s(&cfg), "--out", s(&a)]);
    ok(&["synth", "--config", s(&cfg), "--out", s(&b), "--seed", "4"]);
    assert_ne!(
        fs::read(a.join("stream.csv")).unwrap(),
        fs::read(b.join("stream.csv")).unwrap()
    );
}

#[test]
fn detect_writes_timeline_alerts_and_summary() {
    let dir = TempDir::new().unwrap();
    let cfg = small_config(dir.path(), 0.02, 5);
    ok(&["detect", "--config", s(&cfg), "--out", s(dir.path())]);
    let summary = read_json(&dir.path().join("summary.json"));
    assert_valid("summary.schema.json", &summary);
    assert!((summary["threshold"].as_f64().unwrap() - 0.908257).abs() < 1e-6);
    assert_eq!(summary["budget_minutes"], json!(43.2));

    let timeline = fs::read_to_string(dir.path().join("timeline.csv")).unwrap();
    assert!(timeline.starts_with("t,score,threshold,label,alert\n"));
    assert_eq!(timeline.lines().count() as u64, summary["events"].as_u64().unwrap() + 1);

    let alerts = fs::read_to_string(dir.path().join("alerts.log")).unwrap();
    assert_eq!(alerts.lines().count() as u64, summary["alerts"].as_u64().unwrap());
    for line in alerts.lines() {
        let f: Vec<&str> = line.split(',').collect();
        assert_eq!(f.len(), 3);
        assert!(f[1].parse::<f64>().unwrap() > 0.908);
        f[2].parse::<usize>().unwrap();
    }
    let fp = summary["false_positives"].as_f64().unwrap();
    let fneg = summary["false_negatives"].as_f64().unwrap();
    assert_eq!(summary["budget_burn_minutes"].as_f64().unwrap(), fp + 10.0 * fneg);
}

#[test]
fn attack_free_streams_rarely_alert() {
    let dir = TempDir::new().unwrap();
    let mut silent = 0;
    for seed in 0..20 {
        let cfg = small_config(dir.path(), 0.0, seed);
        let out = dir.path().join(format!("d{seed}"));
        ok(&["detect", "--config", s(&cfg), "--out", s(&out)]);
        if read_json(&out.join("summary.json"))["alerts"] == json!(0) {
            silent += 1;
        }
    }
    assert!(silent >= 18, "{silent}/20 runs were alert-free");
}

#[test]
fn eval_reports_exactly_the_selected_methods() {
    let dir = TempDir::new().unwrap();
    let cfg = small_config(dir.path(), 0.03, 2);
    ok(&["eval", "--config", s(&cfg), "--out", s(dir.path())]);
    let m = read_json(&dir.path().join("metrics.json"));
    assert_valid("metrics.schema.json", &m);
    let keys: Vec<&String> = m.as_object().unwrap().keys().collect();
    assert_eq!(keys, ["bocpd", "ecod", "lof"]);
    assert!(m["bocpd"]["ece"].is_number());
    assert!(m["lof"]["ece"].is_null());
    for name in ["bocpd", "ecod", "lof"] {
        for kind in ["pr", "roc"] {
            let text = fs::read_to_string(dir.path().join(format!("{kind}_{name}.csv"))).unwrap();
            assert!(text.starts_with("threshold,x,y\n"));
        }
    }
    let rel = fs::read_to_string(dir.path().join("reliability_bocpd.csv")).unwrap();
    assert!(rel.starts_with("bin_low,bin_high,mean_pred,emp_freq,count\n"));
    assert_eq!(rel.lines().count(), 11);
    assert!(!dir.path().join("reliability_lof.csv").exists());
}

#[test]
fn oracle_scores_are_perfect() {
    let dir = TempDir::new().unwrap();
    let cfg = small_config(dir.path(), 0.03, 2);
    ok(&[
        "eval",
        "--config",
        s(&cfg),
        "--out",
        s(dir.path()),
        "--debug-oracle-scores",
    ]);
    let m = read_json(&dir.path().join("metrics.json"));
    assert_eq!(m["oracle"]["auprc"], json!(1.0));
    assert_eq!(m["oracle"]["auc"], json!(1.0));
    assert_eq!(m.as_object().unwrap().len(), 4);
}

#[test]
fn eval_rejects_single_class_test_data() {
    let dir = TempDir::new().unwrap();
    let cfg = small_config(dir.path(), 0.0, 2);
    let o = run(&["eval", "--config", s(&cfg), "--out", s(dir.path())]);
    assert_eq!(o.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&o.stderr).contains("single class"));
}

#[test]
fn tuned_config_feeds_detect_unchanged() {
    let dir = TempDir::new().unwrap();
    let cfg = small_config(dir.path(), 0.02, 6);
    let t = dir.path().join("t");
    ok(&["tune", "--config", s(&cfg), "--out", s(&t)]);
    let table = fs::read_to_string(t.join("tuning.csv")).unwrap();
    let rows: Vec<&str> = table.lines().collect();
    assert_eq!(rows[0], "hazard,scale_inflation,mixing_weight,objective,value");
    assert_eq!(rows.len(), 2);
    assert!(rows[1].starts_with("0.004,10,0.99,log_evidence,"));
    let tuned = read_json(&t.join("tuned_config.json"));
    assert_valid("run_config.schema.json", &tuned);
    assert_valid("tuning.schema.json", &read_json(&t.join("tuning.json")));
    assert_eq!(tuned["detector"]["hazard"], json!(0.004));
    let sens = fs::read_to_string(t.join("sensitivity.csv")).unwrap();
    assert!(sens.starts_with("cost_fp,cost_fn,base_rate,threshold,"));

    let d = dir.path().join("d");
    ok(&["detect", "--config", s(&t.join("tuned_config.json")), "--out", s(&d)]);
    assert!(d.join("summary.json").exists());
}

#[test]
fn tune_picks_the_better_hazard_cell() {
    let dir = TempDir::new().unwrap();
    let cfg = dir.path().join("c.json");
    fs::write(
        &cfg,
        r#"{"stream": {"source": {"synthetic": {"dimension": 1, "length": 3000, "seed": 2}}},
            "tuning": {"hazard_values": [0.001, 0.01], "scale_inflation_values": [3, 30], "objective": "log_evidence"}}"#,
    )
    .unwrap();
    ok(&["tune", "--config", s(&cfg), "--out", s(dir.path())]);
    let table = fs::read_to_string(dir.path().join("tuning.csv")).unwrap();
    let values: Vec<f64> = table
        .lines()
        .skip(1)
        .map(|l| l.rsplit(',').next().unwrap().parse().unwrap())
        .collect();
    let best = values.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    assert_eq!(
        read_json(&dir.path().join("tuning.json"))["best_value"].as_f64(),
        Some(best)
    );
}

// SPDX-License-Identifier: MIT OR Apache-2.0

use std::collections::BTreeMap;
use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use riskcpd::metrics::{
    timeline_export, write_curve_csv, write_reliability_csv, write_timeline_csv, Evaluation, EvaluationSummary,
    LabeledScores,
};
use riskcpd::pipeline::{compare, detect, prepare, DETECTOR_NAME};
use riskcpd::stream::{generate_synthetic, write_events, StreamSource};
use riskcpd::tuner::{threshold_sensitivity, tune, write_sensitivity_csv, write_tuning_csv};
use riskcpd::{budget_capacity, run_detector, BudgetCapacity, DecisionPolicy, ErrorBudget};
use serde::Serialize;

use crate::config::RunConfig;

/// Name under which `--debug-oracle-scores` reports label-as-score results.
pub const ORACLE_NAME: &str = "oracle";

/// Multipliers on the configured `cost_fn` for the sensitivity table.
const SENSITIVITY_COST_FN_FACTORS: [f64; 7] = [0.1, 0.5, 1.0, 2.0, 5.0, 10.0, 100.0];

fn create(dir: &Path, name: &str) -> Result<BufWriter<File>> {
    let path = dir.join(name);
    let f = File::create(&path).with_context(|| format!("creating {}", path.display()))?;
    Ok(BufWriter::new(f))
}

fn write_json<T: Serialize>(dir: &Path, name: &str, value: &T) -> Result<()> {
    let mut w = create(dir, name)?;
    serde_json::to_writer_pretty(&mut w, value)?;
    w.write_all(b"\n")?;
    w.flush()?;
    Ok(())
}

fn out_dir(config: &RunConfig) -> Result<PathBuf> {
    fs::create_dir_all(&config.out).with_context(|| format!("creating {}", config.out.display()))?;
    Ok(config.out.clone())
}

pub fn synth(config: &RunConfig) -> Result<PathBuf> {
    let StreamSource::Synthetic(cfg) = &config.stream.source else {
        bail!("synth needs a synthetic stream source");
    };
    let events = generate_synthetic(cfg)?;
    let dir = out_dir(config)?;
    let mut w = create(&dir, "stream.csv")?;
    write_events(&mut w, &events)?;
    w.flush()?;
    Ok(dir)
}

#[derive(Serialize)]
struct DetectSummary {
    threshold: f64,
    cost_fp: f64,
    cost_fn: f64,
    base_rate: f64,
    mixing_weight: f64,
    slo: f64,
    budget_minutes: f64,
    max_false_alerts: u64,
    max_missed_incidents: u64,
    events: usize,
    positives: usize,
    alerts: usize,
    true_positives: usize,
    false_positives: usize,
    false_negatives: usize,
    budget_burn_minutes: f64,
    budget_remaining_minutes: f64,
    within_budget: bool,
    log_evidence: f64,
}

pub fn detect_cmd(config: &RunConfig) -> Result<PathBuf> {
    let prepared = prepare(&config.stream)?;
    let policy = &config.policy;
    let detection = detect(&config.detector, policy, &prepared.segments)?;
    let run = &detection.run;
    let timeline = timeline_export(&run.scored, policy)?;

    let dir = out_dir(config)?;
    let mut w = create(&dir, "timeline.csv")?;
    write_timeline_csv(&mut w, &timeline)?;
    w.flush()?;

    let mut log = create(&dir, "alerts.log")?;
    for (e, d) in run.scored.iter().zip(&run.diagnostics) {
        if e.alert {
            writeln!(log, "{},{},{}", e.t, e.score, d.map_run_length)?;
        }
    }
    log.flush()?;

    let (mut tp, mut fp, mut fn_) = (0, 0, 0);
    for e in &run.scored {
        match (e.alert, e.label == 1) {
            (true, true) => tp += 1,
            (true, false) => fp += 1,
            (false, true) => fn_ += 1,
            (false, false) => {}
        }
    }
    let BudgetCapacity {
        max_false_alerts,
        max_missed_incidents,
    } = budget_capacity(&config.budget, policy);
    let budget_minutes = config.budget.budget_minutes();
    let burn = fp as f64 * policy.cost_fp + fn_ as f64 * policy.cost_fn;
    let summary = DetectSummary {
        threshold: policy.threshold(),
        cost_fp: policy.cost_fp,
        cost_fn: policy.cost_fn,
        base_rate: policy.base_rate,
        mixing_weight: detection.config.mixing_weight,
        slo: config.budget.slo,
        budget_minutes,
        max_false_alerts,
        max_missed_incidents,
        events: run.scored.len(),
        positives: tp + fn_,
        alerts: run.alerts(),
        true_positives: tp,
        false_positives: fp,
        false_negatives: fn_,
        budget_burn_minutes: burn,
        budget_remaining_minutes: budget_minutes - burn,
        within_budget: burn <= budget_minutes,
        log_evidence: run.log_evidence(),
    };
    write_json(&dir, "summary.json", &summary)?;
    Ok(dir)
}

pub fn eval_cmd(config: &RunConfig, oracle: bool) -> Result<PathBuf> {
    let prepared = prepare(&config.stream)?;
    let test = &prepared.segments.test;
    let positives = test.iter().filter(|e| e.label == 1).count();
    if positives == 0 || positives == test.len() {
        bail!(
            "test segment has a single class ({positives} positives out of {}); eval needs both",
            test.len()
        );
    }
    let cmp = compare(
        &config.detector,
        &config.policy,
        &config.baselines.methods,
        config.baselines.lof_k,
        &prepared.segments,
    )?;
    let mut scores = cmp.scores;
    if oracle {
        let labels: Vec<u8> = test.iter().map(|e| e.label).collect();
        let s = labels.iter().map(|&l| f64::from(l)).collect();
        scores.insert(ORACLE_NAME.to_string(), LabeledScores::new(s, labels)?);
    }

    let dir = out_dir(config)?;
    let mut metrics: BTreeMap<&str, EvaluationSummary> = BTreeMap::new();
    for (name, data) in &scores {
        let bins = (name == DETECTOR_NAME).then_some(config.reliability_bins);
        let ev = Evaluation::compute(data, bins)?;
        let mut w = create(&dir, &format!("pr_{name}.csv"))?;
        write_curve_csv(&mut w, &ev.pr)?;
        w.flush()?;
        let mut w = create(&dir, &format!("roc_{name}.csv"))?;
        write_curve_csv(&mut w, &ev.roc)?;
        w.flush()?;
        if let Some(rel) = &ev.reliability {
            let mut w = create(&dir, &format!("reliability_{name}.csv"))?;
            write_reliability_csv(&mut w, rel)?;
            w.flush()?;
        }
        metrics.insert(name, ev.summary(data));
    }
    write_json(&dir, "metrics.json", &metrics)?;
    Ok(dir)
}

#[derive(Serialize)]
struct TuneReport<'a> {
    objective: &'a str,
    best_value: f64,
    hazard: f64,
    scale_inflation: f64,
    mixing_weight: f64,
    cells: usize,
    excluded: usize,
}

pub fn tune_cmd(config: &RunConfig) -> Result<PathBuf> {
    let prepared = prepare(&config.stream)?;
    let seg = &prepared.segments;
    if seg.validation.is_empty() {
        bail!("validation segment is empty; adjust stream.split");
    }
    let result = tune(
        &config.tuning,
        &config.detector,
        &config.policy,
        &seg.train,
        &seg.validation,
    )?;
    let dir = out_dir(config)?;

    let mut w = create(&dir, "tuning.csv")?;
    write_tuning_csv(&mut w, &result)?;
    w.flush()?;

    // The output directory is left at its default so the file does not
    // embed this run's path.
    let tuned = RunConfig {
        detector: result.best_settings.clone(),
        out: RunConfig::default().out,
        ..config.clone()
    };
    write_json(&dir, "tuned_config.json", &tuned)?;

    let (bocpd, _) = result.best_settings.build(&seg.train, &config.policy)?;
    let run = run_detector(&bocpd, &config.policy, &seg.validation)?;
    let p = &config.policy;
    let policies = SENSITIVITY_COST_FN_FACTORS
        .iter()
        .map(|f| DecisionPolicy::new(p.cost_fp, p.cost_fn * f, p.base_rate))
        .collect::<riskcpd::Result<Vec<_>>>()?;
    let mut w = create(&dir, "sensitivity.csv")?;
    write_sensitivity_csv(&mut w, &threshold_sensitivity(&policies, &run.scored))?;
    w.flush()?;

    let report = TuneReport {
        objective: result.objective.name(),
        best_value: result.best_value,
        hazard: result.best.hazard,
        scale_inflation: result.best.scale_inflation,
        mixing_weight: result.best_settings.mixing_weight_for(&config.policy),
        cells: result.table.len(),
        excluded: result.table.iter().filter(|r| r.value.is_err()).count(),
    };
    write_json(&dir, "tuning.json", &report)?;
    Ok(dir)
}

#[derive(Debug, Serialize)]
pub struct BudgetReport {
    pub slo: f64,
    pub period_minutes: f64,
    pub budget_minutes: f64,
    pub cost_fp: f64,
    pub cost_fn: f64,
    pub base_rate: f64,
    pub threshold: f64,
    pub max_false_alerts: u64,
    pub max_missed_incidents: u64,
}

impl BudgetReport {
    pub fn new(budget: &ErrorBudget, policy: &DecisionPolicy) -> Self {
        let cap = budget_capacity(budget, policy);
        Self {
            slo: budget.slo,
            period_minutes: budget.period_minutes,
            budget_minutes: budget.budget_minutes(),
            cost_fp: policy.cost_fp,
            cost_fn: policy.cost_fn,
            base_rate: policy.base_rate,
            threshold: policy.threshold(),
            max_false_alerts: cap.max_false_alerts,
            max_missed_incidents: cap.max_missed_incidents,
        }
    }

    pub fn render(&self) -> String {
        format!(
            "error budget: {} min (slo {} over {} min)\n\
             alert threshold: {:.2} ({:.6})\n\
             max false alerts: {}\n\
             max missed incidents: {}\n",
            self.budget_minutes,
            self.slo,
            self.period_minutes,
            self.threshold,
            self.threshold,
            self.max_false_alerts,
            self.max_missed_incidents
        )
    }
}

pub fn budget_cmd(config: &RunConfig, report: &BudgetReport) -> Result<PathBuf> {
    let dir = out_dir(config)?;
    write_json(&dir, "budget.json", report)?;
    Ok(dir)
}

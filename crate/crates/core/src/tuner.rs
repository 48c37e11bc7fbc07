// SPDX-License-Identifier: MIT OR Apache-2.0

//! Grid search over hazard and prior settings on a validation window, and
//! threshold sensitivity reporting across cost policies.
//!
//! Costs are policy inputs and are never fitted here.

use std::cmp::Ordering;
use std::io::Write;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::detector::{run_detector, DetectorSettings};
use crate::error::{Error, Result};
use crate::metrics::{pr_curve, LabeledScores};
use crate::mixture::validate_mixing_weight;
use crate::model::HazardFunction;
use crate::risk::DecisionPolicy;
use crate::stream::{Event, ScoredEvent};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Objective {
    Auprc,
    LogEvidence,
}

impl Objective {
    pub fn name(self) -> &'static str {
        match self {
            Self::Auprc => "auprc",
            Self::LogEvidence => "log_evidence",
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TuningGrid {
    pub hazard_values: Vec<f64>,
    pub scale_inflation_values: Vec<f64>,
    /// `None` keeps the settings' mixing weight.
    #[serde(default)]
    pub mixing_weights: Option<Vec<f64>>,
    pub objective: Objective,
}

impl TuningGrid {
    pub fn validate(&self) -> Result<()> {
        if self.hazard_values.is_empty() || self.scale_inflation_values.is_empty() {
            return Err(Error::invalid("tuning grid lists must be nonempty"));
        }
        for &h in &self.hazard_values {
            HazardFunction::new(h)?;
        }
        for &s in &self.scale_inflation_values {
            if !(s.is_finite() && s > 0.0) {
                return Err(Error::invalid(format!("scale inflation must be > 0; got {s}")));
            }
        }
        if let Some(ws) = &self.mixing_weights {
            if ws.is_empty() {
                return Err(Error::invalid("mixing_weights, when given, must be nonempty"));
            }
            for &w in ws {
                validate_mixing_weight(w)?;
            }
        }
        Ok(())
    }

    /// Cells in grid order: hazard outermost, then inflation, then mixing weight.
    pub fn cells(&self) -> Vec<GridCell> {
        let weights: Vec<Option<f64>> = match &self.mixing_weights {
            Some(ws) => ws.iter().copied().map(Some).collect(),
            None => vec![None],
        };
        let mut out = Vec::new();
        for &hazard in &self.hazard_values {
            for &scale_inflation in &self.scale_inflation_values {
                for &mixing_weight in &weights {
                    out.push(GridCell {
                        hazard,
                        scale_inflation,
                        mixing_weight,
                    });
                }
            }
        }
        out
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct GridCell {
    pub hazard: f64,
    pub scale_inflation: f64,
    pub mixing_weight: Option<f64>,
}

impl GridCell {
    pub fn apply(&self, base: &DetectorSettings) -> DetectorSettings {
        DetectorSettings {
            hazard: self.hazard,
            scale_inflation: self.scale_inflation,
            mixing_weight: self.mixing_weight.or(base.mixing_weight),
            ..base.clone()
        }
    }
}

/// One evaluated cell. `value` is `Err` when the objective was undefined
/// or the detector failed; such cells are excluded from selection.
#[derive(Clone, Debug, PartialEq)]
pub struct TuningRow {
    pub cell: GridCell,
    /// Mixing weight actually used.
    pub mixing_weight: f64,
    pub value: std::result::Result<f64, String>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct TuningResult {
    pub objective: Objective,
    pub best: GridCell,
    pub best_value: f64,
    pub best_settings: DetectorSettings,
    pub table: Vec<TuningRow>,
}

fn evaluate_cell(
    settings: &DetectorSettings,
    objective: Objective,
    policy: &DecisionPolicy,
    train: &[Event],
    validation: &[Event],
) -> Result<f64> {
    let (config, _) = settings.build(train, policy)?;
    let run = run_detector(&config, policy, validation)?;
    match objective {
        Objective::LogEvidence => Ok(run.log_evidence()),
        Objective::Auprc => Ok(pr_curve(&LabeledScores::from_scored(&run.scored)?)?.area),
    }
}

/// Larger value first; ties by smaller hazard, then smaller inflation,
/// then earlier grid position.
fn better(a: &(usize, GridCell, f64), b: &(usize, GridCell, f64)) -> Ordering {
    b.2.total_cmp(&a.2)
        .then(a.1.hazard.total_cmp(&b.1.hazard))
        .then(a.1.scale_inflation.total_cmp(&b.1.scale_inflation))
        .then(a.0.cmp(&b.0))
}

/// Fits priors on `train` and scores every grid cell on `validation`.
/// Cells run in parallel; the table is in grid order.
pub fn tune(
    grid: &TuningGrid,
    base: &DetectorSettings,
    policy: &DecisionPolicy,
    train: &[Event],
    validation: &[Event],
) -> Result<TuningResult> {
    grid.validate()?;
    base.validate()?;
    if train.is_empty() || validation.is_empty() {
        return Err(Error::Empty(
            "tuning needs nonempty train and validation segments".into(),
        ));
    }
    let cells = grid.cells();
    let table: Vec<TuningRow> = cells
        .par_iter()
        .map(|cell| {
            let settings = cell.apply(base);
            let value = evaluate_cell(&settings, grid.objective, policy, train, validation)
                .and_then(|v| {
                    if v.is_finite() {
                        Ok(v)
                    } else {
                        Err(Error::Undefined(format!("objective is {v}")))
                    }
                })
                .map_err(|e| e.to_string());
            TuningRow {
                cell: *cell,
                mixing_weight: settings.mixing_weight_for(policy),
                value,
            }
        })
        .collect();

    let best = table
        .iter()
        .enumerate()
        .filter_map(|(i, r)| r.value.as_ref().ok().map(|&v| (i, r.cell, v)))
        .min_by(better);
    let Some((_, cell, value)) = best else {
        let reasons: Vec<String> = table
            .iter()
            .filter_map(|r| r.value.as_ref().err().cloned())
            .take(1)
            .collect();
        return Err(Error::NoValidCells(format!(
            "all {} cells excluded; first reason: {}",
            table.len(),
            reasons.first().map_or("none", String::as_str)
        )));
    };
    Ok(TuningResult {
        objective: grid.objective,
        best: cell,
        best_value: value,
        best_settings: cell.apply(base),
        table,
    })
}

/// `hazard,scale_inflation,mixing_weight,objective,value`; excluded cells
/// have an empty value.
pub fn write_tuning_csv<W: Write>(writer: W, result: &TuningResult) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(["hazard", "scale_inflation", "mixing_weight", "objective", "value"])?;
    for r in &result.table {
        w.write_record([
            r.cell.hazard.to_string(),
            r.cell.scale_inflation.to_string(),
            r.mixing_weight.to_string(),
            result.objective.name().to_string(),
            r.value.as_ref().map(|v| v.to_string()).unwrap_or_default(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SensitivityRow {
    pub cost_fp: f64,
    pub cost_fn: f64,
    pub base_rate: f64,
    pub threshold: f64,
    pub false_positives: usize,
    pub false_negatives: usize,
    /// `None` when nothing is alerted.
    pub precision: Option<f64>,
    /// `None` when the stream has no positives.
    pub recall: Option<f64>,
    pub budget_burn_minutes: f64,
}

/// Re-decides every event under each policy and counts the errors.
pub fn threshold_sensitivity(policies: &[DecisionPolicy], scored: &[ScoredEvent]) -> Vec<SensitivityRow> {
    policies
        .iter()
        .map(|policy| {
            let (mut tp, mut fp, mut fn_) = (0usize, 0usize, 0usize);
            for e in scored {
                match (policy.decide(e.score), e.label == 1) {
                    (true, true) => tp += 1,
                    (true, false) => fp += 1,
                    (false, true) => fn_ += 1,
                    (false, false) => {}
                }
            }
            SensitivityRow {
                cost_fp: policy.cost_fp,
                cost_fn: policy.cost_fn,
                base_rate: policy.base_rate,
                threshold: policy.threshold(),
                false_positives: fp,
                false_negatives: fn_,
                precision: (tp + fp > 0).then(|| tp as f64 / (tp + fp) as f64),
                recall: (tp + fn_ > 0).then(|| tp as f64 / (tp + fn_) as f64),
                budget_burn_minutes: fp as f64 * policy.cost_fp + fn_ as f64 * policy.cost_fn,
            }
        })
        .collect()
}

pub fn write_sensitivity_csv<W: Write>(writer: W, rows: &[SensitivityRow]) -> Result<()> {
    let opt = |v: Option<f64>| v.map(|x| x.to_string()).unwrap_or_default();
    let mut w = csv::Writer::from_writer(writer);
    w.write_record([
        "cost_fp",
        "cost_fn",
        "base_rate",
        "threshold",
        "precision",
        "recall",
        "false_positives",
        "false_negatives",
        "budget_burn_minutes",
    ])?;
    for r in rows {
        w.write_record([
            r.cost_fp.to_string(),
            r.cost_fn.to_string(),
            r.base_rate.to_string(),
            r.threshold.to_string(),
            opt(r.precision),
            opt(r.recall),
            r.false_positives.to_string(),
            r.false_negatives.to_string(),
            r.budget_burn_minutes.to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

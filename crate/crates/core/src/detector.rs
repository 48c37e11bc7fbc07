// SPDX-License-Identifier: MIT OR Apache-2.0

//! End-to-end detector: prior fitting on the training segment, the online
//! pass over a stream, and the alert decision.

use serde::{Deserialize, Serialize};

use crate::bocpd::{Bocpd, BocpdConfig, StepDiagnostics, DEFAULT_PRUNE_THRESHOLD};
use crate::error::{Error, Result};
use crate::mixture::Assignment;
use crate::model::{HazardFunction, NigParams};
use crate::risk::DecisionPolicy;
use crate::stream::{Event, ScoredEvent};

/// Where the malicious prior came from.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MaliciousPriorSource {
    /// Fitted on labeled attacks in the training segment.
    Labeled,
    /// Benign prior with its scale widened.
    Inflated,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FittedPriors {
    pub benign: Vec<NigParams>,
    pub malicious: Vec<NigParams>,
    pub malicious_source: MaliciousPriorSource,
}

/// Knobs that, together with a training segment, determine a `BocpdConfig`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct DetectorSettings {
    pub hazard: f64,
    pub prune_threshold: f64,
    pub max_run_length: Option<usize>,
    /// Benign weight `pi`; `None` means `1 - base_rate`.
    pub mixing_weight: Option<f64>,
    /// Multiplier on the malicious prior's `beta0`.
    pub scale_inflation: f64,
    /// `alpha0` of the fitted priors.
    pub prior_strength: f64,
    /// Labeled training attacks needed before the malicious prior is fitted
    /// on them instead of inflated from the benign prior.
    pub min_labeled_attacks: usize,
    pub assignment: Assignment,
}

impl Default for DetectorSettings {
    fn default() -> Self {
        Self {
            hazard: 0.004,
            prune_threshold: DEFAULT_PRUNE_THRESHOLD,
            max_run_length: Some(2000),
            mixing_weight: None,
            scale_inflation: 10.0,
            prior_strength: 100.0,
            min_labeled_attacks: 10,
            assignment: Assignment::Soft,
        }
    }
}

impl DetectorSettings {
    pub fn validate(&self) -> Result<()> {
        HazardFunction::new(self.hazard)?;
        for (name, v) in [
            ("scale_inflation", self.scale_inflation),
            ("prior_strength", self.prior_strength),
        ] {
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::invalid(format!("{name} must be finite and > 0; got {v}")));
            }
        }
        Ok(())
    }

    pub fn mixing_weight_for(&self, policy: &DecisionPolicy) -> f64 {
        self.mixing_weight.unwrap_or(1.0 - policy.base_rate)
    }

    /// Fits priors on `train` and assembles the engine configuration.
    pub fn build(&self, train: &[Event], policy: &DecisionPolicy) -> Result<(BocpdConfig, FittedPriors)> {
        self.validate()?;
        let priors = fit_priors(train, self)?;
        let config = BocpdConfig {
            hazard: HazardFunction::new(self.hazard)?,
            prune_threshold: self.prune_threshold,
            max_run_length: self.max_run_length,
            benign_prior: priors.benign.clone(),
            malicious_prior: priors.malicious.clone(),
            mixing_weight: self.mixing_weight_for(policy),
            assignment: self.assignment,
        };
        config.validate()?;
        Ok((config, priors))
    }
}

const MIN_VARIANCE: f64 = 1e-6;
const KAPPA_RANGE: (f64, f64) = (0.01, 100.0);

struct Moments {
    mean: Vec<f64>,
    var: Vec<f64>,
}

fn moments<'a>(rows: impl Iterator<Item = &'a [f64]>, d: usize) -> Option<Moments> {
    let rows: Vec<&[f64]> = rows.collect();
    if rows.is_empty() {
        return None;
    }
    let n = rows.len() as f64;
    let mut mean = vec![0.0; d];
    for r in &rows {
        for (m, v) in mean.iter_mut().zip(r.iter()) {
            *m += v / n;
        }
    }
    let mut var = vec![0.0; d];
    for r in &rows {
        for ((s, v), m) in var.iter_mut().zip(r.iter()).zip(&mean) {
            *s += (v - m).powi(2) / n;
        }
    }
    Some(Moments { mean, var })
}

/// Fits both component priors from the training segment.
///
/// Benign: the total training variance `v` is split into a within-regime part
/// `w` (half the mean squared successive difference, which is insensitive to
/// slow drift and rare level shifts) and a between-regime part `v - w`.
/// `alpha0 = prior_strength`, `beta0 = alpha0 * w` and
/// `kappa0 = w / (v - w)`, so a fresh run predicts with scale^2 close to `v`
/// and tightens toward `w` as the run accumulates data.
///
/// Malicious: fitted the same way on labeled training attacks when there are
/// enough of them, otherwise the benign prior; either way `beta0` is then
/// multiplied by `scale_inflation`.
pub fn fit_priors(train: &[Event], settings: &DetectorSettings) -> Result<FittedPriors> {
    let first = train
        .first()
        .ok_or_else(|| Error::Empty("training segment is empty".into()))?;
    let d = first.features.dimension();
    let benign_rows: Vec<&[f64]> = train
        .iter()
        .filter(|e| e.label == 0)
        .map(|e| e.features.values())
        .collect();
    if benign_rows.len() < 2 {
        return Err(Error::Empty("training segment needs at least two benign events".into()));
    }
    let benign = fit_component(&benign_rows, d, settings.prior_strength);

    let attack_rows: Vec<&[f64]> = train
        .iter()
        .filter(|e| e.label == 1)
        .map(|e| e.features.values())
        .collect();
    let (mut malicious, source) = if attack_rows.len() >= settings.min_labeled_attacks.max(2) {
        (
            fit_component(&attack_rows, d, settings.prior_strength),
            MaliciousPriorSource::Labeled,
        )
    } else {
        (benign.clone(), MaliciousPriorSource::Inflated)
    };
    for p in &mut malicious {
        p.beta0 *= settings.scale_inflation;
    }
    Ok(FittedPriors {
        benign,
        malicious,
        malicious_source: source,
    })
}

fn fit_component(rows: &[&[f64]], d: usize, strength: f64) -> Vec<NigParams> {
    let m = moments(rows.iter().copied(), d).expect("non-empty rows");
    let mut within = vec![0.0; d];
    for pair in rows.windows(2) {
        for (j, w) in within.iter_mut().enumerate() {
            *w += (pair[1][j] - pair[0][j]).powi(2);
        }
    }
    let pairs = (rows.len() - 1) as f64;
    (0..d)
        .map(|j| {
            let total = m.var[j].max(MIN_VARIANCE);
            let w = (within[j] / (2.0 * pairs)).clamp(MIN_VARIANCE, total);
            let between = (total - w).max(w / KAPPA_RANGE.1);
            let kappa0 = (w / between).clamp(KAPPA_RANGE.0, KAPPA_RANGE.1);
            NigParams {
                mu0: m.mean[j],
                kappa0,
                alpha0: strength,
                beta0: strength * w,
            }
        })
        .collect()
}

/// Output of one detector pass.
#[derive(Clone, Debug)]
pub struct DetectionRun {
    pub scored: Vec<ScoredEvent>,
    pub diagnostics: Vec<StepDiagnostics>,
}

impl DetectionRun {
    /// Sum of per-step log predictive densities.
    pub fn log_evidence(&self) -> f64 {
        self.diagnostics.iter().map(|d| d.log_evidence).sum()
    }

    pub fn alerts(&self) -> usize {
        self.scored.iter().filter(|e| e.alert).count()
    }
}

/// Processes `events` one at a time from a fresh posterior.
pub fn run_detector(config: &BocpdConfig, policy: &DecisionPolicy, events: &[Event]) -> Result<DetectionRun> {
    let mut engine = Bocpd::new(config.clone())?;
    let mut scored = Vec::with_capacity(events.len());
    let mut diagnostics = Vec::with_capacity(events.len());
    for (i, e) in events.iter().enumerate() {
        let diag = engine.step(&e.features).map_err(|err| err.at_index(i))?;
        scored.push(ScoredEvent {
            t: e.t,
            features: e.features.clone(),
            score: diag.incident_probability,
            alert: policy.decide(diag.incident_probability),
            label: e.label,
        });
        diagnostics.push(diag);
    }
    Ok(DetectionRun { scored, diagnostics })
}

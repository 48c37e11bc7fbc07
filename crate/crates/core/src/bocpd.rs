// SPDX-License-Identifier: MIT OR Apache-2.0

//! Run-length posterior recursion.
//!
//! Hypothesis `r` after step `t` means the last `r` observations belong to the
//! current segment. Each step scores the new observation under every
//! hypothesis, moves surviving mass to `r + 1` (with the observation absorbed
//! into that hypothesis' state) and pools changepoint mass at `r = 0` with
//! fresh prior state.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::math::{log_add_exp, log_sum_exp};
use crate::mixture::{validate_mixing_weight, Assignment, MixtureState, RunModel};
use crate::model::{ConjugateModel, FeatureVector, HazardFunction, NigParams};

/// Default log-probability floor for dropping run-length hypotheses.
pub const DEFAULT_PRUNE_THRESHOLD: f64 = -30.0;

/// Bounded-memory rules applied after every step.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Pruning {
    /// Hypotheses whose normalized log weight falls below this are dropped.
    pub threshold: f64,
    /// Longest tracked run length; longer runs fold into this one.
    pub max_run_length: Option<usize>,
}

impl Pruning {
    pub const NONE: Pruning = Pruning {
        threshold: f64::NEG_INFINITY,
        max_run_length: None,
    };
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BocpdConfig {
    pub hazard: HazardFunction,
    #[serde(default = "default_prune_threshold")]
    pub prune_threshold: f64,
    #[serde(default)]
    pub max_run_length: Option<usize>,
    /// Per-dimension prior for the benign component.
    pub benign_prior: Vec<NigParams>,
    /// Per-dimension prior for the malicious component.
    pub malicious_prior: Vec<NigParams>,
    /// Benign component weight `pi`.
    pub mixing_weight: f64,
    #[serde(default)]
    pub assignment: Assignment,
}

fn default_prune_threshold() -> f64 {
    DEFAULT_PRUNE_THRESHOLD
}

impl BocpdConfig {
    /// Config with the same prior on every dimension.
    pub fn isotropic(
        hazard: f64,
        benign: NigParams,
        malicious: NigParams,
        dimension: usize,
        mixing_weight: f64,
    ) -> Result<Self> {
        let config = Self {
            hazard: HazardFunction::new(hazard)?,
            prune_threshold: DEFAULT_PRUNE_THRESHOLD,
            max_run_length: None,
            benign_prior: vec![benign; dimension],
            malicious_prior: vec![malicious; dimension],
            mixing_weight,
            assignment: Assignment::Soft,
        };
        config.validate()?;
        Ok(config)
    }

    pub fn validate(&self) -> Result<()> {
        if self.prune_threshold.is_nan() || self.prune_threshold >= 0.0 {
            return Err(Error::invalid(format!(
                "prune_threshold must be < 0; got {}",
                self.prune_threshold
            )));
        }
        if self.max_run_length == Some(0) {
            return Err(Error::invalid("max_run_length must be positive"));
        }
        validate_mixing_weight(self.mixing_weight)?;
        self.initial_state().map(|_| ())
    }

    pub fn dimension(&self) -> usize {
        self.benign_prior.len()
    }

    pub fn pruning(&self) -> Pruning {
        Pruning {
            threshold: self.prune_threshold,
            max_run_length: self.max_run_length,
        }
    }

    /// Mixture state for a run that has seen no observations.
    pub fn initial_state(&self) -> Result<MixtureState> {
        let benign = ConjugateModel::new(self.benign_prior.clone())?;
        let malicious = ConjugateModel::new(self.malicious_prior.clone())?;
        Ok(MixtureState::new(benign, malicious, self.mixing_weight)?.with_assignment(self.assignment))
    }
}

/// Per-step readout alongside the updated posterior.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct StepDiagnostics {
    /// `log p(x_t | x_{1:t-1})`, the pre-normalization log mass.
    pub log_evidence: f64,
    /// Run-length-marginalized malicious responsibility of `x_t`.
    pub incident_probability: f64,
    pub map_run_length: usize,
    pub hypotheses: usize,
    pub pruned: usize,
}

/// Discrete posterior over run lengths with one model state per hypothesis.
#[derive(Clone, Debug, PartialEq)]
pub struct RunLengthPosterior<M = MixtureState> {
    run_lengths: Vec<usize>,
    log_weights: Vec<f64>,
    states: Vec<M>,
}

const NORMALIZATION_TOLERANCE: f64 = 1e-9;

impl<M: RunModel> RunLengthPosterior<M> {
    /// `P(r_0 = 0) = 1` with the given fresh state.
    pub fn new(initial: M) -> Self {
        Self {
            run_lengths: vec![0],
            log_weights: vec![0.0],
            states: vec![initial],
        }
    }

    /// Builds a posterior from explicit parts, checking every invariant.
    pub fn from_parts(run_lengths: Vec<usize>, log_weights: Vec<f64>, states: Vec<M>) -> Result<Self> {
        if run_lengths.is_empty() {
            return Err(Error::Empty("run-length posterior needs a hypothesis".into()));
        }
        if run_lengths.len() != log_weights.len() || run_lengths.len() != states.len() {
            return Err(Error::invalid("run lengths, weights and states must be parallel"));
        }
        if run_lengths.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::invalid("run lengths must be strictly increasing"));
        }
        let z = log_sum_exp(&log_weights);
        if z.is_nan() || z.abs() > NORMALIZATION_TOLERANCE {
            return Err(Error::invalid(format!(
                "log weights are not normalized (logsumexp = {z})"
            )));
        }
        let d = states[0].dimension();
        if let Some(s) = states.iter().find(|s| s.dimension() != d) {
            return Err(Error::DimensionMismatch {
                expected: d,
                found: s.dimension(),
            });
        }
        Ok(Self {
            run_lengths,
            log_weights,
            states,
        })
    }

    pub fn run_lengths(&self) -> &[usize] {
        &self.run_lengths
    }

    pub fn log_weights(&self) -> &[f64] {
        &self.log_weights
    }

    pub fn states(&self) -> &[M] {
        &self.states
    }

    pub fn len(&self) -> usize {
        self.run_lengths.len()
    }

    pub fn is_empty(&self) -> bool {
        self.run_lengths.is_empty()
    }

    pub fn dimension(&self) -> usize {
        self.states[0].dimension()
    }

    /// `logsumexp(log_weights)`; zero up to rounding for a valid posterior.
    pub fn log_normalizer(&self) -> f64 {
        log_sum_exp(&self.log_weights)
    }

    /// Posterior mass of run length `r` (zero if not tracked).
    pub fn probability(&self, r: usize) -> f64 {
        self.run_lengths
            .binary_search(&r)
            .map(|i| self.log_weights[i].exp())
            .unwrap_or(0.0)
    }

    /// Most probable run length, ties broken toward the shorter run.
    pub fn map_run_length(&self) -> usize {
        let mut best = 0;
        for i in 1..self.log_weights.len() {
            if self.log_weights[i] > self.log_weights[best] {
                best = i;
            }
        }
        self.run_lengths[best]
    }

    /// Malicious probability of `x` marginalized over run lengths, where
    /// `self` is the posterior *before* `x` is absorbed. Hypotheses are
    /// reweighted by their predictive density of `x`, which gives the same
    /// value as weighting the post-step posterior by each parent's
    /// responsibility.
    pub fn incident_probability(&self, x: &FeatureVector) -> Result<f64> {
        let evals = self.evaluate_all(x)?;
        let (_, p) = self.evidence_and_incident(&evals)?;
        Ok(p)
    }

    fn evaluate_all(&self, x: &FeatureVector) -> Result<Vec<crate::mixture::Evaluation>> {
        if x.dimension() != self.dimension() {
            return Err(Error::DimensionMismatch {
                expected: self.dimension(),
                found: x.dimension(),
            });
        }
        self.states.iter().map(|s| s.evaluate(x)).collect()
    }

    fn evidence_and_incident(&self, evals: &[crate::mixture::Evaluation]) -> Result<(f64, f64)> {
        let joint: Vec<f64> = self
            .log_weights
            .iter()
            .zip(evals)
            .map(|(lw, e)| lw + e.log_density)
            .collect();
        let log_evidence = log_sum_exp(&joint);
        if !log_evidence.is_finite() {
            return Err(Error::Degenerate(format!(
                "total predictive mass is not finite (log evidence {log_evidence})"
            )));
        }
        let malicious: Vec<f64> = self
            .log_weights
            .iter()
            .zip(evals)
            .map(|(lw, e)| lw + e.log_malicious)
            .collect();
        let incident = (log_sum_exp(&malicious) - log_evidence).exp().clamp(0.0, 1.0);
        Ok((log_evidence, incident))
    }

    /// One recursion step. `fresh` is the state given to the changepoint
    /// hypothesis.
    pub fn step_with(
        &self,
        x: &FeatureVector,
        hazard: &HazardFunction,
        pruning: Pruning,
        fresh: &M,
    ) -> Result<(Self, StepDiagnostics)> {
        let evals = self.evaluate_all(x)?;
        let (log_evidence, incident_probability) = self.evidence_and_incident(&evals)?;

        let n = self.len();
        let mut run_lengths = Vec::with_capacity(n + 1);
        let mut log_weights = Vec::with_capacity(n + 1);
        let mut states = Vec::with_capacity(n + 1);

        let mut changepoint = f64::NEG_INFINITY;
        for ((lw, e), &r) in self.log_weights.iter().zip(&evals).zip(&self.run_lengths) {
            changepoint = log_add_exp(changepoint, lw + e.log_density + hazard.log_hazard(r));
        }
        run_lengths.push(0);
        log_weights.push(changepoint);
        states.push(fresh.clone());

        for (((lw, e), &r), state) in self
            .log_weights
            .iter()
            .zip(&evals)
            .zip(&self.run_lengths)
            .zip(&self.states)
        {
            run_lengths.push(r + 1);
            log_weights.push(lw + e.log_density + hazard.log_survival(r));
            states.push(state.absorb(x, e)?);
        }

        let z = log_sum_exp(&log_weights);
        for lw in &mut log_weights {
            *lw -= z;
        }

        let mut next = Self {
            run_lengths,
            log_weights,
            states,
        };
        if let Some(cap) = pruning.max_run_length {
            next.fold_beyond(cap);
        }
        let pruned = next.prune(pruning.threshold);

        let diagnostics = StepDiagnostics {
            log_evidence,
            incident_probability,
            map_run_length: next.map_run_length(),
            hypotheses: next.len(),
            pruned,
        };
        Ok((next, diagnostics))
    }

    /// Merges every hypothesis longer than `cap` into run length `cap`. The
    /// merged hypothesis keeps the state of its heaviest contributor.
    fn fold_beyond(&mut self, cap: usize) {
        let Some(first) = self.run_lengths.iter().position(|&r| r >= cap) else {
            return;
        };
        if first + 1 == self.len() && self.run_lengths[first] == cap {
            return;
        }
        let mut weight = f64::NEG_INFINITY;
        let mut heaviest = first;
        for i in first..self.len() {
            weight = log_add_exp(weight, self.log_weights[i]);
            if self.log_weights[i] > self.log_weights[heaviest] {
                heaviest = i;
            }
        }
        let state = self.states[heaviest].clone();
        self.run_lengths.truncate(first);
        self.log_weights.truncate(first);
        self.states.truncate(first);
        self.run_lengths.push(cap);
        self.log_weights.push(weight);
        self.states.push(state);
    }

    /// Drops hypotheses below `threshold` and renormalizes. The changepoint
    /// hypothesis and the MAP hypothesis always survive.
    fn prune(&mut self, threshold: f64) -> usize {
        if threshold == f64::NEG_INFINITY {
            return 0;
        }
        let map = {
            let mut best = 0;
            for i in 1..self.len() {
                if self.log_weights[i] > self.log_weights[best] {
                    best = i;
                }
            }
            best
        };
        let keep: Vec<bool> = (0..self.len())
            .map(|i| i == map || self.run_lengths[i] == 0 || self.log_weights[i] >= threshold)
            .collect();
        let dropped = keep.iter().filter(|k| !**k).count();
        if dropped == 0 {
            return 0;
        }
        let mut k = keep.iter();
        self.run_lengths.retain(|_| *k.next().unwrap());
        let mut k = keep.iter();
        self.log_weights.retain(|_| *k.next().unwrap());
        let mut k = keep.iter();
        self.states.retain(|_| *k.next().unwrap());
        let z = log_sum_exp(&self.log_weights);
        for lw in &mut self.log_weights {
            *lw -= z;
        }
        dropped
    }
}

/// Posterior at time zero for the given configuration.
pub fn init(config: &BocpdConfig) -> Result<RunLengthPosterior> {
    config.validate()?;
    Ok(RunLengthPosterior::new(config.initial_state()?))
}

/// One step of the recursion under `config`.
pub fn step(
    posterior: &RunLengthPosterior,
    x: &FeatureVector,
    config: &BocpdConfig,
) -> Result<(RunLengthPosterior, StepDiagnostics)> {
    let fresh = config.initial_state()?;
    posterior.step_with(x, &config.hazard, config.pruning(), &fresh)
}

/// Stateful wrapper that owns one stream's posterior.
#[derive(Clone, Debug)]
pub struct Bocpd {
    config: BocpdConfig,
    fresh: MixtureState,
    posterior: RunLengthPosterior,
}

impl Bocpd {
    pub fn new(config: BocpdConfig) -> Result<Self> {
        let posterior = init(&config)?;
        let fresh = config.initial_state()?;
        Ok(Self {
            config,
            fresh,
            posterior,
        })
    }

    pub fn config(&self) -> &BocpdConfig {
        &self.config
    }

    pub fn posterior(&self) -> &RunLengthPosterior {
        &self.posterior
    }

    pub fn step(&mut self, x: &FeatureVector) -> Result<StepDiagnostics> {
        let (next, diag) = self
            .posterior
            .step_with(x, &self.config.hazard, self.config.pruning(), &self.fresh)?;
        self.posterior = next;
        Ok(diag)
    }
}

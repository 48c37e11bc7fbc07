// SPDX-License-Identifier: MIT OR Apache-2.0

//! Run configuration: one JSON document describing a whole run.
//!
//! Precedence is command-line flags, then the config file, then built-in
//! defaults. Every field of the file is optional.

use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use riskcpd::baselines::{BaselineKind, DEFAULT_LOF_K};
use riskcpd::metrics::DEFAULT_RELIABILITY_BINS;
use riskcpd::stream::{StreamSource, StreamSpec, SyntheticConfig};
use riskcpd::tuner::{Objective, TuningGrid};
use riskcpd::{DecisionPolicy, DetectorSettings, ErrorBudget};
use serde::{Deserialize, Serialize};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BaselineSelection {
    pub methods: Vec<BaselineKind>,
    pub lof_k: usize,
}

impl Default for BaselineSelection {
    fn default() -> Self {
        Self {
            methods: BaselineKind::ALL.to_vec(),
            lof_k: DEFAULT_LOF_K,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub stream: StreamSpec,
    pub detector: DetectorSettings,
    pub policy: DecisionPolicy,
    pub budget: ErrorBudget,
    pub baselines: BaselineSelection,
    pub tuning: TuningGrid,
    pub reliability_bins: usize,
    pub out: PathBuf,
    /// Overrides the synthetic generator's seed when set.
    pub seed: Option<u64>,
}

pub fn default_tuning_grid() -> TuningGrid {
    TuningGrid {
        hazard_values: vec![0.001, 0.004, 0.01],
        scale_inflation_values: vec![3.0, 10.0, 30.0],
        mixing_weights: None,
        objective: Objective::LogEvidence,
    }
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            stream: StreamSpec::synthetic(SyntheticConfig::default()),
            detector: DetectorSettings::default(),
            policy: DecisionPolicy::default(),
            budget: ErrorBudget::default(),
            baselines: BaselineSelection::default(),
            tuning: default_tuning_grid(),
            reliability_bins: DEFAULT_RELIABILITY_BINS,
            out: PathBuf::from("out"),
            seed: None,
        }
    }
}

impl RunConfig {
    pub fn load(path: Option<&Path>) -> Result<Self> {
        let Some(path) = path else {
            return Ok(Self::default());
        };
        let text = std::fs::read_to_string(path).with_context(|| format!("reading config {}", path.display()))?;
        serde_json::from_str(&text).with_context(|| format!("parsing config {}", path.display()))
    }

    /// Applies the common flags on top of the file values.
    pub fn with_overrides(mut self, out: Option<PathBuf>, seed: Option<u64>) -> Self {
        if let Some(out) = out {
            self.out = out;
        }
        if seed.is_some() {
            self.seed = seed;
        }
        if let (Some(seed), StreamSource::Synthetic(cfg)) = (self.seed, &mut self.stream.source) {
            cfg.seed = seed;
        }
        self
    }

    pub fn validate(&self) -> Result<()> {
        self.detector.validate()?;
        self.tuning.validate()?;
        if let StreamSource::Synthetic(cfg) = &self.stream.source {
            cfg.validate()?;
        }
        anyhow::ensure!(self.reliability_bins > 0, "reliability_bins must be positive");
        anyhow::ensure!(self.baselines.lof_k > 0, "baselines.lof_k must be positive");
        Ok(())
    }
}

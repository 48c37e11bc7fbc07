// SPDX-License-Identifier: MIT OR Apache-2.0

//! Risk-calibrated streaming anomaly detection.
//!
//! Bayesian online changepoint detection tracks a posterior over run lengths;
//! each run carries a benign/malicious mixture of conjugate Gaussian models.
//! The run-length-marginalized malicious responsibility is thresholded at a
//! cost-derived cutoff, and alert budgets follow from an SLO error budget.

pub mod baselines;
pub mod bocpd;
pub mod detector;
pub mod error;
pub mod math;
pub mod metrics;
pub mod mixture;
pub mod model;
pub mod pipeline;
pub mod risk;
pub mod stream;
pub mod tuner;

pub use bocpd::{init, step, Bocpd, BocpdConfig, RunLengthPosterior, StepDiagnostics};
pub use detector::{run_detector, DetectionRun, DetectorSettings};
pub use error::{Error, Result};
pub use mixture::{Assignment, MixtureState};
pub use model::{ConjugateModel, FeatureVector, HazardFunction, NigParams};
pub use risk::{budget_capacity, decide, derive_threshold, BudgetCapacity, DecisionPolicy, ErrorBudget};
pub use stream::{Event, ScoredEvent};

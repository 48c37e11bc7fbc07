// SPDX-License-Identifier: MIT OR Apache-2.0

//! End-to-end runs over a chronologically split stream: standardize on the
//! training window, fit the detector and baselines there, score the test
//! window.

use std::collections::BTreeMap;

use rayon::prelude::*;

use crate::baselines::{score_stream, BaselineKind, FittedBaseline};
use crate::bocpd::BocpdConfig;
use crate::detector::{run_detector, DetectionRun, DetectorSettings, FittedPriors};
use crate::error::{Error, Result};
use crate::metrics::LabeledScores;
use crate::model::FeatureVector;
use crate::risk::DecisionPolicy;
use crate::stream::{load_stream, standardize, Event, Segments, Standardizer, StreamSpec};

/// Key under which the detector's scores are reported.
pub const DETECTOR_NAME: &str = "bocpd";

#[derive(Clone, Debug)]
pub struct Prepared {
    pub standardizer: Standardizer,
    pub segments: Segments,
}

/// Loads, splits and standardizes a stream (statistics from training only).
pub fn prepare(spec: &StreamSpec) -> Result<Prepared> {
    let raw = load_stream(spec)?;
    if raw.train.is_empty() || raw.test.is_empty() {
        return Err(Error::invalid(format!(
            "stream too short for the split: {} train, {} test events",
            raw.train.len(),
            raw.test.len()
        )));
    }
    let (standardizer, segments) = standardize(&raw)?;
    Ok(Prepared { standardizer, segments })
}

pub fn benign_features(events: &[Event]) -> Vec<FeatureVector> {
    events
        .iter()
        .filter(|e| e.label == 0)
        .map(|e| e.features.clone())
        .collect()
}

#[derive(Clone, Debug)]
pub struct Detection {
    pub config: BocpdConfig,
    pub priors: FittedPriors,
    pub run: DetectionRun,
}

/// Fits on the training window and runs over the test window.
pub fn detect(settings: &DetectorSettings, policy: &DecisionPolicy, segments: &Segments) -> Result<Detection> {
    let (config, priors) = settings.build(&segments.train, policy)?;
    let run = run_detector(&config, policy, &segments.test)?;
    Ok(Detection { config, priors, run })
}

/// Baseline scores on the test window, fitted on benign training events.
pub fn baseline_scores(kind: BaselineKind, lof_k: usize, segments: &Segments) -> Result<Vec<f64>> {
    let benign = benign_features(&segments.train);
    let model = FittedBaseline::fit(kind, &benign, lof_k)?;
    let test: Vec<FeatureVector> = segments.test.iter().map(|e| e.features.clone()).collect();
    score_stream(&model, &test)
}

#[derive(Clone, Debug)]
pub struct Comparison {
    pub detection: Detection,
    /// Test-window scores keyed by method name, detector included.
    pub scores: BTreeMap<String, LabeledScores>,
}

/// Detector and baselines over the same test window; the baselines run in
/// parallel with the (sequential) detector pass.
pub fn compare(
    settings: &DetectorSettings,
    policy: &DecisionPolicy,
    baselines: &[BaselineKind],
    lof_k: usize,
    segments: &Segments,
) -> Result<Comparison> {
    let labels: Vec<u8> = segments.test.iter().map(|e| e.label).collect();
    let (detection, others) = rayon::join(
        || detect(settings, policy, segments),
        || {
            baselines
                .par_iter()
                .map(|&kind| {
                    let s = baseline_scores(kind, lof_k, segments)?;
                    Ok((kind.name().to_string(), LabeledScores::new(s, labels.clone())?))
                })
                .collect::<Result<Vec<_>>>()
        },
    );
    let detection = detection?;
    let mut scores: BTreeMap<String, LabeledScores> = others?.into_iter().collect();
    scores.insert(
        DETECTOR_NAME.to_string(),
        LabeledScores::from_scored(&detection.run.scored)?,
    );
    Ok(Comparison { detection, scores })
}

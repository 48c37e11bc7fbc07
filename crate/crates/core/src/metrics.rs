// SPDX-License-Identifier: MIT OR Apache-2.0

//! Evaluation under class imbalance: precision-recall and ROC curves,
//! reliability diagrams, and score timelines.

use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::risk::DecisionPolicy;
use crate::stream::ScoredEvent;

pub const DEFAULT_RELIABILITY_BINS: usize = 10;

/// Scores (higher is more anomalous) with parallel 0/1 labels.
#[derive(Clone, Debug, PartialEq)]
pub struct LabeledScores {
    scores: Vec<f64>,
    labels: Vec<u8>,
}

impl LabeledScores {
    pub fn new(scores: Vec<f64>, labels: Vec<u8>) -> Result<Self> {
        if scores.len() != labels.len() {
            return Err(Error::invalid(format!(
                "{} scores but {} labels",
                scores.len(),
                labels.len()
            )));
        }
        if scores.is_empty() {
            return Err(Error::Empty("no scores to evaluate".into()));
        }
        if let Some(i) = scores.iter().position(|s| s.is_nan()) {
            return Err(Error::invalid(format!("score at index {i} is NaN")));
        }
        if let Some(i) = labels.iter().position(|&l| l > 1) {
            return Err(Error::invalid(format!("label at index {i} is not 0 or 1")));
        }
        Ok(Self { scores, labels })
    }

    pub fn from_scored(events: &[ScoredEvent]) -> Result<Self> {
        Self::new(
            events.iter().map(|e| e.score).collect(),
            events.iter().map(|e| e.label).collect(),
        )
    }

    pub fn scores(&self) -> &[f64] {
        &self.scores
    }

    pub fn labels(&self) -> &[u8] {
        &self.labels
    }

    pub fn len(&self) -> usize {
        self.scores.len()
    }

    pub fn is_empty(&self) -> bool {
        self.scores.is_empty()
    }

    pub fn positives(&self) -> usize {
        self.labels.iter().filter(|&&l| l == 1).count()
    }

    pub fn negatives(&self) -> usize {
        self.len() - self.positives()
    }

    /// Cumulative (true positives, false positives) after each distinct
    /// threshold, scanning scores from high to low.
    fn cumulative_counts(&self) -> Vec<(f64, usize, usize)> {
        let mut order: Vec<usize> = (0..self.len()).collect();
        order.sort_by(|&a, &b| self.scores[b].total_cmp(&self.scores[a]));
        let mut out: Vec<(f64, usize, usize)> = Vec::new();
        let (mut tp, mut fp) = (0, 0);
        for (pos, &i) in order.iter().enumerate() {
            if self.labels[i] == 1 {
                tp += 1;
            } else {
                fp += 1;
            }
            let last_of_group = order.get(pos + 1).is_none_or(|&j| self.scores[j] != self.scores[i]);
            if last_of_group {
                out.push((self.scores[i], tp, fp));
            }
        }
        out
    }
}

/// One point of a curve; `threshold` is the lowest score counted positive.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct CurvePoint {
    pub x: f64,
    pub y: f64,
    pub threshold: f64,
}

/// Curve points ordered by descending threshold, with the area under it.
#[derive(Clone, Debug, PartialEq)]
pub struct Curve {
    pub points: Vec<CurvePoint>,
    pub area: f64,
}

/// Precision (y) against recall (x). The first point is
/// `(0, 1)` at threshold `+inf`. The area is average precision,
/// `sum (R_i - R_{i-1}) P_i`, without interpolation.
pub fn pr_curve(data: &LabeledScores) -> Result<Curve> {
    let positives = data.positives();
    if positives == 0 {
        return Err(Error::Undefined("precision-recall needs at least one positive".into()));
    }
    let p = positives as f64;
    let mut points = vec![CurvePoint {
        x: 0.0,
        y: 1.0,
        threshold: f64::INFINITY,
    }];
    let mut area = 0.0;
    let mut prev_recall = 0.0;
    for (threshold, tp, fp) in data.cumulative_counts() {
        let recall = tp as f64 / p;
        let precision = tp as f64 / (tp + fp) as f64;
        area += (recall - prev_recall) * precision;
        prev_recall = recall;
        points.push(CurvePoint {
            x: recall,
            y: precision,
            threshold,
        });
    }
    Ok(Curve {
        points,
        area: area.clamp(0.0, 1.0),
    })
}

/// True positive rate (y) against false positive rate (x), from `(0, 0)`
/// to `(1, 1)`, with the trapezoidal area.
pub fn roc_curve(data: &LabeledScores) -> Result<Curve> {
    let (positives, negatives) = (data.positives(), data.negatives());
    if positives == 0 || negatives == 0 {
        return Err(Error::Undefined("ROC needs both classes".into()));
    }
    let (p, n) = (positives as f64, negatives as f64);
    let mut points = vec![CurvePoint {
        x: 0.0,
        y: 0.0,
        threshold: f64::INFINITY,
    }];
    let mut area = 0.0;
    for (threshold, tp, fp) in data.cumulative_counts() {
        let prev = points[points.len() - 1];
        let (x, y) = (fp as f64 / n, tp as f64 / p);
        area += (x - prev.x) * (y + prev.y) / 2.0;
        points.push(CurvePoint { x, y, threshold });
    }
    Ok(Curve {
        points,
        area: area.clamp(0.0, 1.0),
    })
}

/// One equal-width bin `(low, high]`; the first bin also holds 0.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ReliabilityBin {
    pub low: f64,
    pub high: f64,
    /// `None` for an empty bin.
    pub mean_predicted: Option<f64>,
    pub empirical_frequency: Option<f64>,
    pub count: usize,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Reliability {
    pub bins: Vec<ReliabilityBin>,
    pub ece: f64,
}

fn bin_edge(b: usize, bins: usize) -> f64 {
    b as f64 / bins as f64
}

fn bin_index(p: f64, bins: usize) -> usize {
    // Smallest b with p <= (b + 1) / bins, comparing against the same edge
    // values that are reported so boundary cases land consistently.
    let mut b = ((p * bins as f64).floor() as usize).min(bins - 1);
    while b > 0 && p <= bin_edge(b, bins) {
        b -= 1;
    }
    while b + 1 < bins && p > bin_edge(b + 1, bins) {
        b += 1;
    }
    b
}

/// Reliability diagram and expected calibration error over `bins`
/// equal-width bins; empty bins do not contribute.
pub fn reliability(data: &LabeledScores, bins: usize) -> Result<Reliability> {
    if bins == 0 {
        return Err(Error::invalid("reliability needs at least one bin"));
    }
    if let Some(i) = data.scores.iter().position(|s| !(0.0..=1.0).contains(s)) {
        return Err(Error::invalid(format!(
            "probability {} at index {i} is outside [0, 1]",
            data.scores[i]
        )));
    }
    let mut sum_pred = vec![0.0; bins];
    let mut sum_label = vec![0.0; bins];
    let mut count = vec![0usize; bins];
    for (&p, &y) in data.scores.iter().zip(&data.labels) {
        let b = bin_index(p, bins);
        sum_pred[b] += p;
        sum_label[b] += f64::from(y);
        count[b] += 1;
    }
    let n = data.len() as f64;
    let mut ece = 0.0;
    let bins = (0..bins)
        .map(|b| {
            let (mean_predicted, empirical_frequency) = if count[b] > 0 {
                let c = count[b] as f64;
                let (mp, ef) = (sum_pred[b] / c, sum_label[b] / c);
                ece += c / n * (mp - ef).abs();
                (Some(mp), Some(ef))
            } else {
                (None, None)
            };
            ReliabilityBin {
                low: bin_edge(b, bins),
                high: bin_edge(b + 1, bins),
                mean_predicted,
                empirical_frequency,
                count: count[b],
            }
        })
        .collect();
    Ok(Reliability { bins, ece })
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct TimelineRecord {
    pub t: u64,
    pub score: f64,
    pub threshold: f64,
    pub label: u8,
    pub alert: bool,
}

/// One record per event with the policy threshold and its decision.
pub fn timeline_export(events: &[ScoredEvent], policy: &DecisionPolicy) -> Result<Vec<TimelineRecord>> {
    for (i, pair) in events.windows(2).enumerate() {
        if pair[1].t <= pair[0].t {
            return Err(Error::OutOfOrder {
                index: i + 1,
                t: pair[1].t,
                previous: pair[0].t,
            });
        }
    }
    Ok(events
        .iter()
        .map(|e| TimelineRecord {
            t: e.t,
            score: e.score,
            threshold: policy.threshold(),
            label: e.label,
            alert: policy.decide(e.score),
        })
        .collect())
}

/// `{auprc, auc, ece, n, positives}`; `ece` is present only for probabilistic scores.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct EvaluationSummary {
    pub auprc: f64,
    pub auc: f64,
    pub ece: Option<f64>,
    pub n: usize,
    pub positives: usize,
}

/// All curves for one method.
#[derive(Clone, Debug, PartialEq)]
pub struct Evaluation {
    pub pr: Curve,
    pub roc: Curve,
    pub reliability: Option<Reliability>,
}

impl Evaluation {
    /// `bins` requests a reliability diagram and is only meaningful for
    /// probabilities.
    pub fn compute(data: &LabeledScores, bins: Option<usize>) -> Result<Self> {
        Ok(Self {
            pr: pr_curve(data)?,
            roc: roc_curve(data)?,
            reliability: bins.map(|b| reliability(data, b)).transpose()?,
        })
    }

    pub fn summary(&self, data: &LabeledScores) -> EvaluationSummary {
        EvaluationSummary {
            auprc: self.pr.area,
            auc: self.roc.area,
            ece: self.reliability.as_ref().map(|r| r.ece),
            n: data.len(),
            positives: data.positives(),
        }
    }
}

pub fn write_curve_csv<W: Write>(writer: W, curve: &Curve) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(["threshold", "x", "y"])?;
    for p in &curve.points {
        w.write_record([p.threshold.to_string(), p.x.to_string(), p.y.to_string()])?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_timeline_csv<W: Write>(writer: W, records: &[TimelineRecord]) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(["t", "score", "threshold", "label", "alert"])?;
    for r in records {
        w.write_record([
            r.t.to_string(),
            r.score.to_string(),
            r.threshold.to_string(),
            r.label.to_string(),
            r.alert.to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

/// Empty bins are written with blank mean and frequency cells.
pub fn write_reliability_csv<W: Write>(writer: W, reliability: &Reliability) -> Result<()> {
    let opt = |v: Option<f64>| v.map(|x| x.to_string()).unwrap_or_default();
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(["bin_low", "bin_high", "mean_pred", "emp_freq", "count"])?;
    for b in &reliability.bins {
        w.write_record([
            b.low.to_string(),
            b.high.to_string(),
            opt(b.mean_predicted),
            opt(b.empirical_frequency),
            b.count.to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

// SPDX-License-Identifier: MIT OR Apache-2.0

//! ECDF tail scores shared by ECOD and COPOD.
//!
//! Per dimension, the left tail probability of `v` is
//! `(#{train <= v} + 1) / (n + 1)` and the right tail probability is
//! `(#{train >= v} + 1) / (n + 1)`; the `+1` counts the query itself and keeps
//! every logarithm finite. Dimensions are treated independently, so the
//! empirical-copula view used by COPOD yields the same tail values as ECOD's
//! direct ECDF view.

use serde::{Deserialize, Serialize};

/// Summed negative-log tail probabilities for one query.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct TailScores {
    pub left: f64,
    pub right: f64,
    /// Per dimension, the left tail when the training skewness is negative
    /// and the right tail otherwise.
    pub skew_corrected: f64,
}

impl TailScores {
    pub fn ecod(&self) -> f64 {
        self.left.max(self.right).max(self.skew_corrected)
    }
}

#[derive(Clone, Debug)]
pub(super) struct EcdfModel {
    sorted: Vec<Vec<f64>>,
    negative_skew: Vec<bool>,
}

fn skewness(values: &[f64]) -> f64 {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let m2 = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n;
    let m3 = values.iter().map(|v| (v - mean).powi(3)).sum::<f64>() / n;
    if m2 <= 0.0 {
        0.0
    } else {
        m3 / m2.powf(1.5)
    }
}

impl EcdfModel {
    pub(super) fn fit(rows: &[Vec<f64>], dimension: usize) -> Self {
        let mut sorted = Vec::with_capacity(dimension);
        let mut negative_skew = Vec::with_capacity(dimension);
        for j in 0..dimension {
            let mut col: Vec<f64> = rows.iter().map(|r| r[j]).collect();
            negative_skew.push(skewness(&col) < 0.0);
            col.sort_by(f64::total_cmp);
            sorted.push(col);
        }
        Self { sorted, negative_skew }
    }

    fn n(&self) -> f64 {
        self.sorted[0].len() as f64
    }

    /// `(-log left tail, -log right tail)` for one dimension.
    fn dimension_tails(&self, j: usize, v: f64) -> (f64, f64) {
        let col = &self.sorted[j];
        let at_most = col.partition_point(|&a| a <= v) as f64;
        let at_least = (col.len() - col.partition_point(|&a| a < v)) as f64;
        let denom = self.n() + 1.0;
        (-((at_most + 1.0) / denom).ln(), -((at_least + 1.0) / denom).ln())
    }

    fn combine(&self, tails: impl Iterator<Item = (f64, f64)>) -> TailScores {
        let mut out = TailScores {
            left: 0.0,
            right: 0.0,
            skew_corrected: 0.0,
        };
        for (j, (l, r)) in tails.enumerate() {
            out.left += l;
            out.right += r;
            out.skew_corrected += if self.negative_skew[j] { l } else { r };
        }
        out
    }

    pub(super) fn tail_scores(&self, x: &[f64]) -> TailScores {
        self.combine(x.iter().enumerate().map(|(j, &v)| self.dimension_tails(j, v)))
    }

    /// Tail scores through copula pseudo-observations: `u = F(x)` for the
    /// left tail and `w = F(-x)` of the reflected sample for the right tail.
    pub(super) fn copula_tail_scores(&self, x: &[f64]) -> TailScores {
        let denom = self.n() + 1.0;
        self.combine(x.iter().enumerate().map(|(j, &v)| {
            let col = &self.sorted[j];
            let u = (col.partition_point(|&a| a <= v) as f64 + 1.0) / denom;
            // #{-a <= -v} == #{a >= v}
            let w = ((col.len() - col.partition_point(|&a| a < v)) as f64 + 1.0) / denom;
            (-u.ln(), -w.ln())
        }))
    }
}

// SPDX-License-Identifier: MIT OR Apache-2.0

//! Static unsupervised baselines fitted on benign training data.
//!
//! All scores follow the "higher is more anomalous" convention.

mod ecdf;
mod lof;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::FeatureVector;

pub use ecdf::TailScores;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BaselineKind {
    Lof,
    Ecod,
    Copod,
}

impl BaselineKind {
    pub const ALL: [BaselineKind; 3] = [BaselineKind::Lof, BaselineKind::Ecod, BaselineKind::Copod];

    pub fn name(self) -> &'static str {
        match self {
            Self::Lof => "lof",
            Self::Ecod => "ecod",
            Self::Copod => "copod",
        }
    }
}

impl std::fmt::Display for BaselineKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

impl std::str::FromStr for BaselineKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "lof" => Ok(Self::Lof),
            "ecod" => Ok(Self::Ecod),
            "copod" => Ok(Self::Copod),
            other => Err(Error::invalid(format!("unknown baseline `{other}`"))),
        }
    }
}

pub const DEFAULT_LOF_K: usize = 20;

#[derive(Clone, Debug)]
enum Model {
    Lof(lof::LofModel),
    Ecdf(ecdf::EcdfModel),
}

/// A baseline fitted once and then applied without updates.
#[derive(Clone, Debug)]
pub struct FittedBaseline {
    kind: BaselineKind,
    training: Vec<Vec<f64>>,
    dimension: usize,
    model: Model,
}

impl FittedBaseline {
    /// `k` is only used by LOF and must satisfy `1 <= k < n`.
    pub fn fit(kind: BaselineKind, training: &[FeatureVector], k: usize) -> Result<Self> {
        let first = training
            .first()
            .ok_or_else(|| Error::Empty(format!("{kind} needs training data")))?;
        let dimension = first.dimension();
        if let Some(bad) = training.iter().find(|x| x.dimension() != dimension) {
            return Err(Error::DimensionMismatch {
                expected: dimension,
                found: bad.dimension(),
            });
        }
        let rows: Vec<Vec<f64>> = training.iter().map(|x| x.values().to_vec()).collect();
        let model = match kind {
            BaselineKind::Lof => Model::Lof(lof::LofModel::fit(&rows, k)?),
            BaselineKind::Ecod | BaselineKind::Copod => Model::Ecdf(ecdf::EcdfModel::fit(&rows, dimension)),
        };
        Ok(Self {
            kind,
            training: rows,
            dimension,
            model,
        })
    }

    /// LOF with `k = min(DEFAULT_LOF_K, n - 1)`.
    pub fn fit_default(kind: BaselineKind, training: &[FeatureVector]) -> Result<Self> {
        let k = DEFAULT_LOF_K.min(training.len().saturating_sub(1)).max(1);
        Self::fit(kind, training, k)
    }

    pub fn kind(&self) -> BaselineKind {
        self.kind
    }

    pub fn training(&self) -> &[Vec<f64>] {
        &self.training
    }

    pub fn dimension(&self) -> usize {
        self.dimension
    }

    /// Number of neighbours for LOF, `None` for the ECDF methods.
    pub fn k(&self) -> Option<usize> {
        match &self.model {
            Model::Lof(m) => Some(m.k()),
            Model::Ecdf(_) => None,
        }
    }

    fn check(&self, x: &FeatureVector) -> Result<()> {
        if x.dimension() != self.dimension {
            return Err(Error::DimensionMismatch {
                expected: self.dimension,
                found: x.dimension(),
            });
        }
        Ok(())
    }

    pub fn score(&self, x: &FeatureVector) -> Result<f64> {
        self.check(x)?;
        match (&self.model, self.kind) {
            (Model::Lof(m), _) => Ok(m.score(&self.training, x.values())),
            (Model::Ecdf(m), BaselineKind::Ecod) => Ok(m.tail_scores(x.values()).ecod()),
            (Model::Ecdf(m), _) => Ok(m.copula_tail_scores(x.values()).ecod()),
        }
    }

    /// Left, right and skew-selected tail sums for the ECDF methods.
    pub fn tail_scores(&self, x: &FeatureVector) -> Result<TailScores> {
        self.check(x)?;
        match &self.model {
            Model::Ecdf(m) => Ok(m.tail_scores(x.values())),
            Model::Lof(_) => Err(Error::invalid("tail scores are only defined for ECOD/COPOD")),
        }
    }
}

fn require(fitted: &FittedBaseline, kind: BaselineKind) -> Result<()> {
    if fitted.kind != kind {
        return Err(Error::invalid(format!("expected a {kind} model, got {}", fitted.kind)));
    }
    Ok(())
}

pub fn lof_score(fitted: &FittedBaseline, x: &FeatureVector) -> Result<f64> {
    require(fitted, BaselineKind::Lof)?;
    fitted.score(x)
}

pub fn ecod_score(fitted: &FittedBaseline, x: &FeatureVector) -> Result<f64> {
    require(fitted, BaselineKind::Ecod)?;
    fitted.score(x)
}

pub fn copod_score(fitted: &FittedBaseline, x: &FeatureVector) -> Result<f64> {
    require(fitted, BaselineKind::Copod)?;
    fitted.score(x)
}

/// Scores every point independently; the fitted model is never mutated.
pub fn score_stream(fitted: &FittedBaseline, stream: &[FeatureVector]) -> Result<Vec<f64>> {
    use rayon::prelude::*;
    stream
        .par_iter()
        .enumerate()
        .map(|(i, x)| fitted.score(x).map_err(|e| e.at_index(i)))
        .collect()
}

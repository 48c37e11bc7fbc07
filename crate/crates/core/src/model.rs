// SPDX-License-Identifier: MIT OR Apache-2.0

//! Conjugate observation models and the hazard function.
//!
//! Each feature dimension carries an independent Normal–Inverse-Gamma
//! posterior, so the predictive density of a feature vector is a product of
//! Student-t densities (a sum in log space).

use serde::{Deserialize, Serialize};
use statrs::function::gamma::ln_gamma;
use std::f64::consts::PI;

use crate::error::{Error, Result};

/// A finite, non-empty vector of (standardized) features.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<f64>", into = "Vec<f64>")]
pub struct FeatureVector(Vec<f64>);

impl FeatureVector {
    pub fn new(values: Vec<f64>) -> Result<Self> {
        if values.is_empty() {
            return Err(Error::Empty("feature vector has no dimensions".into()));
        }
        if let Some((index, &value)) = values.iter().enumerate().find(|(_, v)| !v.is_finite()) {
            return Err(Error::NonFinite { index, value });
        }
        Ok(Self(values))
    }

    pub fn dimension(&self) -> usize {
        self.0.len()
    }

    pub fn values(&self) -> &[f64] {
        &self.0
    }

    pub fn into_inner(self) -> Vec<f64> {
        self.0
    }
}

impl TryFrom<Vec<f64>> for FeatureVector {
    type Error = Error;

    fn try_from(values: Vec<f64>) -> Result<Self> {
        Self::new(values)
    }
}

impl From<FeatureVector> for Vec<f64> {
    fn from(v: FeatureVector) -> Self {
        v.0
    }
}

/// Normal–Inverse-Gamma parameters for one feature dimension.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct NigParams {
    pub mu0: f64,
    pub kappa0: f64,
    pub alpha0: f64,
    pub beta0: f64,
}

impl NigParams {
    pub fn new(mu0: f64, kappa0: f64, alpha0: f64, beta0: f64) -> Result<Self> {
        let p = Self {
            mu0,
            kappa0,
            alpha0,
            beta0,
        };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        if !self.mu0.is_finite() {
            return Err(Error::invalid(format!("mu0 must be finite; got {}", self.mu0)));
        }
        for (name, v) in [("kappa0", self.kappa0), ("alpha0", self.alpha0), ("beta0", self.beta0)] {
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::invalid(format!("{name} must be finite and > 0; got {v}")));
            }
        }
        Ok(())
    }

    /// Conjugate update treating `x` as observed with weight `w` (a power
    /// likelihood). `w = 1` is the ordinary update; `w = 0` is the identity.
    pub fn updated_weighted(&self, x: f64, w: f64) -> Self {
        if w == 0.0 {
            return *self;
        }
        let kappa = self.kappa0 + w;
        let dev = x - self.mu0;
        Self {
            mu0: (self.kappa0 * self.mu0 + w * x) / kappa,
            kappa0: kappa,
            alpha0: self.alpha0 + 0.5 * w,
            beta0: self.beta0 + self.kappa0 * w * dev * dev / (2.0 * kappa),
        }
    }

    pub fn predictive_df(&self) -> f64 {
        2.0 * self.alpha0
    }

    pub fn predictive_scale(&self) -> f64 {
        (self.beta0 * (self.kappa0 + 1.0) / (self.alpha0 * self.kappa0)).sqrt()
    }

    pub fn predictive_logpdf(&self, x: f64) -> f64 {
        student_t_logpdf(x, self.predictive_df(), self.mu0, self.predictive_scale())
    }
}

impl Default for NigParams {
    fn default() -> Self {
        Self {
            mu0: 0.0,
            kappa0: 1.0,
            alpha0: 1.0,
            beta0: 1.0,
        }
    }
}

/// Log density of a location-scale Student-t distribution.
pub fn student_t_logpdf(x: f64, df: f64, loc: f64, scale: f64) -> f64 {
    let z = (x - loc) / scale;
    ln_gamma(0.5 * (df + 1.0))
        - ln_gamma(0.5 * df)
        - 0.5 * (df * PI).ln()
        - scale.ln()
        - 0.5 * (df + 1.0) * (z * z / df).ln_1p()
}

/// Diagonal Normal–Inverse-Gamma posterior over a feature vector.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ConjugateModel {
    params: Vec<NigParams>,
    observation_count: u64,
}

impl ConjugateModel {
    pub fn new(params: Vec<NigParams>) -> Result<Self> {
        if params.is_empty() {
            return Err(Error::Empty("conjugate model needs at least one dimension".into()));
        }
        for p in &params {
            p.validate()?;
        }
        Ok(Self {
            params,
            observation_count: 0,
        })
    }

    /// The same prior repeated over `dimension` features.
    pub fn isotropic(prior: NigParams, dimension: usize) -> Result<Self> {
        Self::new(vec![prior; dimension])
    }

    pub fn dimension(&self) -> usize {
        self.params.len()
    }

    pub fn params(&self) -> &[NigParams] {
        &self.params
    }

    /// Number of observations absorbed with non-zero weight.
    pub fn observation_count(&self) -> u64 {
        self.observation_count
    }

    fn check(&self, x: &FeatureVector) -> Result<()> {
        if x.dimension() != self.dimension() {
            return Err(Error::DimensionMismatch {
                expected: self.dimension(),
                found: x.dimension(),
            });
        }
        Ok(())
    }

    /// Full-weight posterior update with one observation.
    pub fn updated(&self, x: &FeatureVector) -> Result<Self> {
        self.updated_weighted(x, 1.0)
    }

    /// Posterior update with a fractional observation weight in `[0, 1]`.
    pub fn updated_weighted(&self, x: &FeatureVector, w: f64) -> Result<Self> {
        self.check(x)?;
        if !(w.is_finite() && (0.0..=1.0).contains(&w)) {
            return Err(Error::invalid(format!(
                "observation weight must lie in [0, 1]; got {w}"
            )));
        }
        if w == 0.0 {
            return Ok(self.clone());
        }
        let params = self
            .params
            .iter()
            .zip(x.values())
            .map(|(p, &v)| p.updated_weighted(v, w))
            .collect();
        Ok(Self {
            params,
            observation_count: self.observation_count + 1,
        })
    }

    /// Sum over dimensions of the Student-t posterior-predictive log density.
    pub fn predictive_logpdf(&self, x: &FeatureVector) -> Result<f64> {
        self.check(x)?;
        Ok(self
            .params
            .iter()
            .zip(x.values())
            .map(|(p, &v)| p.predictive_logpdf(v))
            .sum())
    }
}

/// Constant per-step changepoint probability.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "f64", into = "f64")]
pub struct HazardFunction {
    hazard: f64,
}

impl HazardFunction {
    pub fn new(hazard: f64) -> Result<Self> {
        if !(hazard.is_finite() && hazard > 0.0 && hazard < 1.0) {
            return Err(Error::invalid(format!("hazard must lie in (0, 1); got {hazard}")));
        }
        Ok(Self { hazard })
    }

    pub fn hazard(&self) -> f64 {
        self.hazard
    }

    /// Probability of a changepoint at the given run length.
    pub fn probability(&self, _run_length: usize) -> f64 {
        self.hazard
    }

    pub fn log_hazard(&self, run_length: usize) -> f64 {
        self.probability(run_length).ln()
    }

    pub fn log_survival(&self, run_length: usize) -> f64 {
        (-self.probability(run_length)).ln_1p()
    }

    /// Mean segment length implied by the hazard (geometric run lengths).
    pub fn expected_run_length(&self) -> f64 {
        1.0 / self.hazard
    }
}

impl TryFrom<f64> for HazardFunction {
    type Error = Error;

    fn try_from(h: f64) -> Result<Self> {
        Self::new(h)
    }
}

impl From<HazardFunction> for f64 {
    fn from(h: HazardFunction) -> Self {
        h.hazard
    }
}

// SPDX-License-Identifier: MIT OR Apache-2.0

//! Benign/malicious mixture held inside every run-length hypothesis.
//!
//! The predictive density of an observation under one hypothesis is
//! `pi * p_b(x) + (1 - pi) * p_m(x)`, where `pi` is the benign weight. The
//! malicious responsibility of `x` is the share of that density contributed by
//! the malicious component.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::math::{log_add_exp, log_sum_exp};
use crate::model::{ConjugateModel, FeatureVector};

/// How an observation's statistics are attributed to the two components.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Assignment {
    /// Fractional updates weighted by the responsibility.
    #[default]
    Soft,
    /// Responsibility rounded to 0 or 1 before updating.
    Hard,
}

/// Result of evaluating one observation under a run model.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Evaluation {
    /// Log predictive density of the observation.
    pub log_density: f64,
    /// Log of the malicious part of that density, `log((1 - pi) p_m(x))`.
    /// `-inf` for models without a malicious component.
    pub log_malicious: f64,
}

impl Evaluation {
    /// Posterior probability that the observation came from the malicious
    /// component.
    pub fn responsibility(&self) -> f64 {
        if self.log_malicious == f64::NEG_INFINITY {
            return 0.0;
        }
        (self.log_malicious - self.log_density).exp().clamp(0.0, 1.0)
    }
}

/// State attached to one run-length hypothesis: something that can score an
/// observation and absorb it.
pub trait RunModel: Clone + Send + Sync {
    fn dimension(&self) -> usize;

    fn evaluate(&self, x: &FeatureVector) -> Result<Evaluation>;

    /// Returns the state after absorbing `x`; `eval` is `self.evaluate(x)`.
    fn absorb(&self, x: &FeatureVector, eval: &Evaluation) -> Result<Self>;
}

impl RunModel for ConjugateModel {
    fn dimension(&self) -> usize {
        ConjugateModel::dimension(self)
    }

    fn evaluate(&self, x: &FeatureVector) -> Result<Evaluation> {
        Ok(Evaluation {
            log_density: self.predictive_logpdf(x)?,
            log_malicious: f64::NEG_INFINITY,
        })
    }

    fn absorb(&self, x: &FeatureVector, _eval: &Evaluation) -> Result<Self> {
        self.updated(x)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MixtureState {
    benign: ConjugateModel,
    malicious: ConjugateModel,
    mixing_weight: f64,
    #[serde(default)]
    assignment: Assignment,
}

impl MixtureState {
    pub fn new(benign: ConjugateModel, malicious: ConjugateModel, mixing_weight: f64) -> Result<Self> {
        if benign.dimension() != malicious.dimension() {
            return Err(Error::DimensionMismatch {
                expected: benign.dimension(),
                found: malicious.dimension(),
            });
        }
        validate_mixing_weight(mixing_weight)?;
        Ok(Self {
            benign,
            malicious,
            mixing_weight,
            assignment: Assignment::Soft,
        })
    }

    pub fn with_assignment(mut self, assignment: Assignment) -> Self {
        self.assignment = assignment;
        self
    }

    pub fn benign(&self) -> &ConjugateModel {
        &self.benign
    }

    pub fn malicious(&self) -> &ConjugateModel {
        &self.malicious
    }

    /// Benign component weight `pi`.
    pub fn mixing_weight(&self) -> f64 {
        self.mixing_weight
    }

    pub fn assignment(&self) -> Assignment {
        self.assignment
    }

    /// Component log densities `(log p_b(x), log p_m(x))`.
    pub fn component_logpdfs(&self, x: &FeatureVector) -> Result<(f64, f64)> {
        Ok((self.benign.predictive_logpdf(x)?, self.malicious.predictive_logpdf(x)?))
    }

    /// Malicious responsibility of `x` under this state.
    pub fn responsibility(&self, x: &FeatureVector) -> Result<f64> {
        Ok(self.evaluate(x)?.responsibility())
    }

    /// Responsibility-weighted update: the benign component absorbs `x` with
    /// weight `1 - gamma`, the malicious component with weight `gamma`.
    pub fn updated(&self, x: &FeatureVector) -> Result<Self> {
        let eval = self.evaluate(x)?;
        self.absorb(x, &eval)
    }

    /// Update with an externally supplied responsibility (before any hard
    /// rounding).
    pub fn updated_with_responsibility(&self, x: &FeatureVector, gamma: f64) -> Result<Self> {
        if !(0.0..=1.0).contains(&gamma) {
            return Err(Error::invalid(format!(
                "responsibility must lie in [0, 1]; got {gamma}"
            )));
        }
        let gamma = match self.assignment {
            Assignment::Soft => gamma,
            Assignment::Hard => {
                if gamma > 0.5 {
                    1.0
                } else {
                    0.0
                }
            }
        };
        Ok(Self {
            benign: self.benign.updated_weighted(x, 1.0 - gamma)?,
            malicious: self.malicious.updated_weighted(x, gamma)?,
            mixing_weight: self.mixing_weight,
            assignment: self.assignment,
        })
    }
}

impl RunModel for MixtureState {
    fn dimension(&self) -> usize {
        self.benign.dimension()
    }

    fn evaluate(&self, x: &FeatureVector) -> Result<Evaluation> {
        let (lb, lm) = self.component_logpdfs(x)?;
        let log_benign = self.mixing_weight.ln() + lb;
        let log_malicious = (-self.mixing_weight).ln_1p() + lm;
        let log_density = log_add_exp(log_benign, log_malicious);
        if !log_density.is_finite() {
            return Err(Error::Degenerate(format!(
                "both mixture components assign zero density (log p_b={lb}, log p_m={lm})"
            )));
        }
        Ok(Evaluation {
            log_density,
            log_malicious,
        })
    }

    fn absorb(&self, x: &FeatureVector, eval: &Evaluation) -> Result<Self> {
        self.updated_with_responsibility(x, eval.responsibility())
    }
}

pub(crate) fn validate_mixing_weight(pi: f64) -> Result<()> {
    if !(pi.is_finite() && pi > 0.0 && pi < 1.0) {
        return Err(Error::invalid(format!("mixing weight must lie in (0, 1); got {pi}")));
    }
    Ok(())
}

/// Run-length-marginalized malicious responsibility,
/// `sum_r w_r * gamma_r`, evaluated in log space.
///
/// Each item is `(log w_r, log p_b(x | r), log p_m(x | r))`; the weights must
/// already be normalized.
pub fn marginal_responsibility(terms: impl IntoIterator<Item = (f64, f64, f64)>, mixing_weight: f64) -> Result<f64> {
    validate_mixing_weight(mixing_weight)?;
    let (log_pi, log_one_minus_pi) = (mixing_weight.ln(), (-mixing_weight).ln_1p());
    let mut parts = Vec::new();
    for (lw, lb, lm) in terms {
        let num = log_one_minus_pi + lm;
        let den = log_add_exp(log_pi + lb, num);
        if den == f64::NEG_INFINITY {
            return Err(Error::Degenerate(
                "both component densities underflow for a run-length hypothesis".into(),
            ));
        }
        parts.push(lw + num - den);
    }
    Ok(log_sum_exp(&parts).exp().clamp(0.0, 1.0))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::NigParams;
    use proptest::prelude::*;

    fn fv(v: &[f64]) -> FeatureVector {
        FeatureVector::new(v.to_vec()).unwrap()
    }

    fn unit(d: usize) -> ConjugateModel {
        ConjugateModel::isotropic(NigParams::default(), d).unwrap()
    }

    /// Direct-probability version of `marginal_responsibility`.
    fn direct_marginal(terms: &[(f64, f64, f64)], pi: f64) -> f64 {
        terms
            .iter()
            .map(|&(w, pb, pm)| w * (1.0 - pi) * pm / (pi * pb + (1.0 - pi) * pm))
            .sum()
    }

    #[test]
    fn identical_components_give_prior_weight() {
        let s = MixtureState::new(unit(2), unit(2), 0.8).unwrap();
        for x in [[0.0, 0.0], [5.0, -3.0], [100.0, 2.0]] {
            let g = s.responsibility(&fv(&x)).unwrap();
            assert!((g - 0.2).abs() < 1e-15, "{g}");
        }
    }

    #[test]
    fn likelihood_ratio_three_to_one() {
        // pi = 0.5, p_b = 3 p_m  ->  0.5 p_m / (1.5 p_m + 0.5 p_m) = 1/4
        let lm = -2.0;
        let g = marginal_responsibility([(0.0, lm + 3f64.ln(), lm)], 0.5).unwrap();
        assert!((g - 0.25).abs() < 1e-15);
    }

    #[test]
    fn two_hypotheses_weighted_sum() {
        // pi = 0.5: gamma = pm / (pb + pm); pick pb/pm to give 0.1 and 0.9.
        let terms = [(0.6f64.ln(), 9f64.ln(), 0.0), (0.4f64.ln(), 0.0, 9f64.ln())];
        let g = marginal_responsibility(terms, 0.5).unwrap();
        assert!((g - 0.42).abs() < 1e-12);
        let direct: Vec<(f64, f64, f64)> = terms.iter().map(|&(w, b, m)| (w.exp(), b.exp(), m.exp())).collect();
        assert!((direct_marginal(&direct, 0.5) - 0.42).abs() < 1e-12);
    }

    #[test]
    fn degenerate_components_are_reported() {
        let r = marginal_responsibility([(0.0, f64::NEG_INFINITY, f64::NEG_INFINITY)], 0.5);
        assert!(matches!(r, Err(Error::Degenerate(_))));
    }

    #[test]
    fn zero_responsibility_leaves_malicious_untouched() {
        let s = MixtureState::new(unit(1), unit(1), 0.9).unwrap();
        let u = s.updated_with_responsibility(&fv(&[2.0]), 0.0).unwrap();
        assert_eq!(u.malicious(), s.malicious());
        assert_eq!(u.benign(), &s.benign().updated(&fv(&[2.0])).unwrap());
    }

    #[test]
    fn unit_responsibility_leaves_benign_untouched() {
        let s = MixtureState::new(unit(1), unit(1), 0.9).unwrap();
        let u = s.updated_with_responsibility(&fv(&[2.0]), 1.0).unwrap();
        assert_eq!(u.benign(), s.benign());
        assert_eq!(u.malicious(), &s.malicious().updated(&fv(&[2.0])).unwrap());
    }

    #[test]
    fn half_responsibility_splits_the_observation() {
        let s = MixtureState::new(unit(1), unit(1), 0.5).unwrap();
        let u = s.updated_with_responsibility(&fv(&[2.0]), 0.5).unwrap();
        for p in [u.benign().params()[0], u.malicious().params()[0]] {
            assert!((p.kappa0 - 1.5).abs() < 1e-15);
            assert!((p.mu0 - 2.0 / 3.0).abs() < 1e-15);
            assert!((p.alpha0 - 1.25).abs() < 1e-15);
            assert!((p.beta0 - 5.0 / 3.0).abs() < 1e-15);
        }
    }

    #[test]
    fn hard_assignment_rounds() {
        let s = MixtureState::new(unit(1), unit(1), 0.5)
            .unwrap()
            .with_assignment(Assignment::Hard);
        let u = s.updated_with_responsibility(&fv(&[2.0]), 0.7).unwrap();
        assert_eq!(u.benign(), s.benign());
        assert_eq!(u.malicious().params()[0].kappa0, 2.0);
    }

    #[test]
    fn rejects_mismatched_components_and_bad_weight() {
        assert!(MixtureState::new(unit(1), unit(2), 0.5).is_err());
        assert!(MixtureState::new(unit(1), unit(1), 1.0).is_err());
        assert!(MixtureState::new(unit(1), unit(1), 0.0).is_err());
    }

    proptest! {
        #[test]
        fn log_and_direct_space_agree(
            terms in prop::collection::vec((0.01..1.0f64, -30.0..5.0f64, -30.0..5.0f64), 1..12),
            pi in 0.01..0.99f64,
        ) {
            let total: f64 = terms.iter().map(|t| t.0).sum();
            let log_terms: Vec<_> = terms.iter().map(|&(w, b, m)| ((w / total).ln(), b, m)).collect();
            let direct_terms: Vec<_> = terms.iter().map(|&(w, b, m)| (w / total, b.exp(), m.exp())).collect();
            let g = marginal_responsibility(log_terms, pi).unwrap();
            prop_assert!((0.0..=1.0).contains(&g));
            prop_assert!((g - direct_marginal(&direct_terms, pi)).abs() < 1e-10);
        }
    }
}

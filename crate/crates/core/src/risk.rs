// SPDX-License-Identifier: MIT OR Apache-2.0

//! Cost-sensitive alerting and error-budget arithmetic.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Bayes-optimal threshold on the posterior incident probability for
/// false-positive cost `cost_fp`, false-negative cost `cost_fn` and incident
/// base rate `base_rate`.
pub fn derive_threshold(cost_fp: f64, cost_fn: f64, base_rate: f64) -> Result<f64> {
    validate_cost("cost_fp", cost_fp)?;
    validate_cost("cost_fn", cost_fn)?;
    if !(base_rate.is_finite() && base_rate > 0.0 && base_rate < 1.0) {
        return Err(Error::invalid(format!("base_rate must lie in (0, 1); got {base_rate}")));
    }
    let fp_mass = cost_fp * (1.0 - base_rate);
    Ok(fp_mass / (fp_mass + cost_fn * base_rate))
}

fn validate_cost(name: &str, cost: f64) -> Result<()> {
    if !(cost.is_finite() && cost > 0.0) {
        return Err(Error::invalid(format!("{name} must be finite and > 0; got {cost}")));
    }
    Ok(())
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "PolicyInputs")]
pub struct DecisionPolicy {
    /// Minutes of analyst time per false alert.
    pub cost_fp: f64,
    /// Minutes of downtime per missed incident.
    pub cost_fn: f64,
    /// Prior incident probability.
    pub base_rate: f64,
    threshold: f64,
}

#[derive(Deserialize)]
struct PolicyInputs {
    cost_fp: f64,
    cost_fn: f64,
    base_rate: f64,
}

impl TryFrom<PolicyInputs> for DecisionPolicy {
    type Error = Error;

    fn try_from(p: PolicyInputs) -> Result<Self> {
        Self::new(p.cost_fp, p.cost_fn, p.base_rate)
    }
}

impl DecisionPolicy {
    pub fn new(cost_fp: f64, cost_fn: f64, base_rate: f64) -> Result<Self> {
        let threshold = derive_threshold(cost_fp, cost_fn, base_rate)?;
        Ok(Self {
            cost_fp,
            cost_fn,
            base_rate,
            threshold,
        })
    }

    pub fn threshold(&self) -> f64 {
        self.threshold
    }

    /// Alert iff `probability` strictly exceeds the threshold.
    pub fn decide(&self, probability: f64) -> bool {
        decide(probability, self)
    }
}

impl Default for DecisionPolicy {
    /// One analyst-minute per false alert, ten minutes of downtime per missed
    /// incident, one incident in a hundred events.
    fn default() -> Self {
        Self::new(1.0, 10.0, 0.01).expect("default policy is valid")
    }
}

pub fn decide(probability: f64, policy: &DecisionPolicy) -> bool {
    probability > policy.threshold
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "BudgetInputs")]
pub struct ErrorBudget {
    /// Availability objective in (0, 1].
    pub slo: f64,
    pub period_minutes: f64,
    budget_minutes: f64,
}

#[derive(Deserialize)]
struct BudgetInputs {
    slo: f64,
    period_minutes: f64,
}

impl TryFrom<BudgetInputs> for ErrorBudget {
    type Error = Error;

    fn try_from(b: BudgetInputs) -> Result<Self> {
        Self::new(b.slo, b.period_minutes)
    }
}

/// Thirty days.
pub const MONTH_MINUTES: f64 = 43_200.0;

impl ErrorBudget {
    pub fn new(slo: f64, period_minutes: f64) -> Result<Self> {
        if !(slo.is_finite() && slo > 0.0 && slo <= 1.0) {
            return Err(Error::invalid(format!("slo must lie in (0, 1]; got {slo}")));
        }
        if !(period_minutes.is_finite() && period_minutes > 0.0) {
            return Err(Error::invalid(format!(
                "period_minutes must be finite and > 0; got {period_minutes}"
            )));
        }
        // Snap to a 1e-9 minute grid so 0.999 over a month reads as 43.2, not
        // 43.20000000000004.
        let budget_minutes = ((1.0 - slo) * period_minutes * 1e9).round() / 1e9;
        Ok(Self {
            slo,
            period_minutes,
            budget_minutes,
        })
    }

    pub fn budget_minutes(&self) -> f64 {
        self.budget_minutes
    }
}

impl Default for ErrorBudget {
    fn default() -> Self {
        Self::new(0.999, MONTH_MINUTES).expect("default budget is valid")
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct BudgetCapacity {
    pub max_false_alerts: u64,
    pub max_missed_incidents: u64,
}

/// Largest counts of false alerts (alone) and missed incidents (alone) whose
/// cost fits within the budget.
pub fn budget_capacity(budget: &ErrorBudget, policy: &DecisionPolicy) -> BudgetCapacity {
    BudgetCapacity {
        max_false_alerts: units_within(budget.budget_minutes, policy.cost_fp),
        max_missed_incidents: units_within(budget.budget_minutes, policy.cost_fn),
    }
}

fn units_within(budget: f64, cost: f64) -> u64 {
    let mut n = (budget / cost).floor().max(0.0) as u64;
    while n > 0 && n as f64 * cost > budget {
        n -= 1;
    }
    while (n + 1) as f64 * cost <= budget {
        n += 1;
    }
    n
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn worked_example_threshold() {
        let t = derive_threshold(1.0, 10.0, 0.01).unwrap();
        assert!((t - 0.99 / 1.09).abs() < 1e-12);
        assert!((t - 0.908257).abs() < 1e-6);
        assert_eq!(format!("{t:.2}"), "0.91");
    }

    #[test]
    fn symmetric_costs_balanced_prior() {
        for c in [0.1, 1.0, 7.0, 1e6] {
            assert!((derive_threshold(c, c, 0.5).unwrap() - 0.5).abs() < 1e-15);
        }
    }

    #[test]
    fn unequal_costs_hand_value() {
        let t = derive_threshold(2.0, 5.0, 0.1).unwrap();
        assert!((t - 1.8 / 2.3).abs() < 1e-15);
        assert!((t - 0.782609).abs() < 1e-6);
    }

    #[test]
    fn threshold_domain_errors() {
        assert!(derive_threshold(0.0, 1.0, 0.1).is_err());
        assert!(derive_threshold(1.0, -1.0, 0.1).is_err());
        assert!(derive_threshold(1.0, 1.0, 0.0).is_err());
        assert!(derive_threshold(1.0, 1.0, 1.0).is_err());
        assert!(derive_threshold(1.0, 1.0, f64::NAN).is_err());
    }

    #[test]
    fn decide_is_strict() {
        let p = DecisionPolicy::default();
        assert!(p.decide(0.95));
        assert!(!p.decide(p.threshold()));
        assert!(!p.decide(0.0));
    }

    #[test]
    fn monthly_budget_capacity() {
        let b = ErrorBudget::new(0.999, MONTH_MINUTES).unwrap();
        assert_eq!(b.budget_minutes(), 43.2);
        let cap = budget_capacity(&b, &DecisionPolicy::default());
        assert_eq!(cap.max_false_alerts, 43);
        // 4 x 10 = 40 <= 43.2; the fifth miss overruns the budget.
        assert_eq!(cap.max_missed_incidents, 4);
    }

    #[test]
    fn perfect_availability_has_no_budget() {
        let b = ErrorBudget::new(1.0, MONTH_MINUTES).unwrap();
        assert_eq!(b.budget_minutes(), 0.0);
        let cap = budget_capacity(&b, &DecisionPolicy::default());
        assert_eq!((cap.max_false_alerts, cap.max_missed_incidents), (0, 0));
    }

    #[test]
    fn budget_rejects_bad_inputs() {
        assert!(ErrorBudget::new(0.0, 10.0).is_err());
        assert!(ErrorBudget::new(1.1, 10.0).is_err());
        assert!(ErrorBudget::new(0.9, 0.0).is_err());
    }

    #[test]
    fn policy_deserializes_with_derived_threshold() {
        let p: DecisionPolicy = serde_json::from_str(r#"{"cost_fp": 1, "cost_fn": 10, "base_rate": 0.01}"#).unwrap();
        assert!((p.threshold() - 0.99 / 1.09).abs() < 1e-12);
        let bad = serde_json::from_str::<DecisionPolicy>(r#"{"cost_fp": 1, "cost_fn": 10, "base_rate": 2}"#);
        assert!(bad.is_err());
    }

    proptest! {
        #[test]
        fn threshold_monotonicity(fp in 0.01..100.0f64, fn_ in 0.01..100.0f64, rho in 0.001..0.999f64,
                                  bump in 1.01..3.0f64) {
            let t = derive_threshold(fp, fn_, rho).unwrap();
            prop_assert!(t > 0.0 && t < 1.0);
            prop_assert!(derive_threshold(fp * bump, fn_, rho).unwrap() >= t);
            prop_assert!(derive_threshold(fp, fn_ * bump, rho).unwrap() <= t);
            let rho2 = rho + (1.0 - rho) * 0.5 * (bump - 1.0) / 2.0;
            prop_assert!(derive_threshold(fp, fn_, rho2).unwrap() <= t);
        }

        #[test]
        fn decide_is_monotone(p1 in 0.0..=1.0f64, p2 in 0.0..=1.0f64, fp in 0.1..10.0f64,
                              fn_ in 0.1..10.0f64, rho in 0.01..0.99f64) {
            let policy = DecisionPolicy::new(fp, fn_, rho).unwrap();
            let (hi, lo) = if p1 >= p2 { (p1, p2) } else { (p2, p1) };
            if policy.decide(lo) {
                prop_assert!(policy.decide(hi));
            }
        }

        #[test]
        fn capacity_brackets_budget(slo in 0.9..=1.0f64, period in 1.0..1e5f64,
                                    fp in 0.01..50.0f64, fn_ in 0.01..50.0f64) {
            let b = ErrorBudget::new(slo, period).unwrap();
            let policy = DecisionPolicy::new(fp, fn_, 0.01).unwrap();
            let cap = budget_capacity(&b, &policy);
            let m = b.budget_minutes();
            prop_assert!(cap.max_false_alerts as f64 * fp <= m);
            prop_assert!(m < (cap.max_false_alerts + 1) as f64 * fp);
            prop_assert!(cap.max_missed_incidents as f64 * fn_ <= m);
            prop_assert!(m < (cap.max_missed_incidents + 1) as f64 * fn_);
            prop_assert!((m - (1.0 - slo) * period).abs() <= 1e-9);
        }
    }
}

// SPDX-License-Identifier: MIT OR Apache-2.0

use proptest::prelude::*;
use riskcpd::baselines::{score_stream, BaselineKind, FittedBaseline};
use riskcpd::bocpd::{Pruning, RunLengthPosterior};
use riskcpd::math::log_sum_exp;
use riskcpd::stream::{split_chronological, Event, SplitFractions};
use riskcpd::tuner::threshold_sensitivity;
use riskcpd::{
    Bocpd, BocpdConfig, ConjugateModel, DecisionPolicy, FeatureVector, HazardFunction, NigParams, ScoredEvent,
};

fn fv(v: &[f64]) -> FeatureVector {
    FeatureVector::new(v.to_vec()).unwrap()
}

fn nig() -> impl Strategy<Value = NigParams> {
    (-2.0..2.0f64, 0.05..5.0f64, 0.5..5.0f64, 0.1..5.0f64).prop_map(|(m, k, a, b)| NigParams::new(m, k, a, b).unwrap())
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn unpruned_posterior_stays_normalized_and_grows_by_one(
        prior in nig(),
        h in 0.001..0.9f64,
        xs in prop::collection::vec(-20.0..20.0f64, 1..60),
    ) {
        let fresh = ConjugateModel::isotropic(prior, 1).unwrap();
        let hazard = HazardFunction::new(h).unwrap();
        let mut post = RunLengthPosterior::new(fresh.clone());
        for (t, &x) in xs.iter().enumerate() {
            post = post.step_with(&fv(&[x]), &hazard, Pruning::NONE, &fresh).unwrap().0;
            prop_assert_eq!(post.len(), t + 2);
            prop_assert!(log_sum_exp(post.log_weights()).abs() <= 1e-9);
            prop_assert!((post.probability(0) - h).abs() <= 1e-9);
        }
    }

    #[test]
    fn mixture_engine_probabilities_are_valid(
        benign in nig(),
        malicious in nig(),
        pi in 0.01..0.99f64,
        xs in prop::collection::vec(prop::collection::vec(-10.0..10.0f64, 2), 1..40),
    ) {
        let config = BocpdConfig::isotropic(0.05, benign, malicious, 2, pi).unwrap();
        let mut engine = Bocpd::new(config).unwrap();
        for x in &xs {
            let d = engine.step(&fv(x)).unwrap();
            prop_assert!((0.0..=1.0).contains(&d.incident_probability));
            prop_assert!(d.log_evidence.is_finite());
            prop_assert!(log_sum_exp(engine.posterior().log_weights()).abs() <= 1e-9);
        }
    }

    #[test]
    fn baseline_scores_are_finite_and_stateless(
        rows in prop::collection::vec(prop::collection::vec(-5.0..5.0f64, 2), 4..30),
        queries in prop::collection::vec(prop::collection::vec(-1e3..1e3f64, 2), 1..10),
        rotate in 0usize..10,
    ) {
        let train: Vec<FeatureVector> = rows.iter().map(|r| fv(r)).collect();
        let q: Vec<FeatureVector> = queries.iter().map(|r| fv(r)).collect();
        let mut reordered = q.clone();
        let shift = rotate % reordered.len();
        reordered.rotate_left(shift);
        for kind in BaselineKind::ALL {
            let m = FittedBaseline::fit(kind, &train, 3).unwrap();
            let a = score_stream(&m, &q).unwrap();
            let b = score_stream(&m, &reordered).unwrap();
            prop_assert!(a.iter().all(|s| s.is_finite()));
            for (i, s) in b.iter().enumerate() {
                prop_assert_eq!(*s, a[(i + shift) % a.len()]);
            }
        }
    }

    #[test]
    fn split_preserves_order_and_content(
        n in 0usize..200,
        train in 0.0..0.6f64,
        validation in 0.0..0.4f64,
    ) {
        let events: Vec<Event> = (0..n as u64)
            .map(|t| Event { t, features: fv(&[t as f64]), label: 0 })
            .collect();
        let test = 1.0 - train - validation;
        let seg = split_chronological(events.clone(), SplitFractions::new(train, validation, test).unwrap());
        let joined: Vec<Event> = seg.train.into_iter().chain(seg.validation).chain(seg.test).collect();
        prop_assert_eq!(joined, events);
    }

    #[test]
    fn sensitivity_errors_move_monotonically_with_threshold(
        scored in prop::collection::vec((0.0..1.0f64, 0u8..2), 1..80),
        mut cost_fns in prop::collection::vec(0.1..1000.0f64, 2..8),
    ) {
        let events: Vec<ScoredEvent> = scored
            .iter()
            .enumerate()
            .map(|(i, &(score, label))| ScoredEvent { t: i as u64, features: fv(&[0.0]), score, alert: false, label })
            .collect();
        // Larger cost_fn means a lower threshold.
        cost_fns.sort_by(|a, b| b.total_cmp(a));
        let policies: Vec<DecisionPolicy> = cost_fns.iter().map(|&c| DecisionPolicy::new(1.0, c, 0.05).unwrap()).collect();
        let rows = threshold_sensitivity(&policies, &events);
        for w in rows.windows(2) {
            prop_assert!(w[0].threshold <= w[1].threshold);
            prop_assert!(w[0].false_positives >= w[1].false_positives);
            prop_assert!(w[0].false_negatives <= w[1].false_negatives);
        }
    }
}

//! Saliency-guided greedy perturbation of one feature at a time.

use std::collections::BTreeSet;
use std::time::Instant;

use super::{AttackConfig, AttackError, AttackOutcome};
use crate::features::{FeatureVector, FEATURE_COUNT};
use crate::graph::GraphLabel;
use crate::model::Model;

/// Each step moves one feature by +-theta in whichever direction most
/// increases the target-minus-source logit difference, skipping features
/// saturated at a box bound in that direction. The attack stops on a label
/// flip, when the touched-feature budget floor(gamma * 23) is exhausted, or
/// when no remaining move has positive saliency.
pub fn jsma(
    model: &Model,
    x: &FeatureVector,
    source: GraphLabel,
    cfg: &AttackConfig,
) -> Result<AttackOutcome, AttackError> {
    let started = Instant::now();
    let target = source.opposite();
    let max_touched = ((cfg.jsma_gamma * FEATURE_COUNT as f64).floor() as usize).min(FEATURE_COUNT);
    // A feature saturates after at most ceil(1/theta) same-direction steps,
    // which bounds useful work; the cap guards against sign oscillation.
    let step_cap = if cfg.jsma_theta > 0.0 {
        FEATURE_COUNT * ((1.0 / cfg.jsma_theta).ceil() as usize).max(1)
    } else {
        0
    };

    let mut adv = *x.values();
    let mut touched: BTreeSet<usize> = BTreeSet::new();
    let mut steps = 0;

    while steps < step_cap {
        if model.predict(&FeatureVector(adv)) != source {
            break;
        }
        let grad = model.logit_diff_gradient(&FeatureVector(adv), target, source);

        let mut best: Option<(usize, f64, f64)> = None; // (feature, direction, saliency)
        for i in 0..FEATURE_COUNT {
            if !touched.contains(&i) && touched.len() >= max_touched {
                continue;
            }
            for dir in [1.0, -1.0] {
                if dir > 0.0 && adv[i] >= 1.0 {
                    continue;
                }
                if dir < 0.0 && adv[i] <= 0.0 {
                    continue;
                }
                let saliency = dir * grad[i];
                if saliency > 0.0 && best.is_none_or(|(_, _, s)| saliency > s) {
                    best = Some((i, dir, saliency));
                }
            }
        }

        let Some((i, dir, _)) = best else {
            break;
        };
        adv[i] = (adv[i] + dir * cfg.jsma_theta).clamp(0.0, 1.0);
        touched.insert(i);
        steps += 1;
    }

    Ok(AttackOutcome::finish(
        model,
        x,
        FeatureVector(adv),
        source,
        steps,
        None,
        started,
    ))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::attack::test_support::{fv_from, linear_model};

    #[test]
    fn gamma_zero_changes_nothing() {
        let model = linear_model(&[8.0], -4.0);
        let x = fv_from(&[0.9]);
        let cfg = AttackConfig {
            jsma_gamma: 0.0,
            ..AttackConfig::default()
        };
        let outcome = jsma(&model, &x, GraphLabel::Malicious, &cfg).unwrap();
        assert_eq!(outcome.adversarial, x);
        assert_eq!(outcome.features_changed, 0);
        assert!(!outcome.success);
    }

    #[test]
    fn gamma_zero_success_iff_already_misclassified() {
        let model = linear_model(&[8.0], -4.0);
        let x = fv_from(&[0.1]);
        let cfg = AttackConfig {
            jsma_gamma: 0.0,
            ..AttackConfig::default()
        };
        let outcome = jsma(&model, &x, GraphLabel::Malicious, &cfg).unwrap();
        assert!(outcome.success);
        assert_eq!(outcome.adversarial, x);
    }

    #[test]
    fn first_move_targets_max_saliency_feature() {
        // Attacking a malicious sample: target = benign, and the
        // benign-minus-malicious gradient is -w = (-1, -5). Feature 1 has
        // the larger magnitude, so the first (and only needed) moves hit
        // feature 1, pushing it down.
        let w = [1.0, 5.0];
        let model = linear_model(&w, -2.0);
        let x = fv_from(&[0.6, 0.5]);
        assert_eq!(model.predict(&x), GraphLabel::Malicious);
        let outcome = jsma(&model, &x, GraphLabel::Malicious, &AttackConfig::default()).unwrap();
        assert!(outcome.success);
        assert!(outcome.adversarial.get(1) < x.get(1), "feature 1 moved down");
        assert_eq!(outcome.adversarial.get(0), x.get(0), "feature 0 untouched");
        assert_eq!(outcome.features_changed, 1);
    }

    #[test]
    fn touched_budget_limits_distinct_features() {
        // Unflippable model (constant logits) forces JSMA to spend its
        // budget; gamma bounds the distinct features it may touch. With
        // zero gradient everywhere saliency is never positive, so nothing
        // moves at all.
        let model = linear_model(&[], 1.0);
        let x = fv_from(&[0.5, 0.5, 0.5]);
        let cfg = AttackConfig {
            jsma_gamma: 0.1, // floor(0.1 * 23) = 2 features allowed
            ..AttackConfig::default()
        };
        let outcome = jsma(&model, &x, GraphLabel::Malicious, &cfg).unwrap();
        assert_eq!(outcome.features_changed, 0);
    }

    #[test]
    fn saturated_direction_excluded() {
        // Benign sample at the top bound of the deciding feature: pushing
        // up is impossible, so JSMA must find another way or touch other
        // features. Here w has a second useful coordinate.
        let model = linear_model(&[4.0, 3.0], -5.0);
        let x = fv_from(&[1.0, 0.2]);
        assert_eq!(model.predict(&x), GraphLabel::Benign);
        let outcome = jsma(&model, &x, GraphLabel::Benign, &AttackConfig::default()).unwrap();
        assert!(outcome.success);
        // Feature 0 could only move down (hurting the target); feature 1
        // carried the attack.
        assert!(outcome.adversarial.get(1) > x.get(1));
    }
}

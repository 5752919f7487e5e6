//! Iterative linearization toward the binary decision boundary.

use std::time::Instant;

use super::{clamp01, AttackConfig, AttackError, AttackOutcome};
use crate::features::{FeatureVector, FEATURE_COUNT};
use crate::graph::GraphLabel;
use crate::model::Model;

/// Linearizes the logit difference f = Z_source - Z_other around the
/// current iterate and moves the minimal L2 distance onto the hyperplane
/// f = 0: a step of magnitude |f| / ||w||^2 along -w. The accumulated
/// perturbation gets a final 1.02 overshoot and a box clip. A vanishing
/// gradient (||w|| < 1e-12) aborts with a failure outcome.
pub fn deepfool(
    model: &Model,
    x: &FeatureVector,
    source: GraphLabel,
    cfg: &AttackConfig,
) -> Result<AttackOutcome, AttackError> {
    let started = Instant::now();
    let origin = *x.values();
    let other = source.opposite();

    if model.predict(x) != source {
        return Ok(AttackOutcome::finish(
            model, x, *x, source, 0, None, started,
        ));
    }

    let mut total = [0.0; FEATURE_COUNT];
    let mut iterations = 0;

    for _ in 0..cfg.deepfool_max_iterations {
        let mut current = origin;
        for (c, t) in current.iter_mut().zip(total.iter()) {
            *c += t;
        }
        clamp01(&mut current);
        let cur = FeatureVector(current);

        if model.predict(&cur) != source {
            break;
        }
        let z = model.logits(&cur);
        let f = z[source.class_index()] - z[other.class_index()];
        if f <= 1e-12 {
            // Sitting on the hyperplane; the overshoot below pushes across.
            break;
        }
        let w = model.logit_diff_gradient(&cur, source, other);
        let norm_sq: f64 = w.iter().map(|v| v * v).sum();
        if norm_sq.sqrt() < 1e-12 {
            // Flat gradient: no direction to move; report failure as-is.
            let mut adv = origin;
            for (a, t) in adv.iter_mut().zip(total.iter()) {
                *a += cfg.deepfool_overshoot * t;
            }
            clamp01(&mut adv);
            return Ok(AttackOutcome::finish(
                model,
                x,
                FeatureVector(adv),
                source,
                iterations,
                None,
                started,
            ));
        }
        let scale = f / norm_sq;
        for (t, wi) in total.iter_mut().zip(w.iter()) {
            *t -= scale * wi;
        }
        iterations += 1;
    }

    let mut adv = origin;
    for (a, t) in adv.iter_mut().zip(total.iter()) {
        *a += cfg.deepfool_overshoot * t;
    }
    clamp01(&mut adv);

    Ok(AttackOutcome::finish(
        model,
        x,
        FeatureVector(adv),
        source,
        iterations,
        None,
        started,
    ))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::attack::test_support::{fv_from, linear_model};

    #[test]
    fn already_misclassified_returns_input_with_zero_iterations() {
        let model = linear_model(&[8.0], -4.0);
        let x = fv_from(&[0.1]); // classified benign
        let outcome =
            deepfool(&model, &x, GraphLabel::Malicious, &AttackConfig::default()).unwrap();
        assert_eq!(outcome.adversarial, x);
        assert_eq!(outcome.iterations, 0);
        assert!(outcome.success);
    }

    #[test]
    fn linear_model_converges_in_one_iteration() {
        // Malicious logit diff: 2*x0 + 1*x1 - 1.2; at (0.7, 0.4) the
        // distance to the hyperplane is |f| / ||w||_2.
        let w = [2.0, 1.0];
        let model = linear_model(&w, -1.2);
        let x = fv_from(&[0.7, 0.4]);
        assert_eq!(model.predict(&x), GraphLabel::Malicious);

        let outcome =
            deepfool(&model, &x, GraphLabel::Malicious, &AttackConfig::default()).unwrap();
        assert_eq!(outcome.iterations, 1);
        assert!(outcome.success);

        let f = 2.0 * 0.7 + 0.4 - 1.2;
        let norm = (w[0] * w[0] + w[1] * w[1]).sqrt();
        let expected_pre_overshoot = f / norm;
        let moved: f64 = outcome
            .adversarial
            .values()
            .iter()
            .zip(x.values().iter())
            .map(|(a, b)| (a - b) * (a - b))
            .sum::<f64>()
            .sqrt();
        assert!(
            (moved - 1.02 * expected_pre_overshoot).abs() < 1e-9,
            "moved {moved}, expected {}",
            1.02 * expected_pre_overshoot
        );
    }

    #[test]
    fn flat_gradient_aborts_with_failure() {
        let model = linear_model(&[], 3.0); // constant malicious logit, zero gradient
        let x = fv_from(&[0.5]);
        assert_eq!(model.predict(&x), GraphLabel::Malicious);
        let outcome =
            deepfool(&model, &x, GraphLabel::Malicious, &AttackConfig::default()).unwrap();
        assert!(!outcome.success);
        assert_eq!(outcome.adversarial, x);
    }
}

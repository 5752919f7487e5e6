//! Projected gradient descent with L-infinity sign steps.

use std::time::Instant;

use super::{clamp01, project_box, sign, AttackConfig, AttackError, AttackOutcome};
use crate::features::FeatureVector;
use crate::graph::GraphLabel;
use crate::model::{GradientKind, Model};

/// Iterative ascent on the cross-entropy loss against the source label:
/// `x <- project(x + alpha * sign(grad))`, projected onto the [0,1] box
/// intersected with the epsilon-ball around the original input. With
/// `early_stop` the loop exits on the first label flip, so a sample the
/// model already misclassifies comes back unchanged.
pub fn pgd(
    model: &Model,
    x: &FeatureVector,
    source: GraphLabel,
    cfg: &AttackConfig,
) -> Result<AttackOutcome, AttackError> {
    let started = Instant::now();
    let origin = *x.values();
    let mut adv = origin;
    let mut iterations = 0;

    for _ in 0..cfg.max_iterations {
        if cfg.early_stop && model.predict(&FeatureVector(adv)) != source {
            break;
        }
        let grad =
            model.input_gradient(&FeatureVector(adv), source, GradientKind::CrossEntropyLoss);
        for (v, g) in adv.iter_mut().zip(grad.iter()) {
            *v += cfg.step_size * sign(*g);
        }
        project_box(&mut adv, &origin, cfg.epsilon);
        clamp01(&mut adv);
        iterations += 1;
    }

    Ok(AttackOutcome::finish(
        model,
        x,
        FeatureVector(adv),
        source,
        iterations,
        Some(cfg.epsilon),
        started,
    ))
}

//! Momentum iterative method: sign steps on an accumulated velocity.

use std::time::Instant;

use super::{clamp01, project_box, sign, AttackConfig, AttackError, AttackOutcome};
use crate::features::{FeatureVector, FEATURE_COUNT};
use crate::graph::GraphLabel;
use crate::model::{GradientKind, Model};

/// Like PGD but the step direction comes from a velocity accumulated as
/// `g <- mu * g + grad / ||grad||_1`. A zero gradient leaves the velocity
/// unchanged rather than erroring, so momentum can carry the iterate out of
/// flat regions.
pub fn mim(
    model: &Model,
    x: &FeatureVector,
    source: GraphLabel,
    cfg: &AttackConfig,
) -> Result<AttackOutcome, AttackError> {
    let started = Instant::now();
    let origin = *x.values();
    let mut adv = origin;
    let mut velocity = [0.0; FEATURE_COUNT];
    let mut iterations = 0;

    for _ in 0..cfg.max_iterations {
        if cfg.early_stop && model.predict(&FeatureVector(adv)) != source {
            break;
        }
        let grad =
            model.input_gradient(&FeatureVector(adv), source, GradientKind::CrossEntropyLoss);
        let l1: f64 = grad.iter().map(|g| g.abs()).sum();
        if l1 > 0.0 {
            for (v, g) in velocity.iter_mut().zip(grad.iter()) {
                *v = cfg.mim_decay * *v + g / l1;
            }
        }
        for (v, g) in adv.iter_mut().zip(velocity.iter()) {
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

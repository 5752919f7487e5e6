//! L2-minimizing attack with a tanh change of variable and binary search
//! over the trade-off constant.

use std::time::Instant;

use super::{l2_dist, AttackConfig, AttackError, AttackOutcome};
use crate::features::{FeatureVector, FEATURE_COUNT};
use crate::graph::GraphLabel;
use crate::model::Model;

/// Minimizes `||x_adv - x||_2^2 + c * max(Z_src - Z_other, -kappa)` by
/// gradient descent over v with `x_adv = (tanh(v) + 1) / 2`, which keeps
/// every iterate inside the box by construction. An outer binary search
/// adjusts c; the best successful adversarial by L2 wins. Returns the
/// original vector (failure) when no c produces a flip.
pub fn carlini_wagner_l2(
    model: &Model,
    x: &FeatureVector,
    source: GraphLabel,
    cfg: &AttackConfig,
) -> Result<AttackOutcome, AttackError> {
    let started = Instant::now();
    if model.predict(x) != source {
        return Ok(AttackOutcome::finish(
            model, x, *x, source, 0, None, started,
        ));
    }

    let mut best: Option<(f64, [f64; FEATURE_COUNT])> = None;
    let mut lower = 0.0f64;
    let mut upper = f64::INFINITY;
    let mut c = cfg.cw_initial_c;
    let mut iterations = 0;

    for _ in 0..cfg.cw_binary_search_steps {
        let found = cw_inner(
            model,
            x.values(),
            source,
            c,
            cfg,
            &mut best,
            &mut iterations,
        )?;
        if found {
            upper = upper.min(c);
            c = 0.5 * (lower + upper);
        } else {
            lower = lower.max(c);
            c = if upper.is_finite() {
                0.5 * (lower + upper)
            } else {
                c * 10.0
            };
        }
    }

    let adversarial = FeatureVector(best.map_or(*x.values(), |(_, adv)| adv));
    Ok(AttackOutcome::finish(
        model,
        x,
        adversarial,
        source,
        iterations,
        None,
        started,
    ))
}

/// One inner optimization at fixed c. Updates `best` with any successful
/// iterate of smaller L2; returns whether this c produced a success.
fn cw_inner(
    model: &Model,
    origin: &[f64; FEATURE_COUNT],
    source: GraphLabel,
    c: f64,
    cfg: &AttackConfig,
    best: &mut Option<(f64, [f64; FEATURE_COUNT])>,
    iterations: &mut usize,
) -> Result<bool, AttackError> {
    let other = source.opposite();

    // v = atanh(2x - 1), with the argument pulled off the open-interval
    // boundary so the inverse stays finite.
    let mut v = [0.0; FEATURE_COUNT];
    for (vi, &xi) in v.iter_mut().zip(origin.iter()) {
        *vi = ((2.0 * xi - 1.0) * 0.999_999).atanh();
    }

    let mut found = false;
    for iter in 0..cfg.cw_inner_iterations {
        let mut adv = [0.0; FEATURE_COUNT];
        for (a, &vi) in adv.iter_mut().zip(v.iter()) {
            *a = (vi.tanh() + 1.0) / 2.0;
        }
        let fv = FeatureVector(adv);

        let z = model.logits(&fv);
        let margin = z[source.class_index()] - z[other.class_index()];
        let hinge = margin.max(-cfg.cw_kappa);
        let l2 = l2_dist(&adv, origin);
        let objective = l2 * l2 + c * hinge;
        if !objective.is_finite() {
            return Err(AttackError::NonFiniteObjective { iter });
        }

        if model.predict(&fv) != source {
            found = true;
            if best.as_ref().is_none_or(|(b, _)| l2 < *b) {
                *best = Some((l2, adv));
            }
        }

        // d objective / d x_adv, chained through dx/dv = (1 - tanh^2) / 2.
        let hinge_active = margin > -cfg.cw_kappa;
        let wdiff = if hinge_active {
            model.logit_diff_gradient(&fv, source, other)
        } else {
            [0.0; FEATURE_COUNT]
        };
        for i in 0..FEATURE_COUNT {
            let dx = 2.0 * (adv[i] - origin[i]) + c * wdiff[i];
            let t = v[i].tanh();
            v[i] -= cfg.cw_step_size * dx * (1.0 - t * t) / 2.0;
        }
        *iterations += 1;
    }

    Ok(found)
}

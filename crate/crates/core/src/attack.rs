//! Six white-box feature-space attacks over normalized feature vectors.
//!
//! All methods perturb a vector inside the [0, 1] box to flip the
//! classifier's decision away from the sample's source label. None of them
//! guarantees that the perturbed vector corresponds to a realizable graph,
//! so every [`AttackOutcome`] carries `functionality_preserving = false`;
//! the graph-splicing transform in [`crate::splice`] is the
//! functionality-preserving counterpart.

mod carlini_wagner;
mod deepfool;
mod elastic_net;
mod jsma;
mod mim;
mod pgd;

use std::fmt;
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::features::{FeatureVector, FEATURE_COUNT};
use crate::graph::GraphLabel;
use crate::model::Model;

pub use carlini_wagner::carlini_wagner_l2;
pub use deepfool::deepfool;
pub use elastic_net::elastic_net;
pub use jsma::jsma;
pub use mim::mim;
pub use pgd::pgd;

/// A feature counts as changed when it moved by more than this.
pub const FEATURE_CHANGE_TOL: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum AttackMethod {
    CarliniWagner,
    DeepFool,
    ElasticNet,
    Jsma,
    Mim,
    Pgd,
}

impl AttackMethod {
    pub const ALL: [AttackMethod; 6] = [
        AttackMethod::CarliniWagner,
        AttackMethod::DeepFool,
        AttackMethod::ElasticNet,
        AttackMethod::Jsma,
        AttackMethod::Mim,
        AttackMethod::Pgd,
    ];

    /// Stable lowercase identifier used in CSV and JSONL artifacts.
    pub fn slug(self) -> &'static str {
        match self {
            AttackMethod::CarliniWagner => "cw",
            AttackMethod::DeepFool => "deepfool",
            AttackMethod::ElasticNet => "elasticnet",
            AttackMethod::Jsma => "jsma",
            AttackMethod::Mim => "mim",
            AttackMethod::Pgd => "pgd",
        }
    }

    /// Human-readable name used in report tables.
    pub fn display_name(self) -> &'static str {
        match self {
            AttackMethod::CarliniWagner => "C&W",
            AttackMethod::DeepFool => "DeepFool",
            AttackMethod::ElasticNet => "ElasticNet",
            AttackMethod::Jsma => "JSMA",
            AttackMethod::Mim => "MIM",
            AttackMethod::Pgd => "PGD",
        }
    }

    pub fn from_slug(slug: &str) -> Option<AttackMethod> {
        AttackMethod::ALL.into_iter().find(|m| m.slug() == slug)
    }
}

impl fmt::Display for AttackMethod {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.pad(self.display_name())
    }
}

/// Knobs shared by all methods plus the method-specific ones.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct AttackConfig {
    /// L-infinity budget in normalized units; 1.0 spans the whole box and
    /// is effectively unconstrained. Enforced by PGD and MIM.
    pub epsilon: f64,
    /// Sign-step size alpha for PGD and MIM.
    pub step_size: f64,
    pub max_iterations: usize,
    /// Stop iterating as soon as the label flips (PGD/MIM).
    pub early_stop: bool,
    /// Inner-loop learning rate for C&W and ElasticNet.
    pub cw_step_size: f64,
    /// Initial trade-off constant c for C&W and ElasticNet.
    pub cw_initial_c: f64,
    pub cw_binary_search_steps: usize,
    pub cw_inner_iterations: usize,
    /// Confidence margin kappa in the C&W hinge.
    pub cw_kappa: f64,
    /// L1 weight for ElasticNet's shrinkage.
    pub ead_beta: f64,
    /// Momentum decay for MIM.
    pub mim_decay: f64,
    /// Per-step feature delta for JSMA.
    pub jsma_theta: f64,
    /// Fraction of the 23 features JSMA may touch.
    pub jsma_gamma: f64,
    pub deepfool_overshoot: f64,
    pub deepfool_max_iterations: usize,
}

impl Default for AttackConfig {
    fn default() -> Self {
        AttackConfig {
            epsilon: 1.0,
            step_size: 0.01,
            max_iterations: 100,
            early_stop: true,
            cw_step_size: 0.05,
            cw_initial_c: 0.01,
            cw_binary_search_steps: 9,
            cw_inner_iterations: 200,
            cw_kappa: 0.0,
            ead_beta: 0.1,
            mim_decay: 1.0,
            jsma_theta: 0.1,
            jsma_gamma: 1.0,
            deepfool_overshoot: 1.02,
            deepfool_max_iterations: 50,
        }
    }
}

impl AttackConfig {
    pub fn validate(&self) -> Result<(), AttackError> {
        let finite = [
            self.epsilon,
            self.step_size,
            self.cw_step_size,
            self.cw_initial_c,
            self.cw_kappa,
            self.ead_beta,
            self.mim_decay,
            self.jsma_theta,
            self.jsma_gamma,
            self.deepfool_overshoot,
        ];
        if finite.iter().any(|v| !v.is_finite()) {
            return Err(AttackError::BadConfig("all knobs must be finite".into()));
        }
        if self.epsilon < 0.0 {
            return Err(AttackError::BadConfig("epsilon must be >= 0".into()));
        }
        if self.step_size <= 0.0 || self.cw_step_size <= 0.0 {
            return Err(AttackError::BadConfig("step size must be > 0".into()));
        }
        if self.max_iterations == 0 || self.cw_inner_iterations == 0 {
            return Err(AttackError::BadConfig("iterations must be >= 1".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Error)]
pub enum AttackError {
    #[error("invalid attack config: {0}")]
    BadConfig(String),
    #[error("non-finite objective at iteration {iter}")]
    NonFiniteObjective { iter: usize },
    #[error("attack suite requires a nonempty test set")]
    EmptyTestSet,
}

/// Result of one attack invocation against one sample.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct AttackOutcome {
    pub original: FeatureVector,
    pub adversarial: FeatureVector,
    pub source_label: GraphLabel,
    pub predicted: GraphLabel,
    pub success: bool,
    pub features_changed: usize,
    pub iterations: usize,
    pub ct_ms: f64,
    /// The enforced L-infinity budget, for methods that honor one.
    pub epsilon_bound: Option<f64>,
    /// Always false here: feature-space perturbations are not mapped back
    /// to graphs and carry no functionality guarantee.
    pub functionality_preserving: bool,
}

impl AttackOutcome {
    /// Builds an outcome, deriving `predicted`/`success` from a fresh
    /// forward pass so the flag can never disagree with the model.
    fn finish(
        model: &Model,
        original: &FeatureVector,
        adversarial: FeatureVector,
        source_label: GraphLabel,
        iterations: usize,
        epsilon_bound: Option<f64>,
        started: Instant,
    ) -> AttackOutcome {
        let predicted = model.predict(&adversarial);
        AttackOutcome {
            original: *original,
            adversarial,
            source_label,
            predicted,
            success: predicted != source_label,
            features_changed: adversarial.count_changed(original, FEATURE_CHANGE_TOL),
            iterations,
            ct_ms: started.elapsed().as_secs_f64() * 1e3,
            epsilon_bound,
            functionality_preserving: false,
        }
    }
}

/// Dispatches to the requested method.
pub fn run_attack(
    method: AttackMethod,
    model: &Model,
    x: &FeatureVector,
    source: GraphLabel,
    cfg: &AttackConfig,
) -> Result<AttackOutcome, AttackError> {
    cfg.validate()?;
    match method {
        AttackMethod::CarliniWagner => carlini_wagner_l2(model, x, source, cfg),
        AttackMethod::DeepFool => deepfool(model, x, source, cfg),
        AttackMethod::ElasticNet => elastic_net(model, x, source, cfg),
        AttackMethod::Jsma => jsma(model, x, source, cfg),
        AttackMethod::Mim => mim(model, x, source, cfg),
        AttackMethod::Pgd => pgd(model, x, source, cfg),
    }
}

// Helpers shared by the method implementations.

pub(crate) fn sign(v: f64) -> f64 {
    if v > 0.0 {
        1.0
    } else if v < 0.0 {
        -1.0
    } else {
        0.0
    }
}

pub(crate) fn clamp01(x: &mut [f64; FEATURE_COUNT]) {
    for v in x.iter_mut() {
        *v = v.clamp(0.0, 1.0);
    }
}

/// Projects onto the intersection of the [0,1] box and the L-infinity ball
/// of radius `eps` around `origin`.
pub(crate) fn project_box(
    x: &mut [f64; FEATURE_COUNT],
    origin: &[f64; FEATURE_COUNT],
    eps: f64,
) {
    for (v, o) in x.iter_mut().zip(origin.iter()) {
        *v = v.clamp((o - eps).max(0.0), (o + eps).min(1.0));
    }
}

pub(crate) fn l2_dist(a: &[f64; FEATURE_COUNT], b: &[f64; FEATURE_COUNT]) -> f64 {
    a.iter()
        .zip(b.iter())
        .map(|(x, y)| (x - y) * (x - y))
        .sum::<f64>()
        .sqrt()
}

/// Summary row of one method over an attacked sample set.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SuiteRow {
    pub method: AttackMethod,
    /// Number of samples actually attacked (those the model classified
    /// correctly before the attack).
    pub samples: usize,
    pub mr_percent: f64,
    /// Mean features-changed over successful attacks; 0 when no attack
    /// succeeded (see `no_successes`).
    pub avg_fg: f64,
    pub mean_ct_ms: f64,
    /// Set when `avg_fg` is a placeholder because nothing succeeded.
    pub no_successes: bool,
}

#[derive(Debug, Clone)]
pub struct SuiteResult {
    pub rows: Vec<SuiteRow>,
    /// Per-sample outcomes, parallel to `rows`: outcomes[i] belongs to
    /// rows[i] and is ordered like the attacked subset of the input.
    pub outcomes: Vec<Vec<(String, AttackOutcome)>>,
}

impl SuiteResult {
    /// CSV rendering with the schema `method,samples,MR_percent,avg_fg,mean_ct_ms`.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("method,samples,MR_percent,avg_fg,mean_ct_ms\n");
        for row in &self.rows {
            out.push_str(&format!(
                "{},{},{},{},{:.6}\n",
                row.method.slug(),
                row.samples,
                row.mr_percent,
                row.avg_fg,
                row.mean_ct_ms
            ));
        }
        out
    }
}

/// Runs each configured method over the test set. Only samples the model
/// classifies correctly are attacked, so MR measures attack effect rather
/// than base error. Attacks run in parallel across samples; outcome order
/// follows the input order.
pub fn run_attack_suite(
    model: &Model,
    samples: &[(String, FeatureVector, GraphLabel)],
    configs: &[(AttackMethod, AttackConfig)],
) -> Result<SuiteResult, AttackError> {
    if samples.is_empty() {
        return Err(AttackError::EmptyTestSet);
    }
    for (_, cfg) in configs {
        cfg.validate()?;
    }

    let attacked: Vec<&(String, FeatureVector, GraphLabel)> = samples
        .iter()
        .filter(|(_, x, label)| model.predict(x) == *label)
        .collect();

    let mut rows = Vec::with_capacity(configs.len());
    let mut all_outcomes = Vec::with_capacity(configs.len());

    for (method, cfg) in configs {
        let outcomes: Vec<(String, AttackOutcome)> = attacked
            .par_iter()
            .map(|(id, x, label)| {
                run_attack(*method, model, x, *label, cfg).map(|o| (id.clone(), o))
            })
            .collect::<Result<_, _>>()?;

        let successes: Vec<&AttackOutcome> =
            outcomes.iter().filter(|(_, o)| o.success).map(|(_, o)| o).collect();
        let no_successes = successes.is_empty();
        let avg_fg = if no_successes {
            0.0
        } else {
            successes.iter().map(|o| o.features_changed as f64).sum::<f64>()
                / successes.len() as f64
        };
        let mr_percent = if attacked.is_empty() {
            0.0
        } else {
            100.0 * successes.len() as f64 / attacked.len() as f64
        };
        let mean_ct_ms = if attacked.is_empty() {
            0.0
        } else {
            outcomes.iter().map(|(_, o)| o.ct_ms).sum::<f64>() / attacked.len() as f64
        };

        rows.push(SuiteRow {
            method: *method,
            samples: attacked.len(),
            mr_percent,
            avg_fg,
            mean_ct_ms,
            no_successes,
        });
        all_outcomes.push(outcomes);
    }

    Ok(SuiteResult {
        rows,
        outcomes: all_outcomes,
    })
}


#[cfg(test)]
mod tests {
    use super::test_support::*;
    use super::*;

    #[test]
    fn suite_reports_mr_100_for_forced_success() {
        // x0 > 0.5 classifies malicious; a malicious sample at 0.9 flips
        // easily under an unconstrained PGD.
        let model = linear_model(&[8.0], -4.0);
        let samples = vec![(
            "s0".to_string(),
            fv_from(&[0.9]),
            GraphLabel::Malicious,
        )];
        let result = run_attack_suite(
            &model,
            &samples,
            &[(AttackMethod::Pgd, AttackConfig::default())],
        )
        .unwrap();
        assert_eq!(result.rows[0].samples, 1);
        assert_eq!(result.rows[0].mr_percent, 100.0);
        assert!(!result.rows[0].no_successes);
    }

    #[test]
    fn suite_flags_all_failures() {
        // Zero weights: probabilities are always (0.5, 0.5), ties resolve
        // to benign, so benign samples are "correct" and can never flip.
        let model = linear_model(&[], 0.0);
        let samples = vec![
            ("a".to_string(), fv(0.2), GraphLabel::Benign),
            ("b".to_string(), fv(0.8), GraphLabel::Benign),
        ];
        let result = run_attack_suite(
            &model,
            &samples,
            &[(AttackMethod::Pgd, AttackConfig::default())],
        )
        .unwrap();
        assert_eq!(result.rows[0].mr_percent, 0.0);
        assert_eq!(result.rows[0].avg_fg, 0.0);
        assert!(result.rows[0].no_successes);
    }

    #[test]
    fn suite_rejects_empty_test_set() {
        let model = linear_model(&[1.0], 0.0);
        assert!(matches!(
            run_attack_suite(&model, &[], &[]),
            Err(AttackError::EmptyTestSet)
        ));
    }

    #[test]
    fn suite_attacks_only_correctly_classified() {
        let model = linear_model(&[8.0], -4.0);
        // One correctly-classified malicious, one misclassified benign
        // (x0 = 0.9 looks malicious): only the former is attacked.
        let samples = vec![
            ("good".to_string(), fv_from(&[0.9]), GraphLabel::Malicious),
            ("confusing".to_string(), fv_from(&[0.9]), GraphLabel::Benign),
        ];
        let result = run_attack_suite(
            &model,
            &samples,
            &[(AttackMethod::Pgd, AttackConfig::default())],
        )
        .unwrap();
        assert_eq!(result.rows[0].samples, 1);
        assert_eq!(result.outcomes[0].len(), 1);
        assert_eq!(result.outcomes[0][0].0, "good");
    }

    #[test]
    fn config_validation_catches_bad_knobs() {
        let bad = [
            AttackConfig {
                epsilon: -1.0,
                ..AttackConfig::default()
            },
            AttackConfig {
                step_size: 0.0,
                ..AttackConfig::default()
            },
            AttackConfig {
                mim_decay: f64::NAN,
                ..AttackConfig::default()
            },
        ];
        for cfg in bad {
            assert!(cfg.validate().is_err());
        }
    }

    #[test]
    fn all_methods_emit_box_respecting_outcomes() {
        let model = linear_model(&[4.0, -3.0, 2.0], -1.0);
        let x = fv_from(&[0.7, 0.2, 0.9]);
        let cfg = AttackConfig::default();
        for method in AttackMethod::ALL {
            let outcome = run_attack(method, &model, &x, GraphLabel::Malicious, &cfg).unwrap();
            for &v in outcome.adversarial.values() {
                assert!((0.0..=1.0).contains(&v), "{method}: {v} outside box");
            }
            assert!(!outcome.functionality_preserving);
            // Success flag always agrees with a fresh forward pass.
            assert_eq!(
                outcome.success,
                model.predict(&outcome.adversarial) != outcome.source_label,
                "{method}"
            );
        }
    }
}

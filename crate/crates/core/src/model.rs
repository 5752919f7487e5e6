//! Feed-forward classifier over the 23 normalized features.
//!
//! The network is dense with rectifier hidden activations and a softmax
//! output over the two classes. Everything the attacks need is exposed
//! analytically: [`Model::input_gradient`] backpropagates to the *input*,
//! either through the cross-entropy loss or straight from one output logit.
//!
//! Training is deterministic given a seed: fixed Glorot-uniform
//! initialization, fixed shuffle order, plain mini-batch gradient descent on
//! class-weighted cross-entropy.

use std::fmt;

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::derive_seed;
use crate::features::{FeatureVector, FEATURE_COUNT};
use crate::graph::GraphLabel;

pub const CLASS_COUNT: usize = 2;

/// Which quantity [`Model::input_gradient`] differentiates.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GradientKind {
    /// d/dx of the cross-entropy loss against the given class.
    CrossEntropyLoss,
    /// d/dx of the given class's pre-softmax logit.
    Logit,
}

#[derive(Debug, Error)]
pub enum ModelError {
    #[error("layer sizes must start at {FEATURE_COUNT} and end at {CLASS_COUNT}, got {0:?}")]
    BadArchitecture(Vec<usize>),
    #[error("weight matrix for layer {layer} has {got} entries, expected {expected}")]
    BadWeightShape {
        layer: usize,
        got: usize,
        expected: usize,
    },
    #[error("bias vector for layer {layer} has {got} entries, expected {expected}")]
    BadBiasShape {
        layer: usize,
        got: usize,
        expected: usize,
    },
    #[error("model JSON: {0}")]
    Json(#[from] serde_json::Error),
}

#[derive(Debug, Error)]
pub enum TrainError {
    #[error("training data must contain at least 2 samples of each class")]
    DegenerateData,
    #[error("non-finite loss at epoch {epoch}, batch {batch}")]
    NonFiniteLoss { epoch: usize, batch: usize },
    #[error("invalid train config: {0}")]
    BadConfig(String),
}

/// Hyperparameters for [`train`]. `hidden` holds the hidden layer widths.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TrainConfig {
    pub hidden: Vec<usize>,
    pub learning_rate: f64,
    pub batch_size: usize,
    pub epochs: usize,
    pub seed: u64,
    pub class_weighting: bool,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            hidden: vec![64, 32],
            learning_rate: 0.05,
            batch_size: 32,
            epochs: 150,
            seed: 42,
            class_weighting: true,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<(), TrainError> {
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return Err(TrainError::BadConfig("learning rate must be > 0".into()));
        }
        if self.batch_size == 0 {
            return Err(TrainError::BadConfig("batch size must be >= 1".into()));
        }
        if self.epochs == 0 {
            return Err(TrainError::BadConfig("epochs must be >= 1".into()));
        }
        if self.hidden.contains(&0) {
            return Err(TrainError::BadConfig("hidden widths must be >= 1".into()));
        }
        Ok(())
    }
}

/// Softmax probabilities over (benign, malicious).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Probs(pub [f64; CLASS_COUNT]);

impl Probs {
    pub fn benign(&self) -> f64 {
        self.0[0]
    }

    pub fn malicious(&self) -> f64 {
        self.0[1]
    }

    /// Argmax label; ties resolve to benign for determinism.
    pub fn predicted(&self) -> GraphLabel {
        if self.0[1] > self.0[0] {
            GraphLabel::Malicious
        } else {
            GraphLabel::Benign
        }
    }
}

/// Dense feed-forward network. `weights[l]` is row-major (output x input):
/// entry (o, i) sits at `o * in_dim + i`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Model {
    pub layer_sizes: Vec<usize>,
    pub weights: Vec<Vec<f64>>,
    pub biases: Vec<Vec<f64>>,
    pub seed: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub normalizer_ref: Option<String>,
}

impl Model {
    /// Builds a model with Glorot-uniform weights: each layer draws from
    /// U[-a, a] with a = sqrt(6 / (fan_in + fan_out)), seeded per layer.
    pub fn init(hidden: &[usize], seed: u64) -> Model {
        let mut layer_sizes = Vec::with_capacity(hidden.len() + 2);
        layer_sizes.push(FEATURE_COUNT);
        layer_sizes.extend_from_slice(hidden);
        layer_sizes.push(CLASS_COUNT);

        let mut weights = Vec::new();
        let mut biases = Vec::new();
        for l in 0..layer_sizes.len() - 1 {
            let fan_in = layer_sizes[l];
            let fan_out = layer_sizes[l + 1];
            let a = (6.0 / (fan_in + fan_out) as f64).sqrt();
            let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(seed, l as u64));
            weights.push(
                (0..fan_in * fan_out)
                    .map(|_| rng.random_range(-a..a))
                    .collect(),
            );
            biases.push(vec![0.0; fan_out]);
        }

        Model {
            layer_sizes,
            weights,
            biases,
            seed,
            normalizer_ref: None,
        }
    }

    /// Checks the dimension chain (input 23, output 2, shapes consistent).
    pub fn validate(&self) -> Result<(), ModelError> {
        let sizes = &self.layer_sizes;
        if sizes.len() < 2 || sizes[0] != FEATURE_COUNT || *sizes.last().unwrap() != CLASS_COUNT {
            return Err(ModelError::BadArchitecture(sizes.clone()));
        }
        if self.weights.len() != sizes.len() - 1 || self.biases.len() != sizes.len() - 1 {
            return Err(ModelError::BadArchitecture(sizes.clone()));
        }
        for l in 0..sizes.len() - 1 {
            let expected = sizes[l] * sizes[l + 1];
            if self.weights[l].len() != expected {
                return Err(ModelError::BadWeightShape {
                    layer: l,
                    got: self.weights[l].len(),
                    expected,
                });
            }
            if self.biases[l].len() != sizes[l + 1] {
                return Err(ModelError::BadBiasShape {
                    layer: l,
                    got: self.biases[l].len(),
                    expected: sizes[l + 1],
                });
            }
        }
        Ok(())
    }

    fn layer_count(&self) -> usize {
        self.weights.len()
    }

    /// Forward pass keeping post-activation values of every layer
    /// (activations[0] is the input itself).
    fn forward_trace(&self, x: &[f64; FEATURE_COUNT]) -> Vec<Vec<f64>> {
        let mut activations: Vec<Vec<f64>> = Vec::with_capacity(self.layer_count() + 1);
        activations.push(x.to_vec());
        for l in 0..self.layer_count() {
            let input = &activations[l];
            let in_dim = self.layer_sizes[l];
            let out_dim = self.layer_sizes[l + 1];
            let w = &self.weights[l];
            let last = l + 1 == self.layer_count();
            let mut out = vec![0.0; out_dim];
            for (o, slot) in out.iter_mut().enumerate() {
                let row = &w[o * in_dim..(o + 1) * in_dim];
                let mut z = self.biases[l][o];
                for (wi, xi) in row.iter().zip(input.iter()) {
                    z += wi * xi;
                }
                *slot = if last { z } else { z.max(0.0) };
            }
            activations.push(out);
        }
        activations
    }

    /// Pre-softmax output logits.
    pub fn logits(&self, x: &FeatureVector) -> [f64; CLASS_COUNT] {
        let trace = self.forward_trace(x.values());
        let out = trace.last().unwrap();
        [out[0], out[1]]
    }

    /// Class probabilities; softmax is computed with max-subtraction so the
    /// pair always sums to 1.
    pub fn forward(&self, x: &FeatureVector) -> Probs {
        Probs(softmax(&self.logits(x)))
    }

    pub fn predict(&self, x: &FeatureVector) -> GraphLabel {
        self.forward(x).predicted()
    }

    /// Cross-entropy loss of a single sample against `label`.
    pub fn loss(&self, x: &FeatureVector, label: GraphLabel) -> f64 {
        let z = self.logits(x);
        log_sum_exp(&z) - z[label.class_index()]
    }

    /// Analytic gradient of the selected quantity with respect to the input.
    ///
    /// For `CrossEntropyLoss` the output seed is `softmax(z) - onehot(class)`;
    /// for `Logit` it is `onehot(class)` applied directly to the logits.
    pub fn input_gradient(
        &self,
        x: &FeatureVector,
        class: GraphLabel,
        kind: GradientKind,
    ) -> [f64; FEATURE_COUNT] {
        let activations = self.forward_trace(x.values());
        let logits = activations.last().unwrap();

        let mut grad: Vec<f64> = match kind {
            GradientKind::CrossEntropyLoss => {
                let p = softmax(&[logits[0], logits[1]]);
                let mut g = vec![p[0], p[1]];
                g[class.class_index()] -= 1.0;
                g
            }
            GradientKind::Logit => {
                let mut g = vec![0.0; CLASS_COUNT];
                g[class.class_index()] = 1.0;
                g
            }
        };

        for l in (0..self.layer_count()).rev() {
            let in_dim = self.layer_sizes[l];
            let out_dim = self.layer_sizes[l + 1];
            let w = &self.weights[l];
            let mut next = vec![0.0; in_dim];
            for o in 0..out_dim {
                let g = grad[o];
                if g == 0.0 {
                    continue;
                }
                let row = &w[o * in_dim..(o + 1) * in_dim];
                for (slot, wi) in next.iter_mut().zip(row.iter()) {
                    *slot += g * wi;
                }
            }
            if l > 0 {
                // Rectifier mask of the layer we are stepping into; the
                // derivative at exactly 0 is taken as 0.
                for (slot, &a) in next.iter_mut().zip(activations[l].iter()) {
                    if a <= 0.0 {
                        *slot = 0.0;
                    }
                }
            }
            grad = next;
        }

        let mut out = [0.0; FEATURE_COUNT];
        out.copy_from_slice(&grad);
        out
    }

    /// Gradient of the logit difference Z[a] - Z[b] with respect to x.
    pub fn logit_diff_gradient(
        &self,
        x: &FeatureVector,
        a: GraphLabel,
        b: GraphLabel,
    ) -> [f64; FEATURE_COUNT] {
        let ga = self.input_gradient(x, a, GradientKind::Logit);
        let gb = self.input_gradient(x, b, GradientKind::Logit);
        let mut out = [0.0; FEATURE_COUNT];
        for i in 0..FEATURE_COUNT {
            out[i] = ga[i] - gb[i];
        }
        out
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("model serializes")
    }

    pub fn from_json(text: &str) -> Result<Model, ModelError> {
        let model: Model = serde_json::from_str(text)?;
        model.validate()?;
        Ok(model)
    }
}

fn softmax(z: &[f64; CLASS_COUNT]) -> [f64; CLASS_COUNT] {
    let m = z[0].max(z[1]);
    let e0 = (z[0] - m).exp();
    let e1 = (z[1] - m).exp();
    let sum = e0 + e1;
    [e0 / sum, e1 / sum]
}

fn log_sum_exp(z: &[f64; CLASS_COUNT]) -> f64 {
    let m = z[0].max(z[1]);
    m + ((z[0] - m).exp() + (z[1] - m).exp()).ln()
}

/// One row of the training log.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct EpochStats {
    pub epoch: usize,
    pub loss: f64,
    pub train_acc: f64,
}

#[derive(Debug, Clone, Default)]
pub struct TrainLog {
    pub epochs: Vec<EpochStats>,
}

impl TrainLog {
    /// CSV rendering: `epoch,loss,train_acc`, 17 significant digits.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("epoch,loss,train_acc\n");
        for row in &self.epochs {
            out.push_str(&format!(
                "{},{:.16e},{:.16e}\n",
                row.epoch, row.loss, row.train_acc
            ));
        }
        out
    }
}

/// Trains a model by mini-batch gradient descent on class-weighted
/// cross-entropy. Deterministic given `cfg.seed`.
pub fn train(
    data: &[(FeatureVector, GraphLabel)],
    cfg: &TrainConfig,
) -> Result<(Model, TrainLog), TrainError> {
    cfg.validate()?;
    let benign = data.iter().filter(|(_, l)| *l == GraphLabel::Benign).count();
    let malicious = data.len() - benign;
    if benign < 2 || malicious < 2 {
        return Err(TrainError::DegenerateData);
    }

    // Inverse-frequency class weights, normalized so their mean over the
    // two classes is 1.
    let weights_by_class = if cfg.class_weighting {
        let n = data.len() as f64;
        [
            n / (CLASS_COUNT as f64 * benign as f64),
            n / (CLASS_COUNT as f64 * malicious as f64),
        ]
    } else {
        [1.0, 1.0]
    };

    let mut model = Model::init(&cfg.hidden, cfg.seed);
    let mut log = TrainLog::default();
    let mut order: Vec<usize> = (0..data.len()).collect();

    for epoch in 0..cfg.epochs {
        let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(cfg.seed, 0x1000 + epoch as u64));
        shuffle(&mut order, &mut rng);

        let mut epoch_loss = 0.0;
        let mut epoch_weight = 0.0;
        let mut correct = 0usize;

        for (batch_idx, batch) in order.chunks(cfg.batch_size).enumerate() {
            let (loss, ok) = train_batch(&mut model, data, batch, weights_by_class, cfg);
            if !loss.is_finite() {
                return Err(TrainError::NonFiniteLoss {
                    epoch,
                    batch: batch_idx,
                });
            }
            epoch_loss += loss;
            epoch_weight += batch.len() as f64;
            correct += ok;
        }

        log.epochs.push(EpochStats {
            epoch,
            loss: epoch_loss / epoch_weight,
            train_acc: correct as f64 / data.len() as f64,
        });
    }

    Ok((model, log))
}

/// Runs one batch; returns (sum of weighted per-sample losses, correct
/// predictions in the batch).
fn train_batch(
    model: &mut Model,
    data: &[(FeatureVector, GraphLabel)],
    batch: &[usize],
    weights_by_class: [f64; CLASS_COUNT],
    cfg: &TrainConfig,
) -> (f64, usize) {
    let layer_count = model.layer_count();
    let mut grad_w: Vec<Vec<f64>> = model.weights.iter().map(|w| vec![0.0; w.len()]).collect();
    let mut grad_b: Vec<Vec<f64>> = model.biases.iter().map(|b| vec![0.0; b.len()]).collect();

    let mut loss_sum = 0.0;
    let mut correct = 0usize;

    for &idx in batch {
        let (x, label) = &data[idx];
        let class = label.class_index();
        let weight = weights_by_class[class];
        let activations = model.forward_trace(x.values());
        let logits = activations.last().unwrap();
        let z = [logits[0], logits[1]];
        loss_sum += weight * (log_sum_exp(&z) - z[class]);
        let p = softmax(&z);
        if Probs(p).predicted() == *label {
            correct += 1;
        }

        // Backprop: delta starts at weight * (softmax - onehot).
        let mut delta = vec![p[0] * weight, p[1] * weight];
        delta[class] -= weight;

        for l in (0..layer_count).rev() {
            let in_dim = model.layer_sizes[l];
            let out_dim = model.layer_sizes[l + 1];
            let input = &activations[l];
            for o in 0..out_dim {
                let d = delta[o];
                if d != 0.0 {
                    let row = &mut grad_w[l][o * in_dim..(o + 1) * in_dim];
                    for (slot, xi) in row.iter_mut().zip(input.iter()) {
                        *slot += d * xi;
                    }
                    grad_b[l][o] += d;
                }
            }
            if l > 0 {
                let w = &model.weights[l];
                let mut next = vec![0.0; in_dim];
                for o in 0..out_dim {
                    let d = delta[o];
                    if d == 0.0 {
                        continue;
                    }
                    let row = &w[o * in_dim..(o + 1) * in_dim];
                    for (slot, wi) in next.iter_mut().zip(row.iter()) {
                        *slot += d * wi;
                    }
                }
                for (slot, &a) in next.iter_mut().zip(activations[l].iter()) {
                    if a <= 0.0 {
                        *slot = 0.0;
                    }
                }
                delta = next;
            }
        }
    }

    let scale = cfg.learning_rate / batch.len() as f64;
    for l in 0..layer_count {
        for (w, g) in model.weights[l].iter_mut().zip(grad_w[l].iter()) {
            *w -= scale * g;
        }
        for (b, g) in model.biases[l].iter_mut().zip(grad_b[l].iter()) {
            *b -= scale * g;
        }
    }

    (loss_sum, correct)
}

/// Fisher-Yates with the given RNG; kept in-repo so shuffle order is pinned
/// by our seed scheme alone.
fn shuffle<T>(items: &mut [T], rng: &mut ChaCha8Rng) {
    for i in (1..items.len()).rev() {
        let j = rng.random_range(0..=i);
        items.swap(i, j);
    }
}

/// Confusion counts with malicious as the positive class.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Confusion {
    pub tp: usize,
    pub fn_: usize,
    pub fp: usize,
    pub tn: usize,
}

/// Test-set metrics. FNR = FN/(FN+TP), FPR = FP/(FP+TN); an empty
/// denominator yields 0.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Metrics {
    pub accuracy: f64,
    pub fnr: f64,
    pub fpr: f64,
    pub confusion: Confusion,
}

impl fmt::Display for Metrics {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "accuracy {:.2}%, FNR {:.2}%, FPR {:.2}% (TP {} FN {} FP {} TN {})",
            self.accuracy * 100.0,
            self.fnr * 100.0,
            self.fpr * 100.0,
            self.confusion.tp,
            self.confusion.fn_,
            self.confusion.fp,
            self.confusion.tn
        )
    }
}

#[derive(Debug, Error)]
#[error("cannot evaluate on an empty test set")]
pub struct EmptyTestSet;

pub fn evaluate(
    model: &Model,
    test: &[(FeatureVector, GraphLabel)],
) -> Result<Metrics, EmptyTestSet> {
    if test.is_empty() {
        return Err(EmptyTestSet);
    }
    let mut c = Confusion {
        tp: 0,
        fn_: 0,
        fp: 0,
        tn: 0,
    };
    for (x, label) in test {
        let predicted = model.predict(x);
        match (label, predicted) {
            (GraphLabel::Malicious, GraphLabel::Malicious) => c.tp += 1,
            (GraphLabel::Malicious, GraphLabel::Benign) => c.fn_ += 1,
            (GraphLabel::Benign, GraphLabel::Malicious) => c.fp += 1,
            (GraphLabel::Benign, GraphLabel::Benign) => c.tn += 1,
        }
    }
    let ratio = |num: usize, den: usize| {
        if den == 0 {
            0.0
        } else {
            num as f64 / den as f64
        }
    };
    Ok(Metrics {
        accuracy: (c.tp + c.tn) as f64 / test.len() as f64,
        fnr: ratio(c.fn_, c.fn_ + c.tp),
        fpr: ratio(c.fp, c.fp + c.tn),
        confusion: c,
    })
}

#[cfg(test)]
#[allow(clippy::needless_range_loop)]
mod tests {
    use super::*;

    fn fv(fill: f64) -> FeatureVector {
        FeatureVector([fill; FEATURE_COUNT])
    }

    fn fv_from(values: &[f64]) -> FeatureVector {
        let mut out = [0.0; FEATURE_COUNT];
        out[..values.len()].copy_from_slice(values);
        FeatureVector(out)
    }

    #[test]
    fn zero_weight_model_outputs_half_half() {
        let mut m = Model::init(&[8], 1);
        for w in &mut m.weights {
            w.iter_mut().for_each(|v| *v = 0.0);
        }
        let p = m.forward(&fv(0.7));
        assert!((p.benign() - 0.5).abs() < 1e-12);
        assert!((p.malicious() - 0.5).abs() < 1e-12);
    }

    #[test]
    fn equal_logits_give_half_half() {
        // Single linear layer with identical rows: logits (z, z) for any x.
        let mut m = Model::init(&[], 3);
        let row: Vec<f64> = (0..FEATURE_COUNT).map(|i| i as f64 * 0.1).collect();
        m.weights[0][..FEATURE_COUNT].copy_from_slice(&row);
        m.weights[0][FEATURE_COUNT..].copy_from_slice(&row);
        m.biases[0] = vec![1.3, 1.3];
        let p = m.forward(&fv(0.25));
        assert!((p.benign() - 0.5).abs() < 1e-12);
    }

    #[test]
    fn forward_matches_hand_rolled_chain() {
        // Independent recomputation of the forward pass for a fixed model.
        let m = Model::init(&[4], 7);
        let x = fv_from(&[0.1, 0.9, 0.3, 0.5, 0.7, 0.2, 0.4]);

        let mut hidden = [0.0; 4];
        for (o, slot) in hidden.iter_mut().enumerate() {
            let mut z = m.biases[0][o];
            for i in 0..FEATURE_COUNT {
                z += m.weights[0][o * FEATURE_COUNT + i] * x.get(i);
            }
            *slot = z.max(0.0);
        }
        let mut logits = [0.0; 2];
        for (o, slot) in logits.iter_mut().enumerate() {
            let mut z = m.biases[1][o];
            for (i, h) in hidden.iter().enumerate() {
                z += m.weights[1][o * 4 + i] * h;
            }
            *slot = z;
        }
        let m0 = logits[0].max(logits[1]);
        let e0 = (logits[0] - m0).exp();
        let e1 = (logits[1] - m0).exp();
        let expected = [e0 / (e0 + e1), e1 / (e0 + e1)];

        let got = m.forward(&x);
        assert!((got.0[0] - expected[0]).abs() < 1e-12);
        assert!((got.0[1] - expected[1]).abs() < 1e-12);
    }

    #[test]
    fn probabilities_on_simplex() {
        let m = Model::init(&[16, 8], 11);
        for k in 0..20 {
            let x = fv(k as f64 / 19.0);
            let p = m.forward(&x);
            assert!((p.benign() + p.malicious() - 1.0).abs() < 1e-9);
            assert!(p.benign() > 0.0 && p.benign() < 1.0);
        }
    }

    #[test]
    fn zero_weight_model_has_zero_gradient() {
        let mut m = Model::init(&[8], 1);
        for w in &mut m.weights {
            w.iter_mut().for_each(|v| *v = 0.0);
        }
        let g = m.input_gradient(&fv(0.5), GraphLabel::Malicious, GradientKind::CrossEntropyLoss);
        assert!(g.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn linear_model_gradient_matches_closed_form() {
        // For a single linear layer, d(loss wrt class t)/dx =
        // sum_k (p_k - onehot_t[k]) * W_k.
        let m = Model::init(&[], 5);
        let x = fv(0.4);
        let p = m.forward(&x);
        let g = m.input_gradient(&x, GraphLabel::Malicious, GradientKind::CrossEntropyLoss);
        for i in 0..FEATURE_COUNT {
            let expected =
                p.0[0] * m.weights[0][i] + (p.0[1] - 1.0) * m.weights[0][FEATURE_COUNT + i];
            assert!((g[i] - expected).abs() < 1e-12);
        }
    }

    fn finite_diff_loss(m: &Model, x: &FeatureVector, label: GraphLabel, h: f64) -> Vec<f64> {
        (0..FEATURE_COUNT)
            .map(|i| {
                let mut plus = *x;
                plus.0[i] += h;
                let mut minus = *x;
                minus.0[i] -= h;
                (m.loss(&plus, label) - m.loss(&minus, label)) / (2.0 * h)
            })
            .collect()
    }

    #[test]
    fn gradient_matches_finite_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(99);
        for depth in 1..=3usize {
            let hidden: Vec<usize> = (0..depth - 1).map(|_| 12).collect();
            let m = Model::init(&hidden, rng.random());
            let x = {
                let mut v = [0.0; FEATURE_COUNT];
                v.iter_mut().for_each(|s| *s = rng.random_range(0.0..1.0));
                FeatureVector(v)
            };
            let analytic =
                m.input_gradient(&x, GraphLabel::Malicious, GradientKind::CrossEntropyLoss);
            let numeric = finite_diff_loss(&m, &x, GraphLabel::Malicious, 1e-5);
            let num_norm: f64 = numeric.iter().map(|v| v * v).sum::<f64>().sqrt();
            let diff_norm: f64 = analytic
                .iter()
                .zip(numeric.iter())
                .map(|(a, b)| (a - b) * (a - b))
                .sum::<f64>()
                .sqrt();
            assert!(
                diff_norm / num_norm.max(1e-12) < 1e-4,
                "depth {depth}: rel err {}",
                diff_norm / num_norm.max(1e-12)
            );
        }
    }

    #[test]
    fn logit_gradient_for_linear_model_is_weight_row() {
        let m = Model::init(&[], 5);
        let g = m.input_gradient(&fv(0.3), GraphLabel::Benign, GradientKind::Logit);
        for i in 0..FEATURE_COUNT {
            assert!((g[i] - m.weights[0][i]).abs() < 1e-12);
        }
    }

    fn separable_toy_data() -> Vec<(FeatureVector, GraphLabel)> {
        // Two features carry the signal; the rest are zero.
        let mut data = Vec::new();
        for k in 0..10 {
            let t = k as f64 / 10.0;
            data.push((fv_from(&[0.1 + 0.2 * t, 0.8]), GraphLabel::Benign));
            data.push((fv_from(&[0.8, 0.1 + 0.2 * t]), GraphLabel::Malicious));
        }
        data
    }

    #[test]
    fn training_fits_separable_toy_set() {
        let data = separable_toy_data();
        let cfg = TrainConfig {
            hidden: vec![8],
            epochs: 200,
            batch_size: 4,
            learning_rate: 0.5,
            seed: 7,
            class_weighting: false,
        };
        let (model, log) = train(&data, &cfg).unwrap();
        let correct = data.iter().filter(|(x, l)| model.predict(x) == *l).count();
        assert_eq!(correct, data.len(), "training accuracy must hit 100%");
        assert!(
            log.epochs.last().unwrap().loss < log.epochs[0].loss,
            "loss must decrease over training"
        );
    }

    #[test]
    fn training_is_deterministic_given_seed() {
        let data = separable_toy_data();
        let cfg = TrainConfig::default();
        let (a, _) = train(&data, &cfg).unwrap();
        let (b, _) = train(&data, &cfg).unwrap();
        assert_eq!(a.to_json(), b.to_json());
    }

    #[test]
    fn training_rejects_single_class_data() {
        let data: Vec<_> = (0..8).map(|_| (fv(0.2), GraphLabel::Benign)).collect();
        assert!(matches!(
            train(&data, &TrainConfig::default()),
            Err(TrainError::DegenerateData)
        ));
    }

    #[test]
    fn evaluate_metrics_forced_arithmetic() {
        // Linear separator predicting malicious iff x0 > 0.5; test set built
        // to produce the confusion matrix {TP 9, FN 1, TN 89, FP 1}.
        let mut m = Model::init(&[], 0);
        m.weights[0].iter_mut().for_each(|v| *v = 0.0);
        m.weights[0][FEATURE_COUNT] = 10.0;
        m.biases[0][1] = -5.0;

        let mut test = Vec::new();
        for _ in 0..9 {
            test.push((fv_from(&[0.9]), GraphLabel::Malicious)); // TP
        }
        test.push((fv_from(&[0.1]), GraphLabel::Malicious)); // FN
        for _ in 0..89 {
            test.push((fv_from(&[0.1]), GraphLabel::Benign)); // TN
        }
        test.push((fv_from(&[0.9]), GraphLabel::Benign)); // FP

        let metrics = evaluate(&m, &test).unwrap();
        assert_eq!(metrics.confusion.tp, 9);
        assert_eq!(metrics.confusion.fn_, 1);
        assert_eq!(metrics.confusion.tn, 89);
        assert_eq!(metrics.confusion.fp, 1);
        assert!((metrics.accuracy - 0.98).abs() < 1e-12);
        assert!((metrics.fnr - 0.1).abs() < 1e-12);
        assert!((metrics.fpr - 1.0 / 90.0).abs() < 1e-12);
    }

    #[test]
    fn all_benign_predictor_has_unit_fnr() {
        let mut m = Model::init(&[], 0);
        m.weights[0].iter_mut().for_each(|v| *v = 0.0);
        m.biases[0][0] = 10.0; // benign logit dominates everywhere
        let test = vec![
            (fv(0.1), GraphLabel::Malicious),
            (fv(0.9), GraphLabel::Benign),
        ];
        let metrics = evaluate(&m, &test).unwrap();
        assert_eq!(metrics.fnr, 1.0);
        assert_eq!(metrics.fpr, 0.0);
    }

    #[test]
    fn perfect_predictor_metrics() {
        let mut m = Model::init(&[], 0);
        m.weights[0].iter_mut().for_each(|v| *v = 0.0);
        m.weights[0][FEATURE_COUNT] = 10.0;
        m.biases[0][1] = -5.0;
        let test = vec![
            (fv_from(&[0.9]), GraphLabel::Malicious),
            (fv_from(&[0.1]), GraphLabel::Benign),
        ];
        let metrics = evaluate(&m, &test).unwrap();
        assert_eq!(metrics.accuracy, 1.0);
        assert_eq!(metrics.fnr, 0.0);
        assert_eq!(metrics.fpr, 0.0);
    }

    #[test]
    fn evaluate_empty_test_set_errors() {
        let m = Model::init(&[], 0);
        assert!(evaluate(&m, &[]).is_err());
    }

    #[test]
    fn model_json_round_trip_validates() {
        let m = Model::init(&[4], 9);
        let back = Model::from_json(&m.to_json()).unwrap();
        assert_eq!(m, back);

        let mut bad = m.clone();
        bad.layer_sizes[0] = 5;
        assert!(Model::from_json(&bad.to_json()).is_err());
    }
}

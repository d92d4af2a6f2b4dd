//! Pluggable online classifier and the hashed bag-of-words reference
//! implementation.
//!
//! The harness is model-agnostic: anything implementing [`Learner`] can
//! drive the policies and the trainer. The reference learner is a
//! multinomial logistic regression over hashed, L2-normalized token counts,
//! trained with an adaptive-moment gradient method.

use serde::{Deserialize, Serialize};

use crate::error::LearnerError;
use crate::stream::Example;

/// Online probabilistic classifier: probabilities, per-example loss,
/// fixed-dimension features and an in-place gradient step.
pub trait Learner: Clone {
    fn num_classes(&self) -> usize;
    fn feature_dim(&self) -> usize;

    /// Softmax class probabilities, one row per example; rows sum to 1.
    fn predict_proba(&self, batch: &[Example]) -> Vec<Vec<f64>>;

    /// Cross-entropy `-ln p_true` per example.
    fn per_example_loss(&self, batch: &[Example]) -> Result<Vec<f64>, LearnerError>;

    /// Deterministic per-example feature vectors of dimension
    /// [`Learner::feature_dim`].
    fn features(&self, batch: &[Example]) -> Vec<Vec<f64>>;

    /// One gradient step on the batch's mean cross-entropy.
    fn train_step(&mut self, batch: &[Example]) -> Result<(), LearnerError>;

    /// One local-adaptation step: a gradient step on the batch's mean
    /// cross-entropy combined with the proximal term `lambda * ||theta -
    /// theta_base||^2` that pulls the parameters back toward `base`. The
    /// proximal part is applied in closed form, so arbitrarily large
    /// `lambda` pins the parameters to `base` instead of diverging.
    fn adapt_step(
        &mut self,
        batch: &[Example],
        base: &Self,
        lambda: f64,
        lr: f64,
    ) -> Result<(), LearnerError>;
}

/// Hyperparameters of [`HashedBowLearner`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct LearnerConfig {
    /// Hashed feature dimension `d`.
    pub feature_dim: usize,
    pub learning_rate: f64,
    pub hash_seed: u64,
    /// Use a hash bit as the sign of each token's contribution.
    pub signed_hashing: bool,
}

impl Default for LearnerConfig {
    fn default() -> Self {
        Self {
            feature_dim: 1 << 15,
            learning_rate: 1e-3,
            hash_seed: 1,
            signed_hashing: false,
        }
    }
}

const ADAM_BETA1: f64 = 0.9;
const ADAM_BETA2: f64 = 0.999;
const ADAM_EPS: f64 = 1e-8;

fn splitmix64(mut x: u64) -> u64 {
    x = x.wrapping_add(0x9e37_79b9_7f4a_7c15);
    x = (x ^ (x >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    x = (x ^ (x >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    x ^ (x >> 31)
}

/// Multinomial logistic regression over hashed token counts.
///
/// Weights are dense `classes x d`; features are sparse per example, so the
/// forward pass costs O(tokens * classes) while the optimizer step is dense.
#[derive(Debug, Clone)]
pub struct HashedBowLearner {
    num_classes: usize,
    dim: usize,
    hash_seed: u64,
    signed: bool,
    lr: f64,
    weights: Vec<f64>,
    bias: Vec<f64>,
    adam_m: Vec<f64>,
    adam_v: Vec<f64>,
    adam_t: u64,
}

impl HashedBowLearner {
    pub fn new(num_classes: usize, config: &LearnerConfig) -> Self {
        let dim = config.feature_dim.max(1);
        let params = num_classes * dim + num_classes;
        Self {
            num_classes,
            dim,
            hash_seed: config.hash_seed,
            signed: config.signed_hashing,
            lr: config.learning_rate,
            weights: vec![0.0; num_classes * dim],
            bias: vec![0.0; num_classes],
            adam_m: vec![0.0; params],
            adam_v: vec![0.0; params],
            adam_t: 0,
        }
    }

    pub fn learning_rate(&self) -> f64 {
        self.lr
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn weights_mut(&mut self) -> &mut [f64] {
        &mut self.weights
    }

    pub fn bias(&self) -> &[f64] {
        &self.bias
    }

    pub fn bias_mut(&mut self) -> &mut [f64] {
        &mut self.bias
    }

    /// Sparse hashed token counts, L2-normalized, indices ascending.
    /// An empty token sequence yields the zero vector.
    pub fn sparse_features(&self, tokens: &[u32]) -> Vec<(usize, f64)> {
        if tokens.is_empty() {
            return Vec::new();
        }
        let mut counts = std::collections::BTreeMap::new();
        for &token in tokens {
            let h = splitmix64(token as u64 ^ self.hash_seed.rotate_left(17));
            let bucket = (h % self.dim as u64) as usize;
            let sign = if self.signed && (h >> 62) & 1 == 1 {
                -1.0f64
            } else {
                1.0
            };
            *counts.entry(bucket).or_insert(0.0f64) += sign;
        }
        let norm = counts.values().map(|&v| v * v).sum::<f64>().sqrt();
        if norm == 0.0 {
            return counts.into_iter().collect();
        }
        counts.into_iter().map(|(i, v)| (i, v / norm)).collect()
    }

    fn logits(&self, sparse: &[(usize, f64)]) -> Vec<f64> {
        let mut logits = self.bias.clone();
        for (logit, row) in logits.iter_mut().zip(self.weights.chunks_exact(self.dim)) {
            for &(j, v) in sparse {
                *logit += row[j] * v;
            }
        }
        logits
    }

    fn softmax(logits: &[f64]) -> Vec<f64> {
        let max = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let exps: Vec<f64> = logits.iter().map(|&l| (l - max).exp()).collect();
        let sum: f64 = exps.iter().sum();
        exps.into_iter().map(|e| e / sum).collect()
    }

    fn proba_one(&self, example: &Example) -> Vec<f64> {
        Self::softmax(&self.logits(&self.sparse_features(&example.tokens)))
    }

    fn true_class(&self, example: &Example) -> Result<usize, LearnerError> {
        let class = example.class_id.ok_or(LearnerError::MissingLabel {
            stream_id: example.stream_id,
        })?;
        if class as usize >= self.num_classes {
            return Err(LearnerError::ClassOutOfRange {
                class,
                num_classes: self.num_classes,
            });
        }
        Ok(class as usize)
    }

    /// Mean cross-entropy over the batch under the current parameters.
    pub fn mean_loss(&self, batch: &[Example]) -> Result<f64, LearnerError> {
        if batch.is_empty() {
            return Err(LearnerError::EmptyBatch);
        }
        let losses = self.per_example_loss(batch)?;
        Ok(losses.iter().sum::<f64>() / losses.len() as f64)
    }

    /// Gradient of the batch's mean cross-entropy: `(d/dW, d/db)` with the
    /// weight part flattened `classes x d` row-major.
    pub fn grad_mean_ce(&self, batch: &[Example]) -> Result<(Vec<f64>, Vec<f64>), LearnerError> {
        if batch.is_empty() {
            return Err(LearnerError::EmptyBatch);
        }
        let mut grad_w = vec![0.0; self.weights.len()];
        let mut grad_b = vec![0.0; self.bias.len()];
        let scale = 1.0 / batch.len() as f64;
        for example in batch {
            let true_class = self.true_class(example)?;
            let sparse = self.sparse_features(&example.tokens);
            let probs = Self::softmax(&self.logits(&sparse));
            for (c, &p) in probs.iter().enumerate() {
                let err = (p - if c == true_class { 1.0 } else { 0.0 }) * scale;
                grad_b[c] += err;
                let row = &mut grad_w[c * self.dim..(c + 1) * self.dim];
                for &(j, v) in &sparse {
                    row[j] += err * v;
                }
            }
        }
        Ok((grad_w, grad_b))
    }

    fn adam_update(&mut self, grad_w: &[f64], grad_b: &[f64]) {
        self.adam_t += 1;
        let t = self.adam_t as i32;
        let bias1 = 1.0 - ADAM_BETA1.powi(t);
        let bias2 = 1.0 - ADAM_BETA2.powi(t);
        let nw = self.weights.len();
        for (i, g) in grad_w.iter().chain(grad_b.iter()).enumerate() {
            let m = &mut self.adam_m[i];
            let v = &mut self.adam_v[i];
            *m = ADAM_BETA1 * *m + (1.0 - ADAM_BETA1) * g;
            *v = ADAM_BETA2 * *v + (1.0 - ADAM_BETA2) * g * g;
            let m_hat = *m / bias1;
            let v_hat = *v / bias2;
            let step = self.lr * m_hat / (v_hat.sqrt() + ADAM_EPS);
            if i < nw {
                self.weights[i] -= step;
            } else {
                self.bias[i - nw] -= step;
            }
        }
    }
}

impl Learner for HashedBowLearner {
    fn num_classes(&self) -> usize {
        self.num_classes
    }

    fn feature_dim(&self) -> usize {
        self.dim
    }

    fn predict_proba(&self, batch: &[Example]) -> Vec<Vec<f64>> {
        batch.iter().map(|e| self.proba_one(e)).collect()
    }

    fn per_example_loss(&self, batch: &[Example]) -> Result<Vec<f64>, LearnerError> {
        batch
            .iter()
            .map(|e| {
                let true_class = self.true_class(e)?;
                let p = self.proba_one(e)[true_class].max(f64::MIN_POSITIVE);
                Ok(-p.ln())
            })
            .collect()
    }

    fn features(&self, batch: &[Example]) -> Vec<Vec<f64>> {
        batch
            .iter()
            .map(|e| {
                let mut dense = vec![0.0f64; self.dim];
                for (j, v) in self.sparse_features(&e.tokens) {
                    dense[j] = v;
                }
                dense
            })
            .collect()
    }

    fn train_step(&mut self, batch: &[Example]) -> Result<(), LearnerError> {
        let (grad_w, grad_b) = self.grad_mean_ce(batch)?;
        self.adam_update(&grad_w, &grad_b);
        Ok(())
    }

    fn adapt_step(
        &mut self,
        batch: &[Example],
        base: &Self,
        lambda: f64,
        lr: f64,
    ) -> Result<(), LearnerError> {
        let (grad_w, grad_b) = self.grad_mean_ce(batch)?;
        let shrink = 1.0 + 2.0 * lr * lambda;
        for ((w, &g), &b) in self.weights.iter_mut().zip(&grad_w).zip(&base.weights) {
            *w = (*w - lr * g + 2.0 * lr * lambda * b) / shrink;
        }
        for ((bi, &g), &b) in self.bias.iter_mut().zip(&grad_b).zip(&base.bias) {
            *bi = (*bi - lr * g + 2.0 * lr * lambda * b) / shrink;
        }
        Ok(())
    }
}

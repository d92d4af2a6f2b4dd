//! Surprise: admit batches whose mean predictive entropy jumped relative to
//! the previous batch.
//!
//! The surprise of batch `t` is `s_t = H_t - H_{t-1}` where `H_t` is the
//! mean entropy (nats) of the model's output distribution over the batch.
//! Every example of the batch carries the score `s_t`; once the buffer is
//! full an example replaces the current minimum-score entry iff `s_t`
//! strictly exceeds that minimum, so the stored minimum never decreases.

use rand::RngCore;

use crate::error::PolicyError;
use crate::feedback::{FeedbackNeeds, ModelFeedback};
use crate::memory::MemoryBuffer;
use crate::stream::Example;

use super::{check_feedback_len, PolicyKind, PopulationPolicy, ScoreIndex};

/// Mean entropy of probability rows, in nats. Zero-probability entries
/// contribute nothing.
pub fn batch_mean_entropy(probs: &[Vec<f64>]) -> f64 {
    if probs.is_empty() {
        return 0.0;
    }
    let total: f64 = probs
        .iter()
        .map(|row| {
            row.iter()
                .map(|&p| if p > 0.0 { -p * p.ln() } else { 0.0 })
                .sum::<f64>()
        })
        .sum();
    total / probs.len() as f64
}

#[derive(Debug, Clone, Default)]
pub struct SurprisePolicy {
    prev_entropy: f64,
    scores: ScoreIndex,
}

impl SurprisePolicy {
    pub fn new() -> Self {
        Self::default()
    }

    /// Entropy of the previous batch (`H_{t-1}`), 0 before the first batch
    /// so the first surprise equals the first batch's entropy.
    pub fn previous_entropy(&self) -> f64 {
        self.prev_entropy
    }

    /// Smallest stored score, if the buffer holds any surprise entries.
    pub fn min_stored_score(&self) -> Option<f64> {
        self.scores.min().map(|(s, _)| s)
    }
}

impl PopulationPolicy for SurprisePolicy {
    fn kind(&self) -> PolicyKind {
        PolicyKind::Surprise
    }

    fn feedback_needs(&self) -> FeedbackNeeds {
        FeedbackNeeds {
            probs: true,
            ..FeedbackNeeds::NONE
        }
    }

    fn observe_batch(
        &mut self,
        buffer: &mut MemoryBuffer,
        batch: &[Example],
        feedback: Option<&ModelFeedback>,
        _rng: &mut dyn RngCore,
    ) -> Result<(), PolicyError> {
        if batch.is_empty() {
            return Ok(());
        }
        let feedback = feedback.ok_or(PolicyError::MissingFeedback {
            policy: "surprise",
            missing: "probability",
        })?;
        let probs = feedback.probs("surprise")?;
        check_feedback_len(probs.len(), batch.len())?;

        let entropy = batch_mean_entropy(probs);
        let surprise = entropy - self.prev_entropy;
        self.prev_entropy = entropy;

        for example in batch {
            if !buffer.is_full() {
                let receipt = buffer.insert(example.clone(), surprise, None)?;
                self.scores.insert(surprise, receipt.id);
                continue;
            }
            match self.scores.min() {
                Some((min_score, victim)) if surprise > min_score => {
                    buffer.evict(victim)?;
                    self.scores.remove(min_score, victim);
                    let receipt = buffer.insert(example.clone(), surprise, None)?;
                    self.scores.insert(surprise, receipt.id);
                }
                _ => {}
            }
        }
        Ok(())
    }
}

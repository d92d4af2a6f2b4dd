//! Minimum margin: keep the most uncertain examples.
//!
//! The margin of an example is the probability of its true class minus the
//! highest probability among the other classes; it is negative when the
//! model misclassifies. Once full, an incoming example replaces the current
//! maximum-margin entry iff its own margin is strictly smaller, so the
//! stored maximum never increases.

use rand::RngCore;

use crate::error::PolicyError;
use crate::feedback::{FeedbackNeeds, ModelFeedback};
use crate::memory::MemoryBuffer;
use crate::stream::Example;

use super::{check_feedback_len, PolicyKind, PopulationPolicy, ScoreIndex};

/// `p_true - max_{c != true} p_c`.
pub fn margin(probs: &[f64], true_class: usize) -> f64 {
    let p_true = probs[true_class];
    let p_other = probs
        .iter()
        .enumerate()
        .filter(|&(c, _)| c != true_class)
        .map(|(_, &p)| p)
        .fold(0.0f64, f64::max);
    p_true - p_other
}

#[derive(Debug, Clone, Default)]
pub struct MinMarginPolicy {
    scores: ScoreIndex,
}

impl MinMarginPolicy {
    pub fn new() -> Self {
        Self::default()
    }

    /// Largest stored margin, if any entry is stored.
    pub fn max_stored_margin(&self) -> Option<f64> {
        self.scores.max().map(|(s, _)| s)
    }
}

impl PopulationPolicy for MinMarginPolicy {
    fn kind(&self) -> PolicyKind {
        PolicyKind::MinMargin
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
            policy: "min_margin",
            missing: "probability",
        })?;
        let probs = feedback.probs("min_margin")?;
        check_feedback_len(probs.len(), batch.len())?;

        for (example, row) in batch.iter().zip(probs) {
            let true_class = example.class_id.ok_or(PolicyError::MissingClassLabel {
                stream_id: example.stream_id,
            })? as usize;
            if true_class >= row.len() {
                return Err(PolicyError::FeedbackShape {
                    feedback_len: row.len(),
                    batch_len: true_class + 1,
                });
            }
            let m = margin(row, true_class);
            if !buffer.is_full() {
                let receipt = buffer.insert(example.clone(), m, None)?;
                self.scores.insert(m, receipt.id);
                continue;
            }
            match self.scores.max() {
                Some((max_margin, victim)) if m < max_margin => {
                    buffer.evict(victim)?;
                    self.scores.remove(max_margin, victim);
                    let receipt = buffer.insert(example.clone(), m, None)?;
                    self.scores.insert(m, receipt.id);
                }
                _ => {}
            }
        }
        Ok(())
    }
}

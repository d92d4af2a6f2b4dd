//! Maximum loss: store and override whole batches, scored by batch mean
//! cross-entropy.
//!
//! The buffer is organized as `floor(M / batch_size)` slots, each holding
//! one batch. While slots are free the incoming batch takes one; afterwards
//! it replaces the minimum-score slot iff its own mean loss is strictly
//! higher, so the stored minimum never decreases.

use rand::RngCore;

use crate::error::PolicyError;
use crate::feedback::{FeedbackNeeds, ModelFeedback};
use crate::memory::{EntryId, MemoryBuffer};
use crate::stream::Example;

use super::{PolicyKind, PopulationPolicy};

#[derive(Debug, Clone)]
struct BatchSlot {
    score: f64,
    entries: Vec<EntryId>,
}

#[derive(Debug, Clone)]
pub struct MaxLossPolicy {
    slot_size: usize,
    max_slots: usize,
    slots: Vec<BatchSlot>,
}

impl MaxLossPolicy {
    pub fn new(capacity: usize, batch_size: usize) -> Result<Self, PolicyError> {
        let max_slots = capacity / batch_size;
        if max_slots == 0 {
            return Err(PolicyError::CapacityBelowBatch {
                capacity,
                batch_size,
            });
        }
        Ok(Self {
            slot_size: batch_size,
            max_slots,
            slots: Vec::with_capacity(max_slots),
        })
    }

    pub fn slot_count(&self) -> usize {
        self.max_slots
    }

    pub fn occupied_slots(&self) -> usize {
        self.slots.len()
    }

    /// Scores of the occupied slots, in slot order.
    pub fn slot_scores(&self) -> Vec<f64> {
        self.slots.iter().map(|s| s.score).collect()
    }

    pub fn min_slot_score(&self) -> Option<f64> {
        self.slots.iter().map(|s| s.score).fold(None, |acc, s| {
            Some(match acc {
                Some(a) if a <= s => a,
                _ => s,
            })
        })
    }

    /// Index of the minimum-score slot; first such slot on ties.
    fn min_slot_index(&self) -> Option<usize> {
        let mut best: Option<(usize, f64)> = None;
        for (i, slot) in self.slots.iter().enumerate() {
            match best {
                Some((_, score)) if score <= slot.score => {}
                _ => best = Some((i, slot.score)),
            }
        }
        best.map(|(i, _)| i)
    }

    fn store_batch(
        &mut self,
        slot_index: usize,
        buffer: &mut MemoryBuffer,
        batch: &[Example],
        score: f64,
    ) -> Result<(), PolicyError> {
        let mut entries = Vec::with_capacity(batch.len());
        for example in batch {
            let receipt = buffer.insert(example.clone(), score, Some(slot_index as u32))?;
            entries.push(receipt.id);
        }
        self.slots[slot_index] = BatchSlot { score, entries };
        Ok(())
    }
}

impl PopulationPolicy for MaxLossPolicy {
    fn kind(&self) -> PolicyKind {
        PolicyKind::MaxLoss
    }

    fn feedback_needs(&self) -> FeedbackNeeds {
        FeedbackNeeds {
            loss: true,
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
        if batch.len() > self.slot_size {
            return Err(PolicyError::BatchTooLarge {
                batch_len: batch.len(),
                slot_size: self.slot_size,
            });
        }
        let feedback = feedback.ok_or(PolicyError::MissingFeedback {
            policy: "max_loss",
            missing: "loss",
        })?;
        let score = feedback.batch_mean_loss("max_loss")?;

        if self.slots.len() < self.max_slots {
            let slot_index = self.slots.len();
            self.slots.push(BatchSlot {
                score,
                entries: Vec::new(),
            });
            self.store_batch(slot_index, buffer, batch, score)?;
            return Ok(());
        }
        let slot_index = self.min_slot_index().expect("slots are occupied");
        if score > self.slots[slot_index].score {
            let old = std::mem::take(&mut self.slots[slot_index].entries);
            for id in old {
                buffer.evict(id)?;
            }
            self.store_batch(slot_index, buffer, batch, score)?;
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::rngs::StdRng;
    use rand::SeedableRng;

    fn batch(start: u64, n: usize) -> Vec<Example> {
        (0..n as u64)
            .map(|i| Example::new(start + i, 0, Some(0), vec![(start + i) as u32]))
            .collect()
    }

    fn loss_feedback(n: usize, mean: f64) -> ModelFeedback {
        ModelFeedback::new().with_losses(vec![mean; n]).unwrap()
    }

    #[test]
    fn slot_count_is_capacity_over_batch_size() {
        let policy = MaxLossPolicy::new(64, 32).unwrap();
        assert_eq!(policy.slot_count(), 2);
    }

    #[test]
    fn capacity_below_batch_is_a_configuration_error() {
        assert!(matches!(
            MaxLossPolicy::new(16, 32),
            Err(PolicyError::CapacityBelowBatch { .. })
        ));
    }

    #[test]
    fn incoming_score_replaces_minimum_slot() {
        let mut policy = MaxLossPolicy::new(8, 4).unwrap();
        let mut buffer = MemoryBuffer::with_capacity(8);
        let mut rng = StdRng::seed_from_u64(0);

        policy
            .observe_batch(
                &mut buffer,
                &batch(0, 4),
                Some(&loss_feedback(4, 0.5)),
                &mut rng,
            )
            .unwrap();
        policy
            .observe_batch(
                &mut buffer,
                &batch(4, 4),
                Some(&loss_feedback(4, 0.9)),
                &mut rng,
            )
            .unwrap();
        // 0.7 replaces the 0.5 slot
        policy
            .observe_batch(
                &mut buffer,
                &batch(8, 4),
                Some(&loss_feedback(4, 0.7)),
                &mut rng,
            )
            .unwrap();
        let mut scores = policy.slot_scores();
        scores.sort_by(f64::total_cmp);
        assert_eq!(scores, vec![0.7, 0.9]);
        let stored: Vec<u64> = buffer.iter().map(|(_, e)| e.example.stream_id).collect();
        assert!(!stored.contains(&0));
        assert!(stored.contains(&8));
    }

    #[test]
    fn lower_score_is_rejected() {
        let mut policy = MaxLossPolicy::new(8, 4).unwrap();
        let mut buffer = MemoryBuffer::with_capacity(8);
        let mut rng = StdRng::seed_from_u64(0);
        policy
            .observe_batch(
                &mut buffer,
                &batch(0, 4),
                Some(&loss_feedback(4, 0.5)),
                &mut rng,
            )
            .unwrap();
        policy
            .observe_batch(
                &mut buffer,
                &batch(4, 4),
                Some(&loss_feedback(4, 0.9)),
                &mut rng,
            )
            .unwrap();
        policy
            .observe_batch(
                &mut buffer,
                &batch(8, 4),
                Some(&loss_feedback(4, 0.4)),
                &mut rng,
            )
            .unwrap();
        let mut scores = policy.slot_scores();
        scores.sort_by(f64::total_cmp);
        assert_eq!(scores, vec![0.5, 0.9]);
    }

    #[test]
    fn partial_batches_occupy_one_slot() {
        let mut policy = MaxLossPolicy::new(8, 4).unwrap();
        let mut buffer = MemoryBuffer::with_capacity(8);
        let mut rng = StdRng::seed_from_u64(0);
        policy
            .observe_batch(
                &mut buffer,
                &batch(0, 3),
                Some(&loss_feedback(3, 0.5)),
                &mut rng,
            )
            .unwrap();
        assert_eq!(policy.occupied_slots(), 1);
        assert_eq!(buffer.len(), 3);
    }

    #[test]
    fn oversized_batch_errors() {
        let mut policy = MaxLossPolicy::new(8, 4).unwrap();
        let mut buffer = MemoryBuffer::with_capacity(8);
        let mut rng = StdRng::seed_from_u64(0);
        let err = policy
            .observe_batch(
                &mut buffer,
                &batch(0, 5),
                Some(&loss_feedback(5, 0.5)),
                &mut rng,
            )
            .unwrap_err();
        assert_eq!(
            err,
            PolicyError::BatchTooLarge {
                batch_len: 5,
                slot_size: 4
            }
        );
    }
}

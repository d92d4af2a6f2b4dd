//! The seven memory population strategies behind one observe-batch
//! interface.
//!
//! Score-free policies (naive random, reservoir, ring buffer) look only at
//! the incoming examples; criteria policies (surprise, min margin, max loss,
//! mean of features) also consume [`ModelFeedback`] computed from the model
//! state before that batch's gradient step.

mod max_loss;
mod min_margin;
mod mof;
mod naive_random;
mod reservoir;
mod ring_buffer;
mod surprise;

pub use max_loss::MaxLossPolicy;
pub use min_margin::MinMarginPolicy;
pub use mof::MofPolicy;
pub use naive_random::NaiveRandomPolicy;
pub use reservoir::ReservoirPolicy;
pub use ring_buffer::RingBufferPolicy;
pub use surprise::SurprisePolicy;

use std::collections::{BTreeMap, BTreeSet};

use rand::RngCore;
use serde::{Deserialize, Serialize};

use crate::error::PolicyError;
use crate::feedback::{FeedbackNeeds, ModelFeedback};
use crate::memory::{EntryId, MemoryBuffer};
use crate::stream::Example;

/// The population strategies studied by the harness.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PolicyKind {
    NaiveRandom,
    Reservoir,
    RingBuffer,
    Surprise,
    MinMargin,
    MaxLoss,
    Mof,
}

impl PolicyKind {
    pub const ALL: [PolicyKind; 7] = [
        PolicyKind::NaiveRandom,
        PolicyKind::Reservoir,
        PolicyKind::RingBuffer,
        PolicyKind::Surprise,
        PolicyKind::MinMargin,
        PolicyKind::MaxLoss,
        PolicyKind::Mof,
    ];

    pub fn name(&self) -> &'static str {
        match self {
            PolicyKind::NaiveRandom => "naive_random",
            PolicyKind::Reservoir => "reservoir",
            PolicyKind::RingBuffer => "ring_buffer",
            PolicyKind::Surprise => "surprise",
            PolicyKind::MinMargin => "min_margin",
            PolicyKind::MaxLoss => "max_loss",
            PolicyKind::Mof => "mof",
        }
    }

    pub fn parse(s: &str) -> Option<PolicyKind> {
        PolicyKind::ALL.into_iter().find(|k| k.name() == s)
    }

    /// Whether per-key bookkeeping (ring buffer, MoF) follows class labels
    /// or task ids.
    pub fn uses_keys(&self) -> bool {
        matches!(self, PolicyKind::RingBuffer | PolicyKind::Mof)
    }
}

impl std::fmt::Display for PolicyKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

/// Key space for class-based policies: per class, or per task for streams
/// without class labels.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum KeyMode {
    #[default]
    Class,
    Task,
}

/// Grouping key of one example under a [`KeyMode`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum PolicyKey {
    Class(u32),
    Task(u16),
}

pub(crate) fn key_of(mode: KeyMode, example: &Example) -> Result<PolicyKey, PolicyError> {
    match mode {
        KeyMode::Class => {
            example
                .class_id
                .map(PolicyKey::Class)
                .ok_or(PolicyError::MissingClassLabel {
                    stream_id: example.stream_id,
                })
        }
        KeyMode::Task => Ok(PolicyKey::Task(example.task_id)),
    }
}

/// One memory population strategy.
///
/// `observe_batch` must preserve the buffer's capacity invariant, store only
/// examples from `batch`, and be deterministic given the rng state.
pub trait PopulationPolicy {
    fn kind(&self) -> PolicyKind;

    /// Feedback components `observe_batch` requires.
    fn feedback_needs(&self) -> FeedbackNeeds {
        FeedbackNeeds::NONE
    }

    fn observe_batch(
        &mut self,
        buffer: &mut MemoryBuffer,
        batch: &[Example],
        feedback: Option<&ModelFeedback>,
        rng: &mut dyn RngCore,
    ) -> Result<(), PolicyError>;
}

/// Build a policy from its kind and the run parameters it needs.
///
/// `capacity_fraction` sizes the naive-random admission probability,
/// `capacity` and `batch_size` the max-loss batch slots; `key_mode` selects
/// the key space of the ring buffer and MoF policies.
pub fn build_policy(
    kind: PolicyKind,
    capacity_fraction: f64,
    capacity: usize,
    batch_size: usize,
    key_mode: KeyMode,
) -> Result<Box<dyn PopulationPolicy>, PolicyError> {
    Ok(match kind {
        PolicyKind::NaiveRandom => Box::new(NaiveRandomPolicy::new(capacity_fraction)),
        PolicyKind::Reservoir => Box::new(ReservoirPolicy::new()),
        PolicyKind::RingBuffer => Box::new(RingBufferPolicy::new(key_mode)),
        PolicyKind::Surprise => Box::new(SurprisePolicy::new()),
        PolicyKind::MinMargin => Box::new(MinMarginPolicy::new()),
        PolicyKind::MaxLoss => Box::new(MaxLossPolicy::new(capacity, batch_size)?),
        PolicyKind::Mof => Box::new(MofPolicy::new(key_mode)),
    })
}

pub(crate) fn check_feedback_len(feedback_len: usize, batch_len: usize) -> Result<(), PolicyError> {
    if feedback_len != batch_len {
        return Err(PolicyError::FeedbackShape {
            feedback_len,
            batch_len,
        });
    }
    Ok(())
}

/// Total-order wrapper so scores can key ordered maps. Policy scores are
/// finite by construction; ordering follows `f64::total_cmp`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub(crate) struct OrdF64(pub f64);

impl Eq for OrdF64 {}

impl PartialOrd for OrdF64 {
    fn partial_cmp(&self, other: &Self) -> Option<std::cmp::Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for OrdF64 {
    fn cmp(&self, other: &Self) -> std::cmp::Ordering {
        self.0.total_cmp(&other.0)
    }
}

/// Ordered (score, entry) index used by the per-example criteria policies to
/// find their extremal entry in O(log n). Ties resolve to the smallest entry
/// id, i.e. the oldest write, which keeps eviction deterministic.
#[derive(Debug, Default, Clone)]
pub(crate) struct ScoreIndex {
    by_score: BTreeMap<OrdF64, BTreeSet<EntryId>>,
    len: usize,
}

impl ScoreIndex {
    pub fn insert(&mut self, score: f64, id: EntryId) {
        self.by_score.entry(OrdF64(score)).or_default().insert(id);
        self.len += 1;
    }

    pub fn remove(&mut self, score: f64, id: EntryId) {
        if let Some(set) = self.by_score.get_mut(&OrdF64(score)) {
            if set.remove(&id) {
                self.len -= 1;
            }
            if set.is_empty() {
                self.by_score.remove(&OrdF64(score));
            }
        }
    }

    pub fn min(&self) -> Option<(f64, EntryId)> {
        self.by_score
            .iter()
            .next()
            .map(|(score, ids)| (score.0, *ids.iter().next().expect("non-empty score bucket")))
    }

    pub fn max(&self) -> Option<(f64, EntryId)> {
        self.by_score
            .iter()
            .next_back()
            .map(|(score, ids)| (score.0, *ids.iter().next().expect("non-empty score bucket")))
    }

    #[allow(dead_code)]
    pub fn len(&self) -> usize {
        self.len
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn score_index_tracks_extremes() {
        let mut idx = ScoreIndex::default();
        idx.insert(0.5, EntryId(1));
        idx.insert(-0.25, EntryId(2));
        idx.insert(0.5, EntryId(0));
        assert_eq!(idx.min(), Some((-0.25, EntryId(2))));
        // tie on 0.5 resolves to the smaller id
        idx.remove(-0.25, EntryId(2));
        assert_eq!(idx.min(), Some((0.5, EntryId(0))));
        assert_eq!(idx.max(), Some((0.5, EntryId(0))));
    }

    #[test]
    fn policy_kind_names_round_trip() {
        for kind in PolicyKind::ALL {
            assert_eq!(PolicyKind::parse(kind.name()), Some(kind));
        }
        assert_eq!(PolicyKind::parse("bogus"), None);
    }
}

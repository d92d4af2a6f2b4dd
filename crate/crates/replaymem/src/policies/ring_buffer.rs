//! Ring buffer: a FIFO queue per key with an even capacity split.
//!
//! Keys (classes, or tasks in task mode) are discovered online. Each
//! discovery recomputes the quota `floor(M / keys)` and trims every
//! over-quota queue from its oldest end, so the memory always holds the
//! latest observations of each key. Remainder slots (`M mod keys`) stay
//! unused.

use std::collections::{BTreeMap, VecDeque};

use rand::RngCore;

use crate::error::PolicyError;
use crate::feedback::ModelFeedback;
use crate::memory::{EntryId, MemoryBuffer};
use crate::stream::Example;

use super::{key_of, KeyMode, PolicyKey, PolicyKind, PopulationPolicy};

#[derive(Debug, Clone)]
pub struct RingBufferPolicy {
    key_mode: KeyMode,
    queues: BTreeMap<PolicyKey, VecDeque<EntryId>>,
    quota: usize,
}

impl RingBufferPolicy {
    pub fn new(key_mode: KeyMode) -> Self {
        Self {
            key_mode,
            queues: BTreeMap::new(),
            quota: 0,
        }
    }

    /// Current per-key allocation `floor(M / discovered keys)`.
    pub fn quota(&self) -> usize {
        self.quota
    }

    pub fn discovered_keys(&self) -> usize {
        self.queues.len()
    }

    fn discover(&mut self, key: PolicyKey, buffer: &mut MemoryBuffer) -> Result<(), PolicyError> {
        if self.queues.contains_key(&key) {
            return Ok(());
        }
        self.queues.insert(key, VecDeque::new());
        self.quota = buffer.capacity() / self.queues.len();
        // shrink every queue that now exceeds the reduced quota
        for queue in self.queues.values_mut() {
            while queue.len() > self.quota {
                let oldest = queue.pop_front().expect("non-empty queue");
                buffer.evict(oldest)?;
            }
        }
        Ok(())
    }
}

impl PopulationPolicy for RingBufferPolicy {
    fn kind(&self) -> PolicyKind {
        PolicyKind::RingBuffer
    }

    fn observe_batch(
        &mut self,
        buffer: &mut MemoryBuffer,
        batch: &[Example],
        _feedback: Option<&ModelFeedback>,
        _rng: &mut dyn RngCore,
    ) -> Result<(), PolicyError> {
        for example in batch {
            let key = key_of(self.key_mode, example)?;
            self.discover(key, buffer)?;
            if self.quota == 0 {
                continue;
            }
            let queue = self.queues.get_mut(&key).expect("discovered key");
            if queue.len() == self.quota {
                let oldest = queue.pop_front().expect("queue at quota");
                buffer.evict(oldest)?;
            }
            let receipt = buffer.insert(example.clone(), 0.0, None)?;
            self.queues
                .get_mut(&key)
                .expect("discovered key")
                .push_back(receipt.id);
        }
        Ok(())
    }
}

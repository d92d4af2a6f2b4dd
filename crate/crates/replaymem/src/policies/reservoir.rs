//! Reservoir sampling: maintain a uniform sample of the stream seen so far.
//!
//! With `N` the number of examples observed and `M` the capacity, each new
//! example is kept with probability `M/N`, replacing a uniformly random
//! entry. Implemented as the classic single-draw variant: draw
//! `j in [0, N)` and replace position `j` when `j < M`, which realizes both
//! the admission probability and the uniform victim choice.

use rand::{Rng, RngCore};

use crate::error::PolicyError;
use crate::feedback::ModelFeedback;
use crate::memory::MemoryBuffer;
use crate::stream::Example;

use super::{PolicyKind, PopulationPolicy};

#[derive(Debug, Clone, Default)]
pub struct ReservoirPolicy {
    seen: u64,
}

impl ReservoirPolicy {
    pub fn new() -> Self {
        Self::default()
    }

    /// Total examples observed so far (the `N` of the `M/N` rule).
    pub fn seen(&self) -> u64 {
        self.seen
    }
}

impl PopulationPolicy for ReservoirPolicy {
    fn kind(&self) -> PolicyKind {
        PolicyKind::Reservoir
    }

    fn observe_batch(
        &mut self,
        buffer: &mut MemoryBuffer,
        batch: &[Example],
        _feedback: Option<&ModelFeedback>,
        rng: &mut dyn RngCore,
    ) -> Result<(), PolicyError> {
        for example in batch {
            self.seen += 1;
            if !buffer.is_full() {
                buffer.insert(example.clone(), 0.0, None)?;
                continue;
            }
            let j = rng.gen_range(0..self.seen);
            if (j as usize) < buffer.capacity() {
                let victim = buffer.id_at(j as usize).expect("slot within filled buffer");
                buffer.evict(victim)?;
                buffer.insert(example.clone(), 0.0, None)?;
            }
        }
        Ok(())
    }
}

//! Naive random: admit each streamed example independently with the memory
//! capacity fraction as probability, overwriting a uniformly random victim
//! once the buffer is full.

use rand::{Rng, RngCore};

use crate::error::PolicyError;
use crate::feedback::ModelFeedback;
use crate::memory::MemoryBuffer;
use crate::stream::Example;

use super::{PolicyKind, PopulationPolicy};

#[derive(Debug, Clone)]
pub struct NaiveRandomPolicy {
    store_probability: f64,
}

impl NaiveRandomPolicy {
    pub fn new(store_probability: f64) -> Self {
        Self {
            store_probability: store_probability.clamp(0.0, 1.0),
        }
    }

    pub fn store_probability(&self) -> f64 {
        self.store_probability
    }
}

impl PopulationPolicy for NaiveRandomPolicy {
    fn kind(&self) -> PolicyKind {
        PolicyKind::NaiveRandom
    }

    fn observe_batch(
        &mut self,
        buffer: &mut MemoryBuffer,
        batch: &[Example],
        _feedback: Option<&ModelFeedback>,
        rng: &mut dyn RngCore,
    ) -> Result<(), PolicyError> {
        for example in batch {
            if rng.gen::<f64>() >= self.store_probability {
                continue;
            }
            if buffer.is_full() {
                let victim = buffer
                    .id_at(rng.gen_range(0..buffer.len()))
                    .expect("full buffer has entries");
                buffer.evict(victim)?;
            }
            buffer.insert(example.clone(), 0.0, None)?;
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::rngs::StdRng;
    use rand::SeedableRng;

    fn stream(n: u64) -> Vec<Example> {
        (0..n)
            .map(|i| Example::new(i, 0, Some(0), vec![i as u32]))
            .collect()
    }

    fn run(p: f64, capacity: usize, examples: &[Example], seed: u64) -> MemoryBuffer {
        let mut policy = NaiveRandomPolicy::new(p);
        let mut buffer = MemoryBuffer::with_capacity(capacity);
        let mut rng = StdRng::seed_from_u64(seed);
        for chunk in examples.chunks(32) {
            policy
                .observe_batch(&mut buffer, chunk, None, &mut rng)
                .unwrap();
        }
        buffer
    }

    #[test]
    fn probability_one_with_room_stores_everything() {
        let examples = stream(50);
        let buffer = run(1.0, 50, &examples, 0);
        assert_eq!(buffer.len(), 50);
    }

    #[test]
    fn probability_zero_stores_nothing() {
        let examples = stream(100);
        let buffer = run(0.0, 10, &examples, 0);
        assert!(buffer.is_empty());
    }

    #[test]
    fn empty_stream_leaves_buffer_empty() {
        let buffer = run(0.5, 10, &[], 0);
        assert!(buffer.is_empty());
    }

    /// Monte Carlo oracle: admissions are Binomial(n, p); the final count is
    /// the admission count capped at capacity. With p = 0.1 over 1e4
    /// examples and M = 1e3, every seed must land within 3 sigma below the
    /// cap and never above it.
    #[test]
    fn final_count_tracks_binomial_admissions() {
        let examples = stream(10_000);
        let sigma = (10_000.0f64 * 0.1 * 0.9).sqrt();
        for seed in 0..100 {
            let buffer = run(0.1, 1_000, &examples, seed);
            assert!(buffer.len() <= 1_000);
            assert!(
                buffer.len() as f64 >= 1_000.0 - 3.0 * sigma,
                "seed {seed}: count {}",
                buffer.len()
            );
        }
    }

    /// Once full, admissions overwrite uniformly random victims, so the
    /// expected composition stays proportional to task sizes.
    #[test]
    fn overwrite_keeps_capacity_once_full() {
        let examples = stream(1_000);
        let buffer = run(1.0, 64, &examples, 3);
        assert_eq!(buffer.len(), 64);
        assert!(buffer.check_index_consistency());
    }
}

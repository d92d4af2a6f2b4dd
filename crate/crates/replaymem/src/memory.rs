//! Capacity-bounded episodic memory with scored entries, uniform replay
//! sampling and composition introspection.
//!
//! The buffer never evicts on its own: population policies decide what to
//! remove and call [`MemoryBuffer::evict`] explicitly, so the capacity
//! invariant (`len() <= capacity()`) holds across any operation sequence.

use std::collections::{BTreeMap, BTreeSet, HashMap};

use rand::seq::index::sample as index_sample;
use rand::Rng;

use crate::error::MemoryError;
use crate::stream::{ClassId, Example, TaskId};

/// Stable handle to a stored entry; survives internal reordering.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct EntryId(pub u64);

/// Confirmation of a successful write.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct WriteReceipt {
    pub id: EntryId,
    /// Monotone insertion counter, strictly increasing across writes.
    pub ordinal: u64,
}

/// A stored example together with its policy bookkeeping.
#[derive(Debug, Clone, PartialEq)]
pub struct MemoryEntry {
    pub example: Example,
    /// Policy-specific score (surprise, margin, batch mean loss,
    /// distance-to-mean); 0 for score-free policies.
    pub score: f64,
    pub insert_ordinal: u64,
    /// Slot index for batch-granularity policies.
    pub batch_slot: Option<u32>,
}

/// Per-task composition of the buffer: raw fractions of stored entries and
/// shares normalized by each task's class count. Both families sum to 1 for
/// a non-empty buffer; an empty buffer yields all zeros.
#[derive(Debug, Clone, PartialEq)]
pub struct CompositionReport {
    pub counts: BTreeMap<TaskId, usize>,
    pub raw: BTreeMap<TaskId, f64>,
    pub normalized: BTreeMap<TaskId, f64>,
}

/// Capacity-bounded store of [`MemoryEntry`] values.
///
/// Entries live in a dense vector for O(1) uniform sampling; class and task
/// indices are kept eagerly in sync because composition reports are queried
/// after every task.
#[derive(Debug, Clone)]
pub struct MemoryBuffer {
    capacity: usize,
    entries: Vec<MemoryEntry>,
    ids: Vec<EntryId>,
    index_of: HashMap<EntryId, usize>,
    by_class: BTreeMap<ClassId, BTreeSet<EntryId>>,
    by_task: BTreeMap<TaskId, BTreeSet<EntryId>>,
    next_id: u64,
    next_ordinal: u64,
}

impl MemoryBuffer {
    /// Buffer sized as `floor(capacity_fraction * total_stream_size)`.
    pub fn new(capacity_fraction: f64, total_stream_size: u64) -> Result<Self, MemoryError> {
        let capacity = (capacity_fraction * total_stream_size as f64).floor() as usize;
        if capacity == 0 {
            return Err(MemoryError::ZeroCapacity {
                fraction: capacity_fraction,
                stream_size: total_stream_size,
            });
        }
        Ok(Self::with_capacity(capacity))
    }

    /// Buffer holding at most `capacity` examples.
    pub fn with_capacity(capacity: usize) -> Self {
        Self {
            capacity,
            entries: Vec::with_capacity(capacity),
            ids: Vec::with_capacity(capacity),
            index_of: HashMap::with_capacity(capacity),
            by_class: BTreeMap::new(),
            by_task: BTreeMap::new(),
            next_id: 0,
            next_ordinal: 0,
        }
    }

    pub fn capacity(&self) -> usize {
        self.capacity
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn is_full(&self) -> bool {
        self.entries.len() >= self.capacity
    }

    pub fn get(&self, id: EntryId) -> Option<&MemoryEntry> {
        self.index_of.get(&id).map(|&i| &self.entries[i])
    }

    /// Entry ids currently stored, in unspecified order.
    pub fn ids(&self) -> &[EntryId] {
        &self.ids
    }

    /// Iterate `(id, entry)` pairs in unspecified order.
    pub fn iter(&self) -> impl Iterator<Item = (EntryId, &MemoryEntry)> {
        self.ids.iter().copied().zip(self.entries.iter())
    }

    /// Ids of entries with the given class, oldest first.
    pub fn class_members(&self, class: ClassId) -> Vec<EntryId> {
        self.by_class
            .get(&class)
            .map(|s| s.iter().copied().collect())
            .unwrap_or_default()
    }

    pub fn task_count(&self, task: TaskId) -> usize {
        self.by_task.get(&task).map_or(0, BTreeSet::len)
    }

    pub fn class_count(&self, class: ClassId) -> usize {
        self.by_class.get(&class).map_or(0, BTreeSet::len)
    }

    /// Store an entry built from `example`. Fails when full: policies must
    /// evict explicitly before retrying.
    pub fn insert(
        &mut self,
        example: Example,
        score: f64,
        batch_slot: Option<u32>,
    ) -> Result<WriteReceipt, MemoryError> {
        if self.is_full() {
            return Err(MemoryError::BufferFull {
                capacity: self.capacity,
            });
        }
        let id = EntryId(self.next_id);
        self.next_id += 1;
        let ordinal = self.next_ordinal;
        self.next_ordinal += 1;

        if let Some(class) = example.class_id {
            self.by_class.entry(class).or_default().insert(id);
        }
        self.by_task.entry(example.task_id).or_default().insert(id);
        self.index_of.insert(id, self.entries.len());
        self.ids.push(id);
        self.entries.push(MemoryEntry {
            example,
            score,
            insert_ordinal: ordinal,
            batch_slot,
        });
        Ok(WriteReceipt { id, ordinal })
    }

    /// Remove an entry by reference and return it. Index keys whose last
    /// member was removed disappear from the index maps.
    pub fn evict(&mut self, id: EntryId) -> Result<MemoryEntry, MemoryError> {
        let idx = *self
            .index_of
            .get(&id)
            .ok_or(MemoryError::DanglingEntry(id))?;
        self.index_of.remove(&id);
        let entry = self.entries.swap_remove(idx);
        self.ids.swap_remove(idx);
        if idx < self.entries.len() {
            let moved = self.ids[idx];
            self.index_of.insert(moved, idx);
        }

        if let Some(class) = entry.example.class_id {
            if let Some(set) = self.by_class.get_mut(&class) {
                set.remove(&id);
                if set.is_empty() {
                    self.by_class.remove(&class);
                }
            }
        }
        if let Some(set) = self.by_task.get_mut(&entry.example.task_id) {
            set.remove(&id);
            if set.is_empty() {
                self.by_task.remove(&entry.example.task_id);
            }
        }
        Ok(entry)
    }

    /// The id at a dense position; positions shift on eviction. Used by
    /// policies that replace a uniformly random victim.
    pub fn id_at(&self, position: usize) -> Option<EntryId> {
        self.ids.get(position).copied()
    }

    /// Draw `batch_size` examples with uniform probability, without
    /// replacement when the buffer is large enough (with replacement
    /// otherwise). Deterministic given the rng state.
    pub fn sample_replay_batch<R: Rng + ?Sized>(
        &self,
        batch_size: usize,
        rng: &mut R,
    ) -> Result<Vec<Example>, MemoryError> {
        if self.is_empty() {
            return Err(MemoryError::EmptyBuffer);
        }
        let n = self.entries.len();
        let batch = if n >= batch_size {
            index_sample(rng, n, batch_size)
                .into_iter()
                .map(|i| self.entries[i].example.clone())
                .collect()
        } else {
            (0..batch_size)
                .map(|_| self.entries[rng.gen_range(0..n)].example.clone())
                .collect()
        };
        Ok(batch)
    }

    /// Per-task raw fraction `count_t / len` and class-normalized share
    /// `(count_t / classes_t) / sum_u (count_u / classes_u)`.
    ///
    /// `class_counts` lists every task of the experiment with its class
    /// count; tasks without stored entries report zero.
    pub fn composition(&self, class_counts: &BTreeMap<TaskId, u32>) -> CompositionReport {
        let mut counts = BTreeMap::new();
        let mut raw = BTreeMap::new();
        let mut normalized = BTreeMap::new();
        let total = self.entries.len();

        let mut density_sum = 0.0;
        for (&task, &classes) in class_counts {
            let count = self.task_count(task);
            counts.insert(task, count);
            density_sum += count as f64 / classes.max(1) as f64;
        }
        for (&task, &classes) in class_counts {
            let count = counts[&task];
            let raw_frac = if total == 0 {
                0.0
            } else {
                count as f64 / total as f64
            };
            let share = if density_sum == 0.0 {
                0.0
            } else {
                (count as f64 / classes.max(1) as f64) / density_sum
            };
            raw.insert(task, raw_frac);
            normalized.insert(task, share);
        }
        CompositionReport {
            counts,
            raw,
            normalized,
        }
    }

    /// Check that both index maps exactly partition the stored entries.
    /// Intended for tests and debug assertions.
    pub fn check_index_consistency(&self) -> bool {
        let class_total: usize = self.by_class.values().map(BTreeSet::len).sum();
        let task_total: usize = self.by_task.values().map(BTreeSet::len).sum();
        let labeled = self
            .entries
            .iter()
            .filter(|e| e.example.class_id.is_some())
            .count();
        if class_total != labeled || task_total != self.entries.len() {
            return false;
        }
        self.iter().all(|(id, entry)| {
            let class_ok = match entry.example.class_id {
                Some(c) => self.by_class.get(&c).is_some_and(|s| s.contains(&id)),
                None => true,
            };
            class_ok
                && self
                    .by_task
                    .get(&entry.example.task_id)
                    .is_some_and(|s| s.contains(&id))
        })
    }
}

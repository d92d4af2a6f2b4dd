//! Episodic memory and sparse experience replay for lifelong (continual)
//! learning on streams of classification tasks.
//!
//! The crate has three layers:
//!
//! - a capacity-bounded [`memory::MemoryBuffer`] with scored entries and
//!   uniform replay sampling,
//! - seven memory population policies ([`policies`]) that decide which
//!   streamed examples enter and leave the buffer,
//! - a single-pass training harness ([`trainer`]) that interleaves new-data
//!   gradient steps with sparse replay, evaluates after every task, and can
//!   locally adapt the model per test example from nearest memory neighbors.
//!
//! Everything is deterministic given an experiment seed: identical configs
//! produce byte-identical metrics CSVs.

pub mod config;
pub mod data;
pub mod error;
pub mod feedback;
pub mod learner;
pub mod memory;
pub mod metrics;
pub mod policies;
pub mod stream;
pub mod trainer;

pub use config::ExperimentConfig;
pub use error::{DataError, LearnerError, MemoryError, PolicyError, TrainError};
pub use feedback::ModelFeedback;
pub use learner::{HashedBowLearner, Learner};
pub use memory::{EntryId, MemoryBuffer, MemoryEntry, WriteReceipt};
pub use metrics::ExperimentRecord;
pub use stream::{Example, TaskData};

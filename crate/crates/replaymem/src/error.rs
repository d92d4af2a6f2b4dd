//! Error types for the memory, policy, learner, trainer and data layers.

use thiserror::Error;

/// Errors raised by [`crate::memory::MemoryBuffer`] operations.
#[derive(Debug, Error, PartialEq)]
pub enum MemoryError {
    /// Capacity fraction and stream size produced a zero-sized buffer.
    #[error("configured capacity is zero (fraction {fraction} of stream size {stream_size})")]
    ZeroCapacity { fraction: f64, stream_size: u64 },
    /// Write attempted on a full buffer; the caller must evict first.
    #[error("buffer is full ({capacity} entries); evict before inserting")]
    BufferFull { capacity: usize },
    /// An entry reference did not resolve to a live entry.
    #[error("entry {0:?} is not present in the buffer")]
    DanglingEntry(crate::memory::EntryId),
    /// Replay was requested from an empty buffer.
    #[error("cannot sample a replay batch from an empty buffer")]
    EmptyBuffer,
}

/// Errors raised by memory population policies.
#[derive(Debug, Error, PartialEq)]
pub enum PolicyError {
    /// The policy requires model feedback that the caller did not supply.
    #[error("policy {policy} requires {missing} feedback")]
    MissingFeedback {
        policy: &'static str,
        missing: &'static str,
    },
    /// Feedback was supplied but its shape does not match the batch.
    #[error("feedback length {feedback_len} does not match batch length {batch_len}")]
    FeedbackShape {
        feedback_len: usize,
        batch_len: usize,
    },
    /// A class-keyed policy saw an example without a class label.
    #[error("example {stream_id} has no class label but the policy is keyed by class")]
    MissingClassLabel { stream_id: u64 },
    /// Batch-granular policies cannot hold a batch larger than their slots.
    #[error("batch of {batch_len} examples exceeds the slot size {slot_size}")]
    BatchTooLarge { batch_len: usize, slot_size: usize },
    /// Capacity too small to hold even one batch slot.
    #[error("capacity {capacity} is smaller than one batch of {batch_size}")]
    CapacityBelowBatch { capacity: usize, batch_size: usize },
    /// Feature vectors of inconsistent dimension reached the policy.
    #[error("feature dimension {got} does not match expected {expected}")]
    FeatureDimension { expected: usize, got: usize },
    #[error(transparent)]
    Memory(#[from] MemoryError),
}

/// Errors raised by the reference learner.
#[derive(Debug, Error, PartialEq)]
pub enum LearnerError {
    /// Loss and training need a class label on every example.
    #[error("example {stream_id} has no class label; cannot compute its loss")]
    MissingLabel { stream_id: u64 },
    /// A label fell outside the configured class range.
    #[error("class {class} is out of range for {num_classes} classes")]
    ClassOutOfRange { class: u32, num_classes: usize },
    /// Training on an empty batch is undefined.
    #[error("cannot train on an empty batch")]
    EmptyBatch,
}

/// Errors raised by the experiment driver.
#[derive(Debug, Error)]
pub enum TrainError {
    #[error("experiment has no tasks")]
    NoTasks,
    #[error("task {0} has an empty training split")]
    EmptyTrainSplit(String),
    #[error("task {0} has an empty test split; accuracy is undefined")]
    EmptyTestSplit(String),
    #[error("order references unknown task {0}")]
    UnknownTask(String),
    #[error(transparent)]
    Memory(#[from] MemoryError),
    #[error(transparent)]
    Policy(#[from] PolicyError),
    #[error(transparent)]
    Learner(#[from] LearnerError),
    #[error("invalid configuration: {0}")]
    Config(String),
}

/// Errors raised while loading corpora or generating synthetic data.
#[derive(Debug, Error)]
pub enum DataError {
    #[error("cannot read {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}:{line}: malformed JSON line: {message}")]
    MalformedLine {
        path: String,
        line: usize,
        message: String,
    },
    #[error("{path}:{line}: label {label} out of range for {class_count} classes")]
    LabelOutOfRange {
        path: String,
        line: usize,
        label: i64,
        class_count: u32,
    },
    #[error(
        "manifests {a} and {b} have overlapping global label ranges without a shared label group"
    )]
    OverlappingLabels { a: String, b: String },
    #[error("task name {0:?} appears more than once")]
    DuplicateTaskName(String),
    #[error("manifests {a} and {b} share label group {group} but their label ranges differ")]
    SharedGroupMismatch { a: String, b: String, group: String },
    #[error("invalid synthetic spec: {0}")]
    InvalidSpec(String),
}

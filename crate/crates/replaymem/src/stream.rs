//! Stream items and per-task datasets.

use serde::{Deserialize, Serialize};

/// Position of a task inside one experiment stream.
pub type TaskId = u16;
/// Index into the global label space shared by all tasks of a run.
pub type ClassId = u32;
/// Unique, monotone identifier of one training example within a run.
pub type StreamId = u64;

/// One labeled item of the experiment stream.
///
/// `stream_id` is unique and monotone over the whole run; test examples get
/// ids from a range above the training stream so the two never collide.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Example {
    pub stream_id: StreamId,
    pub task_id: TaskId,
    /// Global class index; `None` for class-free tasks.
    pub class_id: Option<ClassId>,
    pub tokens: Vec<u32>,
    /// Raw text, kept when the corpus had one.
    pub text: Option<String>,
}

impl Example {
    pub fn new(
        stream_id: StreamId,
        task_id: TaskId,
        class_id: Option<ClassId>,
        tokens: Vec<u32>,
    ) -> Self {
        Self {
            stream_id,
            task_id,
            class_id,
            tokens,
            text: None,
        }
    }
}

/// An example before it is placed on a stream (no id or task position yet).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RawExample {
    /// Global class index after applying the manifest's offset.
    pub class_id: ClassId,
    pub tokens: Vec<u32>,
    pub text: Option<String>,
}

/// One task's train/test splits plus its slice of the global label space.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TaskData {
    pub name: String,
    pub class_count: u32,
    pub class_offset: u32,
    pub train: Vec<RawExample>,
    pub test: Vec<RawExample>,
}

impl TaskData {
    /// Global classes this task draws labels from: `[offset, offset + count)`.
    pub fn class_range(&self) -> std::ops::Range<u32> {
        self.class_offset..self.class_offset + self.class_count
    }
}

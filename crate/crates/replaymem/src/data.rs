//! Corpus ingestion, synthetic stream generation and task manifests.
//!
//! Corpora are JSONL files with one object per line: `"text"` (string),
//! `"label"` (integer local class index) and an optional `"split"` of
//! `"train"` or `"test"`. Lines without a split are assigned
//! deterministically by position (every 10th line is test).

use std::collections::BTreeMap;
use std::io::{BufRead, BufReader, Write};
use std::path::{Path, PathBuf};

use rand::rngs::StdRng;
use rand::{Rng, SeedableRng};
use serde::{Deserialize, Serialize};

use crate::error::DataError;
use crate::stream::{RawExample, TaskData};

/// Stable 32-bit FNV-1a over a token's bytes.
fn fnv1a32(bytes: &[u8]) -> u32 {
    let mut hash = 0x811c_9dc5u32;
    for &b in bytes {
        hash ^= b as u32;
        hash = hash.wrapping_mul(0x0100_0193);
    }
    hash
}

/// Lowercased alphanumeric runs of at least two characters, hashed to
/// stable token ids.
pub fn tokenize(text: &str) -> Vec<u32> {
    text.split(|c: char| !c.is_alphanumeric())
        .filter(|s| s.len() >= 2)
        .map(|s| fnv1a32(s.to_lowercase().as_bytes()))
        .collect()
}

/// Description of one task's corpus and its slice of the global label space.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TaskManifest {
    pub name: String,
    pub path: String,
    pub class_count: u32,
    /// Maps local labels into the global label space.
    pub class_offset: u32,
    /// Tasks sharing a tag may (and must) share their global label range.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub shared_label_group: Option<String>,
}

impl TaskManifest {
    fn range(&self) -> (u32, u32) {
        (self.class_offset, self.class_offset + self.class_count)
    }
}

/// Task names must be unique; global label ranges must be disjoint unless
/// the tasks share a label group, in which case they must be identical.
pub fn validate_manifests(manifests: &[TaskManifest]) -> Result<(), DataError> {
    for (i, a) in manifests.iter().enumerate() {
        for b in &manifests[i + 1..] {
            if a.name == b.name {
                return Err(DataError::DuplicateTaskName(a.name.clone()));
            }
            let same_group = match (&a.shared_label_group, &b.shared_label_group) {
                (Some(x), Some(y)) => x == y,
                _ => false,
            };
            let (a_lo, a_hi) = a.range();
            let (b_lo, b_hi) = b.range();
            let overlap = a_lo < b_hi && b_lo < a_hi;
            if same_group {
                if a.range() != b.range() {
                    return Err(DataError::SharedGroupMismatch {
                        a: a.name.clone(),
                        b: b.name.clone(),
                        group: a.shared_label_group.clone().unwrap_or_default(),
                    });
                }
            } else if overlap {
                return Err(DataError::OverlappingLabels {
                    a: a.name.clone(),
                    b: b.name.clone(),
                });
            }
        }
    }
    Ok(())
}

#[derive(Deserialize)]
struct CorpusLine {
    text: String,
    label: i64,
    #[serde(default)]
    split: Option<String>,
}

/// Load one task's JSONL corpus, mapping local labels into the global label
/// space and honoring explicit split fields.
pub fn load_corpus(manifest: &TaskManifest) -> Result<TaskData, DataError> {
    let file = std::fs::File::open(&manifest.path).map_err(|source| DataError::Io {
        path: manifest.path.clone(),
        source,
    })?;
    let reader = BufReader::new(file);
    let mut train = Vec::new();
    let mut test = Vec::new();
    for (idx, line) in reader.lines().enumerate() {
        let line_no = idx + 1;
        let line = line.map_err(|source| DataError::Io {
            path: manifest.path.clone(),
            source,
        })?;
        if line.trim().is_empty() {
            continue;
        }
        let parsed: CorpusLine =
            serde_json::from_str(&line).map_err(|e| DataError::MalformedLine {
                path: manifest.path.clone(),
                line: line_no,
                message: e.to_string(),
            })?;
        if parsed.label < 0 || parsed.label >= manifest.class_count as i64 {
            return Err(DataError::LabelOutOfRange {
                path: manifest.path.clone(),
                line: line_no,
                label: parsed.label,
                class_count: manifest.class_count,
            });
        }
        let is_test = match parsed.split.as_deref() {
            Some("test") => true,
            Some("train") => false,
            Some(other) => {
                return Err(DataError::MalformedLine {
                    path: manifest.path.clone(),
                    line: line_no,
                    message: format!("unknown split {other:?}"),
                })
            }
            None => idx % 10 == 9,
        };
        let example = RawExample {
            class_id: manifest.class_offset + parsed.label as u32,
            tokens: tokenize(&parsed.text),
            text: Some(parsed.text),
        };
        if is_test {
            test.push(example);
        } else {
            train.push(example);
        }
    }
    Ok(TaskData {
        name: manifest.name.clone(),
        class_count: manifest.class_count,
        class_offset: manifest.class_offset,
        train,
        test,
    })
}

/// Load and validate every task of a manifest list.
pub fn load_tasks(manifests: &[TaskManifest]) -> Result<Vec<TaskData>, DataError> {
    validate_manifests(manifests)?;
    manifests.iter().map(load_corpus).collect()
}

/// Parameters of a deterministic synthetic corpus.
///
/// Each global class owns a disjoint block of "content" vocabulary split
/// into two topic modes; an example commits to one mode and draws each
/// token from that mode's half-block with probability `alpha`, falling back
/// to a shared noise region otherwise. The bimodal structure keeps the
/// class mean feature vector between the modes, so "typical" examples sit
/// away from it. With `drift` enabled each task samples noise from its own
/// sliding window over the noise region, so consecutive tasks differ even
/// in their background distribution.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SyntheticSpec {
    pub vocab_size: u32,
    pub tasks: u16,
    pub classes_per_task: u32,
    pub train_per_task: u32,
    pub test_per_task: u32,
    pub tokens_per_example: u32,
    /// Class-signal strength in [0, 1].
    pub alpha: f64,
    pub drift: bool,
    pub seed: u64,
}

impl Default for SyntheticSpec {
    fn default() -> Self {
        Self {
            vocab_size: 600,
            tasks: 5,
            classes_per_task: 2,
            train_per_task: 1200,
            test_per_task: 240,
            tokens_per_example: 8,
            alpha: 0.75,
            drift: true,
            seed: 7,
        }
    }
}

impl SyntheticSpec {
    pub fn total_classes(&self) -> u32 {
        self.tasks as u32 * self.classes_per_task
    }

    fn validate(&self) -> Result<(), DataError> {
        if self.tasks == 0 || self.classes_per_task == 0 {
            return Err(DataError::InvalidSpec(
                "tasks and classes_per_task must be positive".into(),
            ));
        }
        if !(0.0..=1.0).contains(&self.alpha) {
            return Err(DataError::InvalidSpec(format!(
                "alpha must be in [0, 1], got {}",
                self.alpha
            )));
        }
        if self.tokens_per_example == 0 {
            return Err(DataError::InvalidSpec(
                "tokens_per_example must be positive".into(),
            ));
        }
        let noise = self.vocab_size / 2;
        let content = self.vocab_size - noise;
        if content / self.total_classes().max(1) == 0 || noise == 0 {
            return Err(DataError::InvalidSpec(format!(
                "vocab size {} is too small for {} classes",
                self.vocab_size,
                self.total_classes()
            )));
        }
        Ok(())
    }

    /// Content block of one global class: `[start, start + len)`.
    fn class_block(&self, global_class: u32) -> (u32, u32) {
        let content = self.vocab_size - self.vocab_size / 2;
        let block = content / self.total_classes();
        (global_class * block, block)
    }

    /// Noise window of one task: the full noise region, or a half-width
    /// window sliding across it when drift is enabled.
    fn noise_window(&self, task: u16) -> (u32, u32) {
        let content = self.vocab_size - self.vocab_size / 2;
        let noise = self.vocab_size / 2;
        if !self.drift || self.tasks <= 1 {
            return (content, noise);
        }
        let width = (noise / 2).max(1);
        let span = noise - width;
        let offset = (span as u64 * task as u64 / (self.tasks as u64 - 1)) as u32;
        (content + offset, width)
    }
}

fn task_rng(spec: &SyntheticSpec, task: u16) -> StdRng {
    StdRng::seed_from_u64(
        spec.seed
            .wrapping_add((task as u64 + 1).wrapping_mul(0x9e37_79b9_7f4a_7c15)),
    )
}

/// One generated corpus line, before serialization.
struct GeneratedLine {
    text: String,
    label: u32,
    is_test: bool,
}

fn generate_task_lines(spec: &SyntheticSpec, task: u16) -> Vec<GeneratedLine> {
    let mut rng = task_rng(spec, task);
    let total = spec.train_per_task + spec.test_per_task;
    let (noise_start, noise_len) = spec.noise_window(task);
    (0..total)
        .map(|i| {
            let label = i % spec.classes_per_task;
            let global = task as u32 * spec.classes_per_task + label;
            let (class_start, class_len) = spec.class_block(global);
            // each example commits to one topic mode: one half of the
            // class block when the block is wide enough to split
            let (mode_start, mode_len) = if class_len >= 2 {
                let half = class_len / 2;
                if rng.gen::<bool>() {
                    (class_start, half)
                } else {
                    (class_start + half, class_len - half)
                }
            } else {
                (class_start, class_len)
            };
            let words: Vec<String> = (0..spec.tokens_per_example)
                .map(|_| {
                    let token = if rng.gen::<f64>() < spec.alpha {
                        mode_start + rng.gen_range(0..mode_len)
                    } else {
                        noise_start + rng.gen_range(0..noise_len)
                    };
                    format!("w{token}")
                })
                .collect();
            GeneratedLine {
                text: words.join(" "),
                label,
                is_test: i >= spec.train_per_task,
            }
        })
        .collect()
}

/// Generate the corpus in memory, bypassing the filesystem. Identical to
/// loading the files produced by [`write_synthetic`].
pub fn generate_tasks(spec: &SyntheticSpec) -> Result<Vec<TaskData>, DataError> {
    spec.validate()?;
    Ok((0..spec.tasks)
        .map(|task| {
            let lines = generate_task_lines(spec, task);
            let mut train = Vec::new();
            let mut test = Vec::new();
            for line in lines {
                let example = RawExample {
                    class_id: task as u32 * spec.classes_per_task + line.label,
                    tokens: tokenize(&line.text),
                    text: Some(line.text),
                };
                if line.is_test {
                    test.push(example);
                } else {
                    train.push(example);
                }
            }
            TaskData {
                name: format!("task{task}"),
                class_count: spec.classes_per_task,
                class_offset: task as u32 * spec.classes_per_task,
                train,
                test,
            }
        })
        .collect())
}

/// Files produced by [`write_synthetic`].
#[derive(Debug, Clone)]
pub struct SyntheticOutputs {
    pub manifests: Vec<TaskManifest>,
    pub manifest_path: PathBuf,
    pub orders_path: PathBuf,
    pub corpus_paths: Vec<PathBuf>,
}

#[derive(Serialize)]
struct JsonlLine<'a> {
    text: &'a str,
    label: u32,
    split: &'a str,
}

/// Write JSONL corpora, a manifest list and a default four-order file.
/// Output bytes are identical for identical specs.
pub fn write_synthetic(
    spec: &SyntheticSpec,
    out_dir: &Path,
) -> Result<SyntheticOutputs, DataError> {
    spec.validate()?;
    let io_err = |path: &Path| {
        let path = path.display().to_string();
        move |source| DataError::Io {
            path: path.clone(),
            source,
        }
    };
    std::fs::create_dir_all(out_dir).map_err(io_err(out_dir))?;

    let mut manifests = Vec::new();
    let mut corpus_paths = Vec::new();
    for task in 0..spec.tasks {
        let path = out_dir.join(format!("task{task}.jsonl"));
        let mut file = std::fs::File::create(&path).map_err(io_err(&path))?;
        for line in generate_task_lines(spec, task) {
            let record = JsonlLine {
                text: &line.text,
                label: line.label,
                split: if line.is_test { "test" } else { "train" },
            };
            let json = serde_json::to_string(&record).expect("line serializes");
            writeln!(file, "{json}").map_err(io_err(&path))?;
        }
        manifests.push(TaskManifest {
            name: format!("task{task}"),
            path: path.display().to_string(),
            class_count: spec.classes_per_task,
            class_offset: task as u32 * spec.classes_per_task,
            shared_label_group: None,
        });
        corpus_paths.push(path);
    }

    let manifest_path = out_dir.join("manifests.json");
    std::fs::write(
        &manifest_path,
        serde_json::to_string_pretty(&manifests).expect("manifests serialize"),
    )
    .map_err(io_err(&manifest_path))?;

    let names: Vec<String> = manifests.iter().map(|m| m.name.clone()).collect();
    let orders = default_orders(&names);
    let orders_path = out_dir.join("orders.json");
    std::fs::write(
        &orders_path,
        serde_json::to_string_pretty(&orders).expect("orders serialize"),
    )
    .map_err(io_err(&orders_path))?;

    Ok(SyntheticOutputs {
        manifests,
        manifest_path,
        orders_path,
        corpus_paths,
    })
}

/// Four named task orders. For five tasks these are the harness's standard
/// benchmark permutations; other task counts fall back to simple
/// identity/reverse/rotation patterns.
pub fn default_orders(names: &[String]) -> BTreeMap<String, Vec<String>> {
    let t = names.len();
    let pick = |idx: &[usize]| -> Vec<String> { idx.iter().map(|&i| names[i].clone()).collect() };
    let mut orders = BTreeMap::new();
    if t == 5 {
        orders.insert("i".to_string(), pick(&[0, 1, 2, 3, 4]));
        orders.insert("ii".to_string(), pick(&[2, 4, 1, 3, 0]));
        orders.insert("iii".to_string(), pick(&[0, 4, 3, 2, 1]));
        orders.insert("iv".to_string(), pick(&[1, 0, 3, 4, 2]));
    } else if t > 0 {
        let identity: Vec<usize> = (0..t).collect();
        let reversed: Vec<usize> = (0..t).rev().collect();
        let rot = |k: usize| -> Vec<usize> { (0..t).map(|i| (i + k) % t).collect() };
        orders.insert("i".to_string(), pick(&identity));
        orders.insert("ii".to_string(), pick(&reversed));
        orders.insert("iii".to_string(), pick(&rot(t / 2)));
        orders.insert("iv".to_string(), pick(&rot(1)));
    }
    orders
}

/// The shipped five-task drifted benchmark used by the acceptance suite and
/// the README walkthrough.
pub fn benchmark_spec() -> SyntheticSpec {
    SyntheticSpec::default()
}

/// Benchmark experiment config for one (policy, capacity, seed) cell.
///
/// Streams are two orders of magnitude smaller than a production corpus, so
/// the replay interval is 5 (a 20% replay ratio, against the production
/// default of 100) and the learner is sized down to 128 hashed dimensions;
/// both are plain config values, not code paths.
pub fn benchmark_config(
    policy: crate::policies::PolicyKind,
    capacity_fraction: f64,
    seed: u64,
) -> crate::config::ExperimentConfig {
    let names: Vec<String> = (0..benchmark_spec().tasks)
        .map(|t| format!("task{t}"))
        .collect();
    crate::config::ExperimentConfig {
        policy,
        capacity_fraction,
        seed,
        replay_every: 5,
        batch_size: 32,
        order: "i".to_string(),
        orders: default_orders(&names),
        learner: crate::learner::LearnerConfig {
            feature_dim: 128,
            learning_rate: 5e-2,
            hash_seed: 1,
            signed_hashing: false,
        },
        ..Default::default()
    }
}

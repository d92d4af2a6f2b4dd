//! The lifelong learning loop: sequential tasks streamed once, sparse
//! experience replay, evaluation after every task and optional local
//! adaptation at test time.
//!
//! Per batch the order is fixed: (1) model feedback is computed from the
//! parameters *before* the gradient step, (2) the policy observes the batch,
//! (3) the learner trains on the batch, (4) every `replay_every`-th batch
//! one replay batch is drawn from memory and trained on. Replayed examples
//! are not re-observed by the policy.

use std::collections::BTreeMap;
use std::time::Instant;

use rand::rngs::StdRng;
use rand::seq::SliceRandom;
use rand::SeedableRng;

use crate::config::{ExperimentConfig, LocalAdaptationParams};
use crate::error::TrainError;
use crate::feedback::ModelFeedback;
use crate::learner::{HashedBowLearner, Learner};
use crate::memory::MemoryBuffer;
use crate::metrics::ExperimentRecord;
use crate::policies::build_policy;
use crate::stream::{Example, StreamId, TaskData, TaskId};

/// A task with stream ids assigned and labels mapped to the global space.
#[derive(Debug, Clone)]
pub struct PreparedTask {
    pub name: String,
    pub task_id: TaskId,
    pub class_count: u32,
    pub train: Vec<Example>,
    pub test: Vec<Example>,
}

/// Order tasks, shuffle each training split with the run rng and assign
/// monotone stream ids (training first, then test examples).
pub fn prepare_tasks(
    config: &ExperimentConfig,
    tasks: &[TaskData],
    rng: &mut StdRng,
) -> Result<Vec<PreparedTask>, TrainError> {
    if tasks.is_empty() {
        return Err(TrainError::NoTasks);
    }
    let by_name: BTreeMap<&str, &TaskData> = tasks.iter().map(|t| (t.name.as_str(), t)).collect();
    if by_name.len() != tasks.len() {
        return Err(TrainError::Config("task names must be unique".into()));
    }
    let order = if config.orders.is_empty() && config.tasks.is_empty() {
        tasks.iter().map(|t| t.name.clone()).collect()
    } else {
        config.effective_order()?
    };
    let mut prepared = Vec::with_capacity(order.len());
    let mut next_id: StreamId = 0;
    for (position, name) in order.iter().enumerate() {
        let data = by_name
            .get(name.as_str())
            .ok_or_else(|| TrainError::UnknownTask(name.clone()))?;
        if data.train.is_empty() {
            return Err(TrainError::EmptyTrainSplit(name.clone()));
        }
        if data.test.is_empty() {
            return Err(TrainError::EmptyTestSplit(name.clone()));
        }
        let task_id = position as TaskId;
        let mut train: Vec<Example> = data
            .train
            .iter()
            .map(|raw| {
                let mut e = Example::new(0, task_id, Some(raw.class_id), raw.tokens.clone());
                e.text = raw.text.clone();
                e
            })
            .collect();
        train.shuffle(rng);
        for example in &mut train {
            example.stream_id = next_id;
            next_id += 1;
        }
        prepared.push(PreparedTask {
            name: name.clone(),
            task_id,
            class_count: data.class_count,
            train,
            test: Vec::new(),
        });
    }
    // test ids start above the training stream
    for (position, name) in order.iter().enumerate() {
        let data = by_name[name.as_str()];
        let task_id = position as TaskId;
        let test = data
            .test
            .iter()
            .map(|raw| {
                let mut e = Example::new(next_id, task_id, Some(raw.class_id), raw.tokens.clone());
                e.text = raw.text.clone();
                next_id += 1;
                e
            })
            .collect();
        prepared[position].test = test;
    }
    Ok(prepared)
}

/// Number of global classes implied by a task set.
pub fn global_class_count(tasks: &[TaskData]) -> usize {
    tasks
        .iter()
        .map(|t| t.class_offset + t.class_count)
        .max()
        .unwrap_or(0) as usize
}

fn argmax(row: &[f64]) -> usize {
    row.iter()
        .enumerate()
        .max_by(|a, b| a.1.total_cmp(b.1))
        .map(|(i, _)| i)
        .unwrap_or(0)
}

/// Per-task accuracy of the learner on the prepared test splits.
pub fn evaluate<L: Learner>(learner: &L, tasks: &[PreparedTask]) -> Result<Vec<f64>, TrainError> {
    tasks
        .iter()
        .map(|task| {
            if task.test.is_empty() {
                return Err(TrainError::EmptyTestSplit(task.name.clone()));
            }
            let probs = learner.predict_proba(&task.test);
            let correct = task
                .test
                .iter()
                .zip(&probs)
                .filter(|(e, row)| Some(argmax(row) as u32) == e.class_id)
                .count();
            Ok(correct as f64 / task.test.len() as f64)
        })
        .collect()
}

/// Buffer contents with their feature vectors, precomputed once per
/// evaluation pass so each test example only pays for neighbor search and
/// its own adaptation steps.
pub struct AdaptationContext {
    examples: Vec<Example>,
    features: Vec<Vec<f64>>,
}

impl AdaptationContext {
    pub fn new<L: Learner>(learner: &L, buffer: &MemoryBuffer) -> Self {
        let mut entries: Vec<_> = buffer.iter().map(|(_, e)| e).collect();
        entries.sort_by_key(|e| e.insert_ordinal);
        let examples: Vec<Example> = entries.iter().map(|e| e.example.clone()).collect();
        let features = learner.features(&examples);
        Self { examples, features }
    }

    pub fn is_empty(&self) -> bool {
        self.examples.is_empty()
    }

    /// K nearest stored examples by Euclidean feature distance; all of them
    /// when the buffer is smaller than K. Ties resolve to the older entry.
    fn neighbors(&self, features: &[f64], k: usize) -> Vec<Example> {
        let mut scored: Vec<(f64, usize)> = self
            .features
            .iter()
            .enumerate()
            .map(|(i, row)| {
                let d = row
                    .iter()
                    .zip(features)
                    .map(|(&a, &b)| {
                        let d = a - b;
                        d * d
                    })
                    .sum::<f64>();
                (d, i)
            })
            .collect();
        scored.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
        scored
            .into_iter()
            .take(k.min(self.examples.len()))
            .map(|(_, i)| self.examples[i].clone())
            .collect()
    }

    /// Probability row for one test example after local adaptation: clone
    /// the learner, take `steps` proximal gradient steps on the K nearest
    /// neighbors, predict, discard the copy.
    pub fn predict_adapted<L: Learner>(
        &self,
        learner: &L,
        example: &Example,
        params: &LocalAdaptationParams,
    ) -> Result<Vec<f64>, TrainError> {
        if self.is_empty() || params.steps == 0 || params.k == 0 {
            return Ok(learner
                .predict_proba(std::slice::from_ref(example))
                .remove(0));
        }
        let query = learner.features(std::slice::from_ref(example)).remove(0);
        let neighbors = self.neighbors(&query, params.k);
        let mut adapted = learner.clone();
        for _ in 0..params.steps {
            adapted.adapt_step(&neighbors, learner, params.reg, params.adapt_lr)?;
        }
        Ok(adapted
            .predict_proba(std::slice::from_ref(example))
            .remove(0))
    }
}

/// Per-task accuracy with local adaptation applied to every test example.
pub fn evaluate_adapted<L: Learner>(
    learner: &L,
    tasks: &[PreparedTask],
    buffer: &MemoryBuffer,
    params: &LocalAdaptationParams,
) -> Result<Vec<f64>, TrainError> {
    let context = AdaptationContext::new(learner, buffer);
    tasks
        .iter()
        .map(|task| {
            if task.test.is_empty() {
                return Err(TrainError::EmptyTestSplit(task.name.clone()));
            }
            let mut correct = 0usize;
            for example in &task.test {
                let row = context.predict_adapted(learner, example, params)?;
                if Some(argmax(&row) as u32) == example.class_id {
                    correct += 1;
                }
            }
            Ok(correct as f64 / task.test.len() as f64)
        })
        .collect()
}

/// Run one experiment with the supplied learner.
pub fn run_experiment<L: Learner>(
    config: &ExperimentConfig,
    tasks: &[TaskData],
    mut learner: L,
) -> Result<ExperimentRecord, TrainError> {
    config.validate()?;
    let mut rng = StdRng::seed_from_u64(config.seed);
    let prepared = prepare_tasks(config, tasks, &mut rng)?;

    let total_stream: u64 = prepared.iter().map(|t| t.train.len() as u64).sum();
    let mut buffer = MemoryBuffer::new(config.capacity_fraction, total_stream)?;
    let mut policy = build_policy(
        config.policy,
        config.capacity_fraction,
        buffer.capacity(),
        config.batch_size,
        config.key_mode,
    )?;
    let needs = policy.feedback_needs();

    let num_classes = learner.num_classes();
    for task in &prepared {
        for example in task.train.iter().chain(&task.test) {
            match example.class_id {
                Some(c) if (c as usize) < num_classes => {}
                Some(c) => {
                    return Err(TrainError::Config(format!(
                        "class {c} outside the learner's {num_classes}-class space"
                    )))
                }
                None => {
                    return Err(TrainError::Config(format!(
                        "example {} has no class label; the reference harness trains classifiers",
                        example.stream_id
                    )))
                }
            }
        }
    }

    let class_counts: BTreeMap<TaskId, u32> = prepared
        .iter()
        .map(|t| (t.task_id, t.class_count))
        .collect();

    let mut visits = vec![0u32; total_stream as usize];
    let mut accuracy = Vec::with_capacity(prepared.len());
    let mut composition = Vec::with_capacity(prepared.len());
    let mut replay_steps = 0u64;
    let mut replayed_examples = 0u64;
    let mut skipped_replays = 0u64;
    let mut new_batches = 0u64;
    let mut new_examples = 0u64;
    let mut train_secs = 0.0f64;
    let mut eval_secs = 0.0f64;

    for task in &prepared {
        let started = Instant::now();
        for batch in task.train.chunks(config.batch_size) {
            new_batches += 1;
            new_examples += batch.len() as u64;

            let feedback = if needs.any() {
                let mut fb = ModelFeedback::new();
                if needs.probs {
                    fb = fb
                        .with_probs(learner.predict_proba(batch))
                        .map_err(TrainError::Config)?;
                }
                if needs.loss {
                    fb = fb
                        .with_losses(learner.per_example_loss(batch)?)
                        .map_err(TrainError::Config)?;
                }
                if needs.features {
                    fb = fb.with_features(learner.features(batch));
                }
                Some(fb)
            } else {
                None
            };

            policy.observe_batch(&mut buffer, batch, feedback.as_ref(), &mut rng)?;

            learner.train_step(batch)?;
            for example in batch {
                visits[example.stream_id as usize] += 1;
            }

            if new_batches.is_multiple_of(config.replay_every) {
                match buffer.sample_replay_batch(config.batch_size, &mut rng) {
                    Ok(replay) => {
                        learner.train_step(&replay)?;
                        replay_steps += 1;
                        replayed_examples += replay.len() as u64;
                    }
                    Err(crate::error::MemoryError::EmptyBuffer) => skipped_replays += 1,
                    Err(e) => return Err(e.into()),
                }
            }
        }
        train_secs += started.elapsed().as_secs_f64();

        let started = Instant::now();
        accuracy.push(evaluate(&learner, &prepared)?);
        composition.push(buffer.composition(&class_counts));
        eval_secs += started.elapsed().as_secs_f64();
    }

    let mut adapt_secs = 0.0f64;
    let adapted_accuracy = match &config.local_adaptation {
        Some(params) => {
            let started = Instant::now();
            let accs = evaluate_adapted(&learner, &prepared, &buffer, params)?;
            adapt_secs = started.elapsed().as_secs_f64();
            Some(accs)
        }
        None => None,
    };

    let min_visits = visits.iter().copied().min().unwrap_or(0);
    let max_visits = visits.iter().copied().max().unwrap_or(0);

    Ok(ExperimentRecord {
        run_id: config.run_id(),
        seed: config.seed,
        order: config.order.clone(),
        policy: config.policy_label(),
        capacity_fraction: config.capacity_fraction,
        task_names: prepared.iter().map(|t| t.name.clone()).collect(),
        accuracy,
        adapted_accuracy,
        composition,
        replay_steps,
        replayed_examples,
        skipped_replays,
        new_batches,
        new_examples,
        min_train_visits: min_visits,
        max_train_visits: max_visits,
        memory_len_final: buffer.len(),
        train_secs,
        eval_secs,
        adapt_secs,
    })
}

/// Run with the reference hashed bag-of-words learner sized to the tasks'
/// global label space.
pub fn run(config: &ExperimentConfig, tasks: &[TaskData]) -> Result<ExperimentRecord, TrainError> {
    let classes = global_class_count(tasks);
    if classes == 0 {
        return Err(TrainError::NoTasks);
    }
    let learner = HashedBowLearner::new(classes, &config.learner);
    run_experiment(config, tasks, learner)
}

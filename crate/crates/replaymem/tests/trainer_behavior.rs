//! Behavioral contracts of the training loop that need instrumented or
//! synthetic learners: feedback-before-update ordering, chance-level
//! accuracy of random predictions, and overfitting to single-class
//! neighborhoods under local adaptation.

use std::sync::{Arc, Mutex};

use replaymem::config::{ExperimentConfig, LocalAdaptationParams};
use replaymem::error::LearnerError;
use replaymem::learner::{HashedBowLearner, Learner, LearnerConfig};
use replaymem::memory::MemoryBuffer;
use replaymem::policies::PolicyKind;
use replaymem::stream::{Example, RawExample, TaskData};
use replaymem::trainer::{self, AdaptationContext, PreparedTask};

#[derive(Debug, Clone, PartialEq)]
enum Event {
    Proba(Vec<u64>),
    Train(Vec<u64>),
}

/// Learner that logs call order and predicts uniformly.
#[derive(Clone)]
struct RecordingLearner {
    classes: usize,
    events: Arc<Mutex<Vec<Event>>>,
}

impl Learner for RecordingLearner {
    fn num_classes(&self) -> usize {
        self.classes
    }

    fn feature_dim(&self) -> usize {
        4
    }

    fn predict_proba(&self, batch: &[Example]) -> Vec<Vec<f64>> {
        self.events
            .lock()
            .unwrap()
            .push(Event::Proba(batch.iter().map(|e| e.stream_id).collect()));
        batch
            .iter()
            .map(|_| vec![1.0 / self.classes as f64; self.classes])
            .collect()
    }

    fn per_example_loss(&self, batch: &[Example]) -> Result<Vec<f64>, LearnerError> {
        Ok(vec![1.0; batch.len()])
    }

    fn features(&self, batch: &[Example]) -> Vec<Vec<f64>> {
        batch.iter().map(|_| vec![0.0; 4]).collect()
    }

    fn train_step(&mut self, batch: &[Example]) -> Result<(), LearnerError> {
        self.events
            .lock()
            .unwrap()
            .push(Event::Train(batch.iter().map(|e| e.stream_id).collect()));
        Ok(())
    }

    fn adapt_step(
        &mut self,
        _batch: &[Example],
        _base: &Self,
        _lambda: f64,
        _lr: f64,
    ) -> Result<(), LearnerError> {
        Ok(())
    }
}

fn synthetic_tasks(tasks: u16, per_task: usize, classes_per_task: u32) -> Vec<TaskData> {
    (0..tasks)
        .map(|t| {
            let offset = t as u32 * classes_per_task;
            let make = |i: usize| RawExample {
                class_id: offset + (i as u32 % classes_per_task),
                tokens: vec![
                    offset * 40 + (i as u32 % classes_per_task) * 7,
                    i as u32 % 3,
                ],
                text: None,
            };
            TaskData {
                name: format!("task{t}"),
                class_count: classes_per_task,
                class_offset: offset,
                train: (0..per_task).map(make).collect(),
                test: (0..16).map(make).collect(),
            }
        })
        .collect()
}

/// Policy scores must be computed from the model state before that batch's
/// gradient step: every probability query is immediately followed by a
/// training step on exactly the same examples.
#[test]
fn feedback_is_computed_before_the_update() {
    let tasks = synthetic_tasks(2, 40, 2);
    let config = ExperimentConfig {
        policy: PolicyKind::Surprise,
        batch_size: 8,
        replay_every: 3,
        capacity_fraction: 0.5,
        ..Default::default()
    };

    let events = Arc::new(Mutex::new(Vec::new()));
    let learner = RecordingLearner {
        classes: 4,
        events: events.clone(),
    };
    trainer::run_experiment(&config, &tasks, learner).unwrap();

    // test examples get stream ids above the training stream; drop the
    // evaluation probes so only training-loop events remain
    let train_total = 2 * 40u64;
    let events: Vec<Event> = events
        .lock()
        .unwrap()
        .iter()
        .filter(|event| match event {
            Event::Proba(ids) => ids.iter().all(|&id| id < train_total),
            Event::Train(_) => true,
        })
        .cloned()
        .collect();
    assert!(!events.is_empty());
    let mut trained_new: Vec<u64> = Vec::new();
    let mut i = 0;
    while i < events.len() {
        match &events[i] {
            Event::Proba(ids) => {
                // the very next learner call must be the gradient step on
                // exactly this batch
                match events.get(i + 1) {
                    Some(Event::Train(trained)) => assert_eq!(trained, ids),
                    other => panic!("expected train after proba, got {other:?}"),
                }
                trained_new.extend(ids);
                i += 2;
            }
            Event::Train(ids) => {
                // a train step without a preceding probe is a replay step;
                // it may only touch examples that already streamed by
                for id in ids {
                    assert!(
                        trained_new.contains(id),
                        "replayed example {id} before it streamed"
                    );
                }
                i += 1;
            }
        }
    }
}

/// Binomial oracle: predictions independent of the labels score 1/C on
/// balanced test sets, within 3 sigma.
#[test]
fn chance_level_accuracy_for_label_blind_predictions() {
    #[derive(Clone)]
    struct HashPredictLearner {
        classes: usize,
    }

    impl Learner for HashPredictLearner {
        fn num_classes(&self) -> usize {
            self.classes
        }
        fn feature_dim(&self) -> usize {
            1
        }
        fn predict_proba(&self, batch: &[Example]) -> Vec<Vec<f64>> {
            batch
                .iter()
                .map(|e| {
                    // splitmix-style scramble of the stream id; unrelated to
                    // the label assignment
                    let mut x = e.stream_id.wrapping_add(0x9e37_79b9_7f4a_7c15);
                    x = (x ^ (x >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
                    x ^= x >> 27;
                    let pick = (x % self.classes as u64) as usize;
                    let mut row = vec![0.0; self.classes];
                    row[pick] = 1.0;
                    row
                })
                .collect()
        }
        fn per_example_loss(&self, batch: &[Example]) -> Result<Vec<f64>, LearnerError> {
            Ok(vec![0.0; batch.len()])
        }
        fn features(&self, batch: &[Example]) -> Vec<Vec<f64>> {
            batch.iter().map(|_| vec![0.0]).collect()
        }
        fn train_step(&mut self, _batch: &[Example]) -> Result<(), LearnerError> {
            Ok(())
        }
        fn adapt_step(
            &mut self,
            _batch: &[Example],
            _base: &Self,
            _lambda: f64,
            _lr: f64,
        ) -> Result<(), LearnerError> {
            Ok(())
        }
    }

    let classes = 4usize;
    let n = 4000usize;
    let test: Vec<Example> = (0..n)
        .map(|i| Example::new(i as u64, 0, Some(i as u32 % classes as u32), vec![1]))
        .collect();
    let task = PreparedTask {
        name: "balanced".into(),
        task_id: 0,
        class_count: classes as u32,
        train: Vec::new(),
        test,
    };
    let learner = HashPredictLearner { classes };
    let acc = trainer::evaluate(&learner, std::slice::from_ref(&task)).unwrap()[0];
    let p = 1.0 / classes as f64;
    let sigma = (p * (1.0 - p) / n as f64).sqrt();
    assert!(
        (acc - p).abs() <= 3.0 * sigma,
        "accuracy {acc} outside {p} +/- {}",
        3.0 * sigma
    );
}

/// Overfit-to-neighbors oracle: adapting on a single-class neighborhood
/// with no proximity regularizer predicts that class for any input.
#[test]
fn adaptation_overfits_to_a_single_class_neighborhood() {
    let config = LearnerConfig {
        feature_dim: 32,
        learning_rate: 1e-3,
        hash_seed: 5,
        signed_hashing: false,
    };
    let learner = HashedBowLearner::new(3, &config);

    let mut buffer = MemoryBuffer::with_capacity(8);
    for i in 0..8u64 {
        let example = Example::new(i, 0, Some(1), vec![i as u32 * 3, i as u32 * 3 + 1]);
        buffer.insert(example, 0.0, None).unwrap();
    }
    let context = AdaptationContext::new(&learner, &buffer);
    let params = LocalAdaptationParams {
        k: 8,
        steps: 80,
        reg: 0.0,
        adapt_lr: 0.5,
    };
    for tokens in [vec![100, 200], vec![7], vec![999, 998, 997]] {
        let query = Example::new(1000, 0, Some(0), tokens);
        let row = context.predict_adapted(&learner, &query, &params).unwrap();
        let pred = row
            .iter()
            .enumerate()
            .max_by(|a, b| a.1.total_cmp(b.1))
            .unwrap()
            .0;
        assert_eq!(pred, 1, "probabilities {row:?}");
    }
}

/// A capacity fraction that floors to zero is a configuration error, not a
/// silently empty memory.
#[test]
fn zero_capacity_is_a_configuration_error() {
    let tasks = synthetic_tasks(1, 64, 2);
    let config = ExperimentConfig {
        policy: PolicyKind::NaiveRandom,
        capacity_fraction: 1e-9, // floor would be 0; validate() allows it
        batch_size: 8,
        replay_every: 2,
        ..Default::default()
    };
    // a zero-capacity buffer is a configuration error by contract
    let err = trainer::run(&config, &tasks).unwrap_err();
    assert!(matches!(err, replaymem::error::TrainError::Memory(_)));
}

/// Naive random with probability 0 stores nothing, so replays are skipped
/// but counted.
#[test]
fn skipped_replays_are_counted() {
    #[derive(Clone)]
    struct NullLearner;
    impl Learner for NullLearner {
        fn num_classes(&self) -> usize {
            4
        }
        fn feature_dim(&self) -> usize {
            1
        }
        fn predict_proba(&self, batch: &[Example]) -> Vec<Vec<f64>> {
            batch.iter().map(|_| vec![0.25; 4]).collect()
        }
        fn per_example_loss(&self, batch: &[Example]) -> Result<Vec<f64>, LearnerError> {
            Ok(vec![0.0; batch.len()])
        }
        fn features(&self, batch: &[Example]) -> Vec<Vec<f64>> {
            batch.iter().map(|_| vec![0.0]).collect()
        }
        fn train_step(&mut self, _batch: &[Example]) -> Result<(), LearnerError> {
            Ok(())
        }
        fn adapt_step(
            &mut self,
            _batch: &[Example],
            _base: &Self,
            _lambda: f64,
            _lr: f64,
        ) -> Result<(), LearnerError> {
            Ok(())
        }
    }

    let tasks = synthetic_tasks(1, 64, 2);
    let config = ExperimentConfig {
        policy: PolicyKind::RingBuffer,
        key_mode: replaymem::policies::KeyMode::Class,
        capacity_fraction: 0.02, // capacity 1, quota 0 after 2 classes
        batch_size: 8,
        replay_every: 2,
        ..Default::default()
    };
    let record = trainer::run_experiment(&config, &tasks, NullLearner).unwrap();
    // capacity 1 with 2 discovered classes -> quota 0 -> nothing stored
    assert_eq!(record.memory_len_final, 0);
    assert_eq!(record.replay_steps, 0);
    assert_eq!(record.skipped_replays, 4);
}

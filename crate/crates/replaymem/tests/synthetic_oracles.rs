//! Oracles for the synthetic generator: a pure class signal must be
//! learnable to near-perfect accuracy, and a zero signal must pin accuracy
//! at chance level.

use replaymem::data::{generate_tasks, SyntheticSpec};
use replaymem::learner::{HashedBowLearner, Learner, LearnerConfig};
use replaymem::stream::Example;

fn to_examples(raw: &[replaymem::stream::RawExample]) -> Vec<Example> {
    raw.iter()
        .enumerate()
        .map(|(i, r)| Example::new(i as u64, 0, Some(r.class_id), r.tokens.clone()))
        .collect()
}

fn accuracy(learner: &HashedBowLearner, examples: &[Example]) -> f64 {
    let probs = learner.predict_proba(examples);
    let correct = examples
        .iter()
        .zip(&probs)
        .filter(|(e, row)| {
            let pred = row
                .iter()
                .enumerate()
                .max_by(|a, b| a.1.total_cmp(b.1))
                .unwrap()
                .0;
            Some(pred as u32) == e.class_id
        })
        .count();
    correct as f64 / examples.len() as f64
}

fn train_to_convergence(spec: &SyntheticSpec, epochs: usize) -> (f64, f64) {
    let tasks = generate_tasks(spec).unwrap();
    let train = to_examples(&tasks[0].train);
    let test = to_examples(&tasks[0].test);
    let mut learner = HashedBowLearner::new(
        spec.classes_per_task as usize,
        &LearnerConfig {
            feature_dim: 256,
            learning_rate: 5e-2,
            hash_seed: 1,
            signed_hashing: false,
        },
    );
    for _ in 0..epochs {
        for batch in train.chunks(32) {
            learner.train_step(batch).unwrap();
        }
    }
    (accuracy(&learner, &train), accuracy(&learner, &test))
}

/// Train-to-convergence oracle: disjoint class blocks with a pure signal
/// are learnable to at least 99% accuracy.
#[test]
fn pure_class_signal_is_learnable_to_99_percent() {
    let spec = SyntheticSpec {
        tasks: 1,
        train_per_task: 600,
        test_per_task: 200,
        alpha: 1.0,
        ..SyntheticSpec::default()
    };
    let (train_acc, test_acc) = train_to_convergence(&spec, 20);
    assert!(train_acc >= 0.99, "train accuracy {train_acc}");
    assert!(test_acc >= 0.99, "test accuracy {test_acc}");
}

/// Binomial oracle: with no class signal the classes are indistinguishable
/// and held-out accuracy sits at 1/C within 4 sigma.
#[test]
fn zero_class_signal_scores_at_chance() {
    let spec = SyntheticSpec {
        tasks: 1,
        train_per_task: 600,
        test_per_task: 400,
        alpha: 0.0,
        ..SyntheticSpec::default()
    };
    let (_, test_acc) = train_to_convergence(&spec, 20);
    let p = 1.0 / spec.classes_per_task as f64;
    let sigma = (p * (1.0 - p) / spec.test_per_task as f64).sqrt();
    assert!(
        (test_acc - p).abs() <= 4.0 * sigma,
        "test accuracy {test_acc} outside {p} +/- {}",
        4.0 * sigma
    );
}

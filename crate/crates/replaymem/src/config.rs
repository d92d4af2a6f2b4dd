//! Experiment configuration: one self-contained JSON object per run.

use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::data::TaskManifest;
use crate::error::TrainError;
use crate::learner::LearnerConfig;
use crate::policies::{KeyMode, PolicyKind};

/// Local adaptation (nearest-neighbor fine-tuning at evaluation).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct LocalAdaptationParams {
    /// Neighbors retrieved from memory per test example.
    pub k: usize,
    /// Gradient steps per test example.
    pub steps: usize,
    /// Weight of the proximity regularizer pulling back to the base model.
    pub reg: f64,
    pub adapt_lr: f64,
}

impl Default for LocalAdaptationParams {
    fn default() -> Self {
        Self {
            k: 32,
            steps: 10,
            reg: 1e-3,
            adapt_lr: 1e-2,
        }
    }
}

/// Full description of one experiment run.
///
/// Serializes to a flat JSON object with every default explicit, so two
/// configs can be diffed textually. `parse -> serialize -> parse` is the
/// identity.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    /// Task corpora; may be empty when datasets are supplied in memory.
    pub tasks: Vec<TaskManifest>,
    /// Named task-order permutations. Empty means "declaration order".
    pub orders: BTreeMap<String, Vec<String>>,
    /// Which order this run uses.
    pub order: String,
    /// Memory capacity as a fraction of the total training stream.
    pub capacity_fraction: f64,
    /// One replay batch per this many new-data batches (100 = a 1% replay
    /// ratio at equal batch sizes).
    pub replay_every: u64,
    pub batch_size: usize,
    pub policy: PolicyKind,
    /// Key space for the class-based policies (ring buffer, MoF).
    pub key_mode: KeyMode,
    pub learner: LearnerConfig,
    pub seed: u64,
    pub local_adaptation: Option<LocalAdaptationParams>,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            tasks: Vec::new(),
            orders: BTreeMap::new(),
            order: "default".to_string(),
            capacity_fraction: 0.10,
            replay_every: 100,
            batch_size: 32,
            policy: PolicyKind::Reservoir,
            key_mode: KeyMode::Class,
            learner: LearnerConfig::default(),
            seed: 0,
            local_adaptation: None,
        }
    }
}

impl ExperimentConfig {
    pub fn from_json(text: &str) -> Result<Self, serde_json::Error> {
        serde_json::from_str(text)
    }

    pub fn from_file(path: impl AsRef<Path>) -> Result<Self, TrainError> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path)
            .map_err(|e| TrainError::Config(format!("cannot read {}: {e}", path.display())))?;
        Self::from_json(&text)
            .map_err(|e| TrainError::Config(format!("cannot parse {}: {e}", path.display())))
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serializes")
    }

    /// Policy label used in run ids and metrics rows; key-based policies in
    /// task mode get a `_task` suffix so the two variants stay separable.
    pub fn policy_label(&self) -> String {
        if self.key_mode == KeyMode::Task && self.policy.uses_keys() {
            format!("{}_task", self.policy.name())
        } else {
            self.policy.name().to_string()
        }
    }

    /// Stable identifier of this run's (policy, order, capacity, seed) cell.
    pub fn run_id(&self) -> String {
        format!(
            "{}-{}-c{}-s{}",
            self.policy_label(),
            self.order,
            self.capacity_fraction,
            self.seed
        )
    }

    /// Task names in the order this run streams them.
    pub fn effective_order(&self) -> Result<Vec<String>, TrainError> {
        if self.orders.is_empty() {
            return Ok(self.tasks.iter().map(|t| t.name.clone()).collect());
        }
        self.orders
            .get(&self.order)
            .cloned()
            .ok_or_else(|| TrainError::Config(format!("order {:?} is not defined", self.order)))
    }

    pub fn validate(&self) -> Result<(), TrainError> {
        if !(self.capacity_fraction > 0.0 && self.capacity_fraction <= 1.0) {
            return Err(TrainError::Config(format!(
                "capacity_fraction must be in (0, 1], got {}",
                self.capacity_fraction
            )));
        }
        if self.batch_size == 0 {
            return Err(TrainError::Config("batch_size must be positive".into()));
        }
        if self.replay_every == 0 {
            return Err(TrainError::Config("replay_every must be positive".into()));
        }
        if let Some(adapt) = &self.local_adaptation {
            if adapt.adapt_lr <= 0.0 {
                return Err(TrainError::Config("adapt_lr must be positive".into()));
            }
            if adapt.reg < 0.0 {
                return Err(TrainError::Config("reg must be non-negative".into()));
            }
        }
        if !self.orders.is_empty() && !self.orders.contains_key(&self.order) {
            return Err(TrainError::Config(format!(
                "order {:?} is not defined",
                self.order
            )));
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn round_trip_is_identity() {
        let mut config = ExperimentConfig {
            policy: PolicyKind::Mof,
            key_mode: KeyMode::Task,
            local_adaptation: Some(LocalAdaptationParams::default()),
            order: "ii".into(),
            ..Default::default()
        };
        config
            .orders
            .insert("ii".into(), vec!["b".into(), "a".into()]);
        let json = config.to_json();
        let parsed = ExperimentConfig::from_json(&json).unwrap();
        assert_eq!(parsed, config);
        assert_eq!(parsed.to_json(), json);
    }

    #[test]
    fn unknown_fields_are_rejected() {
        let err = ExperimentConfig::from_json(r#"{"capacity_fractoin": 0.1}"#);
        assert!(err.is_err());
    }

    #[test]
    fn defaults_match_documented_values() {
        let config = ExperimentConfig::default();
        assert_eq!(config.capacity_fraction, 0.10);
        assert_eq!(config.replay_every, 100);
        assert_eq!(config.batch_size, 32);
        let adapt = LocalAdaptationParams::default();
        assert_eq!(adapt.k, 32);
        assert_eq!(adapt.steps, 10);
    }

    #[test]
    fn task_mode_key_policies_get_labeled() {
        let mut config = ExperimentConfig {
            policy: PolicyKind::RingBuffer,
            key_mode: KeyMode::Task,
            ..Default::default()
        };
        assert_eq!(config.policy_label(), "ring_buffer_task");
        config.policy = PolicyKind::Surprise;
        assert_eq!(config.policy_label(), "surprise");
    }

    #[test]
    fn invalid_capacity_is_rejected() {
        let mut config = ExperimentConfig {
            capacity_fraction: 0.0,
            ..Default::default()
        };
        assert!(config.validate().is_err());
        config.capacity_fraction = 1.5;
        assert!(config.validate().is_err());
    }
}

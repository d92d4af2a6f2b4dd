//! Model feedback handed to criteria-based policies.

use crate::error::PolicyError;

/// Which feedback components a policy consumes. The trainer computes only
/// what is requested, so score-free policies skip the model pass entirely.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct FeedbackNeeds {
    pub probs: bool,
    pub loss: bool,
    pub features: bool,
}

impl FeedbackNeeds {
    pub const NONE: FeedbackNeeds = FeedbackNeeds {
        probs: false,
        loss: false,
        features: false,
    };

    pub fn any(&self) -> bool {
        self.probs || self.loss || self.features
    }
}

/// Per-batch model outputs computed before that batch's gradient step.
///
/// Components are optional so the trainer can populate only what the active
/// policy needs; constructors validate the probability and loss invariants.
#[derive(Debug, Clone, Default)]
pub struct ModelFeedback {
    probs: Option<Vec<Vec<f64>>>,
    per_example_loss: Option<Vec<f64>>,
    batch_mean_loss: Option<f64>,
    features: Option<Vec<Vec<f64>>>,
}

impl ModelFeedback {
    pub fn new() -> Self {
        Self::default()
    }

    /// Attach per-example probability rows. Each row must be a distribution:
    /// non-negative entries summing to 1 within 1e-6.
    pub fn with_probs(mut self, probs: Vec<Vec<f64>>) -> Result<Self, String> {
        for (i, row) in probs.iter().enumerate() {
            if row.iter().any(|&p| p < 0.0 || !p.is_finite()) {
                return Err(format!(
                    "probability row {i} has a negative or non-finite entry"
                ));
            }
            let sum: f64 = row.iter().sum();
            if (sum - 1.0).abs() > 1e-6 {
                return Err(format!("probability row {i} sums to {sum}, not 1"));
            }
        }
        self.probs = Some(probs);
        Ok(self)
    }

    /// Attach per-example losses; the batch mean is derived from them.
    pub fn with_losses(mut self, per_example: Vec<f64>) -> Result<Self, String> {
        if per_example.iter().any(|&l| l < 0.0 || !l.is_finite()) {
            return Err("losses must be finite and non-negative".to_string());
        }
        let mean = if per_example.is_empty() {
            0.0
        } else {
            per_example.iter().sum::<f64>() / per_example.len() as f64
        };
        self.per_example_loss = Some(per_example);
        self.batch_mean_loss = Some(mean);
        self.check_loss_mean().map_err(|e| e.to_string())?;
        Ok(self)
    }

    pub fn with_features(mut self, features: Vec<Vec<f64>>) -> Self {
        self.features = Some(features);
        self
    }

    fn check_loss_mean(&self) -> Result<(), String> {
        if let (Some(losses), Some(mean)) = (&self.per_example_loss, self.batch_mean_loss) {
            if !losses.is_empty() {
                let recomputed = losses.iter().sum::<f64>() / losses.len() as f64;
                if (recomputed - mean).abs() > 1e-9 {
                    return Err(format!(
                        "batch mean loss {mean} does not match per-example mean {recomputed}"
                    ));
                }
            }
        }
        Ok(())
    }

    pub fn probs(&self, policy: &'static str) -> Result<&[Vec<f64>], PolicyError> {
        self.probs.as_deref().ok_or(PolicyError::MissingFeedback {
            policy,
            missing: "probability",
        })
    }

    pub fn per_example_loss(&self, policy: &'static str) -> Result<&[f64], PolicyError> {
        self.per_example_loss
            .as_deref()
            .ok_or(PolicyError::MissingFeedback {
                policy,
                missing: "loss",
            })
    }

    pub fn batch_mean_loss(&self, policy: &'static str) -> Result<f64, PolicyError> {
        self.batch_mean_loss.ok_or(PolicyError::MissingFeedback {
            policy,
            missing: "loss",
        })
    }

    pub fn features(&self, policy: &'static str) -> Result<&[Vec<f64>], PolicyError> {
        self.features
            .as_deref()
            .ok_or(PolicyError::MissingFeedback {
                policy,
                missing: "feature",
            })
    }

    pub fn has_probs(&self) -> bool {
        self.probs.is_some()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn probs_must_sum_to_one() {
        let ok = ModelFeedback::new().with_probs(vec![vec![0.5, 0.5]]);
        assert!(ok.is_ok());
        let bad = ModelFeedback::new().with_probs(vec![vec![0.5, 0.4]]);
        assert!(bad.is_err());
    }

    #[test]
    fn losses_must_be_non_negative() {
        assert!(ModelFeedback::new().with_losses(vec![0.1, 0.2]).is_ok());
        assert!(ModelFeedback::new().with_losses(vec![-0.1]).is_err());
    }

    #[test]
    fn missing_component_reports_policy_name() {
        let fb = ModelFeedback::new();
        let err = fb.probs("surprise").unwrap_err();
        assert_eq!(
            err,
            PolicyError::MissingFeedback {
                policy: "surprise",
                missing: "probability"
            }
        );
    }
}

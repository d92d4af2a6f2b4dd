//! Mean of features: keep the examples closest to their key's average
//! feature vector.
//!
//! Per key (class, or task in task mode) the policy tracks the exact
//! arithmetic mean of the stored members' feature vectors. While the buffer
//! has room every example is admitted. Once full, an incoming example whose
//! Euclidean distance to its key's mean is strictly smaller than the
//! farthest stored member's distance replaces that member; examples of keys
//! not yet present evict the farthest member of the most populated key.
//! Means and member distances are recomputed exactly after every mutation.

use std::collections::BTreeMap;

use rand::RngCore;

use crate::error::PolicyError;
use crate::feedback::{FeedbackNeeds, ModelFeedback};
use crate::memory::{EntryId, MemoryBuffer};
use crate::stream::Example;

use super::{key_of, KeyMode, PolicyKey, PolicyKind, PopulationPolicy};

#[derive(Debug, Clone)]
struct Member {
    id: EntryId,
    features: Vec<f64>,
    /// Euclidean distance to the key's current mean.
    distance: f64,
}

#[derive(Debug, Clone, Default)]
struct KeyCluster {
    mean: Vec<f64>,
    members: Vec<Member>,
}

impl KeyCluster {
    /// Recompute the mean from the members and refresh their distances.
    fn refresh(&mut self) {
        if self.members.is_empty() {
            self.mean.clear();
            return;
        }
        let dim = self.members[0].features.len();
        let mut mean = vec![0.0f64; dim];
        for member in &self.members {
            for (m, &f) in mean.iter_mut().zip(&member.features) {
                *m += f;
            }
        }
        let n = self.members.len() as f64;
        for m in &mut mean {
            *m /= n;
        }
        self.mean = mean;
        for member in &mut self.members {
            member.distance = euclidean(&member.features, &self.mean);
        }
    }

    /// Index of the member farthest from the mean; earliest on ties.
    fn farthest(&self) -> Option<usize> {
        let mut best: Option<(usize, f64)> = None;
        for (i, member) in self.members.iter().enumerate() {
            match best {
                Some((_, d)) if d >= member.distance => {}
                _ => best = Some((i, member.distance)),
            }
        }
        best.map(|(i, _)| i)
    }
}

fn euclidean(features: &[f64], mean: &[f64]) -> f64 {
    features
        .iter()
        .zip(mean)
        .map(|(&f, &m)| {
            let d = f - m;
            d * d
        })
        .sum::<f64>()
        .sqrt()
}

#[derive(Debug, Clone)]
pub struct MofPolicy {
    key_mode: KeyMode,
    clusters: BTreeMap<PolicyKey, KeyCluster>,
    feature_dim: Option<usize>,
}

impl MofPolicy {
    pub fn new(key_mode: KeyMode) -> Self {
        Self {
            key_mode,
            clusters: BTreeMap::new(),
            feature_dim: None,
        }
    }

    /// Stored mean feature vector of a key, if the key has members.
    pub fn key_mean(&self, key: PolicyKey) -> Option<&[f64]> {
        self.clusters
            .get(&key)
            .filter(|c| !c.members.is_empty())
            .map(|c| c.mean.as_slice())
    }

    /// `(entry id, feature vector)` pairs of a key's stored members.
    pub fn key_members(&self, key: PolicyKey) -> Vec<(EntryId, &[f64])> {
        self.clusters
            .get(&key)
            .map(|c| {
                c.members
                    .iter()
                    .map(|m| (m.id, m.features.as_slice()))
                    .collect()
            })
            .unwrap_or_default()
    }

    pub fn keys(&self) -> Vec<PolicyKey> {
        self.clusters
            .iter()
            .filter(|(_, c)| !c.members.is_empty())
            .map(|(&k, _)| k)
            .collect()
    }

    fn check_dim(&mut self, features: &[f64]) -> Result<(), PolicyError> {
        match self.feature_dim {
            Some(dim) if dim != features.len() => Err(PolicyError::FeatureDimension {
                expected: dim,
                got: features.len(),
            }),
            Some(_) => Ok(()),
            None => {
                self.feature_dim = Some(features.len());
                Ok(())
            }
        }
    }

    /// Most populated key; smallest key on ties, for determinism.
    fn most_populated(&self) -> Option<PolicyKey> {
        let mut best: Option<(PolicyKey, usize)> = None;
        for (&key, cluster) in &self.clusters {
            let n = cluster.members.len();
            if n == 0 {
                continue;
            }
            match best {
                Some((_, m)) if m >= n => {}
                _ => best = Some((key, n)),
            }
        }
        best.map(|(k, _)| k)
    }
}

impl PopulationPolicy for MofPolicy {
    fn kind(&self) -> PolicyKind {
        PolicyKind::Mof
    }

    fn feedback_needs(&self) -> FeedbackNeeds {
        FeedbackNeeds {
            features: true,
            ..FeedbackNeeds::NONE
        }
    }

    fn observe_batch(
        &mut self,
        buffer: &mut MemoryBuffer,
        batch: &[Example],
        feedback: Option<&ModelFeedback>,
        _rng: &mut dyn RngCore,
    ) -> Result<(), PolicyError> {
        if batch.is_empty() {
            return Ok(());
        }
        let feedback = feedback.ok_or(PolicyError::MissingFeedback {
            policy: "mof",
            missing: "feature",
        })?;
        let features = feedback.features("mof")?;
        super::check_feedback_len(features.len(), batch.len())?;

        for (example, feats) in batch.iter().zip(features) {
            self.check_dim(feats)?;
            let key = key_of(self.key_mode, example)?;

            if !buffer.is_full() {
                let cluster = self.clusters.entry(key).or_default();
                let distance = if cluster.members.is_empty() {
                    0.0
                } else {
                    euclidean(feats, &cluster.mean)
                };
                let receipt = buffer.insert(example.clone(), distance, None)?;
                cluster.members.push(Member {
                    id: receipt.id,
                    features: feats.clone(),
                    distance,
                });
                cluster.refresh();
                continue;
            }

            let has_members = self
                .clusters
                .get(&key)
                .is_some_and(|c| !c.members.is_empty());
            if has_members {
                let cluster = self.clusters.get_mut(&key).expect("cluster exists");
                let incoming = euclidean(feats, &cluster.mean);
                let far_idx = cluster.farthest().expect("non-empty cluster");
                if incoming < cluster.members[far_idx].distance {
                    let victim = cluster.members.remove(far_idx);
                    buffer.evict(victim.id)?;
                    let receipt = buffer.insert(example.clone(), incoming, None)?;
                    cluster.members.push(Member {
                        id: receipt.id,
                        features: feats.clone(),
                        distance: incoming,
                    });
                    cluster.refresh();
                }
            } else {
                // unseen key at a full buffer: make room by evicting the
                // farthest member of the most populated key
                let donor_key = self.most_populated().expect("full buffer has members");
                let donor = self.clusters.get_mut(&donor_key).expect("donor exists");
                let far_idx = donor.farthest().expect("non-empty donor");
                let victim = donor.members.remove(far_idx);
                buffer.evict(victim.id)?;
                donor.refresh();

                let receipt = buffer.insert(example.clone(), 0.0, None)?;
                let cluster = self.clusters.entry(key).or_default();
                cluster.members.push(Member {
                    id: receipt.id,
                    features: feats.clone(),
                    distance: 0.0,
                });
                cluster.refresh();
            }
        }
        Ok(())
    }
}

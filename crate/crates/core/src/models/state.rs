use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::drift::{drift_bernoulli, drift_gaussian};
use crate::content::KcId;
use crate::corpus::Label;
use crate::gaussmath::Gaussian1D;

/// Key under which single-skill models store the learner's one skill.
pub const SINGLE_SKILL: KcId = KcId::MAX;

/// One Gaussian skill with the learner order at which it was last updated.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GaussianSkill {
    pub belief: Gaussian1D,
    pub last_update_order: u64,
}

/// Per-learner Gaussian skills. An absent component is at the prior.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct GaussianSkillState {
    pub skills: BTreeMap<KcId, GaussianSkill>,
}

impl GaussianSkillState {
    /// Belief about `kc` just before the event at `order`, with drift for the
    /// steps elapsed since its last update.
    pub fn belief_at(&self, kc: KcId, order: u64, prior: Gaussian1D, tau: f64) -> Gaussian1D {
        match self.skills.get(&kc) {
            Some(s) => drift_gaussian(s.belief, order.saturating_sub(s.last_update_order), tau),
            None => prior,
        }
    }

    pub fn commit(&mut self, kc: KcId, belief: Gaussian1D, order: u64) {
        self.skills.insert(kc, GaussianSkill { belief, last_update_order: order });
    }

    /// Adds `steps` of drift to every stored skill.
    pub fn apply_drift(&mut self, steps: u64, tau: f64) {
        for s in self.skills.values_mut() {
            s.belief = drift_gaussian(s.belief, steps, tau);
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BernoulliSkill {
    pub pi: f64,
    pub last_update_order: u64,
}

/// Per-learner mastery probabilities. An absent component is at 0.5.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct BernoulliSkillState {
    pub skills: BTreeMap<KcId, BernoulliSkill>,
}

impl BernoulliSkillState {
    pub const PRIOR: f64 = 0.5;

    pub fn mastery_at(&self, kc: KcId, order: u64, tau: f64) -> f64 {
        match self.skills.get(&kc) {
            Some(s) => drift_bernoulli(s.pi, order.saturating_sub(s.last_update_order), tau),
            None => Self::PRIOR,
        }
    }

    pub fn commit(&mut self, kc: KcId, pi: f64, order: u64) {
        self.skills.insert(kc, BernoulliSkill { pi, last_update_order: order });
    }

    pub fn apply_drift(&mut self, steps: u64, tau: f64) {
        for s in self.skills.values_mut() {
            s.pi = drift_bernoulli(s.pi, steps, tau);
        }
    }
}

/// Running count of a learner's engaged outcomes.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct MarginTracker {
    pub engaged: u64,
    pub total: u64,
}

impl MarginTracker {
    pub fn record(&mut self, label: Label) {
        self.total += 1;
        if label.is_engaged() {
            self.engaged += 1;
        }
    }

    /// Laplace-smoothed engagement rate, always inside `(0, 1)`.
    pub fn smoothed_rate(&self) -> f64 {
        (self.engaged as f64 + 1.0) / (self.total as f64 + 2.0)
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub enum SkillState {
    #[default]
    Empty,
    Gaussian(GaussianSkillState),
    Bernoulli(BernoulliSkillState),
}

/// Everything a per-learner model knows about one learner.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct LearnerState {
    pub skills: SkillState,
    pub tracker: MarginTracker,
    pub last_label: Option<Label>,
}

impl LearnerState {
    pub(crate) fn gaussian_mut(&mut self) -> &mut GaussianSkillState {
        if !matches!(self.skills, SkillState::Gaussian(_)) {
            self.skills = SkillState::Gaussian(GaussianSkillState::default());
        }
        match &mut self.skills {
            SkillState::Gaussian(g) => g,
            _ => unreachable!(),
        }
    }

    pub(crate) fn bernoulli_mut(&mut self) -> &mut BernoulliSkillState {
        if !matches!(self.skills, SkillState::Bernoulli(_)) {
            self.skills = SkillState::Bernoulli(BernoulliSkillState::default());
        }
        match &mut self.skills {
            SkillState::Bernoulli(b) => b,
            _ => unreachable!(),
        }
    }

    pub fn gaussian(&self) -> Option<&GaussianSkillState> {
        match &self.skills {
            SkillState::Gaussian(g) => Some(g),
            _ => None,
        }
    }

    pub fn bernoulli(&self) -> Option<&BernoulliSkillState> {
        match &self.skills {
            SkillState::Bernoulli(b) => Some(b),
            _ => None,
        }
    }
}

/// Identifies a shared resource-side variable of a global model.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct ResourceKey {
    pub lecture_id: String,
    /// `None` when one variable stands for the whole lecture.
    pub fragment_index: Option<usize>,
    /// `Some` for per-topic latent depths.
    pub kc_id: Option<KcId>,
}

/// A resource variable and how many events it has taken part in; each
/// participation is one drift step.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ResourceSkill {
    pub belief: Gaussian1D,
    pub updates: u64,
}

/// Shared resource table of the global models.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct ResourceTable {
    pub entries: BTreeMap<ResourceKey, ResourceSkill>,
}

impl ResourceTable {
    /// Belief before the next participation: stored belief plus one drift
    /// step, or `prior` if never seen.
    pub fn belief(&self, key: &ResourceKey, prior: Gaussian1D, tau: f64) -> Gaussian1D {
        match self.entries.get(key) {
            Some(r) => drift_gaussian(r.belief, 1, tau),
            None => prior,
        }
    }

    pub fn commit(&mut self, key: ResourceKey, belief: Gaussian1D) {
        let entry = self.entries.entry(key).or_insert(ResourceSkill { belief, updates: 0 });
        entry.belief = belief;
        entry.updates += 1;
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }
}

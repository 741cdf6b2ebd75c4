//! Engagement predictors behind one online interface.
//!
//! Every model predicts `P(engaged)` for an event from the learner's state,
//! then consumes the label. Per-learner models keep everything in
//! [`LearnerState`]; the global models (both vanilla TrueSkill variants and
//! dynamic-depth TrueLearn) also own a shared [`ResourceTable`] and must see
//! all events as one ordered stream.

mod baseline;
mod drift;
mod greater;
mod kt;
mod novelty;
mod snapshot;
mod state;

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

pub use baseline::{predict_majority, predict_persistence};
pub use drift::{drift_bernoulli, drift_gaussian};
pub use greater::{difference, predict_greater, update_greater};
pub use kt::{kt_posterior, noisy_and, predict_kt, update_kt, MAX_ENUMERATED_TOPICS};
pub use novelty::{derive_margin, margin_probability, predict_novelty, update_novelty};
pub use snapshot::{read_snapshot, write_snapshot, Snapshot, SNAPSHOT_VERSION};
pub use state::{
    BernoulliSkill, BernoulliSkillState, GaussianSkill, GaussianSkillState, LearnerState, MarginTracker, ResourceKey,
    ResourceSkill, ResourceTable, SkillState, SINGLE_SKILL,
};

use crate::corpus::{EngagementEvent, Label, Topic};
use crate::gaussmath::Gaussian1D;
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ModelKind {
    Persistence,
    Majority,
    VanillaTrueskill,
    VanillaTrueskillVideo,
    MultiSkillKt,
    TruelearnDynamicDepth,
    TruelearnFixedDepth,
    TruelearnNovelty,
}

impl ModelKind {
    pub const ALL: [ModelKind; 8] = [
        ModelKind::Persistence,
        ModelKind::Majority,
        ModelKind::VanillaTrueskill,
        ModelKind::VanillaTrueskillVideo,
        ModelKind::MultiSkillKt,
        ModelKind::TruelearnDynamicDepth,
        ModelKind::TruelearnFixedDepth,
        ModelKind::TruelearnNovelty,
    ];

    pub fn name(self) -> &'static str {
        match self {
            ModelKind::Persistence => "persistence",
            ModelKind::Majority => "majority",
            ModelKind::VanillaTrueskill => "vanilla-trueskill",
            ModelKind::VanillaTrueskillVideo => "vanilla-trueskill-video",
            ModelKind::MultiSkillKt => "multi-skill-kt",
            ModelKind::TruelearnDynamicDepth => "truelearn-dynamic-depth",
            ModelKind::TruelearnFixedDepth => "truelearn-fixed-depth",
            ModelKind::TruelearnNovelty => "truelearn-novelty",
        }
    }

    /// Whether the model shares resource variables across learners.
    pub fn is_global(self) -> bool {
        matches!(
            self,
            ModelKind::VanillaTrueskill | ModelKind::VanillaTrueskillVideo | ModelKind::TruelearnDynamicDepth
        )
    }

    fn uses_topics(self) -> bool {
        matches!(
            self,
            ModelKind::MultiSkillKt
                | ModelKind::TruelearnDynamicDepth
                | ModelKind::TruelearnFixedDepth
                | ModelKind::TruelearnNovelty
        )
    }
}

impl fmt::Display for ModelKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for ModelKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        ModelKind::ALL.into_iter().find(|k| k.name() == s).ok_or_else(|| {
            let names: Vec<_> = ModelKind::ALL.iter().map(|k| k.name()).collect();
            Error::Config(format!("unknown model `{s}`; expected one of {}", names.join(", ")))
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelConfig {
    pub kind: ModelKind,
    pub initial_mean: f64,
    /// σ₀²
    pub initial_variance: f64,
    /// Performance noise standard deviation; its square is the per-member
    /// noise variance.
    pub beta: f64,
    pub tau: f64,
    pub use_negative: bool,
    pub top_k: usize,
    pub kt_noise: f64,
    pub default_engagement_rate: f64,
}

impl ModelConfig {
    pub fn for_kind(kind: ModelKind) -> Self {
        let base = ModelConfig {
            kind,
            initial_mean: 0.0,
            initial_variance: 0.5,
            beta: 0.5,
            tau: 0.0,
            use_negative: true,
            top_k: 5,
            kt_noise: 0.1,
            default_engagement_rate: 0.5,
        };
        match kind {
            ModelKind::VanillaTrueskill | ModelKind::VanillaTrueskillVideo => ModelConfig {
                initial_mean: 25.0,
                initial_variance: (25.0f64 / 3.0).powi(2),
                beta: 25.0 / 6.0,
                tau: 25.0 / 300.0,
                ..base
            },
            ModelKind::TruelearnDynamicDepth | ModelKind::TruelearnFixedDepth => {
                ModelConfig { use_negative: false, ..base }
            }
            _ => base,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::Config(m));
        if !(self.initial_variance > 0.0 && self.initial_variance.is_finite()) {
            return bad(format!("initial_variance must be positive, got {}", self.initial_variance));
        }
        if !self.initial_mean.is_finite() {
            return bad(format!("initial_mean must be finite, got {}", self.initial_mean));
        }
        if !(self.beta > 0.0 && self.beta.is_finite()) {
            return bad(format!("beta must be positive, got {}", self.beta));
        }
        if !(self.tau >= 0.0 && self.tau.is_finite()) {
            return bad(format!("tau must be non-negative, got {}", self.tau));
        }
        if !(0.0..0.5).contains(&self.kt_noise) {
            return bad(format!("kt_noise must lie in [0, 0.5), got {}", self.kt_noise));
        }
        if !(0.0..=1.0).contains(&self.default_engagement_rate) {
            return bad(format!("default_engagement_rate must lie in [0, 1], got {}", self.default_engagement_rate));
        }
        if self.top_k == 0 {
            return bad("top_k must be at least 1".into());
        }
        if self.kind == ModelKind::MultiSkillKt && self.top_k > MAX_ENUMERATED_TOPICS {
            return bad(format!("top_k above {MAX_ENUMERATED_TOPICS} is not supported for {}", self.kind));
        }
        Ok(())
    }

    pub(crate) fn skill_prior(&self) -> Gaussian1D {
        Gaussian1D { mean: self.initial_mean, variance: self.initial_variance }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Prediction {
    pub probability: f64,
    pub label: Label,
}

impl Prediction {
    fn from_probability(probability: f64) -> Self {
        Prediction { probability, label: Label::from_sign(probability >= 0.5) }
    }
}

/// The event's leading `k` topics.
pub(crate) fn topics_of(event: &EngagementEvent, k: usize) -> Result<&[Topic]> {
    if event.topics.is_empty() {
        return Err(Error::InvalidEvent(format!(
            "{}/{} fragment {} has no topics",
            event.learner_id, event.lecture_id, event.fragment_index
        )));
    }
    Ok(&event.topics[..k.min(event.topics.len())])
}

/// A configured model plus, for global kinds, its shared resource table.
#[derive(Debug, Clone, PartialEq)]
pub struct Model {
    config: ModelConfig,
    resources: ResourceTable,
}

impl Model {
    pub fn new(config: ModelConfig) -> Result<Self> {
        config.validate()?;
        Ok(Model { config, resources: ResourceTable::default() })
    }

    pub(crate) fn from_parts(config: ModelConfig, resources: ResourceTable) -> Result<Self> {
        config.validate()?;
        Ok(Model { config, resources })
    }

    pub fn config(&self) -> &ModelConfig {
        &self.config
    }

    pub fn kind(&self) -> ModelKind {
        self.config.kind
    }

    pub fn resources(&self) -> &ResourceTable {
        &self.resources
    }

    /// Predicts the event without consuming its label.
    pub fn predict(&self, state: &LearnerState, event: &EngagementEvent) -> Result<Prediction> {
        let cfg = &self.config;
        if cfg.kind.uses_topics() {
            topics_of(event, cfg.top_k)?;
        }
        let p = match cfg.kind {
            ModelKind::Persistence => {
                let (p, label) = baseline::persistence_from(state.last_label, cfg.default_engagement_rate);
                return Ok(Prediction { probability: p, label });
            }
            ModelKind::Majority => {
                let (p, label) =
                    baseline::majority_from(state.tracker.engaged, state.tracker.total, cfg.default_engagement_rate);
                return Ok(Prediction { probability: p, label });
            }
            ModelKind::MultiSkillKt => {
                let empty = BernoulliSkillState::default();
                predict_kt(state.bernoulli().unwrap_or(&empty), event, cfg)?
            }
            ModelKind::VanillaTrueskill | ModelKind::VanillaTrueskillVideo => {
                let (l, r) = self.single_skill_teams(state, event);
                predict_greater(l, r, 1, cfg.beta)
            }
            ModelKind::TruelearnFixedDepth | ModelKind::TruelearnDynamicDepth => {
                let (l, r) = self.topic_teams(state, event);
                predict_greater(l.into_iter().sum(), r.into_iter().sum(), self.team_size(event), cfg.beta)
            }
            ModelKind::TruelearnNovelty => {
                let (l, r) = self.topic_teams(state, event);
                let n = self.team_size(event);
                let margin = novelty::model_margin(&state.tracker, n, cfg.beta);
                predict_novelty(l.into_iter().sum(), r.into_iter().sum(), n, cfg.beta, margin)
            }
        };
        Ok(Prediction::from_probability(p))
    }

    /// Consumes the event's label.
    pub fn update(&mut self, state: &mut LearnerState, event: &EngagementEvent) -> Result<()> {
        let cfg = self.config.clone();
        let skip = !event.label.is_engaged() && !cfg.use_negative;
        match cfg.kind {
            ModelKind::Persistence => state.last_label = Some(event.label),
            ModelKind::Majority => state.tracker.record(event.label),
            ModelKind::TruelearnNovelty => {
                let LearnerState { skills, tracker, .. } = state;
                if !matches!(skills, SkillState::Gaussian(_)) {
                    *skills = SkillState::Gaussian(GaussianSkillState::default());
                }
                let SkillState::Gaussian(g) = skills else { unreachable!() };
                update_novelty(g, event, &cfg, tracker)?;
            }
            _ if skip => {}
            ModelKind::MultiSkillKt => update_kt(state.bernoulli_mut(), event, &cfg)?,
            ModelKind::TruelearnFixedDepth => update_greater(state.gaussian_mut(), event, &cfg)?,
            ModelKind::VanillaTrueskill | ModelKind::VanillaTrueskillVideo => {
                let (l, r) = self.single_skill_teams(state, event);
                let (mut l, mut r) = ([l], [r]);
                greater::team_update(&mut l, &mut r, cfg.beta, greater::greater_condition(event.label))?;
                state.gaussian_mut().commit(SINGLE_SKILL, l[0], event.order);
                self.resources.commit(self.resource_key(event, None), r[0]);
            }
            ModelKind::TruelearnDynamicDepth => {
                let (mut l, mut r) = self.topic_teams(state, event);
                greater::team_update(&mut l, &mut r, cfg.beta, greater::greater_condition(event.label))?;
                let topics = topics_of(event, cfg.top_k)?;
                let g = state.gaussian_mut();
                for ((t, lg), rg) in topics.iter().zip(l).zip(r) {
                    g.commit(t.kc_id, lg, event.order);
                    self.resources.commit(self.resource_key(event, Some(t.kc_id)), rg);
                }
            }
        }
        Ok(())
    }

    /// Predicts, then consumes the label. Errors carry the event's context.
    pub fn predict_and_update(&mut self, state: &mut LearnerState, event: &EngagementEvent) -> Result<Prediction> {
        let run = |m: &mut Self, s: &mut LearnerState| {
            let p = m.predict(s, event)?;
            m.update(s, event)?;
            Ok(p)
        };
        run(self, state).map_err(|e: Error| e.at_event(&event.learner_id, event.order))
    }

    fn team_size(&self, event: &EngagementEvent) -> usize {
        self.config.top_k.min(event.topics.len())
    }

    fn resource_key(&self, event: &EngagementEvent, kc_id: Option<crate::content::KcId>) -> ResourceKey {
        ResourceKey {
            lecture_id: event.lecture_id.clone(),
            fragment_index: match self.config.kind {
                ModelKind::VanillaTrueskillVideo => None,
                _ => Some(event.fragment_index),
            },
            kc_id,
        }
    }

    fn single_skill_teams(&self, state: &LearnerState, event: &EngagementEvent) -> (Gaussian1D, Gaussian1D) {
        let cfg = &self.config;
        let prior = cfg.skill_prior();
        let learner = match state.gaussian() {
            Some(g) => g.belief_at(SINGLE_SKILL, event.order, prior, cfg.tau),
            None => prior,
        };
        let resource = self.resources.belief(&self.resource_key(event, None), prior, cfg.tau);
        (learner, resource)
    }

    /// Per-topic learner skills and resource depths for the event.
    fn topic_teams(&self, state: &LearnerState, event: &EngagementEvent) -> (Vec<Gaussian1D>, Vec<Gaussian1D>) {
        let cfg = &self.config;
        let prior = cfg.skill_prior();
        let topics = &event.topics[..self.team_size(event)];
        let learner = topics
            .iter()
            .map(|t| match state.gaussian() {
                Some(g) => g.belief_at(t.kc_id, event.order, prior, cfg.tau),
                None => prior,
            })
            .collect();
        let resource = topics
            .iter()
            .map(|t| match cfg.kind {
                ModelKind::TruelearnDynamicDepth => {
                    let depth_prior = Gaussian1D { mean: t.cosine, variance: cfg.initial_variance };
                    self.resources.belief(&self.resource_key(event, Some(t.kc_id)), depth_prior, cfg.tau)
                }
                _ => Gaussian1D::fixed(t.cosine),
            })
            .collect();
        (learner, resource)
    }
}

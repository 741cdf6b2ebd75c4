//! Synthetic engagement streams drawn from the novelty generative model.
//!
//! Knowledge components are grouped into subjects. Each lecture fragment
//! covers a fixed set of one subject's components with fixed depths. A
//! learner follows a few subjects, holds a true skill on every component
//! of them and has a personal engagement margin. An event engages iff the
//! noisy learner and resource team performances land within that margin.

use std::collections::BTreeMap;

use rand::seq::{IndexedRandom, SliceRandom};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::content::KcId;
use crate::corpus::{EngagementEvent, Label, Topic};
use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SynthConfig {
    pub seed: u64,
    pub learners: usize,
    pub events_per_learner: usize,
    /// Overrides `events_per_learner`, spreading this many events as evenly
    /// as possible.
    pub total_events: Option<usize>,
    pub kcs: usize,
    pub kcs_per_subject: usize,
    pub topics_per_event: usize,
    pub subjects_per_learner: usize,
    pub lectures_per_subject: usize,
    pub fragments_per_lecture: usize,
    pub skill_mean: f64,
    /// Spread of a learner's per-subject level around `skill_mean`.
    pub subject_level_sd: f64,
    /// Restricts subject levels to one side of `skill_mean`: negative for
    /// below only, positive for above only, zero for both.
    pub subject_level_side: i8,
    /// Variance of each component's skill around its subject level.
    pub skill_variance: f64,
    pub beta: f64,
    /// Learner engagement rates are drawn uniformly from this range.
    pub engagement_rate: (f64, f64),
}

impl Default for SynthConfig {
    fn default() -> Self {
        SynthConfig {
            seed: 0,
            learners: 50,
            events_per_learner: 200,
            total_events: None,
            kcs: 200,
            kcs_per_subject: 10,
            topics_per_event: 5,
            subjects_per_learner: 3,
            lectures_per_subject: 20,
            fragments_per_lecture: 4,
            skill_mean: 0.0,
            subject_level_sd: 0.0,
            subject_level_side: 0,
            skill_variance: 1.0,
            beta: 0.5,
            engagement_rate: (0.5, 0.9),
        }
    }
}

impl SynthConfig {
    fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::Config(format!("synthetic generator: {m}")));
        let subjects = self.kcs / self.kcs_per_subject.max(1);
        if self.learners == 0 {
            return bad("learners must be positive");
        }
        if self.kcs_per_subject == 0 || !self.kcs.is_multiple_of(self.kcs_per_subject) {
            return bad("kcs must be a positive multiple of kcs_per_subject");
        }
        if self.topics_per_event == 0 || self.topics_per_event > self.kcs_per_subject {
            return bad("topics_per_event must lie in 1..=kcs_per_subject");
        }
        if self.subjects_per_learner == 0 || self.subjects_per_learner > subjects {
            return bad("subjects_per_learner must lie in 1..=number of subjects");
        }
        if self.lectures_per_subject == 0 || self.fragments_per_lecture == 0 {
            return bad("lectures and fragments must be positive");
        }
        if !(self.skill_variance > 0.0 && self.beta > 0.0) {
            return bad("skill_variance and beta must be positive");
        }
        if !(self.subject_level_sd >= 0.0 && self.skill_mean.is_finite()) {
            return bad("subject_level_sd must be non-negative and skill_mean finite");
        }
        let (lo, hi) = self.engagement_rate;
        if !(0.0 <= lo && lo <= hi && hi <= 1.0) {
            return bad("engagement_rate must be an ordered range inside [0, 1]");
        }
        Ok(())
    }

    fn event_counts(&self) -> Vec<usize> {
        match self.total_events {
            Some(total) => {
                let base = total / self.learners;
                let extra = total % self.learners;
                (0..self.learners).map(|i| base + usize::from(i < extra)).collect()
            }
            None => vec![self.events_per_learner; self.learners],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LearnerTruth {
    pub skills: BTreeMap<KcId, f64>,
    pub margin: f64,
    pub engagement_rate: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SynthDataset {
    /// Global order: by per-learner step, then learner id.
    pub events: Vec<EngagementEvent>,
    pub truth: BTreeMap<String, LearnerTruth>,
}

struct Fragment {
    lecture_id: String,
    fragment_index: usize,
    topics: Vec<Topic>,
}

pub fn learner_id(i: usize) -> String {
    format!("s{i:05}")
}

pub fn generate(cfg: &SynthConfig) -> Result<SynthDataset> {
    cfg.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let subjects = cfg.kcs / cfg.kcs_per_subject;

    let mut catalogue: Vec<Vec<Fragment>> = Vec::with_capacity(subjects);
    for s in 0..subjects {
        let pool: Vec<KcId> = (0..cfg.kcs_per_subject).map(|j| (s * cfg.kcs_per_subject + j) as KcId).collect();
        let mut frags = Vec::new();
        for lec in 0..cfg.lectures_per_subject {
            for f in 0..cfg.fragments_per_lecture {
                let mut topics: Vec<Topic> = pool
                    .choose_multiple(&mut rng, cfg.topics_per_event)
                    .map(|&kc_id| Topic { kc_id, cosine: rng.random::<f64>() })
                    .collect();
                topics.sort_by(|a, b| b.cosine.total_cmp(&a.cosine).then(a.kc_id.cmp(&b.kc_id)));
                frags.push(Fragment { lecture_id: format!("subj{s:03}-lec{lec:03}"), fragment_index: f, topics });
            }
        }
        catalogue.push(frags);
    }

    let skill = Normal::new(0.0, cfg.skill_variance.sqrt()).expect("valid normal");
    let level = Normal::new(0.0, cfg.subject_level_sd).expect("valid normal");
    let team_noise = Normal::new(0.0, (cfg.topics_per_event as f64).sqrt() * cfg.beta).expect("valid normal");
    let (lo, hi) = cfg.engagement_rate;

    let mut truth = BTreeMap::new();
    let mut per_learner: Vec<Vec<EngagementEvent>> = Vec::with_capacity(cfg.learners);
    let subject_ids: Vec<usize> = (0..subjects).collect();
    for (i, n_events) in cfg.event_counts().into_iter().enumerate() {
        let id = learner_id(i);
        let mut followed: Vec<usize> =
            subject_ids.choose_multiple(&mut rng, cfg.subjects_per_learner).copied().collect();
        followed.sort_unstable();
        let mut skills = BTreeMap::new();
        for &s in &followed {
            let z: f64 = level.sample(&mut rng);
            let offset = match cfg.subject_level_side.signum() {
                0 => z,
                side => side as f64 * z.abs(),
            };
            let centre = cfg.skill_mean + offset;
            for j in 0..cfg.kcs_per_subject {
                skills.insert((s * cfg.kcs_per_subject + j) as KcId, centre + skill.sample(&mut rng));
            }
        }
        let rate = if hi > lo { rng.random_range(lo..=hi) } else { lo };

        let mut gaps = Vec::with_capacity(n_events);
        let mut events = Vec::with_capacity(n_events);
        for order in 0..n_events {
            let s = *followed.choose(&mut rng).expect("non-empty");
            let frag = catalogue[s].choose(&mut rng).expect("non-empty");
            let learner: f64 = frag.topics.iter().map(|t| skills[&t.kc_id]).sum::<f64>() + team_noise.sample(&mut rng);
            let resource: f64 = frag.topics.iter().map(|t| t.cosine).sum::<f64>() + team_noise.sample(&mut rng);
            gaps.push((learner - resource).abs());
            events.push(EngagementEvent {
                learner_id: id.clone(),
                lecture_id: frag.lecture_id.clone(),
                fragment_index: frag.fragment_index,
                order: order as u64,
                topics: frag.topics.clone(),
                label: Label::Disengaged,
            });
        }
        let margin = margin_for_rate(&gaps, rate);
        for (e, g) in events.iter_mut().zip(&gaps) {
            e.label = Label::from_sign(*g <= margin);
        }
        truth.insert(id, LearnerTruth { skills, margin, engagement_rate: rate });
        per_learner.push(events);
    }

    let max_len = per_learner.iter().map(Vec::len).max().unwrap_or(0);
    let mut queues: Vec<std::vec::IntoIter<EngagementEvent>> = per_learner.into_iter().map(Vec::into_iter).collect();
    let mut events = Vec::with_capacity(queues.iter().map(|q| q.len()).sum());
    for _ in 0..max_len {
        for q in queues.iter_mut() {
            events.extend(q.next());
        }
    }
    Ok(SynthDataset { events, truth })
}

/// A margin that admits `round(rate · n)` of the gaps, placed halfway
/// between neighbouring order statistics.
fn margin_for_rate(gaps: &[f64], rate: f64) -> f64 {
    if gaps.is_empty() {
        return 0.0;
    }
    let mut sorted = gaps.to_vec();
    sorted.sort_by(f64::total_cmp);
    let k = (rate * sorted.len() as f64).round() as usize;
    match k {
        0 => sorted[0] / 2.0,
        k if k >= sorted.len() => sorted[sorted.len() - 1] + 1.0,
        k => (sorted[k - 1] + sorted[k]) / 2.0,
    }
}

/// Shuffles learner ids reproducibly; used to pick cohorts from a dataset.
pub fn shuffled_learners(data: &SynthDataset, seed: u64) -> Vec<String> {
    let mut ids: Vec<String> = data.truth.keys().cloned().collect();
    ids.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    ids
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::eval::validate_ordering;

    #[test]
    fn shape_and_ordering() {
        let cfg = SynthConfig { learners: 7, events_per_learner: 30, ..Default::default() };
        let d = generate(&cfg).unwrap();
        assert_eq!(d.events.len(), 210);
        assert_eq!(d.truth.len(), 7);
        validate_ordering(&d.events).unwrap();
        for e in &d.events {
            assert_eq!(e.topics.len(), 5);
            let t = &d.truth[&e.learner_id];
            assert!(e.topics.iter().all(|x| t.skills.contains_key(&x.kc_id)));
        }
    }

    #[test]
    fn realised_rate_matches_target() {
        let d = generate(&SynthConfig { learners: 5, ..Default::default() }).unwrap();
        for (id, t) in &d.truth {
            let ev: Vec<_> = d.events.iter().filter(|e| &e.learner_id == id).collect();
            let engaged = ev.iter().filter(|e| e.label.is_engaged()).count();
            assert_eq!(engaged, (t.engagement_rate * ev.len() as f64).round() as usize);
        }
    }

    #[test]
    fn total_events_spread() {
        let cfg = SynthConfig { learners: 3, total_events: Some(10), ..Default::default() };
        assert_eq!(cfg.event_counts(), vec![4, 3, 3]);
        assert_eq!(generate(&cfg).unwrap().events.len(), 10);
    }

    #[test]
    fn seeded() {
        let cfg = SynthConfig { learners: 4, events_per_learner: 20, ..Default::default() };
        assert_eq!(generate(&cfg).unwrap(), generate(&cfg).unwrap());
        let other = SynthConfig { seed: 1, ..cfg.clone() };
        assert_ne!(generate(&cfg).unwrap().events, generate(&other).unwrap().events);
    }
}

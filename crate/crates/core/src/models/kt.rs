use super::greater::open_unit;
use super::state::BernoulliSkillState;
use super::{topics_of, ModelConfig};
use crate::corpus::{EngagementEvent, Label};
use crate::{Error, Result};

/// Largest event for which the joint mastery posterior is enumerated.
pub const MAX_ENUMERATED_TOPICS: usize = 10;

/// Noisy-AND engagement probability for independent masteries `pis`.
pub fn noisy_and(pis: &[f64], noise: f64) -> f64 {
    let all: f64 = pis.iter().product();
    (1.0 - noise) * all + noise * (1.0 - all)
}

/// Exact per-skill posterior masteries after observing `label` under the
/// noisy-AND likelihood, by enumeration of all joint states. Returns the
/// priors unchanged when the observation has zero probability.
pub fn kt_posterior(pis: &[f64], label: Label, noise: f64) -> Result<Vec<f64>> {
    let k = pis.len();
    if k > MAX_ENUMERATED_TOPICS {
        return Err(Error::EnumerationBound(k));
    }
    let (hit, miss) = match label {
        Label::Engaged => (1.0 - noise, noise),
        Label::Disengaged => (noise, 1.0 - noise),
    };
    let full = (1usize << k) - 1;
    let mut evidence = 0.0;
    let mut marginals = vec![0.0; k];
    for mask in 0..=full {
        let mut joint = if mask == full { hit } else { miss };
        for (i, &p) in pis.iter().enumerate() {
            joint *= if mask >> i & 1 == 1 { p } else { 1.0 - p };
        }
        evidence += joint;
        for (i, m) in marginals.iter_mut().enumerate() {
            if mask >> i & 1 == 1 {
                *m += joint;
            }
        }
    }
    if evidence <= 0.0 {
        return Ok(pis.to_vec());
    }
    Ok(marginals.into_iter().map(|m| m / evidence).collect())
}

/// Engagement probability for `event` given the learner's masteries.
pub fn predict_kt(state: &BernoulliSkillState, event: &EngagementEvent, cfg: &ModelConfig) -> Result<f64> {
    let topics = topics_of(event, cfg.top_k)?;
    let pis: Vec<f64> = topics.iter().map(|t| state.mastery_at(t.kc_id, event.order, cfg.tau)).collect();
    let p = noisy_and(&pis, cfg.kt_noise);
    Ok(if cfg.kt_noise > 0.0 { open_unit(p) } else { p })
}

/// Posterior update for `event`; negatives are skipped unless
/// `cfg.use_negative`.
pub fn update_kt(state: &mut BernoulliSkillState, event: &EngagementEvent, cfg: &ModelConfig) -> Result<()> {
    if !event.label.is_engaged() && !cfg.use_negative {
        return Ok(());
    }
    let topics = topics_of(event, cfg.top_k)?;
    let pis: Vec<f64> = topics.iter().map(|t| state.mastery_at(t.kc_id, event.order, cfg.tau)).collect();
    let post = kt_posterior(&pis, event.label, cfg.kt_noise)?;
    for (t, p) in topics.iter().zip(post) {
        state.commit(t.kc_id, p, event.order);
    }
    Ok(())
}

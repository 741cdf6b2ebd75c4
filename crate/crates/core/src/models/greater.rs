use super::state::GaussianSkillState;
use super::{topics_of, ModelConfig};
use crate::corpus::{EngagementEvent, Label};
use crate::gaussmath::{std_cdf, Gaussian1D};
use crate::Result;

/// Probability that the learner team's performance exceeds the resource
/// team's, each member adding performance noise of variance `beta²`.
pub fn predict_greater(learner_team: Gaussian1D, resource_team: Gaussian1D, team_size: usize, beta: f64) -> f64 {
    let d = difference(learner_team, resource_team, team_size, beta);
    open_unit(std_cdf(d.mean / d.std_dev()))
}

/// Belief about the performance difference, noise included.
pub fn difference(learner_team: Gaussian1D, resource_team: Gaussian1D, team_size: usize, beta: f64) -> Gaussian1D {
    (learner_team - resource_team).widened(2.0 * team_size as f64 * beta * beta)
}

/// Conditions the performance difference with `condition` and spreads the
/// correction back to every member in proportion to its variance.
pub(crate) fn team_update(
    learners: &mut [Gaussian1D],
    resources: &mut [Gaussian1D],
    beta: f64,
    condition: impl FnOnce(Gaussian1D) -> Result<Gaussian1D>,
) -> Result<()> {
    let team_size = learners.len();
    let l: Gaussian1D = learners.iter().copied().sum();
    let r: Gaussian1D = resources.iter().copied().sum();
    let prior = difference(l, r, team_size, beta);
    let post = condition(prior)?;
    let c2 = prior.variance;
    let shift = (post.mean - prior.mean) / c2;
    let shrink = (c2 - post.variance) / c2;
    let apply = |g: &mut Gaussian1D, sign: f64| {
        if g.variance == 0.0 {
            return;
        }
        let share = g.variance / c2;
        g.mean += sign * g.variance * shift;
        g.variance = (g.variance * (1.0 - share * shrink)).max(f64::MIN_POSITIVE);
    };
    learners.iter_mut().for_each(|g| apply(g, 1.0));
    resources.iter_mut().for_each(|g| apply(g, -1.0));
    Ok(())
}

/// Condition for the greater-than factor.
pub(crate) fn greater_condition(label: Label) -> impl FnOnce(Gaussian1D) -> Result<Gaussian1D> {
    move |d: Gaussian1D| match label {
        Label::Engaged => d.greater_than(0.0),
        Label::Disengaged => d.less_than(0.0),
    }
}

/// One fixed-depth update: the event's cosines act as zero-variance depths.
/// Negative labels are skipped unless `cfg.use_negative`.
pub fn update_greater(state: &mut GaussianSkillState, event: &EngagementEvent, cfg: &ModelConfig) -> Result<()> {
    if !event.label.is_engaged() && !cfg.use_negative {
        return Ok(());
    }
    let topics = topics_of(event, cfg.top_k)?;
    let prior = cfg.skill_prior();
    let mut learners: Vec<Gaussian1D> =
        topics.iter().map(|t| state.belief_at(t.kc_id, event.order, prior, cfg.tau)).collect();
    let mut depths: Vec<Gaussian1D> = topics.iter().map(|t| Gaussian1D::fixed(t.cosine)).collect();
    team_update(&mut learners, &mut depths, cfg.beta, greater_condition(event.label))?;
    for (t, g) in topics.iter().zip(learners) {
        state.commit(t.kc_id, g, event.order);
    }
    Ok(())
}

/// Keeps a probability strictly inside `(0, 1)`.
pub(crate) fn open_unit(p: f64) -> f64 {
    p.clamp(f64::MIN_POSITIVE, 1.0 - f64::EPSILON / 2.0)
}

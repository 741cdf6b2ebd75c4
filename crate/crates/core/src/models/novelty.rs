use super::greater::{difference, open_unit, team_update};
use super::state::{GaussianSkillState, MarginTracker};
use super::{topics_of, ModelConfig};
use crate::corpus::{EngagementEvent, Label};
use crate::gaussmath::{interval_mass, std_quantile, truncate_within, Gaussian1D};
use crate::Result;

/// Engagement margin that makes a team of `team_size` noisy performances
/// land within `±ε` with the tracker's smoothed engagement rate.
pub fn derive_margin(tracker: &MarginTracker, team_size: usize, beta: f64) -> f64 {
    let p = tracker.smoothed_rate();
    let z = std_quantile((p + 1.0) / 2.0).expect("smoothed rate lies in (0, 1)");
    (team_size as f64).sqrt() * beta * z
}

/// Forward map from a margin to the engagement probability it implies.
pub fn margin_probability(margin: f64, team_size: usize, beta: f64) -> f64 {
    let s = margin / ((team_size as f64).sqrt() * beta);
    interval_mass(-s, s)
}

/// Probability that the performance difference lies within `±margin`.
pub fn predict_novelty(
    learner_team: Gaussian1D,
    resource_team: Gaussian1D,
    team_size: usize,
    beta: f64,
    margin: f64,
) -> f64 {
    let d = difference(learner_team, resource_team, team_size, beta);
    let c = d.std_dev();
    open_unit(interval_mass((-margin - d.mean) / c, (margin - d.mean) / c))
}

/// Margin used by the novelty model: both teams' performance noise counts
/// toward the spread, so the forward map sees `2 · team_size` players.
pub(crate) fn model_margin(tracker: &MarginTracker, team_size: usize, beta: f64) -> f64 {
    derive_margin(tracker, 2 * team_size, beta)
}

pub(crate) fn novelty_condition(label: Label, margin: f64) -> impl FnOnce(Gaussian1D) -> Result<Gaussian1D> {
    move |d: Gaussian1D| match label {
        Label::Engaged => truncate_within(d, margin),
        Label::Disengaged if d.mean >= 0.0 => d.greater_than(margin),
        Label::Disengaged => d.less_than(-margin),
    }
}

/// One novelty update against the event's cosine depths, followed by the
/// tracker update.
pub fn update_novelty(
    state: &mut GaussianSkillState,
    event: &EngagementEvent,
    cfg: &ModelConfig,
    tracker: &mut MarginTracker,
) -> Result<()> {
    if event.label.is_engaged() || cfg.use_negative {
        let topics = topics_of(event, cfg.top_k)?;
        let prior = cfg.skill_prior();
        let mut learners: Vec<Gaussian1D> =
            topics.iter().map(|t| state.belief_at(t.kc_id, event.order, prior, cfg.tau)).collect();
        let mut depths: Vec<Gaussian1D> = topics.iter().map(|t| Gaussian1D::fixed(t.cosine)).collect();
        let margin = model_margin(tracker, topics.len(), cfg.beta);
        team_update(&mut learners, &mut depths, cfg.beta, novelty_condition(event.label, margin))?;
        for (t, g) in topics.iter().zip(learners) {
            state.commit(t.kc_id, g, event.order);
        }
    }
    tracker.record(event.label);
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::Topic;
    use crate::models::ModelKind;

    #[test]
    fn margin_from_even_rate() {
        let eps = derive_margin(&MarginTracker::default(), 1, 0.5);
        assert!((eps - 0.33724487509804).abs() < 1e-12);
        assert!((margin_probability(eps, 1, 0.5) - 0.5).abs() < 1e-12);
    }

    #[test]
    fn margin_scales_with_team() {
        let t = MarginTracker { engaged: 3, total: 7 };
        let a = derive_margin(&t, 1, 0.7);
        let b = derive_margin(&t, 4, 0.7);
        assert!((b - 2.0 * a).abs() < 1e-12);
    }

    #[test]
    fn margin_monotone_in_rate() {
        let mut prev = 0.0;
        for engaged in 0..=50 {
            let eps = derive_margin(&MarginTracker { engaged, total: 50 }, 3, 0.5);
            assert!(eps > prev);
            prev = eps;
        }
    }

    #[test]
    fn model_margin_round_trips_through_prediction() {
        let t = MarginTracker { engaged: 9, total: 12 };
        for n in 1..=5 {
            let eps = model_margin(&t, n, 0.5);
            let p = predict_novelty(Gaussian1D::fixed(0.0), Gaussian1D::fixed(0.0), n, 0.5, eps);
            assert!((p - t.smoothed_rate()).abs() < 1e-12);
        }
    }

    #[test]
    fn unit_band_mass() {
        // c = 1 with n = 1 needs 2β² = 1
        let b = 0.5f64.sqrt();
        let p = predict_novelty(Gaussian1D::fixed(0.0), Gaussian1D::fixed(0.0), 1, b, 1.0);
        assert!((p - 0.6826894921370859).abs() < 1e-12);
        let wide = predict_novelty(Gaussian1D::fixed(0.0), Gaussian1D::fixed(0.0), 1, b, 1e3);
        assert!(wide > 1.0 - 1e-15);
    }

    #[test]
    fn probability_falls_with_distance() {
        let mut prev = 1.0;
        for i in 0..40 {
            let l = Gaussian1D::new(i as f64 * 0.1, 0.2).unwrap();
            let p = predict_novelty(l, Gaussian1D::fixed(0.0), 1, 0.5, 0.4);
            assert!(p < prev);
            prev = p;
        }
    }

    fn event(label: Label, cosine: f64) -> EngagementEvent {
        EngagementEvent {
            learner_id: "l".into(),
            lecture_id: "v".into(),
            fragment_index: 0,
            order: 0,
            topics: vec![Topic { kc_id: 1, cosine }],
            label,
        }
    }

    fn cfg() -> ModelConfig {
        let mut c = ModelConfig::for_kind(ModelKind::TruelearnNovelty);
        c.initial_variance = 1.0;
        c.tau = 0.0;
        c.use_negative = true;
        c
    }

    #[test]
    fn positive_at_zero_gap_keeps_mean() {
        let mut s = GaussianSkillState::default();
        let mut t = MarginTracker::default();
        update_novelty(&mut s, &event(Label::Engaged, 0.0), &cfg(), &mut t).unwrap();
        let b = s.skills[&1].belief;
        assert!(b.mean.abs() < 1e-15);
        assert!(b.variance < 1.0);
        assert_eq!(t, MarginTracker { engaged: 1, total: 1 });
    }

    #[test]
    fn negative_pushes_away_from_resource() {
        let mut s = GaussianSkillState::default();
        s.commit(1, Gaussian1D::new(0.5, 1.0).unwrap(), 0);
        let mut t = MarginTracker::default();
        update_novelty(&mut s, &event(Label::Disengaged, 0.2), &cfg(), &mut t).unwrap();
        assert!(s.skills[&1].belief.mean > 0.5);

        let mut s = GaussianSkillState::default();
        s.commit(1, Gaussian1D::new(0.1, 1.0).unwrap(), 0);
        update_novelty(&mut s, &event(Label::Disengaged, 0.2), &cfg(), &mut t).unwrap();
        assert!(s.skills[&1].belief.mean < 0.1);
    }
}

use std::collections::{BTreeMap, HashMap, HashSet};

use rayon::prelude::*;

use super::metrics::{compute_metrics, weighted_metrics, ConfusionCounts};
use super::report::{EvalReport, LearnerResult, REPORT_SCHEMA_VERSION};
use crate::content::KcId;
use crate::corpus::{summarize, EngagementEvent};
use crate::models::{LearnerState, Model, ModelConfig, Snapshot};
use crate::{Error, Result};

/// Checks every event and that each learner's `order` strictly increases
/// in stream order.
pub fn validate_ordering(events: &[EngagementEvent]) -> Result<()> {
    let mut last: HashMap<&str, u64> = HashMap::new();
    for e in events {
        e.validate()?;
        if let Some(&prev) = last.get(e.learner_id.as_str()) {
            if e.order <= prev {
                return Err(Error::Ordering { learner_id: e.learner_id.clone(), expected: prev + 1, found: e.order });
            }
        }
        last.insert(&e.learner_id, e.order);
    }
    Ok(())
}

#[derive(Default)]
struct Tally {
    events: u64,
    kcs: HashSet<KcId>,
    counts: ConfusionCounts,
}

impl Tally {
    fn observe(&mut self, event: &EngagementEvent, predicted: crate::corpus::Label, scored: bool) {
        self.events += 1;
        self.kcs.extend(event.topics.iter().map(|t| t.kc_id));
        if scored {
            self.counts.record(predicted, event.label);
        }
    }
}

/// Predict-then-update over a fresh model.
pub fn evaluate_sequential(cfg: &ModelConfig, events: &[EngagementEvent]) -> Result<EvalReport> {
    let snapshot = Snapshot { model: Model::new(cfg.clone())?, learners: BTreeMap::new() };
    evaluate_from(snapshot, events).map(|(report, _)| report)
}

/// Continues from `snapshot`. Learners already present in the snapshot have
/// history, so their first event here is scored.
pub fn evaluate_from(snapshot: Snapshot, events: &[EngagementEvent]) -> Result<(EvalReport, Snapshot)> {
    validate_ordering(events)?;
    let Snapshot { mut model, mut learners } = snapshot;
    let tallies: Vec<(String, Tally)> = if model.kind().is_global() {
        let mut tallies: BTreeMap<String, Tally> = BTreeMap::new();
        for e in events {
            let seen = learners.contains_key(&e.learner_id);
            let state = learners.entry(e.learner_id.clone()).or_default();
            let p = model.predict_and_update(state, e)?;
            tallies.entry(e.learner_id.clone()).or_default().observe(e, p.label, seen);
        }
        tallies.into_iter().collect()
    } else {
        let mut groups: BTreeMap<&str, Vec<&EngagementEvent>> = BTreeMap::new();
        for e in events {
            groups.entry(&e.learner_id).or_default().push(e);
        }
        let jobs: Vec<(&str, Option<LearnerState>, Vec<&EngagementEvent>)> =
            groups.into_iter().map(|(id, evs)| (id, learners.remove(id), evs)).collect();
        let cfg = model.config().clone();
        let done: Vec<(String, LearnerState, Tally)> = jobs
            .into_par_iter()
            .map(|(id, prior, evs)| {
                let mut m = Model::new(cfg.clone())?;
                let mut seen = prior.is_some();
                let mut state = prior.unwrap_or_default();
                let mut tally = Tally::default();
                for e in evs {
                    let p = m.predict_and_update(&mut state, e)?;
                    tally.observe(e, p.label, seen);
                    seen = true;
                }
                Ok((id.to_string(), state, tally))
            })
            .collect::<Result<_>>()?;
        done.into_iter()
            .map(|(id, state, tally)| {
                learners.insert(id.clone(), state);
                (id, tally)
            })
            .collect()
    };

    let mut totals = ConfusionCounts::default();
    let results: Vec<LearnerResult> = tallies
        .into_iter()
        .map(|(learner_id, t)| {
            totals.merge(&t.counts);
            LearnerResult {
                learner_id,
                events: t.events,
                unique_kcs: t.kcs.len() as u64,
                metrics: compute_metrics(&t.counts).ok(),
                counts: t.counts,
            }
        })
        .collect();
    let weighted = weighted_metrics(results.iter().filter_map(|r| r.metrics.as_ref().map(|m| (r.counts.total(), m))))?;
    let report = EvalReport {
        schema_version: REPORT_SCHEMA_VERSION,
        model: model.config().clone(),
        dataset: summarize(events),
        split: None,
        evaluated_events: totals.total(),
        totals,
        weighted,
        learners: results,
    };
    Ok((report, Snapshot { model, learners }))
}

use std::collections::BTreeMap;
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::state::{
    BernoulliSkill, BernoulliSkillState, GaussianSkill, GaussianSkillState, LearnerState, MarginTracker, ResourceKey,
    ResourceSkill, ResourceTable, SkillState,
};
use super::{Model, ModelConfig};
use crate::content::KcId;
use crate::corpus::Label;
use crate::gaussmath::Gaussian1D;
use crate::{Error, Result};

pub const SNAPSHOT_VERSION: u32 = 1;

/// A paused evaluation: the model (with any shared resources) and every
/// learner's state.
#[derive(Debug, Clone, PartialEq)]
pub struct Snapshot {
    pub model: Model,
    pub learners: BTreeMap<String, LearnerState>,
}

#[derive(Serialize, Deserialize)]
struct Header {
    snapshot_version: u32,
    config: ModelConfig,
    resources: Vec<ResourceLine>,
}

#[derive(Serialize, Deserialize)]
struct ResourceLine {
    #[serde(flatten)]
    key: ResourceKey,
    mean: f64,
    variance: f64,
    updates: u64,
}

#[derive(Serialize, Deserialize)]
struct LearnerLine {
    learner_id: String,
    skills: Vec<SkillLine>,
    tracker: MarginTracker,
    last_label: Option<Label>,
}

#[derive(Serialize, Deserialize)]
#[serde(untagged)]
enum SkillLine {
    Gaussian { kc_id: KcId, mean: f64, variance: f64, last_update_order: u64 },
    Bernoulli { kc_id: KcId, pi: f64, last_update_order: u64 },
}

fn learner_line(learner_id: &str, state: &LearnerState) -> LearnerLine {
    let skills = match &state.skills {
        SkillState::Empty => Vec::new(),
        SkillState::Gaussian(g) => g
            .skills
            .iter()
            .map(|(&kc_id, s)| SkillLine::Gaussian {
                kc_id,
                mean: s.belief.mean,
                variance: s.belief.variance,
                last_update_order: s.last_update_order,
            })
            .collect(),
        SkillState::Bernoulli(b) => b
            .skills
            .iter()
            .map(|(&kc_id, s)| SkillLine::Bernoulli { kc_id, pi: s.pi, last_update_order: s.last_update_order })
            .collect(),
    };
    LearnerLine { learner_id: learner_id.to_string(), skills, tracker: state.tracker, last_label: state.last_label }
}

fn learner_state(line: LearnerLine) -> Result<(String, LearnerState)> {
    let mut gaussian = GaussianSkillState::default();
    let mut bernoulli = BernoulliSkillState::default();
    for s in line.skills {
        match s {
            SkillLine::Gaussian { kc_id, mean, variance, last_update_order } => {
                let belief = Gaussian1D::new(mean, variance)?;
                gaussian.skills.insert(kc_id, GaussianSkill { belief, last_update_order });
            }
            SkillLine::Bernoulli { kc_id, pi, last_update_order } => {
                bernoulli.skills.insert(kc_id, BernoulliSkill { pi, last_update_order });
            }
        }
    }
    let skills = match (gaussian.skills.is_empty(), bernoulli.skills.is_empty()) {
        (true, true) => SkillState::Empty,
        (false, true) => SkillState::Gaussian(gaussian),
        (true, false) => SkillState::Bernoulli(bernoulli),
        (false, false) => {
            return Err(Error::InvalidEvent(format!(
                "snapshot learner {} mixes Gaussian and Bernoulli skills",
                line.learner_id
            )))
        }
    };
    Ok((line.learner_id, LearnerState { skills, tracker: line.tracker, last_label: line.last_label }))
}

/// Writes a header line followed by one line per learner, in id order.
pub fn write_snapshot(path: &Path, model: &Model, learners: &BTreeMap<String, LearnerState>) -> Result<()> {
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut out = BufWriter::new(file);
    let header = Header {
        snapshot_version: SNAPSHOT_VERSION,
        config: model.config().clone(),
        resources: model
            .resources()
            .entries
            .iter()
            .map(|(key, r)| ResourceLine {
                key: key.clone(),
                mean: r.belief.mean,
                variance: r.belief.variance,
                updates: r.updates,
            })
            .collect(),
    };
    put_line(&mut out, path, &header)?;
    for (id, state) in learners {
        put_line(&mut out, path, &learner_line(id, state))?;
    }
    out.flush().map_err(|e| Error::io(path, e))
}

pub fn read_snapshot(path: &Path) -> Result<Snapshot> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let mut lines = BufReader::new(file).lines();
    let first = lines.next().ok_or(Error::Empty("snapshot file"))?.map_err(|e| Error::io(path, e))?;
    let version: serde_json::Value =
        serde_json::from_str(&first).map_err(|e| Error::json(format!("{}:1", path.display()), e))?;
    let found = version["snapshot_version"].as_u64().unwrap_or(0) as u32;
    if found != SNAPSHOT_VERSION {
        return Err(Error::SchemaVersion { found, expected: SNAPSHOT_VERSION });
    }
    let header: Header =
        serde_json::from_value(version).map_err(|e| Error::json(format!("{}:1", path.display()), e))?;
    let mut resources = ResourceTable::default();
    for r in header.resources {
        resources
            .entries
            .insert(r.key, ResourceSkill { belief: Gaussian1D::new(r.mean, r.variance)?, updates: r.updates });
    }
    let model = Model::from_parts(header.config, resources)?;
    let mut learners = BTreeMap::new();
    for (i, line) in lines.enumerate() {
        let line = line.map_err(|e| Error::io(path, e))?;
        if line.trim().is_empty() {
            continue;
        }
        let parsed: LearnerLine =
            serde_json::from_str(&line).map_err(|e| Error::json(format!("{}:{}", path.display(), i + 2), e))?;
        let (id, state) = learner_state(parsed)?;
        learners.insert(id, state);
    }
    Ok(Snapshot { model, learners })
}

fn put_line<T: Serialize>(out: &mut impl Write, path: &Path, value: &T) -> Result<()> {
    serde_json::to_writer(&mut *out, value).map_err(|e| Error::json(path.display().to_string(), e))?;
    out.write_all(b"\n").map_err(|e| Error::io(path, e))
}

//! Joins fragment annotations with view logs into an ordered stream of
//! engagement events, and reads/writes the line-delimited event format.

use std::collections::{BTreeMap, BTreeSet, HashMap, HashSet};
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::content::{FragmentAnnotation, KcId};
use crate::error::{Error, Result};

/// Fraction of a fragment that must be watched to count as engaged.
pub const ENGAGEMENT_THRESHOLD: f64 = 0.75;

/// Binary engagement outcome, serialized as `1` / `-1`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Label {
    Engaged,
    Disengaged,
}

impl Label {
    pub fn from_sign(positive: bool) -> Self {
        if positive {
            Label::Engaged
        } else {
            Label::Disengaged
        }
    }

    pub fn is_engaged(self) -> bool {
        self == Label::Engaged
    }

    pub fn as_i8(self) -> i8 {
        match self {
            Label::Engaged => 1,
            Label::Disengaged => -1,
        }
    }
}

impl Serialize for Label {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.serialize_i8(self.as_i8())
    }
}

impl<'de> Deserialize<'de> for Label {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        match i8::deserialize(d)? {
            1 => Ok(Label::Engaged),
            -1 => Ok(Label::Disengaged),
            other => Err(serde::de::Error::custom(format!("label must be 1 or -1, got {other}"))),
        }
    }
}

/// A knowledge component of an event with its observed coverage depth.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Topic {
    pub kc_id: KcId,
    pub cosine: f64,
}

/// One learner's interaction with one fragment; the unit of sequential
/// evaluation. `order` is the position in the learner's own stream.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EngagementEvent {
    pub learner_id: String,
    pub lecture_id: String,
    pub fragment_index: usize,
    pub order: u64,
    pub topics: Vec<Topic>,
    pub label: Label,
}

impl EngagementEvent {
    /// Checks the per-event invariants: non-empty topics with unique ids and
    /// cosines in `[0, 1]`.
    pub fn validate(&self) -> Result<()> {
        if self.topics.is_empty() {
            return Err(Error::InvalidEvent(format!(
                "{}/{} fragment {} has no topics",
                self.learner_id, self.lecture_id, self.fragment_index
            )));
        }
        let mut seen = HashSet::with_capacity(self.topics.len());
        for t in &self.topics {
            if !seen.insert(t.kc_id) {
                return Err(Error::InvalidEvent(format!("duplicate kc_id {} in one event", t.kc_id)));
            }
            if !(0.0..=1.0).contains(&t.cosine) {
                return Err(Error::InvalidEvent(format!("cosine {} outside [0, 1]", t.cosine)));
            }
        }
        Ok(())
    }
}

/// `+1` iff at least 75% of the fragment was watched.
pub fn label_engagement(watch_ratio: f64) -> Result<Label> {
    if !(0.0..=1.0).contains(&watch_ratio) {
        return Err(Error::Domain { op: "label_engagement", value: watch_ratio });
    }
    Ok(Label::from_sign(watch_ratio >= ENGAGEMENT_THRESHOLD))
}

/// One row of the view-log CSV.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ViewLog {
    pub learner_id: String,
    pub lecture_id: String,
    /// Seconds since the epoch.
    pub timestamp: i64,
    pub start_seconds: f64,
    pub end_seconds: f64,
}

pub fn read_view_logs(path: &Path) -> Result<Vec<ViewLog>> {
    let mut reader = csv::Reader::from_path(path)?;
    reader.deserialize().map(|r| r.map_err(Error::from)).collect()
}

/// Reads `lecture_id,duration_seconds` rows.
pub fn read_lecture_durations(path: &Path) -> Result<HashMap<String, f64>> {
    #[derive(Deserialize)]
    struct Row {
        lecture_id: String,
        duration_seconds: f64,
    }
    let mut reader = csv::Reader::from_path(path)?;
    let mut out = HashMap::new();
    for row in reader.deserialize::<Row>() {
        let row = row?;
        out.insert(row.lecture_id, row.duration_seconds);
    }
    Ok(out)
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct DatasetSummary {
    pub view_log_entries: usize,
    pub learners: usize,
    pub lectures: usize,
    pub events: usize,
    pub unique_kcs: usize,
    /// Touched fragments whose annotation had no topics.
    #[serde(default)]
    pub dropped_untopical: usize,
}

/// Counts learners, lectures, events and unique knowledge components.
pub fn summarize(events: &[EngagementEvent]) -> DatasetSummary {
    let learners: HashSet<&str> = events.iter().map(|e| e.learner_id.as_str()).collect();
    let lectures: HashSet<&str> = events.iter().map(|e| e.lecture_id.as_str()).collect();
    let kcs: HashSet<KcId> = events.iter().flat_map(|e| e.topics.iter().map(|t| t.kc_id)).collect();
    DatasetSummary {
        view_log_entries: 0,
        learners: learners.len(),
        lectures: lectures.len(),
        events: events.len(),
        unique_kcs: kcs.len(),
        dropped_untopical: 0,
    }
}

/// Measure of the union of `intervals` restricted to `[lo, hi)`.
fn covered_length(intervals: &[(f64, f64)], lo: f64, hi: f64) -> f64 {
    let mut clipped: Vec<(f64, f64)> =
        intervals.iter().map(|&(a, b)| (a.max(lo), b.min(hi))).filter(|(a, b)| b > a).collect();
    clipped.sort_by(|x, y| x.0.total_cmp(&y.0));
    let mut total = 0.0;
    let mut current: Option<(f64, f64)> = None;
    for (a, b) in clipped {
        match current {
            Some((ca, cb)) if a <= cb => current = Some((ca, cb.max(b))),
            Some((ca, cb)) => {
                total += cb - ca;
                current = Some((a, b));
            }
            None => current = Some((a, b)),
        }
    }
    if let Some((ca, cb)) = current {
        total += cb - ca;
    }
    total
}

/// Builds the ordered event stream.
///
/// Rows sharing `(learner, lecture, timestamp)` form one view whose play
/// intervals are unioned. Play time maps linearly onto transcript
/// characters, so a fragment's watch ratio is the covered share of its
/// character span. Every fragment a view touches becomes one event.
///
/// Output order is global: `(timestamp, learner_id, lecture_id,
/// fragment_index)`; `order` numbers each learner's events from 0.
pub fn build_events(
    view_logs: &[ViewLog],
    durations: &HashMap<String, f64>,
    annotations: &[FragmentAnnotation],
    top_k: usize,
    allowlist: Option<&HashSet<String>>,
) -> Result<(Vec<EngagementEvent>, DatasetSummary)> {
    if top_k == 0 {
        return Err(Error::Config("top-k must be at least 1".into()));
    }
    let segments = lecture_segments(annotations);

    type ViewKey<'a> = (i64, &'a str, &'a str);
    let mut views: BTreeMap<ViewKey, Vec<(f64, f64)>> = BTreeMap::new();
    let mut seen_rows = HashSet::new();
    let mut entries = 0;
    for log in view_logs {
        if allowlist.is_some_and(|allow| !allow.contains(&log.lecture_id)) {
            continue;
        }
        entries += 1;
        let row_key = (
            log.learner_id.as_str(),
            log.lecture_id.as_str(),
            log.timestamp,
            log.start_seconds.to_bits(),
            log.end_seconds.to_bits(),
        );
        if !seen_rows.insert(row_key) {
            return Err(Error::DuplicateLog(format!(
                "{},{},{},{},{}",
                log.learner_id, log.lecture_id, log.timestamp, log.start_seconds, log.end_seconds
            )));
        }
        if !(log.start_seconds.is_finite() && log.end_seconds.is_finite() && log.end_seconds >= log.start_seconds) {
            return Err(Error::InvalidEvent(format!(
                "bad play interval [{}, {}] for {}/{}",
                log.start_seconds, log.end_seconds, log.learner_id, log.lecture_id
            )));
        }
        views
            .entry((log.timestamp, log.learner_id.as_str(), log.lecture_id.as_str()))
            .or_default()
            .push((log.start_seconds, log.end_seconds));
    }

    let mut events = Vec::new();
    let mut next_order: HashMap<&str, u64> = HashMap::new();
    let mut dropped = 0;
    for ((_, learner, lecture), intervals) in &views {
        let segs = segments
            .get(lecture)
            .ok_or_else(|| Error::MissingAnnotation { lecture_id: lecture.to_string(), fragment_index: 0 })?;
        let chars = segs.last().map_or(0.0, |s| s.end);
        let duration = *durations
            .get(*lecture)
            .filter(|d| d.is_finite() && **d > 0.0)
            .ok_or_else(|| Error::InvalidEvent(format!("no positive duration for lecture {lecture}")))?;
        let char_intervals: Vec<(f64, f64)> =
            intervals.iter().map(|&(s, e)| (s / duration * chars, e / duration * chars)).collect();
        for seg in segs {
            let covered = covered_length(&char_intervals, seg.start, seg.end);
            if covered <= 0.0 {
                continue;
            }
            let Some(ann) = seg.annotation else {
                return Err(Error::MissingAnnotation { lecture_id: lecture.to_string(), fragment_index: seg.index });
            };
            let ratio = (covered / (seg.end - seg.start)).clamp(0.0, 1.0);
            let mut seen = HashSet::new();
            let topics: Vec<Topic> = ann
                .topics
                .iter()
                .filter(|t| seen.insert(t.kc.kc_id))
                .take(top_k)
                .map(|t| Topic { kc_id: t.kc.kc_id, cosine: t.cosine })
                .collect();
            if topics.is_empty() {
                dropped += 1;
                continue;
            }
            let order = next_order.entry(learner).or_default();
            events.push(EngagementEvent {
                learner_id: learner.to_string(),
                lecture_id: lecture.to_string(),
                fragment_index: seg.index,
                order: *order,
                topics,
                label: label_engagement(ratio)?,
            });
            *order += 1;
        }
    }

    let mut summary = summarize(&events);
    summary.view_log_entries = entries;
    summary.dropped_untopical = dropped;
    Ok((events, summary))
}

struct Segment<'a> {
    index: usize,
    start: f64,
    end: f64,
    annotation: Option<&'a FragmentAnnotation>,
}

/// Per lecture, the fragments in index order. A missing index becomes an
/// unannotated segment spanning the gap between its neighbours.
fn lecture_segments(annotations: &[FragmentAnnotation]) -> HashMap<&str, Vec<Segment<'_>>> {
    let mut grouped: HashMap<&str, BTreeMap<usize, &FragmentAnnotation>> = HashMap::new();
    for ann in annotations {
        grouped.entry(ann.lecture_id.as_str()).or_default().insert(ann.fragment_index, ann);
    }
    grouped
        .into_iter()
        .map(|(lecture, frags)| {
            let mut segs = Vec::with_capacity(frags.len());
            let mut prev_end = 0.0;
            let mut expected = 0;
            for (&index, &ann) in &frags {
                if index > expected {
                    segs.push(Segment {
                        index: expected,
                        start: prev_end,
                        end: ann.char_span.start as f64,
                        annotation: None,
                    });
                }
                segs.push(Segment {
                    index,
                    start: ann.char_span.start as f64,
                    end: ann.char_span.end as f64,
                    annotation: Some(ann),
                });
                prev_end = ann.char_span.end as f64;
                expected = index + 1;
            }
            (lecture, segs)
        })
        .collect()
}

/// Keeps the events of the `n` learners with the most events; ties go to
/// the lexicographically smaller learner id. Event order is preserved.
pub fn select_cohort(events: &[EngagementEvent], n: usize) -> Vec<EngagementEvent> {
    let mut counts: HashMap<&str, usize> = HashMap::new();
    for e in events {
        *counts.entry(e.learner_id.as_str()).or_default() += 1;
    }
    let mut ranked: Vec<(&str, usize)> = counts.into_iter().collect();
    ranked.sort_by(|a, b| b.1.cmp(&a.1).then(a.0.cmp(b.0)));
    let keep: BTreeSet<&str> = ranked.into_iter().take(n).map(|(id, _)| id).collect();
    events.iter().filter(|e| keep.contains(e.learner_id.as_str())).cloned().collect()
}

pub fn write_events_to<W: Write>(mut out: W, events: &[EngagementEvent]) -> Result<()> {
    for e in events {
        serde_json::to_writer(&mut out, e).map_err(|err| Error::json("event", err))?;
        out.write_all(b"\n").map_err(|err| Error::io("<events>", err))?;
    }
    out.flush().map_err(|err| Error::io("<events>", err))
}

pub fn write_events(path: &Path, events: &[EngagementEvent]) -> Result<()> {
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    write_events_to(BufWriter::new(file), events).map_err(|e| match e {
        Error::Io { source, .. } => Error::io(path, source),
        other => other,
    })
}

pub fn read_events(path: &Path) -> Result<Vec<EngagementEvent>> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let mut out = Vec::new();
    for (lineno, line) in BufReader::new(file).lines().enumerate() {
        let line = line.map_err(|e| Error::io(path, e))?;
        if line.trim().is_empty() {
            continue;
        }
        let event: EngagementEvent =
            serde_json::from_str(&line).map_err(|e| Error::json(format!("{}:{}", path.display(), lineno + 1), e))?;
        out.push(event);
    }
    Ok(out)
}

pub fn write_summary(path: &Path, summary: &DatasetSummary) -> Result<()> {
    let text = serde_json::to_string_pretty(summary).map_err(|e| Error::json("summary", e))?;
    std::fs::write(path, text + "\n").map_err(|e| Error::io(path, e))
}

use std::fmt::Write as _;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::metrics::{ConfusionCounts, Metrics};
use crate::corpus::DatasetSummary;
use crate::models::ModelConfig;
use crate::{Error, Result};

pub const REPORT_SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LearnerResult {
    pub learner_id: String,
    /// All events seen for the learner, including the unscored first one.
    pub events: u64,
    pub unique_kcs: u64,
    pub counts: ConfusionCounts,
    /// `None` when the learner has no scored events.
    pub metrics: Option<Metrics>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SplitInfo {
    pub seed: u64,
    pub train_fraction: f64,
    pub train_learners: usize,
    pub test_learners: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub schema_version: u32,
    pub model: ModelConfig,
    pub dataset: DatasetSummary,
    #[serde(default)]
    pub split: Option<SplitInfo>,
    pub evaluated_events: u64,
    pub totals: ConfusionCounts,
    pub weighted: Metrics,
    pub learners: Vec<LearnerResult>,
}

impl EvalReport {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }

    pub fn write_json(&self, path: &Path) -> Result<()> {
        let mut text = self.to_json();
        text.push('\n');
        std::fs::write(path, text).map_err(|e| Error::io(path, e))
    }

    /// Reads a report, rejecting other schema versions.
    pub fn read_json(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let raw: serde_json::Value =
            serde_json::from_str(&text).map_err(|e| Error::json(path.display().to_string(), e))?;
        let found = raw["schema_version"].as_u64().unwrap_or(0) as u32;
        if found != REPORT_SCHEMA_VERSION {
            return Err(Error::SchemaVersion { found, expected: REPORT_SCHEMA_VERSION });
        }
        serde_json::from_value(raw).map_err(|e| Error::json(path.display().to_string(), e))
    }

    pub fn to_text(&self) -> String {
        let m = &self.model;
        let d = &self.dataset;
        let mut s = String::new();
        let _ = writeln!(s, "model            {}", m.kind);
        let _ = writeln!(
            s,
            "config           mu0={} var0={} beta={} tau={} use_negative={} top_k={} kt_noise={} default_rate={}",
            m.initial_mean,
            m.initial_variance,
            m.beta,
            m.tau,
            m.use_negative,
            m.top_k,
            m.kt_noise,
            m.default_engagement_rate
        );
        let _ = writeln!(
            s,
            "dataset          {} learners, {} lectures, {} events, {} KCs",
            d.learners, d.lectures, d.events, d.unique_kcs
        );
        if let Some(sp) = &self.split {
            let _ = writeln!(
                s,
                "split            seed={} train_fraction={} train={} test={}",
                sp.seed, sp.train_fraction, sp.train_learners, sp.test_learners
            );
        }
        let t = &self.totals;
        let _ = writeln!(
            s,
            "scored events    {} (tp={} fp={} tn={} fn={})",
            self.evaluated_events, t.tp, t.fp, t.tn, t.fn_
        );
        s.push('\n');
        s.push_str(&comparison_table(std::slice::from_ref(self)));
        s
    }
}

/// Weighted metrics of several reports, one aligned row per report.
pub fn comparison_table(reports: &[EvalReport]) -> String {
    let rows: Vec<[String; 7]> = reports
        .iter()
        .map(|r| {
            let w = &r.weighted;
            [
                r.model.kind.to_string(),
                format!("{:.3}", w.accuracy),
                format!("{:.3}", w.precision),
                format!("{:.3}", w.recall),
                format!("{:.3}", w.f1),
                r.learners.len().to_string(),
                r.evaluated_events.to_string(),
            ]
        })
        .collect();
    let header = ["Model", "Accuracy", "Precision", "Recall", "F1", "Learners", "Scored"].map(String::from);
    let mut widths = header.clone().map(|h| h.len());
    for row in &rows {
        for (w, cell) in widths.iter_mut().zip(row) {
            *w = (*w).max(cell.len());
        }
    }
    let mut out = String::new();
    for row in std::iter::once(&header).chain(&rows) {
        let mut line = String::new();
        for (i, (cell, w)) in row.iter().zip(widths).enumerate() {
            if i == 0 {
                let _ = write!(line, "{cell:<w$}");
            } else {
                let _ = write!(line, "  {cell:>w$}");
            }
        }
        out.push_str(line.trim_end());
        out.push('\n');
    }
    out
}

use std::io::Write;
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::metrics::Metrics;
use super::sequential::evaluate_sequential;
use crate::corpus::EngagementEvent;
use crate::models::{ModelConfig, ModelKind};
use crate::{Error, Result};

/// Hyperparameter values to sweep. An omitted dimension stays at the base
/// configuration's value.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridSpec {
    #[serde(default)]
    pub initial_variance: Vec<f64>,
    #[serde(default)]
    pub kt_noise: Vec<f64>,
    #[serde(default)]
    pub tau: Vec<f64>,
}

impl GridSpec {
    /// The full search ranges: σ₀² over 0.1..=2.0, KT noise over 0..=0.3,
    /// and four drift levels.
    pub fn full_range(kind: ModelKind) -> Self {
        let hundredths = |range: std::ops::RangeInclusive<u32>, step: u32| -> Vec<f64> {
            range.step_by(step as usize).map(|c| c as f64 / 100.0).collect()
        };
        GridSpec {
            initial_variance: hundredths(10..=200, 10),
            kt_noise: if kind == ModelKind::MultiSkillKt { hundredths(0..=30, 5) } else { Vec::new() },
            tau: vec![0.0, 0.01, 0.05, 0.1],
        }
    }

    pub fn is_empty(&self) -> bool {
        self.initial_variance.is_empty() && self.kt_noise.is_empty() && self.tau.is_empty()
    }

    /// Every grid point, sorted by (σ₀², noise, τ) ascending.
    pub fn points(&self, base: &ModelConfig) -> Result<Vec<ModelConfig>> {
        if self.is_empty() {
            return Err(Error::Config("grid has no values".into()));
        }
        let axis = |values: &[f64], fallback: f64| -> Result<Vec<f64>> {
            if values.iter().any(|v| !v.is_finite()) {
                return Err(Error::Config("grid values must be finite".into()));
            }
            let mut v = if values.is_empty() { vec![fallback] } else { values.to_vec() };
            v.sort_by(f64::total_cmp);
            v.dedup();
            Ok(v)
        };
        let vars = axis(&self.initial_variance, base.initial_variance)?;
        let noises = axis(&self.kt_noise, base.kt_noise)?;
        let taus = axis(&self.tau, base.tau)?;
        let mut out = Vec::with_capacity(vars.len() * noises.len() * taus.len());
        for &initial_variance in &vars {
            for &kt_noise in &noises {
                for &tau in &taus {
                    let cfg = ModelConfig { initial_variance, kt_noise, tau, ..base.clone() };
                    cfg.validate()?;
                    out.push(cfg);
                }
            }
        }
        Ok(out)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Objective {
    Accuracy,
    Precision,
    Recall,
    #[default]
    F1,
}

impl Objective {
    pub fn of(self, m: &Metrics) -> f64 {
        match self {
            Objective::Accuracy => m.accuracy,
            Objective::Precision => m.precision,
            Objective::Recall => m.recall,
            Objective::F1 => m.f1,
        }
    }
}

impl FromStr for Objective {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "accuracy" => Ok(Objective::Accuracy),
            "precision" => Ok(Objective::Precision),
            "recall" => Ok(Objective::Recall),
            "f1" => Ok(Objective::F1),
            _ => Err(Error::Config(format!("unknown objective `{s}`; expected accuracy, precision, recall or f1"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub initial_variance: f64,
    pub kt_noise: f64,
    pub tau: f64,
    pub metrics: Option<Metrics>,
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct GridResult {
    pub best: ModelConfig,
    pub best_metrics: Metrics,
    pub rows: Vec<SweepRow>,
}

/// Evaluates every grid point on `events` and keeps the best by `objective`.
/// Ties go to the smaller σ₀², then smaller noise, then smaller τ. Failing
/// points are recorded in the sweep and skipped.
pub fn grid_search(
    base: &ModelConfig,
    grid: &GridSpec,
    events: &[EngagementEvent],
    objective: Objective,
) -> Result<GridResult> {
    let points = grid.points(base)?;
    let outcomes: Vec<Result<Metrics>> =
        points.par_iter().map(|cfg| evaluate_sequential(cfg, events).map(|r| r.weighted)).collect();

    let mut best: Option<(usize, Metrics)> = None;
    let mut first_error = None;
    let mut rows = Vec::with_capacity(points.len());
    for (i, (cfg, outcome)) in points.iter().zip(outcomes).enumerate() {
        let (metrics, error) = match outcome {
            Ok(m) => {
                if best.is_none_or(|(_, b)| objective.of(&m) > objective.of(&b)) {
                    best = Some((i, m));
                }
                (Some(m), None)
            }
            Err(e) => {
                log::warn!(
                    "grid point var0={} noise={} tau={} failed: {e}",
                    cfg.initial_variance,
                    cfg.kt_noise,
                    cfg.tau
                );
                let msg = e.to_string();
                first_error.get_or_insert(e);
                (None, Some(msg))
            }
        };
        rows.push(SweepRow {
            initial_variance: cfg.initial_variance,
            kt_noise: cfg.kt_noise,
            tau: cfg.tau,
            metrics,
            error,
        });
    }
    match best {
        Some((i, best_metrics)) => Ok(GridResult { best: points[i].clone(), best_metrics, rows }),
        None => Err(first_error.unwrap_or(Error::Empty("grid"))),
    }
}

/// One CSV row per grid point.
pub fn write_sweep_csv<W: Write>(out: W, rows: &[SweepRow]) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["initial_variance", "kt_noise", "tau", "accuracy", "precision", "recall", "f1", "error"])?;
    for r in rows {
        let m = |f: fn(&Metrics) -> f64| r.metrics.as_ref().map(|x| f(x).to_string()).unwrap_or_default();
        w.write_record([
            r.initial_variance.to_string(),
            r.kt_noise.to_string(),
            r.tau.to_string(),
            m(|x| x.accuracy),
            m(|x| x.precision),
            m(|x| x.recall),
            m(|x| x.f1),
            r.error.clone().unwrap_or_default(),
        ])?;
    }
    w.flush().map_err(|e| Error::io("sweep.csv", e))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::{Label, Topic};

    fn stream() -> Vec<EngagementEvent> {
        let mut out = Vec::new();
        for i in 0..30u64 {
            for l in 0..4u32 {
                out.push(EngagementEvent {
                    learner_id: format!("l{l}"),
                    lecture_id: format!("v{}", i % 5),
                    fragment_index: 0,
                    order: i,
                    topics: vec![Topic { kc_id: (i % 3) as u32 + l, cosine: 0.2 + 0.1 * (i % 4) as f64 }],
                    label: Label::from_sign(!(i + l as u64).is_multiple_of(3)),
                });
            }
        }
        out
    }

    #[test]
    fn single_point() {
        let base = ModelConfig::for_kind(ModelKind::TruelearnNovelty);
        let grid = GridSpec { initial_variance: vec![0.7], ..Default::default() };
        let r = grid_search(&base, &grid, &stream(), Objective::F1).unwrap();
        assert_eq!(r.rows.len(), 1);
        assert_eq!(r.best.initial_variance, 0.7);
        let direct = evaluate_sequential(&r.best, &stream()).unwrap();
        assert_eq!(r.best_metrics, direct.weighted);
    }

    #[test]
    fn row_count_is_product() {
        let base = ModelConfig::for_kind(ModelKind::MultiSkillKt);
        let grid = GridSpec { initial_variance: vec![0.5, 1.0], kt_noise: vec![0.0, 0.1, 0.2], tau: vec![0.0, 0.05] };
        let r = grid_search(&base, &grid, &stream(), Objective::F1).unwrap();
        assert_eq!(r.rows.len(), 12);
        let mut buf = Vec::new();
        write_sweep_csv(&mut buf, &r.rows).unwrap();
        assert_eq!(String::from_utf8(buf).unwrap().lines().count(), 13);
    }

    #[test]
    fn ties_prefer_smaller_values() {
        // persistence ignores every swept parameter, so all points tie
        let base = ModelConfig::for_kind(ModelKind::Persistence);
        let grid = GridSpec { initial_variance: vec![1.0, 0.3], kt_noise: vec![0.2, 0.1], tau: vec![0.1, 0.0] };
        let r = grid_search(&base, &grid, &stream(), Objective::F1).unwrap();
        assert_eq!((r.best.initial_variance, r.best.kt_noise, r.best.tau), (0.3, 0.1, 0.0));
    }

    #[test]
    fn empty_grid_is_rejected() {
        let base = ModelConfig::for_kind(ModelKind::Persistence);
        assert!(grid_search(&base, &GridSpec::default(), &stream(), Objective::F1).is_err());
    }

    #[test]
    fn full_range_shape() {
        let g = GridSpec::full_range(ModelKind::MultiSkillKt);
        assert_eq!(g.initial_variance.len(), 20);
        assert_eq!(g.initial_variance[0], 0.1);
        assert_eq!(g.initial_variance[19], 2.0);
        assert_eq!(g.kt_noise, vec![0.0, 0.05, 0.1, 0.15, 0.2, 0.25, 0.3]);
        assert!(GridSpec::full_range(ModelKind::TruelearnNovelty).kt_noise.is_empty());
    }
}

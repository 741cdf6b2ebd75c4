use serde::{Deserialize, Serialize};

use crate::corpus::Label;
use crate::{Error, Result};

/// Confusion matrix with engaged as the positive class.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConfusionCounts {
    pub tp: u64,
    pub fp: u64,
    pub tn: u64,
    #[serde(rename = "fn")]
    pub fn_: u64,
}

impl ConfusionCounts {
    pub fn record(&mut self, predicted: Label, actual: Label) {
        match (predicted.is_engaged(), actual.is_engaged()) {
            (true, true) => self.tp += 1,
            (true, false) => self.fp += 1,
            (false, false) => self.tn += 1,
            (false, true) => self.fn_ += 1,
        }
    }

    pub fn total(&self) -> u64 {
        self.tp + self.fp + self.tn + self.fn_
    }

    pub fn merge(&mut self, other: &ConfusionCounts) {
        self.tp += other.tp;
        self.fp += other.fp;
        self.tn += other.tn;
        self.fn_ += other.fn_;
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct Metrics {
    pub accuracy: f64,
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
}

fn ratio(num: u64, den: u64) -> f64 {
    if den == 0 {
        0.0
    } else {
        num as f64 / den as f64
    }
}

/// Standard metrics; any zero denominator yields 0.
pub fn compute_metrics(c: &ConfusionCounts) -> Result<Metrics> {
    if c.total() == 0 {
        return Err(Error::Empty("confusion counts"));
    }
    let precision = ratio(c.tp, c.tp + c.fp);
    let recall = ratio(c.tp, c.tp + c.fn_);
    let f1 = if precision + recall == 0.0 { 0.0 } else { 2.0 * precision * recall / (precision + recall) };
    Ok(Metrics { accuracy: ratio(c.tp + c.tn, c.total()), precision, recall, f1 })
}

/// Activity-weighted mean of per-learner metrics, weights proportional to
/// each learner's evaluated-event count.
pub fn weighted_metrics<'a>(per_learner: impl IntoIterator<Item = (u64, &'a Metrics)>) -> Result<Metrics> {
    let mut total = 0u64;
    let mut acc = Metrics::default();
    for (n, m) in per_learner {
        let w = n as f64;
        total += n;
        acc.accuracy += w * m.accuracy;
        acc.precision += w * m.precision;
        acc.recall += w * m.recall;
        acc.f1 += w * m.f1;
    }
    if total == 0 {
        return Err(Error::Empty("evaluated events"));
    }
    let t = total as f64;
    Ok(Metrics { accuracy: acc.accuracy / t, precision: acc.precision / t, recall: acc.recall / t, f1: acc.f1 / t })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn counts(tp: u64, fp: u64, tn: u64, fn_: u64) -> ConfusionCounts {
        ConfusionCounts { tp, fp, tn, fn_ }
    }

    #[test]
    fn standard_definitions() {
        let m = compute_metrics(&counts(3, 1, 5, 1)).unwrap();
        assert!((m.precision - 0.75).abs() < 1e-15);
        assert!((m.recall - 0.75).abs() < 1e-15);
        assert!((m.f1 - 0.75).abs() < 1e-15);
        assert!((m.accuracy - 0.8).abs() < 1e-15);
    }

    #[test]
    fn zero_denominators() {
        let m = compute_metrics(&counts(0, 0, 0, 2)).unwrap();
        assert_eq!((m.precision, m.recall, m.f1), (0.0, 0.0, 0.0));
        assert!(compute_metrics(&ConfusionCounts::default()).is_err());
    }

    #[test]
    fn perfect() {
        let m = compute_metrics(&counts(4, 0, 3, 0)).unwrap();
        assert_eq!(m, Metrics { accuracy: 1.0, precision: 1.0, recall: 1.0, f1: 1.0 });
    }

    #[test]
    fn activity_weighting() {
        let a = Metrics { f1: 0.8, ..Default::default() };
        let b = Metrics { f1: 0.4, ..Default::default() };
        let w = weighted_metrics([(10, &a), (30, &b)]).unwrap();
        assert!((w.f1 - 0.5).abs() < 1e-15);
        let eq = weighted_metrics([(7, &a), (7, &b)]).unwrap();
        assert!((eq.f1 - 0.6).abs() < 1e-15);
    }

    #[test]
    fn fn_field_is_named_fn() {
        let s = serde_json::to_string(&counts(1, 2, 3, 4)).unwrap();
        assert_eq!(s, r#"{"tp":1,"fp":2,"tn":3,"fn":4}"#);
    }
}

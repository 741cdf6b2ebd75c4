use crate::corpus::Label;

/// Predicts the previous label with certainty.
pub fn predict_persistence(history: &[Label], default_rate: f64) -> (f64, Label) {
    persistence_from(history.last().copied(), default_rate)
}

/// Predicts the fraction of past engaged labels.
pub fn predict_majority(history: &[Label], default_rate: f64) -> (f64, Label) {
    let engaged = history.iter().filter(|l| l.is_engaged()).count() as u64;
    majority_from(engaged, history.len() as u64, default_rate)
}

pub(crate) fn persistence_from(last: Option<Label>, default_rate: f64) -> (f64, Label) {
    match last {
        Some(Label::Engaged) => (1.0, Label::Engaged),
        Some(Label::Disengaged) => (0.0, Label::Disengaged),
        None => threshold(default_rate),
    }
}

pub(crate) fn majority_from(engaged: u64, total: u64, default_rate: f64) -> (f64, Label) {
    if total == 0 {
        return threshold(default_rate);
    }
    threshold(engaged as f64 / total as f64)
}

pub(crate) fn threshold(p: f64) -> (f64, Label) {
    (p, Label::from_sign(p >= 0.5))
}

#[cfg(test)]
mod tests {
    use super::*;
    use Label::{Disengaged as N, Engaged as P};

    #[test]
    fn persistence() {
        assert_eq!(predict_persistence(&[P, N], 0.5), (0.0, N));
        assert_eq!(predict_persistence(&[], 0.5), (0.5, P));
        assert_eq!(predict_persistence(&[N], 0.5), (0.0, N));
    }

    #[test]
    fn majority() {
        let (p, l) = predict_majority(&[P, P, N], 0.5);
        assert!((p - 2.0 / 3.0).abs() < 1e-15);
        assert_eq!(l, P);
        assert_eq!(predict_majority(&[], 0.7), (0.7, P));
        assert_eq!(predict_majority(&[], 0.3), (0.3, N));
        assert_eq!(predict_majority(&[N, N], 0.5), (0.0, N));
        assert_eq!(predict_majority(&[P, N], 0.5), (0.5, P));
    }
}

use crate::gaussmath::Gaussian1D;

/// Gaussian random-walk drift: variance grows by `tau²` per step.
pub fn drift_gaussian(belief: Gaussian1D, steps: u64, tau: f64) -> Gaussian1D {
    if steps == 0 || tau == 0.0 {
        return belief;
    }
    belief.widened(steps as f64 * tau * tau)
}

/// Mastery decays toward 0.5 by `tau` per step, never crossing it.
pub fn drift_bernoulli(pi: f64, steps: u64, tau: f64) -> f64 {
    if steps == 0 || tau == 0.0 {
        return pi;
    }
    let shift = steps as f64 * tau;
    if pi > 0.5 {
        (pi - shift).max(0.5)
    } else {
        (pi + shift).min(0.5)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn gaussian_variance_is_additive() {
        let g = drift_gaussian(Gaussian1D::new(0.3, 1.0).unwrap(), 1, 0.1);
        assert_eq!(g.mean, 0.3);
        assert!((g.variance - 1.01).abs() < 1e-15);
        let g3 = drift_gaussian(Gaussian1D::new(0.3, 1.0).unwrap(), 3, 0.1);
        assert!((g3.variance - 1.03).abs() < 1e-15);
    }

    #[test]
    fn bernoulli_moves_toward_half() {
        assert!((drift_bernoulli(0.9, 1, 0.05) - 0.85).abs() < 1e-15);
        assert_eq!(drift_bernoulli(0.52, 1, 0.05), 0.5);
        assert!((drift_bernoulli(0.2, 2, 0.05) - 0.3).abs() < 1e-15);
        assert_eq!(drift_bernoulli(0.48, 1, 0.05), 0.5);
        assert_eq!(drift_bernoulli(0.5, 7, 0.05), 0.5);
    }

    #[test]
    fn zero_tau_is_fixed_point() {
        let g = Gaussian1D::new(-1.0, 0.4).unwrap();
        assert_eq!(drift_gaussian(g, 100, 0.0), g);
        assert_eq!(drift_bernoulli(0.91, 100, 0.0), 0.91);
    }
}

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::{Error, Result};

/// Seeded learner-level split. The train side gets `floor(n · fraction)`
/// learners, clamped so both sides are non-empty. Both sides are returned
/// sorted.
pub fn split_learners(ids: &[String], train_fraction: f64, seed: u64) -> Result<(Vec<String>, Vec<String>)> {
    if !(train_fraction > 0.0 && train_fraction < 1.0) {
        return Err(Error::Config(format!("train fraction must lie in (0, 1), got {train_fraction}")));
    }
    let mut ids = ids.to_vec();
    ids.sort();
    ids.dedup();
    let n = ids.len();
    if n < 2 {
        return Err(Error::Config(format!("need at least 2 learners to split, got {n}")));
    }
    ids.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    let n_train = ((n as f64 * train_fraction).floor() as usize).clamp(1, n - 1);
    let mut test = ids.split_off(n_train);
    ids.sort();
    test.sort();
    Ok((ids, test))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ids(n: usize) -> Vec<String> {
        (0..n).map(|i| format!("l{i:02}")).collect()
    }

    #[test]
    fn seventy_thirty() {
        let (a, b) = split_learners(&ids(10), 0.7, 1).unwrap();
        assert_eq!((a.len(), b.len()), (7, 3));
        let mut all: Vec<_> = a.iter().chain(&b).cloned().collect();
        all.sort();
        assert_eq!(all, ids(10));
    }

    #[test]
    fn deterministic_per_seed() {
        assert_eq!(split_learners(&ids(50), 0.7, 9).unwrap(), split_learners(&ids(50), 0.7, 9).unwrap());
        assert_ne!(split_learners(&ids(50), 0.7, 9).unwrap(), split_learners(&ids(50), 0.7, 10).unwrap());
    }

    #[test]
    fn keeps_a_test_learner() {
        let (a, b) = split_learners(&ids(3), 0.999, 0).unwrap();
        assert_eq!((a.len(), b.len()), (2, 1));
        let (a, b) = split_learners(&ids(3), 0.01, 0).unwrap();
        assert_eq!((a.len(), b.len()), (1, 2));
    }

    #[test]
    fn rejects_bad_input() {
        assert!(split_learners(&ids(1), 0.5, 0).is_err());
        assert!(split_learners(&ids(5), 1.0, 0).is_err());
        assert!(split_learners(&ids(5), 0.0, 0).is_err());
    }
}

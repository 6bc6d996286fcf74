use crate::error::{Error, Result};

/// `(1/n) Σ|y - Tᵢ| - (1/(2n(n-1))) Σ_{i≠j} |Tᵢ - Tⱼ|`.
pub fn crps_empirical(y: f64, samples: &[f64]) -> Result<f64> {
    Ok(CrpsEnsemble::new(samples)?.score(y))
}

/// Sorted forecast sample with prefix sums, so the CRPS of any observation
/// costs one binary search. The pairing term is computed once.
#[derive(Debug, Clone, PartialEq)]
pub struct CrpsEnsemble {
    sorted: Vec<f64>,
    prefix: Vec<f64>,
    pair_term: f64,
}

impl CrpsEnsemble {
    pub fn new(samples: &[f64]) -> Result<Self> {
        if samples.len() < 2 {
            return Err(Error::TooFewSamples {
                need: 2,
                got: samples.len(),
            });
        }
        let mut sorted = samples.to_vec();
        sorted.sort_by(f64::total_cmp);
        let mut prefix = Vec::with_capacity(sorted.len() + 1);
        prefix.push(0.0);
        let mut acc = 0.0;
        for v in &sorted {
            acc += v;
            prefix.push(acc);
        }
        // Σ_{i<j} (T(j) - T(i)) = Σ_k T(k) (2k - n + 1) over the sorted sample.
        let n = sorted.len();
        let spread: f64 = sorted
            .iter()
            .enumerate()
            .map(|(k, v)| v * (2.0 * k as f64 - n as f64 + 1.0))
            .sum();
        let pair_term = spread / (n as f64 * (n as f64 - 1.0));
        Ok(CrpsEnsemble {
            sorted,
            prefix,
            pair_term,
        })
    }

    pub fn len(&self) -> usize {
        self.sorted.len()
    }

    pub fn is_empty(&self) -> bool {
        self.sorted.is_empty()
    }

    /// `(1/(2n(n-1))) Σ_{i≠j} |Tᵢ - Tⱼ|`.
    pub fn pair_term(&self) -> f64 {
        self.pair_term
    }

    /// `(1/n) Σ|y - Tᵢ|`.
    pub fn mean_abs_error(&self, y: f64) -> f64 {
        let n = self.sorted.len();
        let k = self.sorted.partition_point(|&t| t < y);
        let below = y * k as f64 - self.prefix[k];
        let above = (self.prefix[n] - self.prefix[k]) - y * (n - k) as f64;
        (below + above) / n as f64
    }

    pub fn score(&self, y: f64) -> f64 {
        self.mean_abs_error(y) - self.pair_term
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    /// Direct double sum, the definition of the estimator.
    fn naive(y: f64, t: &[f64]) -> f64 {
        let n = t.len() as f64;
        let first = t.iter().map(|v| (y - v).abs()).sum::<f64>() / n;
        let mut pairs = 0.0;
        for (i, a) in t.iter().enumerate() {
            for (j, b) in t.iter().enumerate() {
                if i != j {
                    pairs += (a - b).abs();
                }
            }
        }
        first - pairs / (2.0 * n * (n - 1.0))
    }

    #[test]
    fn hand_computed_values() {
        assert_eq!(crps_empirical(1.0, &[1.0, 1.0, 1.0]).unwrap(), 0.0);
        assert_eq!(crps_empirical(0.0, &[1.0, 1.0]).unwrap(), 1.0);
        assert_eq!(crps_empirical(0.0, &[-1.0, 1.0]).unwrap(), 0.0);
        // y = 2, T = [0, 1, 4]: mean |y - T| = 5/3; ordered pairs sum 2·(1 + 4 + 3) = 16, /12.
        assert!((crps_empirical(2.0, &[0.0, 1.0, 4.0]).unwrap() - (5.0 / 3.0 - 16.0 / 12.0)).abs() < 1e-12);
    }

    #[test]
    fn rejects_fewer_than_two_samples() {
        assert!(crps_empirical(0.0, &[1.0]).is_err());
        assert!(crps_empirical(0.0, &[]).is_err());
    }

    proptest! {
        #[test]
        fn matches_naive_double_sum(y in -10.0f64..10.0, t in prop::collection::vec(-10.0f64..10.0, 2..40)) {
            let fast = crps_empirical(y, &t).unwrap();
            prop_assert!((fast - naive(y, &t)).abs() < 1e-10);
        }

        #[test]
        fn invariant_under_sample_permutation(y in -5.0f64..5.0, t in prop::collection::vec(-5.0f64..5.0, 2..30), seed in 0u64..1000) {
            use rand::seq::SliceRandom;
            let mut shuffled = t.clone();
            shuffled.shuffle(&mut crate::rng::rng(seed));
            prop_assert_eq!(crps_empirical(y, &t).unwrap(), crps_empirical(y, &shuffled).unwrap());
        }
    }
}

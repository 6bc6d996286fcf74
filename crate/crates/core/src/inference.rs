//! Paired permutation tests and bootstrap summaries for mean score differences.

use rand::Rng as _;
use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, Normal};

use crate::error::{invalid, Error, Result};
use crate::rng::rng;

/// Default number of sign-flip resamples.
pub const DEFAULT_PERMUTATIONS: usize = 999;

/// Per-observation score differences `a - b` of two forecasts scored on the
/// same observations in the same order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PairedScores {
    pub model_a: String,
    pub model_b: String,
    diffs: Vec<f64>,
    /// Observations dropped because both scores were infinite.
    excluded: usize,
}

impl PairedScores {
    pub fn new(model_a: impl Into<String>, model_b: impl Into<String>, a: &[f64], b: &[f64]) -> Result<Self> {
        if a.len() != b.len() {
            return Err(invalid(format!("{} scores paired with {}", a.len(), b.len())));
        }
        let mut diffs = Vec::with_capacity(a.len());
        let mut excluded = 0;
        for (x, y) in a.iter().zip(b) {
            let d = x - y;
            if d.is_nan() {
                excluded += 1;
            } else {
                diffs.push(d);
            }
        }
        if diffs.is_empty() {
            return Err(Error::Empty("paired score differences".into()));
        }
        Ok(PairedScores {
            model_a: model_a.into(),
            model_b: model_b.into(),
            diffs,
            excluded,
        })
    }

    pub fn from_diffs(diffs: Vec<f64>) -> Result<Self> {
        let zeros = vec![0.0; diffs.len()];
        PairedScores::new("a", "b", &diffs, &zeros)
    }

    pub fn diffs(&self) -> &[f64] {
        &self.diffs
    }

    pub fn excluded(&self) -> usize {
        self.excluded
    }

    /// The same pairs with the roles of the two models exchanged.
    pub fn swapped(&self) -> PairedScores {
        PairedScores {
            model_a: self.model_b.clone(),
            model_b: self.model_a.clone(),
            diffs: self.diffs.iter().map(|d| -d).collect(),
            excluded: self.excluded,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TestResult {
    pub p_value: f64,
    pub mean_diff: f64,
    pub n: usize,
    pub n_perm: usize,
    pub seed: u64,
    /// Infinite differences were replaced by ±10 times the largest finite |diff|.
    pub truncated_infinite: bool,
    pub excluded: usize,
}

/// Two-sided paired sign-flip test of a zero mean difference with the
/// add-one estimator `p = (1 + #{|flipped mean| ≥ |observed mean|}) / (n_perm + 1)`.
/// The sign vectors depend only on `seed` and the number of pairs.
pub fn permutation_test(ps: &PairedScores, n_perm: usize, seed: u64) -> Result<TestResult> {
    if n_perm < 99 {
        return Err(invalid(format!("need at least 99 permutations, got {n_perm}")));
    }
    let (diffs, truncated) = truncate_infinite(&ps.diffs);
    let n = diffs.len();
    let observed = diffs.iter().sum::<f64>() / n as f64;
    let threshold = observed.abs() * (1.0 - 1e-12);
    let mut r = rng(seed);
    let mut hits = 0usize;
    for _ in 0..n_perm {
        let mut s = 0.0;
        for d in &diffs {
            if r.random::<bool>() {
                s += d;
            } else {
                s -= d;
            }
        }
        if (s / n as f64).abs() >= threshold {
            hits += 1;
        }
    }
    Ok(TestResult {
        p_value: (1 + hits) as f64 / (n_perm + 1) as f64,
        mean_diff: observed,
        n,
        n_perm,
        seed,
        truncated_infinite: truncated,
        excluded: ps.excluded,
    })
}

fn truncate_infinite(diffs: &[f64]) -> (Vec<f64>, bool) {
    if diffs.iter().all(|d| d.is_finite()) {
        return (diffs.to_vec(), false);
    }
    let cap = diffs
        .iter()
        .filter(|d| d.is_finite())
        .fold(0.0f64, |m, d| m.max(d.abs()));
    let cap = if cap > 0.0 { 10.0 * cap } else { 1.0 };
    let out = diffs
        .iter()
        .map(|&d| if d.is_finite() { d } else { cap.copysign(d) })
        .collect();
    (out, true)
}

/// Means of `n_boot` resamples drawn with replacement.
pub fn bootstrap_mean_distribution(values: &[f64], n_boot: usize, seed: u64) -> Result<Vec<f64>> {
    if values.is_empty() {
        return Err(Error::Empty("bootstrap input".into()));
    }
    if n_boot < 100 {
        return Err(invalid(format!("need at least 100 bootstrap resamples, got {n_boot}")));
    }
    let n = values.len();
    let mut r = rng(seed);
    Ok((0..n_boot)
        .map(|_| (0..n).map(|_| values[r.random_range(0..n)]).sum::<f64>() / n as f64)
        .collect())
}

/// Mean with a normal-approximation confidence interval at `level`.
/// Any infinite value makes all three numbers infinite.
pub fn mean_with_ci(values: &[f64], level: f64) -> Result<(f64, f64, f64)> {
    if !(level > 0.0 && level < 1.0) {
        return Err(invalid(format!("confidence level {level} must lie in (0, 1)")));
    }
    let finite = values.iter().filter(|v| v.is_finite()).count();
    if finite < 2 {
        return Err(Error::TooFewSamples { need: 2, got: finite });
    }
    if finite < values.len() {
        let m = values.iter().sum::<f64>() / values.len() as f64;
        return Ok((m, m, m));
    }
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0);
    let z = Normal::standard().inverse_cdf(0.5 + level / 2.0);
    let half = z * (var / n).sqrt();
    Ok((mean, mean - half, mean + half))
}

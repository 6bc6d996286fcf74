//! Proper scoring rules for point-pattern forecasts: CRPS-type scores of
//! summary statistics, the squared-error F score, and the logarithmic and
//! Brehmer scores for Poisson forecasts.

mod crps;
mod likelihood;
mod se;
mod summary;

use serde::{Deserialize, Serialize};

pub use crps::{crps_empirical, CrpsEnsemble};
pub use likelihood::{brehmer_intensity_score, log_score_poisson, PoissonForecast};
pub use se::{f_function_se_score, f_reference_mc, f_reference_poisson, se_score};
pub use summary::{
    f_function_score, intensity_score, k_function_score, k_score_grid, summary_statistic_score, Estimator,
    Evaluation, ForecastCurves,
};

use crate::error::{Error, Result};
use crate::geometry::PointPattern;
use crate::simulate::ModelSpec;

/// Where forecast draws come from.
#[derive(Debug, Clone, PartialEq)]
pub enum ForecastSource {
    Model(ModelSpec),
    /// Pre-drawn patterns used directly as the Monte-Carlo sample.
    Ensemble(Vec<PointPattern>),
}

impl ForecastSource {
    pub fn validate(&self) -> Result<()> {
        match self {
            ForecastSource::Model(spec) => spec.validate(),
            ForecastSource::Ensemble(members) => {
                if members.len() < 2 {
                    return Err(Error::TooFewSamples {
                        need: 2,
                        got: members.len(),
                    });
                }
                if members.iter().any(|m| m.window() != members[0].window()) {
                    return Err(Error::GridMismatch("ensemble members have different windows".into()));
                }
                Ok(())
            }
        }
    }
}

/// Per-observation values of one score with the settings that produced them.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoreReport {
    pub score_name: String,
    pub values: Vec<f64>,
    /// Monte-Carlo draws per forecast (zero for closed-form scores).
    pub n: usize,
    pub seed: u64,
    /// Estimator or score settings, as JSON text.
    pub settings: String,
    pub mean: f64,
    /// Observations or draws that hit a degenerate estimator case.
    pub flagged: usize,
}

impl ScoreReport {
    pub fn new(score_name: impl Into<String>, values: Vec<f64>, n: usize, seed: u64, settings: String) -> Self {
        let mean = if values.is_empty() {
            f64::NAN
        } else {
            values.iter().sum::<f64>() / values.len() as f64
        };
        ScoreReport {
            score_name: score_name.into(),
            values,
            n,
            seed,
            settings,
            mean,
            flagged: 0,
        }
    }
}

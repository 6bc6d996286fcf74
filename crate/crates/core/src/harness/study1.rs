use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::config::{Experiment, RunConfig};
use super::emit;
use crate::error::{Error, Result};
use crate::estimate::default_upper_r;
use crate::geometry::PointPattern;
use crate::inference::{mean_with_ci, permutation_test, PairedScores};
use crate::io::Meta;
use crate::rng::labeled_seed;
use crate::scoring::{k_score_grid, Estimator, ForecastCurves};

/// Mean score of one forecast model on the observations of one true model.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Study1Cell {
    pub score_name: String,
    pub truth: String,
    pub forecast: String,
    pub mean: f64,
    pub ci_lo: f64,
    pub ci_hi: f64,
    pub n_obs: usize,
    pub n: usize,
    pub seed: u64,
    /// Forecast draws plus observations with a degenerate estimate.
    pub flagged: usize,
}

/// Permutation test of `forecast` against the true model on its own observations.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Study1PValue {
    pub score_name: String,
    pub truth: String,
    pub forecast: String,
    pub p_value: f64,
    /// Mean of `S(y, forecast) - S(y, truth)`.
    pub mean_diff: f64,
    pub n_obs: usize,
    pub n_perm: usize,
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Study1Score {
    pub truth: String,
    pub forecast: String,
    pub obs_id: String,
    pub score_name: String,
    pub value: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Study1Result {
    pub cells: Vec<Study1Cell>,
    pub pvalues: Vec<Study1PValue>,
    pub scores: Vec<Study1Score>,
    /// Human-readable descriptions of flagged cells.
    pub flags: Vec<String>,
    config: RunConfig,
}

impl Study1Result {
    pub fn mean(&self, score: &str, truth: &str, forecast: &str) -> Option<f64> {
        self.cells
            .iter()
            .find(|c| c.score_name == score && c.truth == truth && c.forecast == forecast)
            .map(|c| c.mean)
    }

    pub fn p_value(&self, score: &str, truth: &str, forecast: &str) -> Option<f64> {
        self.pvalues
            .iter()
            .find(|c| c.score_name == score && c.truth == truth && c.forecast == forecast)
            .map(|c| c.p_value)
    }

    /// Number of cells `(truth, forecast)` whose mean is at least the mean
    /// of the true model on the same observations, out of all cells.
    pub fn diagonal_minimum_count(&self, score: &str) -> (usize, usize) {
        let cells: Vec<_> = self.cells.iter().filter(|c| c.score_name == score).collect();
        let hits = cells
            .iter()
            .filter(|c| {
                self.mean(score, &c.truth, &c.truth)
                    .is_some_and(|d| d <= c.mean)
            })
            .count();
        (hits, cells.len())
    }

    pub fn write(&self, dir: &Path) -> Result<Vec<PathBuf>> {
        let s = self.config.study1.as_ref().expect("validated");
        let meta = Meta::new("study1", &self.config, self.config.seed, s.draws)?;
        let mut written = Vec::new();
        emit(dir, "study1_matrix.csv", &self.cells, &meta, &mut written)?;
        emit(dir, "study1_pvalues.csv", &self.pvalues, &meta, &mut written)?;
        emit(dir, "study1_scores.csv", &self.scores, &meta, &mut written)?;
        Ok(written)
    }
}

/// Scores every model as a forecast for the observations of every model,
/// with the intensity and K-function scores.
///
/// Each model's forecast draws are simulated once and shared by all
/// observations; observations are shared by all forecasts, so the scores
/// are paired by observation.
pub fn run_study1(cfg: &RunConfig) -> Result<Study1Result> {
    cfg.validate()?;
    if cfg.experiment != Experiment::Study1 {
        return Err(Error::Config("run_study1 needs a study1 configuration".into()));
    }
    let s = cfg.study1.as_ref().expect("validated");
    let w = cfg.window;
    let names = &s.models;
    let prepared = names
        .iter()
        .map(|k| cfg.model(k)?.prepare(&w))
        .collect::<Result<Vec<_>>>()?;
    let obs: Vec<Vec<PointPattern>> = prepared
        .iter()
        .zip(names)
        .map(|(m, k)| m.draw_many(s.observations, labeled_seed(cfg.seed, &format!("obs/{k}"))))
        .collect::<Result<_>>()?;
    let shared: Option<Vec<Vec<PointPattern>>> = if s.fresh_draws {
        None
    } else {
        Some(
            prepared
                .iter()
                .zip(names)
                .map(|(m, k)| m.draw_many(s.draws, labeled_seed(cfg.seed, &format!("forecast/{k}"))))
                .collect::<Result<_>>()?,
        )
    };
    let upper = s.upper_r.unwrap_or_else(|| default_upper_r(&w));
    let estimators = [
        Estimator::Intensity {
            sigma: s.sigma,
            nx: s.pixels,
            ny: s.pixels,
        },
        Estimator::KFunction {
            grid: k_score_grid(&w, upper, s.n_r)?,
            plugin: s.k_plugin,
        },
    ];
    let m = names.len();
    let mut result = Study1Result {
        cells: Vec::new(),
        pvalues: Vec::new(),
        scores: Vec::new(),
        flags: Vec::new(),
        config: cfg.clone(),
    };
    for est in &estimators {
        let score_name = est.name();
        let evals = obs
            .iter()
            .map(|group| group.par_iter().map(|y| est.evaluate(y)).collect::<Result<Vec<_>>>())
            .collect::<Result<Vec<_>>>()?;
        // values[g][f][j]: score of forecast f on observation j of truth g.
        let mut values = vec![vec![Vec::new(); m]; m];
        let mut forecast_flags = vec![0; m];
        for f in 0..m {
            if let Some(draws) = &shared {
                let curves = ForecastCurves::from_draws(est, &draws[f])?;
                forecast_flags[f] = curves.flagged_draws();
                for g in 0..m {
                    values[g][f] = evals[g]
                        .par_iter()
                        .map(|e| curves.score_values(&e.values))
                        .collect::<Result<Vec<_>>>()?;
                }
            } else {
                // Observation j of every truth is scored against ensemble j.
                let per_obs = (0..s.observations)
                    .into_par_iter()
                    .map(|j| {
                        let seed = labeled_seed(cfg.seed, &format!("forecast/{}/{j}", names[f]));
                        let curves = ForecastCurves::from_draws(est, &prepared[f].draw_many(s.draws, seed)?)?;
                        let row = (0..m)
                            .map(|g| curves.score_values(&evals[g][j].values))
                            .collect::<Result<Vec<f64>>>()?;
                        Ok((row, curves.flagged_draws()))
                    })
                    .collect::<Result<Vec<_>>>()?;
                forecast_flags[f] = per_obs.iter().map(|(_, k)| k).sum();
                for g in 0..m {
                    values[g][f] = per_obs.iter().map(|(row, _)| row[g]).collect();
                }
            }
        }
        for g in 0..m {
            let obs_flags = evals[g].iter().filter(|e| e.flagged).count();
            for f in 0..m {
                let v = &values[g][f];
                let (mean, lo, hi) = mean_with_ci(v, s.level)?;
                let flagged = forecast_flags[f] + obs_flags;
                if flagged > 0 {
                    result.flags.push(format!(
                        "{score_name}: truth {} / forecast {}: {} degenerate forecast draws, {} degenerate observations",
                        names[g], names[f], forecast_flags[f], obs_flags
                    ));
                }
                result.cells.push(Study1Cell {
                    score_name: score_name.into(),
                    truth: names[g].clone(),
                    forecast: names[f].clone(),
                    mean,
                    ci_lo: lo,
                    ci_hi: hi,
                    n_obs: v.len(),
                    n: s.draws,
                    seed: cfg.seed,
                    flagged,
                });
                for (j, value) in v.iter().enumerate() {
                    result.scores.push(Study1Score {
                        truth: names[g].clone(),
                        forecast: names[f].clone(),
                        obs_id: format!("{}_{j:04}", names[g]),
                        score_name: score_name.into(),
                        value: *value,
                    });
                }
            }
            for f in (0..m).filter(|&f| f != g) {
                let seed = labeled_seed(cfg.seed, &format!("perm/{score_name}/{}/{}", names[g], names[f]));
                let ps = PairedScores::new(&names[f], &names[g], &values[g][f], &values[g][g])?;
                let t = permutation_test(&ps, s.n_perm, seed)?;
                result.pvalues.push(Study1PValue {
                    score_name: score_name.into(),
                    truth: names[g].clone(),
                    forecast: names[f].clone(),
                    p_value: t.p_value,
                    mean_diff: t.mean_diff,
                    n_obs: t.n,
                    n_perm: s.n_perm,
                    seed,
                });
            }
        }
    }
    Ok(result)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::harness::config::Scale;

    fn small() -> RunConfig {
        let mut cfg = RunConfig::preset(Experiment::Study1, Scale::Desk);
        let s = cfg.study1.as_mut().unwrap();
        s.observations = 6;
        s.draws = 8;
        s.pixels = 32;
        s.n_r = 16;
        s.n_perm = 99;
        cfg
    }

    #[test]
    fn reduced_run_emits_full_matrices() {
        let r = run_study1(&small()).unwrap();
        assert_eq!(r.cells.len(), 2 * 25);
        assert_eq!(r.pvalues.len(), 2 * 20);
        assert_eq!(r.scores.len(), 2 * 25 * 6);
        for p in &r.pvalues {
            assert!(p.p_value >= 1.0 / 100.0 && p.p_value <= 1.0);
        }
        let dir = tempfile::tempdir().unwrap();
        let files = r.write(dir.path()).unwrap();
        assert_eq!(files.len(), 3);
        let text = std::fs::read_to_string(&files[0]).unwrap();
        assert!(text.starts_with("score_name,truth,forecast,mean,ci_lo,ci_hi,n_obs,n,seed,flagged\n"));
    }

    #[test]
    fn fresh_draws_change_forecasts_but_not_observations() {
        let shared = run_study1(&small()).unwrap();
        let mut cfg = small();
        cfg.study1.as_mut().unwrap().fresh_draws = true;
        let fresh = run_study1(&cfg).unwrap();
        assert_eq!(fresh.scores.len(), shared.scores.len());
        assert_ne!(fresh.scores, shared.scores);
        assert_eq!(fresh, run_study1(&cfg).unwrap());
    }

    #[test]
    fn reruns_are_identical() {
        let a = run_study1(&small()).unwrap();
        let b = run_study1(&small()).unwrap();
        assert_eq!(a.cells, b.cells);
        assert_eq!(a.pvalues, b.pvalues);
    }
}

use std::path::{Path, PathBuf};

use rand::seq::index::sample as sample_indices;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::config::{Experiment, RunConfig};
use super::emit;
use crate::error::{Error, Result};
use crate::geometry::PointPattern;
use crate::inference::{mean_with_ci, permutation_test, PairedScores};
use crate::io::Meta;
use crate::rng::{labeled_seed, rng};
use crate::scoring::{Estimator, ForecastCurves, PoissonForecast};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Study2Mean {
    pub score_name: String,
    pub model: String,
    pub truth: bool,
    pub mean: f64,
    pub ci_lo: f64,
    pub ci_hi: f64,
    pub n_obs: usize,
    pub n: usize,
}

/// Mean score over one random observation subset.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Study2BoxRow {
    pub score_name: String,
    pub model: String,
    pub truth: bool,
    pub n_obs: usize,
    pub rep: usize,
    pub mean: f64,
}

/// Average permutation p-value of a model against the truth at one
/// observation-set size.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Study2PCurveRow {
    pub score_name: String,
    pub model: String,
    pub n_obs: usize,
    pub mean_p: f64,
    pub repetitions: usize,
    pub n_perm: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Study2Result {
    pub means: Vec<Study2Mean>,
    pub boxes: Vec<Study2BoxRow>,
    pub pcurves: Vec<Study2PCurveRow>,
    pub flags: Vec<String>,
    config: RunConfig,
}

/// Name of the intensity score at bandwidth `sigma`.
pub fn intensity_score_name(sigma: f64) -> String {
    format!("intensity_{sigma}")
}

impl Study2Result {
    pub fn mean_p(&self, score: &str, model: &str, n_obs: usize) -> Option<f64> {
        self.pcurves
            .iter()
            .find(|r| r.score_name == score && r.model == model && r.n_obs == n_obs)
            .map(|r| r.mean_p)
    }

    pub fn pool_mean(&self, score: &str, model: &str) -> Option<f64> {
        self.means
            .iter()
            .find(|r| r.score_name == score && r.model == model)
            .map(|r| r.mean)
    }

    pub fn write(&self, dir: &Path) -> Result<Vec<PathBuf>> {
        let s = self.config.study2.as_ref().expect("validated");
        let meta = Meta::new("study2", &self.config, self.config.seed, s.draws)?;
        let mut written = Vec::new();
        emit(dir, "study2_means.csv", &self.means, &meta, &mut written)?;
        emit(dir, "study2_boxes.csv", &self.boxes, &meta, &mut written)?;
        emit(dir, "study2_pcurves.csv", &self.pcurves, &meta, &mut written)?;
        Ok(written)
    }
}

/// Log score and intensity scores of Poisson forecasts on a pool of
/// observations from the true model, mean-score distributions over random
/// observation subsets, and mean permutation p-values against the truth for
/// subset sizes `1..=max_obs`. All models share the same subsets.
pub fn run_study2(cfg: &RunConfig) -> Result<Study2Result> {
    cfg.validate()?;
    if cfg.experiment != Experiment::Study2 {
        return Err(Error::Config("run_study2 needs a study2 configuration".into()));
    }
    let s = cfg.study2.as_ref().expect("validated");
    let w = cfg.window;
    let names = &s.models;
    let truth = names.iter().position(|k| *k == s.truth).expect("validated");
    let pool: Vec<PointPattern> = cfg
        .model(&s.truth)?
        .prepare(&w)?
        .draw_many(s.pool, labeled_seed(cfg.seed, "obs"))?;
    let mut score_names = vec!["log".to_string()];
    // scores[k][f][j]: score k of model f on pool observation j.
    let mut scores: Vec<Vec<Vec<f64>>> = Vec::new();
    let mut logs = Vec::new();
    for k in names {
        let lambda = cfg.model(k)?.poisson_intensity().expect("validated");
        let forecast = PoissonForecast::new(lambda, &w)?;
        logs.push(pool.par_iter().map(|y| forecast.log_score(y)).collect::<Vec<_>>());
    }
    scores.push(logs);
    let draws = names
        .iter()
        .map(|k| cfg.model(k)?.prepare(&w)?.draw_many(s.draws, labeled_seed(cfg.seed, &format!("forecast/{k}"))))
        .collect::<Result<Vec<_>>>()?;
    for &sigma in &s.sigmas {
        let est = Estimator::Intensity {
            sigma,
            nx: s.pixels,
            ny: s.pixels,
        };
        let evals = pool.par_iter().map(|y| est.evaluate(y)).collect::<Result<Vec<_>>>()?;
        let mut per_model = Vec::new();
        for d in &draws {
            let curves = ForecastCurves::from_draws(&est, d)?;
            per_model.push(
                evals
                    .par_iter()
                    .map(|e| curves.score_values(&e.values))
                    .collect::<Result<Vec<_>>>()?,
            );
        }
        scores.push(per_model);
        score_names.push(intensity_score_name(sigma));
    }

    let mut result = Study2Result {
        means: Vec::new(),
        boxes: Vec::new(),
        pcurves: Vec::new(),
        flags: Vec::new(),
        config: cfg.clone(),
    };
    for (k, name) in score_names.iter().enumerate() {
        for (f, model) in names.iter().enumerate() {
            let v = &scores[k][f];
            let (mean, ci_lo, ci_hi) = mean_with_ci(v, 0.95)?;
            if !mean.is_finite() {
                result.flags.push(format!("{name}: model {model} has infinite scores"));
            }
            result.means.push(Study2Mean {
                score_name: name.clone(),
                model: model.clone(),
                truth: f == truth,
                mean,
                ci_lo,
                ci_hi,
                n_obs: v.len(),
                n: if k == 0 { 0 } else { s.draws },
            });
        }
    }

    let subset = |label: String, n: usize| -> Vec<usize> {
        sample_indices(&mut rng(labeled_seed(cfg.seed, &label)), s.pool, n).into_vec()
    };
    let mean_over = |v: &[f64], idx: &[usize]| idx.iter().map(|&j| v[j]).sum::<f64>() / idx.len() as f64;
    for &n_obs in &s.box_sizes {
        for rep in 0..s.repetitions {
            let idx = subset(format!("box/{n_obs}/{rep}"), n_obs);
            for (k, name) in score_names.iter().enumerate() {
                for (f, model) in names.iter().enumerate() {
                    result.boxes.push(Study2BoxRow {
                        score_name: name.clone(),
                        model: model.clone(),
                        truth: f == truth,
                        n_obs,
                        rep,
                        mean: mean_over(&scores[k][f], &idx),
                    });
                }
            }
        }
    }

    let subsets: Vec<Vec<Vec<usize>>> = (1..=s.max_obs)
        .map(|n_obs| (0..s.repetitions).map(|rep| subset(format!("pcurve/{n_obs}/{rep}"), n_obs)).collect())
        .collect();
    for (k, name) in score_names.iter().enumerate() {
        for (f, model) in names.iter().enumerate().filter(|(f, _)| *f != truth) {
            let rows = (1..=s.max_obs)
                .into_par_iter()
                .map(|n_obs| {
                    let mut total = 0.0;
                    for (rep, idx) in subsets[n_obs - 1].iter().enumerate() {
                        let a: Vec<f64> = idx.iter().map(|&j| scores[k][f][j]).collect();
                        let b: Vec<f64> = idx.iter().map(|&j| scores[k][truth][j]).collect();
                        let ps = PairedScores::new(model, &names[truth], &a, &b)?;
                        let seed = labeled_seed(cfg.seed, &format!("perm/{name}/{model}/{n_obs}/{rep}"));
                        total += permutation_test(&ps, s.n_perm, seed)?.p_value;
                    }
                    Ok(Study2PCurveRow {
                        score_name: name.clone(),
                        model: model.clone(),
                        n_obs,
                        mean_p: total / s.repetitions as f64,
                        repetitions: s.repetitions,
                        n_perm: s.n_perm,
                    })
                })
                .collect::<Result<Vec<_>>>()?;
            result.pcurves.extend(rows);
        }
    }
    Ok(result)
}

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::crps::CrpsEnsemble;
use super::ForecastSource;
use crate::error::{invalid, Error, Result};
use crate::estimate::{f_hat_with, k_hat_plugin, kernel_intensity, Erosion, KPlugin, PixelGrid};
use crate::geometry::{PointPattern, RGrid, Window};

/// Summary-statistic estimator used to push patterns into a function space.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Estimator {
    /// Edge-corrected kernel intensity on an `nx x ny` pixel grid,
    /// integrated over the window by the midpoint rule.
    Intensity { sigma: f64, nx: usize, ny: usize },
    /// Ripley's K on `grid`, integrated by the trapezoid rule with the grid weights.
    KFunction {
        grid: RGrid,
        #[serde(default)]
        plugin: KPlugin,
    },
    /// Empty-space function on `grid`, integrated like K.
    FFunction {
        grid: RGrid,
        #[serde(default)]
        probe_spacing: Option<f64>,
        #[serde(default)]
        erosion: Erosion,
    },
}

/// Estimator output flattened to quadrature nodes.
#[derive(Debug, Clone, PartialEq)]
pub struct Evaluation {
    pub values: Vec<f64>,
    /// The estimator met a degenerate case (too few points, clamped plug-in).
    pub flagged: bool,
}

impl Estimator {
    pub fn name(&self) -> &'static str {
        match self {
            Estimator::Intensity { .. } => "intensity",
            Estimator::KFunction { .. } => "kfun",
            Estimator::FFunction { .. } => "ffun",
        }
    }

    pub fn evaluate(&self, p: &PointPattern) -> Result<Evaluation> {
        match self {
            Estimator::Intensity { sigma, nx, ny } => {
                let grid = PixelGrid::new(*p.window(), *nx, *ny)?;
                let field = kernel_intensity(p, *sigma, &grid)?;
                Ok(Evaluation {
                    values: field.values().to_vec(),
                    flagged: false,
                })
            }
            Estimator::KFunction { grid, plugin } => {
                let (curve, diag) = k_hat_plugin(p, grid, plugin)?;
                Ok(Evaluation {
                    values: curve.into_values(),
                    flagged: !diag.is_clean(),
                })
            }
            Estimator::FFunction {
                grid,
                probe_spacing,
                erosion,
            } => Ok(Evaluation {
                values: f_hat_with(p, grid, *probe_spacing, *erosion)?.into_values(),
                flagged: false,
            }),
        }
    }

    /// Quadrature weights matching [`Estimator::evaluate`]'s nodes.
    pub fn weights(&self, window: &Window) -> Result<Vec<f64>> {
        match self {
            Estimator::Intensity { nx, ny, .. } => {
                let grid = PixelGrid::new(*window, *nx, *ny)?;
                Ok(vec![grid.cell_area(); grid.len()])
            }
            Estimator::KFunction { grid, .. } | Estimator::FFunction { grid, .. } => Ok(grid.quadrature()),
        }
    }
}

/// Estimator values of a forecast's draws, arranged for repeated scoring.
///
/// By linearity of the integral, the summary-statistic score equals the
/// quadrature-weighted sum of per-node CRPS values, which is what is stored.
#[derive(Debug, Clone)]
pub struct ForecastCurves {
    estimator: Estimator,
    window: Window,
    weights: Vec<f64>,
    columns: Vec<CrpsEnsemble>,
    draws: usize,
    flagged_draws: usize,
}

impl ForecastCurves {
    pub fn from_draws(estimator: &Estimator, draws: &[PointPattern]) -> Result<Self> {
        let first = draws.first().ok_or(Error::TooFewSamples { need: 2, got: 0 })?;
        let window = *first.window();
        if let Some(bad) = draws.iter().position(|d| *d.window() != window) {
            return Err(Error::GridMismatch(format!("forecast draw {bad} has a different window")));
        }
        let evals: Vec<Evaluation> = draws
            .par_iter()
            .enumerate()
            .map(|(i, d)| {
                estimator.evaluate(d).map_err(|e| Error::Draw {
                    index: i,
                    source: Box::new(e),
                })
            })
            .collect::<Result<_>>()?;
        let weights = estimator.weights(&window)?;
        let columns = (0..weights.len())
            .into_par_iter()
            .map(|k| {
                let column: Vec<f64> = evals.iter().map(|e| e.values[k]).collect();
                CrpsEnsemble::new(&column)
            })
            .collect::<Result<_>>()?;
        Ok(ForecastCurves {
            estimator: estimator.clone(),
            window,
            weights,
            columns,
            draws: draws.len(),
            flagged_draws: evals.iter().filter(|e| e.flagged).count(),
        })
    }

    /// Draws `n` patterns from a model (seeds derived from `seed`) or uses
    /// the ensemble members as they are.
    pub fn from_source(
        estimator: &Estimator,
        source: &ForecastSource,
        window: &Window,
        n: usize,
        seed: u64,
    ) -> Result<Self> {
        match source {
            ForecastSource::Model(spec) => {
                if n < 2 {
                    return Err(Error::TooFewSamples { need: 2, got: n });
                }
                let draws = spec.prepare(window)?.draw_many(n, seed)?;
                Self::from_draws(estimator, &draws)
            }
            ForecastSource::Ensemble(members) => {
                source.validate()?;
                if members[0].window() != window {
                    return Err(Error::GridMismatch("ensemble window differs from the observation window".into()));
                }
                Self::from_draws(estimator, members)
            }
        }
    }

    pub fn estimator(&self) -> &Estimator {
        &self.estimator
    }

    pub fn draws(&self) -> usize {
        self.draws
    }

    /// Number of draws on which the estimator reported a degenerate case.
    pub fn flagged_draws(&self) -> usize {
        self.flagged_draws
    }

    /// Score of an already evaluated observation.
    pub fn score_values(&self, values: &[f64]) -> Result<f64> {
        if values.len() != self.columns.len() {
            return Err(Error::GridMismatch(format!(
                "{} observation values for {} forecast nodes",
                values.len(),
                self.columns.len()
            )));
        }
        Ok(self
            .columns
            .iter()
            .zip(&self.weights)
            .zip(values)
            .map(|((c, w), y)| if *w == 0.0 { 0.0 } else { w * c.score(*y) })
            .sum())
    }

    pub fn score(&self, y: &PointPattern) -> Result<f64> {
        if *y.window() != self.window {
            return Err(Error::GridMismatch("observation window differs from the forecast window".into()));
        }
        self.score_values(&self.estimator.evaluate(y)?.values)
    }

    /// Scores of several observations, in input order.
    pub fn score_all(&self, ys: &[PointPattern]) -> Result<Vec<f64>> {
        ys.par_iter().map(|y| self.score(y)).collect()
    }

    /// Score of `y` and whether the estimate for `y` itself was degenerate.
    pub fn score_flagged(&self, y: &PointPattern) -> Result<(f64, bool)> {
        if *y.window() != self.window {
            return Err(Error::GridMismatch("observation window differs from the forecast window".into()));
        }
        let eval = self.estimator.evaluate(y)?;
        Ok((self.score_values(&eval.values)?, eval.flagged))
    }
}

/// Monte-Carlo estimate of the CRPS-type score of `y` under `source`.
pub fn summary_statistic_score(
    y: &PointPattern,
    source: &ForecastSource,
    estimator: &Estimator,
    n: usize,
    seed: u64,
) -> Result<f64> {
    ForecastCurves::from_source(estimator, source, y.window(), n, seed)?.score(y)
}

pub fn intensity_score(
    y: &PointPattern,
    source: &ForecastSource,
    sigma: f64,
    pixels: (usize, usize),
    n: usize,
    seed: u64,
) -> Result<f64> {
    let estimator = Estimator::Intensity {
        sigma,
        nx: pixels.0,
        ny: pixels.1,
    };
    summary_statistic_score(y, source, &estimator, n, seed)
}

/// Uniform K grid of `n_r` points on `(0, upper_r]`, checked against the window.
pub fn k_score_grid(window: &Window, upper_r: f64, n_r: usize) -> Result<RGrid> {
    if upper_r >= window.min_side() / 2.0 {
        return Err(invalid(format!(
            "upper limit {upper_r} must be below half the shorter window side"
        )));
    }
    if upper_r > window.min_side() / 4.0 {
        log::warn!("K-score upper limit {upper_r} exceeds a quarter of the shorter window side");
    }
    RGrid::uniform(upper_r, n_r)
}

pub fn k_function_score(
    y: &PointPattern,
    source: &ForecastSource,
    upper_r: f64,
    n_r: usize,
    n: usize,
    seed: u64,
) -> Result<f64> {
    let estimator = Estimator::KFunction {
        grid: k_score_grid(y.window(), upper_r, n_r)?,
        plugin: KPlugin::default(),
    };
    summary_statistic_score(y, source, &estimator, n, seed)
}

pub fn f_function_score(
    y: &PointPattern,
    source: &ForecastSource,
    grid: &RGrid,
    probe_spacing: Option<f64>,
    n: usize,
    seed: u64,
) -> Result<f64> {
    let estimator = Estimator::FFunction {
        grid: grid.clone(),
        probe_spacing,
        erosion: Erosion::PerRadius,
    };
    summary_statistic_score(y, source, &estimator, n, seed)
}

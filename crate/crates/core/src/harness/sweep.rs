use std::path::{Path, PathBuf};

use rand::Rng as _;
use rand_distr::{Distribution, Exp, Normal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::config::{Experiment, RunConfig, SweepConfig, SweepMode, SyntheticCatalog};
use super::emit;
use crate::error::{invalid, Error, Result};
use crate::geometry::{Point, PointPattern, Window};
use crate::io::{write_catalog_csv, write_pattern_csv, Catalog, Meta};
use crate::rng::{labeled_seed, rng};
use crate::scoring::{Estimator, ForecastCurves, PoissonForecast};
use crate::simulate::{build_mixture_intensity, sample_inhom_poisson, ModelSpec};

/// A synthetic catalog with the anchor points its intensity was built on.
#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticCatalogData {
    pub catalog: Catalog,
    pub anchors: PointPattern,
}

impl SyntheticCatalogData {
    /// Writes `catalog.csv` (with magnitudes) and `anchors.csv` to `dir`.
    pub fn write(&self, dir: &Path) -> Result<(PathBuf, PathBuf)> {
        let c = dir.join("catalog.csv");
        let a = dir.join("anchors.csv");
        write_catalog_csv(&c, &self.catalog.pattern, self.catalog.magnitudes.as_deref())?;
        write_pattern_csv(&a, &self.anchors)?;
        Ok((c, a))
    }
}

/// Anchors scattered along `faults` random segments, and events drawn from
/// the mixture intensity on those anchors. Event order is exchangeable, and
/// magnitudes follow a Gutenberg–Richter law with b = 1 above magnitude 3.
pub fn generate_synthetic_catalog(window: &Window, syn: &SyntheticCatalog, seed: u64) -> Result<SyntheticCatalogData> {
    if syn.anchors == 0 || syn.faults == 0 {
        return Err(invalid("synthetic catalog needs anchors and faults"));
    }
    let mut r = rng(labeled_seed(seed, "anchors"));
    let inner = |r: &mut crate::rng::Rng| {
        Point::new(
            window.xmin() + window.width() * (0.1 + 0.8 * r.random::<f64>()),
            window.ymin() + window.height() * (0.1 + 0.8 * r.random::<f64>()),
        )
    };
    let faults: Vec<(Point, Point)> = (0..syn.faults).map(|_| (inner(&mut r), inner(&mut r))).collect();
    let jitter = Normal::new(0.0, 0.01 * window.min_side()).expect("positive sd");
    let mut anchors = Vec::with_capacity(syn.anchors);
    while anchors.len() < syn.anchors {
        let (a, b) = faults[r.random_range(0..faults.len())];
        let t: f64 = r.random();
        let x = a.x + t * (b.x - a.x) + jitter.sample(&mut r);
        let y = a.y + t * (b.y - a.y) + jitter.sample(&mut r);
        if window.contains(x, y) {
            anchors.push(Point::new(x, y));
        }
    }
    let anchors = PointPattern::new(anchors, *window)?;
    let lambda = build_mixture_intensity(&anchors, syn.alpha, syn.eta, syn.events, window)?;
    let events = sample_inhom_poisson(&lambda, window, labeled_seed(seed, "events"))?;
    let gr = Exp::new(std::f64::consts::LN_10).expect("positive rate");
    let mut r = rng(labeled_seed(seed, "magnitudes"));
    let magnitudes = (0..events.len()).map(|_| 3.0 + gr.sample(&mut r)).collect();
    Ok(SyntheticCatalogData {
        catalog: Catalog {
            pattern: events,
            magnitudes: Some(magnitudes),
        },
        anchors,
    })
}

/// Mean over folds of one score at one grid cell.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepCell {
    pub score_name: String,
    pub alpha: f64,
    pub eta: f64,
    pub mean: f64,
    pub folds: usize,
    pub n: usize,
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepFoldRow {
    pub fold: usize,
    pub score_name: String,
    pub alpha: f64,
    pub eta: f64,
    pub value: f64,
    pub train_events: usize,
    pub test_events: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepResult {
    pub grid: Vec<SweepCell>,
    pub folds: Vec<SweepFoldRow>,
    pub flags: Vec<String>,
    config: RunConfig,
}

impl SweepResult {
    /// Grid cell with the smallest mean score.
    pub fn argmin(&self, score: &str) -> Option<(f64, f64)> {
        self.grid
            .iter()
            .filter(|c| c.score_name == score)
            .min_by(|a, b| a.mean.total_cmp(&b.mean))
            .map(|c| (c.alpha, c.eta))
    }

    pub fn mean(&self, score: &str, alpha: f64, eta: f64) -> Option<f64> {
        self.grid
            .iter()
            .find(|c| c.score_name == score && c.alpha == alpha && c.eta == eta)
            .map(|c| c.mean)
    }

    pub fn write(&self, dir: &Path) -> Result<Vec<PathBuf>> {
        let s = self.config.sweep.as_ref().expect("validated");
        let meta = Meta::new("sweep", &self.config, self.config.seed, s.draws)?;
        let mut written = Vec::new();
        emit(dir, "sweep_grid.csv", &self.grid, &meta, &mut written)?;
        emit(dir, "sweep_folds.csv", &self.folds, &meta, &mut written)?;
        Ok(written)
    }
}

struct Fold {
    train: Vec<usize>,
    test: Vec<usize>,
    /// Test period length over training period length.
    ratio: f64,
}

fn cyclic_folds(n: usize, s: &SweepConfig) -> Vec<Fold> {
    let b = s.blocks;
    let bounds = |k: usize| (k * n / b, (k + 1) * n / b);
    let test_blocks = b - s.train_blocks - 2 * s.gap_blocks;
    (0..b)
        .map(|start| {
            let collect = |first: usize, count: usize| -> Vec<usize> {
                (0..count)
                    .flat_map(|k| {
                        let (lo, hi) = bounds((first + k) % b);
                        lo..hi
                    })
                    .collect()
            };
            Fold {
                train: collect(start, s.train_blocks),
                test: collect(start + s.train_blocks + s.gap_blocks, test_blocks),
                ratio: test_blocks as f64 / s.train_blocks as f64,
            }
        })
        .collect()
}

/// Intensity score name at bandwidth `sigma`.
fn intensity_name(sigma: f64) -> String {
    format!("intensity_{sigma}")
}

/// Cross-validated log and intensity scores of the mixture model over the
/// `(alpha, eta)` grid. Events are split by index into cyclic blocks; each
/// fold's forecast integrates to the training count scaled by the ratio of
/// test to training blocks.
pub fn run_catalog_sweep(cfg: &RunConfig, catalog: &Catalog, anchors: Option<&PointPattern>) -> Result<SweepResult> {
    cfg.validate()?;
    if cfg.experiment != Experiment::Sweep {
        return Err(Error::Config("run_catalog_sweep needs a sweep configuration".into()));
    }
    let s = cfg.sweep.as_ref().expect("validated");
    let w = cfg.window;
    if *catalog.pattern.window() != w {
        return Err(Error::GridMismatch("catalog window differs from the configured window".into()));
    }
    let keep: Vec<usize> = match &catalog.magnitudes {
        Some(m) => (0..m.len()).filter(|&i| m[i] >= s.count_magnitude).collect(),
        None => (0..catalog.pattern.len()).collect(),
    };
    let pts = catalog.pattern.points();
    let subset = |idx: &[usize]| PointPattern::from_trusted(idx.iter().map(|&i| pts[keep[i]]).collect(), w);
    let folds = cyclic_folds(keep.len(), s);
    let smoothing: Vec<PointPattern> = folds
        .iter()
        .enumerate()
        .map(|(f, fold)| {
            if fold.train.is_empty() {
                return Err(Error::Empty(format!("training window of fold {f}")));
            }
            match s.mode {
                SweepMode::Anchor => anchors
                    .cloned()
                    .ok_or_else(|| Error::Config("anchor mode needs an anchor pattern".into())),
                SweepMode::Training => {
                    let big: Vec<usize> = fold
                        .train
                        .iter()
                        .copied()
                        .filter(|&i| catalog.magnitudes.as_ref().is_none_or(|m| m[keep[i]] >= s.smoothing_magnitude))
                        .collect();
                    if big.is_empty() {
                        return Err(Error::Empty(format!("no smoothing events in the training window of fold {f}")));
                    }
                    Ok(subset(&big))
                }
            }
        })
        .collect::<Result<_>>()?;

    let mut tasks = Vec::new();
    for f in 0..folds.len() {
        for &alpha in &s.alphas {
            for &eta in &s.etas {
                tasks.push((f, alpha, eta));
            }
        }
    }
    let estimators: Vec<Estimator> = s
        .sigmas
        .iter()
        .map(|&sigma| Estimator::Intensity {
            sigma,
            nx: s.pixels,
            ny: s.pixels,
        })
        .collect();
    let evaluated: Vec<Vec<SweepFoldRow>> = tasks
        .par_iter()
        .map(|&(f, alpha, eta)| {
            let fold = &folds[f];
            let train_n = fold.train.len();
            let test = subset(&fold.test);
            let total = train_n as f64 * fold.ratio;
            let lambda = build_mixture_intensity(&smoothing[f], alpha, eta, total, &w)?;
            let row = |score_name: String, value: f64| SweepFoldRow {
                fold: f,
                score_name,
                alpha,
                eta,
                value,
                train_events: train_n,
                test_events: test.len(),
            };
            let mut rows = vec![row("log".into(), PoissonForecast::new(lambda.clone(), &w)?.log_score(&test))];
            if !estimators.is_empty() {
                let seed = labeled_seed(cfg.seed, &format!("fold/{f}/{alpha}/{eta}"));
                let model = ModelSpec::InhomPoisson { intensity: lambda };
                let draws = model.prepare(&w)?.draw_many(s.draws, seed)?;
                for (est, sigma) in estimators.iter().zip(&s.sigmas) {
                    let curves = ForecastCurves::from_draws(est, &draws)?;
                    rows.push(row(intensity_name(*sigma), curves.score(&test)?));
                }
            }
            Ok(rows)
        })
        .collect::<Result<_>>()?;
    let folds_rows: Vec<SweepFoldRow> = evaluated.into_iter().flatten().collect();

    let mut names = vec!["log".to_string()];
    names.extend(s.sigmas.iter().map(|&sg| intensity_name(sg)));
    let mut grid = Vec::new();
    let mut flags = Vec::new();
    for name in &names {
        for &alpha in &s.alphas {
            for &eta in &s.etas {
                let v: Vec<f64> = folds_rows
                    .iter()
                    .filter(|r| r.score_name == *name && r.alpha == alpha && r.eta == eta)
                    .map(|r| r.value)
                    .collect();
                let mean = v.iter().sum::<f64>() / v.len() as f64;
                if !mean.is_finite() {
                    flags.push(format!("{name}: cell ({alpha}, {eta}) has an infinite score"));
                }
                grid.push(SweepCell {
                    score_name: name.clone(),
                    alpha,
                    eta,
                    mean,
                    folds: v.len(),
                    n: if name == "log" { 0 } else { s.draws },
                    seed: cfg.seed,
                });
            }
        }
    }
    Ok(SweepResult {
        grid,
        folds: folds_rows,
        flags,
        config: cfg.clone(),
    })
}

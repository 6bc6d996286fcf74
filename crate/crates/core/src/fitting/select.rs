use serde::{Deserialize, Serialize};

use super::{common_window, fit_family, Family, FitConfig, FittedModel};
use crate::error::{invalid, Result};
use crate::estimate::{default_upper_r, KPlugin};
use crate::inference::bootstrap_mean_distribution;
use crate::rng::{child_seed, labeled_seed};
use crate::scoring::{k_score_grid, Estimator, ForecastCurves, ForecastSource};
use crate::geometry::PointPattern;

/// Settings of [`select_by_k_score`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SelectionConfig {
    pub fit: FitConfig,
    /// Upper limit of the K-score integral; unset means a quarter of the
    /// shorter window side.
    pub upper_r: Option<f64>,
    pub n_r: usize,
    /// Forecast draws per fitted model.
    pub draws: usize,
    /// Intensity plug-in of the K̂ used in the score.
    pub plugin: KPlugin,
    pub n_boot: usize,
    pub seed: u64,
}

impl Default for SelectionConfig {
    fn default() -> Self {
        SelectionConfig {
            fit: FitConfig::default(),
            upper_r: None,
            n_r: 32,
            draws: 100,
            plugin: KPlugin::CountBased,
            n_boot: 1000,
            seed: 0,
        }
    }
}

/// A candidate that was fitted and scored.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RankedModel {
    pub model: FittedModel,
    /// K-scores of the test patterns, in input order.
    pub scores: Vec<f64>,
    pub mean_score: f64,
    /// Bootstrap distribution of the mean score.
    pub bootstrap: Vec<f64>,
    /// Forecast draws on which K̂ was degenerate.
    pub flagged_draws: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FailedFit {
    pub family: Family,
    pub error: String,
}

/// Candidates ordered by increasing mean score (ties by family), plus the
/// families whose fit or scoring failed.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Ranking {
    pub ranked: Vec<RankedModel>,
    pub failed: Vec<FailedFit>,
}

impl Ranking {
    pub fn best(&self) -> Option<&RankedModel> {
        self.ranked.first()
    }

    pub fn get(&self, family: Family) -> Option<&RankedModel> {
        self.ranked.iter().find(|m| m.model.family == family)
    }
}

fn fit_and_score(family: Family, train: &[PointPattern], test: &[PointPattern], cfg: &SelectionConfig, estimator: &Estimator) -> Result<RankedModel> {
    let model = fit_family(family, train, &cfg.fit)?;
    let seed = labeled_seed(cfg.seed, family.name());
    let window = *test[0].window();
    let curves = ForecastCurves::from_source(estimator, &ForecastSource::Model(model.spec.clone()), &window, cfg.draws, child_seed(seed, 0))?;
    let scores = curves.score_all(test)?;
    let mean_score = scores.iter().sum::<f64>() / scores.len() as f64;
    let bootstrap = bootstrap_mean_distribution(&scores, cfg.n_boot, child_seed(seed, 1))?;
    Ok(RankedModel {
        model,
        scores,
        mean_score,
        bootstrap,
        flagged_draws: curves.flagged_draws(),
    })
}

/// Fits every candidate family on `train` and scores the fitted models on
/// each `test` pattern with the K-function score. Random streams are keyed
/// by family name, so the ranking does not depend on candidate order.
pub fn select_by_k_score(candidates: &[Family], train: &[PointPattern], test: &[PointPattern], cfg: &SelectionConfig) -> Result<Ranking> {
    if candidates.is_empty() {
        return Err(invalid("no candidate families"));
    }
    let mut families = candidates.to_vec();
    families.sort();
    if families.windows(2).any(|w| w[0] == w[1]) {
        return Err(invalid("candidate families must be distinct"));
    }
    let window = common_window(train)?;
    if common_window(test)? != window {
        return Err(invalid("training and test patterns must share one window"));
    }
    if train.iter().any(|a| test.contains(a)) {
        return Err(invalid("training and test patterns must be disjoint"));
    }
    let upper = cfg.upper_r.unwrap_or_else(|| default_upper_r(&window));
    let estimator = Estimator::KFunction {
        grid: k_score_grid(&window, upper, cfg.n_r)?,
        plugin: cfg.plugin,
    };
    let mut ranking = Ranking {
        ranked: Vec::new(),
        failed: Vec::new(),
    };
    for family in families {
        match fit_and_score(family, train, test, cfg, &estimator) {
            Ok(m) => ranking.ranked.push(m),
            Err(e) => {
                log::warn!("{family} candidate failed: {e}");
                ranking.failed.push(FailedFit {
                    family,
                    error: e.to_string(),
                });
            }
        }
    }
    ranking.ranked.sort_by(|a, b| {
        a.mean_score
            .total_cmp(&b.mean_score)
            .then(a.model.family.cmp(&b.model.family))
    });
    Ok(ranking)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::Window;
    use crate::inference::{permutation_test, PairedScores};
    use crate::intensity::IntensityFn;
    use crate::simulate::{ClusterKernel, ClusterSpec, ModelSpec};

    fn thomas_draws(n: usize, seed: u64) -> Vec<PointPattern> {
        ModelSpec::Cluster(ClusterSpec {
            parent: IntensityFn::Constant { value: 0.25 },
            offspring_mean: 4.0,
            kernel: ClusterKernel::Thomas { sigma: 0.5 },
            buffer: None,
        })
        .prepare(&Window::square(10.0).unwrap())
        .unwrap()
        .draw_many(n, seed)
        .unwrap()
    }

    #[test]
    fn thomas_beats_poisson_on_thomas_data() {
        let data = thomas_draws(16, 77);
        let (train, test) = data.split_at(8);
        let cfg = SelectionConfig::default();
        let ranking = select_by_k_score(&[Family::Poisson, Family::Thomas], train, test, &cfg).unwrap();
        assert_eq!(ranking.best().unwrap().model.family, Family::Thomas);
        let ps = PairedScores::new(
            "thomas",
            "poisson",
            &ranking.get(Family::Thomas).unwrap().scores,
            &ranking.get(Family::Poisson).unwrap().scores,
        )
        .unwrap();
        let t = permutation_test(&ps, 999, 3).unwrap();
        assert!(t.p_value < 0.05, "{t:?}");
    }

    #[test]
    fn single_candidate_and_order_invariance() {
        let data = thomas_draws(6, 3);
        let (train, test) = data.split_at(3);
        let cfg = SelectionConfig {
            draws: 20,
            n_boot: 100,
            ..SelectionConfig::default()
        };
        let one = select_by_k_score(&[Family::Thomas], train, test, &cfg).unwrap();
        assert_eq!(one.ranked.len(), 1);
        let a = select_by_k_score(&[Family::Matern, Family::Poisson, Family::Thomas], train, test, &cfg).unwrap();
        let b = select_by_k_score(&[Family::Thomas, Family::Matern, Family::Poisson], train, test, &cfg).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.get(Family::Thomas).unwrap().scores, one.ranked[0].scores);
    }

    #[test]
    fn overlapping_or_duplicate_inputs_are_rejected() {
        let data = thomas_draws(4, 9);
        let cfg = SelectionConfig::default();
        assert!(select_by_k_score(&[Family::Poisson], &data[..2], &data[1..], &cfg).is_err());
        assert!(select_by_k_score(&[Family::Poisson, Family::Poisson], &data[..2], &data[2..], &cfg).is_err());
        assert!(select_by_k_score(&[], &data[..2], &data[2..], &cfg).is_err());
    }

    #[test]
    fn failed_fits_are_recorded() {
        let w = Window::square(10.0).unwrap();
        let train = vec![PointPattern::empty(w); 2];
        let test = thomas_draws(2, 1);
        let cfg = SelectionConfig {
            draws: 20,
            n_boot: 100,
            ..SelectionConfig::default()
        };
        let r = select_by_k_score(&[Family::Thomas, Family::Poisson], &train, &test, &cfg).unwrap();
        assert!(r.ranked.is_empty());
        assert_eq!(r.failed.len(), 2);
    }
}

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::config::{Experiment, RunConfig};
use super::emit;
use crate::error::{invalid, Error, Result};
use crate::fitting::{select_by_k_score, Family, Ranking, SelectionConfig};
use crate::geometry::PointPattern;
use crate::inference::{bootstrap_mean_distribution, permutation_test, PairedScores};
use crate::io::Meta;
use crate::rng::{child_seed, labeled_seed};

/// K-score of one fitted family on one held-out plot of one split.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TreesScoreRow {
    pub split: usize,
    pub train_plots: String,
    pub plot: String,
    pub family: Family,
    pub score: f64,
}

/// Fitted parameters of one family in one split.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TreesFitRow {
    pub split: usize,
    pub family: Family,
    pub theta: String,
    pub intensity: f64,
    pub objective: Option<f64>,
    pub converged: bool,
}

/// Mean score of a family over every split and held-out plot, with a
/// bootstrap percentile interval.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TreesFamilyRow {
    pub family: Family,
    pub mean: f64,
    pub boot_lo: f64,
    pub boot_hi: f64,
    pub n_scores: usize,
    /// Splits in which the family had the lowest mean score.
    pub wins: usize,
    pub failed_splits: usize,
    pub n: usize,
}

/// Paired permutation test of `family_a` against `family_b`; a negative
/// `mean_diff` favours `family_a`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TreesPairRow {
    pub family_a: Family,
    pub family_b: Family,
    pub mean_diff: f64,
    pub p_value: f64,
    pub n_pairs: usize,
    pub n_perm: usize,
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TreesResult {
    pub scores: Vec<TreesScoreRow>,
    pub fits: Vec<TreesFitRow>,
    pub families: Vec<TreesFamilyRow>,
    pub pairs: Vec<TreesPairRow>,
    pub flags: Vec<String>,
    config: RunConfig,
}

impl TreesResult {
    /// Number of (split, held-out plot) evaluations per family.
    pub fn evaluations(&self) -> usize {
        self.families.iter().map(|f| f.n_scores + f.failed_splits).max().unwrap_or(0)
    }

    /// Family with the lowest overall mean score.
    pub fn best(&self) -> Option<Family> {
        self.families
            .iter()
            .filter(|f| f.mean.is_finite())
            .min_by(|a, b| a.mean.total_cmp(&b.mean))
            .map(|f| f.family)
    }

    /// p-value of the test between two families, in either order.
    pub fn p_value(&self, a: Family, b: Family) -> Option<f64> {
        self.pairs
            .iter()
            .find(|p| (p.family_a == a && p.family_b == b) || (p.family_a == b && p.family_b == a))
            .map(|p| p.p_value)
    }

    pub fn write(&self, dir: &Path) -> Result<Vec<PathBuf>> {
        let t = self.config.trees.as_ref().expect("validated");
        let meta = Meta::new("trees", &self.config, self.config.seed, t.draws)?;
        let mut written = Vec::new();
        emit(dir, "trees_scores.csv", &self.scores, &meta, &mut written)?;
        emit(dir, "trees_fits.csv", &self.fits, &meta, &mut written)?;
        emit(dir, "trees_families.csv", &self.families, &meta, &mut written)?;
        emit(dir, "trees_pairs.csv", &self.pairs, &meta, &mut written)?;
        Ok(written)
    }
}

/// Draws the configured number of plots from the configured model, named
/// `plot_00`, `plot_01`, ...
pub fn generate_synthetic_plots(cfg: &RunConfig) -> Result<Vec<(String, PointPattern)>> {
    let t = cfg
        .trees
        .as_ref()
        .ok_or_else(|| Error::Config("no trees section".into()))?;
    let syn = t
        .synthetic
        .as_ref()
        .ok_or_else(|| Error::Config("trees section has no synthetic plots".into()))?;
    let draws = cfg
        .model(&syn.model)?
        .prepare(&cfg.window)?
        .draw_many(syn.plots, labeled_seed(cfg.seed, "plots"))?;
    Ok(draws
        .into_iter()
        .enumerate()
        .map(|(i, p)| (format!("plot_{i:02}"), p))
        .collect())
}

/// All `k`-subsets of `0..m` in lexicographic order.
fn combinations(m: usize, k: usize) -> Vec<Vec<usize>> {
    let mut out = Vec::new();
    let mut c: Vec<usize> = (0..k).collect();
    loop {
        out.push(c.clone());
        let Some(i) = (0..k).rev().find(|&i| c[i] < m - k + i) else {
            return out;
        };
        c[i] += 1;
        for j in i + 1..k {
            c[j] = c[j - 1] + 1;
        }
    }
}

/// Fits every family on each split of the plots into training and held-out
/// halves, scores the held-out plots with the K-function score, and
/// compares families over all splits with bootstrap intervals and paired
/// permutation tests.
pub fn run_tree_selection(cfg: &RunConfig, plots: &[(String, PointPattern)]) -> Result<TreesResult> {
    cfg.validate()?;
    if cfg.experiment != Experiment::Trees {
        return Err(Error::Config("run_tree_selection needs a trees configuration".into()));
    }
    let t = cfg.trees.as_ref().expect("validated");
    let m = plots.len();
    if m < 2 {
        return Err(invalid(format!("need at least two plots, got {m}")));
    }
    let mut names: Vec<&str> = plots.iter().map(|(n, _)| n.as_str()).collect();
    names.sort();
    if names.windows(2).any(|w| w[0] == w[1]) {
        return Err(invalid("plot names must be distinct"));
    }
    if plots.iter().any(|(_, p)| *p.window() != cfg.window) {
        return Err(Error::GridMismatch("plot window differs from the configured window".into()));
    }
    let k = t.train_size.unwrap_or(m / 2);
    if k == 0 || k >= m {
        return Err(invalid(format!("training size {k} must lie in 1..{m}")));
    }
    let mut families = t.families.clone();
    families.sort();
    families.dedup();

    let splits = combinations(m, k);
    let rankings: Vec<Ranking> = splits
        .par_iter()
        .enumerate()
        .map(|(i, train_idx)| {
            let train: Vec<PointPattern> = train_idx.iter().map(|&j| plots[j].1.clone()).collect();
            let test: Vec<PointPattern> = (0..m)
                .filter(|j| !train_idx.contains(j))
                .map(|j| plots[j].1.clone())
                .collect();
            let sel = SelectionConfig {
                fit: t.fit.clone(),
                upper_r: t.upper_r,
                n_r: t.n_r,
                draws: t.draws,
                plugin: t.plugin,
                n_boot: 100,
                seed: child_seed(cfg.seed, i as u64),
            };
            select_by_k_score(&families, &train, &test, &sel)
        })
        .collect::<Result<_>>()?;

    let mut result = TreesResult {
        scores: Vec::new(),
        fits: Vec::new(),
        families: Vec::new(),
        pairs: Vec::new(),
        flags: Vec::new(),
        config: cfg.clone(),
    };
    // by_family[f][(split, plot)] = score
    let mut by_family: BTreeMap<Family, BTreeMap<(usize, usize), f64>> = BTreeMap::new();
    let mut wins: BTreeMap<Family, usize> = BTreeMap::new();
    let mut failures: BTreeMap<Family, usize> = BTreeMap::new();
    for (i, (train_idx, ranking)) in splits.iter().zip(&rankings).enumerate() {
        let train_plots = train_idx.iter().map(|&j| plots[j].0.as_str()).collect::<Vec<_>>().join(";");
        let test_idx: Vec<usize> = (0..m).filter(|j| !train_idx.contains(j)).collect();
        if let Some(best) = ranking.best() {
            *wins.entry(best.model.family).or_default() += 1;
        }
        for f in &ranking.failed {
            *failures.entry(f.family).or_default() += 1;
            result.flags.push(format!("split {i}: {} fit failed: {}", f.family, f.error));
        }
        let mut ranked: Vec<_> = ranking.ranked.iter().collect();
        ranked.sort_by_key(|r| r.model.family);
        for r in ranked {
            let family = r.model.family;
            if r.flagged_draws > 0 {
                result.flags.push(format!("split {i}: {family} had {} degenerate forecast draws", r.flagged_draws));
            }
            result.fits.push(TreesFitRow {
                split: i,
                family,
                theta: serde_json::to_string(&r.model.theta)?,
                intensity: r.model.intensity,
                objective: r.model.fit.as_ref().map(|f| f.objective),
                converged: r.model.converged(),
            });
            if !r.model.converged() {
                result.flags.push(format!("split {i}: {family} fit did not converge"));
            }
            for (&j, &score) in test_idx.iter().zip(&r.scores) {
                by_family.entry(family).or_default().insert((i, j), score);
                result.scores.push(TreesScoreRow {
                    split: i,
                    train_plots: train_plots.clone(),
                    plot: plots[j].0.clone(),
                    family,
                    score,
                });
            }
        }
    }

    for &family in &families {
        let values: Vec<f64> = by_family.get(&family).map(|s| s.values().copied().collect()).unwrap_or_default();
        let failed_splits = failures.get(&family).copied().unwrap_or(0);
        let (mean, boot_lo, boot_hi) = if values.is_empty() {
            (f64::NAN, f64::NAN, f64::NAN)
        } else {
            let mut boot = bootstrap_mean_distribution(&values, t.n_boot, labeled_seed(cfg.seed, &format!("boot/{family}")))?;
            boot.sort_by(f64::total_cmp);
            let q = |p: f64| boot[((p * boot.len() as f64) as usize).min(boot.len() - 1)];
            (values.iter().sum::<f64>() / values.len() as f64, q(0.025), q(0.975))
        };
        result.families.push(TreesFamilyRow {
            family,
            mean,
            boot_lo,
            boot_hi,
            n_scores: values.len(),
            wins: wins.get(&family).copied().unwrap_or(0),
            failed_splits,
            n: t.draws,
        });
    }

    for (a_pos, &a) in families.iter().enumerate() {
        for &b in &families[a_pos + 1..] {
            let (Some(sa), Some(sb)) = (by_family.get(&a), by_family.get(&b)) else {
                continue;
            };
            let keys: Vec<_> = sa.keys().filter(|k| sb.contains_key(k)).copied().collect();
            let va: Vec<f64> = keys.iter().map(|k| sa[k]).collect();
            let vb: Vec<f64> = keys.iter().map(|k| sb[k]).collect();
            let Ok(paired) = PairedScores::new(a.name(), b.name(), &va, &vb) else {
                continue;
            };
            let seed = labeled_seed(cfg.seed, &format!("perm/{a}/{b}"));
            let test = permutation_test(&paired, t.n_perm, seed)?;
            result.pairs.push(TreesPairRow {
                family_a: a,
                family_b: b,
                mean_diff: test.mean_diff,
                p_value: test.p_value,
                n_pairs: test.n,
                n_perm: t.n_perm,
                seed,
            });
        }
    }
    Ok(result)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::harness::config::Scale;

    #[test]
    fn combinations_are_lexicographic() {
        let c = combinations(4, 2);
        assert_eq!(c, vec![vec![0, 1], vec![0, 2], vec![0, 3], vec![1, 2], vec![1, 3], vec![2, 3]]);
        assert_eq!(combinations(8, 4).len(), 70);
        assert_eq!(combinations(3, 3), vec![vec![0, 1, 2]]);
    }

    fn small() -> RunConfig {
        let mut cfg = RunConfig::preset(Experiment::Trees, Scale::Desk);
        let t = cfg.trees.as_mut().unwrap();
        t.families = vec![Family::Thomas, Family::Poisson];
        t.draws = 10;
        t.n_perm = 99;
        t.n_boot = 100;
        cfg
    }

    #[test]
    fn two_plots_give_two_evaluations() {
        let mut cfg = small();
        cfg.trees.as_mut().unwrap().synthetic.as_mut().unwrap().plots = 2;
        let plots = generate_synthetic_plots(&cfg).unwrap();
        let r = run_tree_selection(&cfg, &plots).unwrap();
        assert_eq!(r.evaluations(), 2);
        assert_eq!(r.scores.len(), 2 * 2);
        assert_eq!(r.pairs.len(), 1);
        assert_eq!(r, run_tree_selection(&cfg, &plots).unwrap());
    }

    #[test]
    fn rejects_bad_inputs() {
        let cfg = small();
        let plots = generate_synthetic_plots(&cfg).unwrap();
        assert!(run_tree_selection(&cfg, &plots[..1]).is_err());
        let dup = vec![plots[0].clone(), plots[0].clone()];
        assert!(run_tree_selection(&cfg, &dup).is_err());
    }
}

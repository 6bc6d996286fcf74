use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::estimate::KPlugin;
use crate::fitting::{Family, FitConfig};
use crate::geometry::Window;
use crate::intensity::IntensityFn;
use crate::simulate::{ClusterKernel, ClusterSpec, McmcConfig, ModelSpec};

/// Replication sizes: desk scale for routine runs, paper scale for the
/// full-size studies.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Scale {
    #[default]
    Desk,
    Paper,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Experiment {
    Study1,
    Study2,
    Sweep,
    Trees,
    /// Model definitions only, for the single-step subcommands.
    Custom,
}

impl Experiment {
    pub fn parse(name: &str) -> Result<Experiment> {
        match name {
            "study1" => Ok(Experiment::Study1),
            "study2" => Ok(Experiment::Study2),
            "sweep" => Ok(Experiment::Sweep),
            "trees" => Ok(Experiment::Trees),
            "custom" => Ok(Experiment::Custom),
            other => Err(Error::Config(format!("unknown experiment '{other}'"))),
        }
    }
}

/// Five-model comparison with the intensity and K-function scores.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Study1Config {
    /// Model keys, used both as truths and as forecasts.
    pub models: Vec<String>,
    /// Observations simulated per true model.
    pub observations: usize,
    /// Forecast draws per model and ensemble.
    pub draws: usize,
    /// Draw a separate forecast ensemble for every observation index instead
    /// of one ensemble per model shared by all observations. Shared draws cost
    /// less but make the paired score differences depend on a single ensemble.
    #[serde(default)]
    pub fresh_draws: bool,
    /// Bandwidth of the intensity score.
    pub sigma: f64,
    /// Pixels per side of the intensity score grid.
    pub pixels: usize,
    /// Upper limit of the K-score; unset means a quarter of the shorter side.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub upper_r: Option<f64>,
    pub n_r: usize,
    #[serde(default)]
    pub k_plugin: KPlugin,
    pub n_perm: usize,
    /// Confidence level of the mean-score intervals.
    pub level: f64,
}

/// Poisson forecasts scored with the log score and intensity scores at
/// several bandwidths, with permutation p-values against the true model for
/// small observation sets.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Study2Config {
    /// Model keys; all must be Poisson-type.
    pub models: Vec<String>,
    /// Key of the model generating the observations.
    pub truth: String,
    /// Size of the observation pool the subsets are drawn from.
    pub pool: usize,
    pub draws: usize,
    pub sigmas: Vec<f64>,
    pub pixels: usize,
    /// Observation-set sizes `1..=max_obs` for the p-value curves.
    pub max_obs: usize,
    pub repetitions: usize,
    pub n_perm: usize,
    /// Observation-set sizes of the mean-score distributions.
    pub box_sizes: Vec<usize>,
}

/// Where the inhomogeneous part of the mixture intensity comes from.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SweepMode {
    /// Smooth a fixed anchor pattern supplied with the catalog; the
    /// generating model of a synthetic catalog is then one of the grid cells.
    #[default]
    Anchor,
    /// Smooth the training events at or above the magnitude threshold.
    Training,
}

/// Synthetic earthquake-style catalog: events from `λ_{alpha,eta}` built on
/// anchor points scattered along random line segments.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SyntheticCatalog {
    pub alpha: f64,
    pub eta: f64,
    /// Expected number of events.
    pub events: f64,
    pub anchors: usize,
    pub faults: usize,
}

/// Cross-validated grid search over the mixture parameters.
///
/// Events are taken in file order and cut into `blocks` consecutive blocks
/// treated as cyclic. Each fold trains on `train_blocks` consecutive blocks
/// and tests on the blocks left after skipping `gap_blocks` on either side.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepConfig {
    pub alphas: Vec<f64>,
    pub etas: Vec<f64>,
    /// Bandwidths of the intensity scores.
    pub sigmas: Vec<f64>,
    pub blocks: usize,
    pub train_blocks: usize,
    pub gap_blocks: usize,
    pub draws: usize,
    pub pixels: usize,
    #[serde(default)]
    pub mode: SweepMode,
    /// Smallest magnitude of the smoothed events in training mode.
    pub smoothing_magnitude: f64,
    /// Events below this magnitude are ignored when magnitudes are given.
    pub count_magnitude: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub synthetic: Option<SyntheticCatalog>,
}

/// Synthetic plots drawn from one configured model.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SyntheticPlots {
    pub model: String,
    pub plots: usize,
}

/// Leave-half-out model selection by the K-function score.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TreesConfig {
    pub families: Vec<Family>,
    /// Training plots per split; unset means half of the plots.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub train_size: Option<usize>,
    #[serde(default)]
    pub fit: FitConfig,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub upper_r: Option<f64>,
    pub n_r: usize,
    pub draws: usize,
    pub plugin: KPlugin,
    pub n_boot: usize,
    pub n_perm: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub synthetic: Option<SyntheticPlots>,
}

/// Complete description of a run. Reruns with the same configuration give
/// identical outputs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub experiment: Experiment,
    /// Root seed of every random stream.
    pub seed: u64,
    /// Observation window; never inferred from data.
    pub window: Window,
    #[serde(default)]
    pub models: BTreeMap<String, ModelSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub study1: Option<Study1Config>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub study2: Option<Study2Config>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sweep: Option<SweepConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub trees: Option<TreesConfig>,
}

const DEFAULT_SEED: u64 = 20_240_917;

fn keys(names: &[&str]) -> Vec<String> {
    names.iter().map(|s| s.to_string()).collect()
}

fn gaussian(scale: f64, mean: [f64; 2], sd: [f64; 2], rho: f64) -> ModelSpec {
    ModelSpec::InhomPoisson {
        intensity: IntensityFn::Gaussian { scale, mean, sd, rho },
    }
}

impl RunConfig {
    pub fn from_toml_str(text: &str) -> Result<RunConfig> {
        let cfg: RunConfig = toml::from_str(text)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<RunConfig> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
        Self::from_toml_str(&text)
    }

    pub fn to_toml_string(&self) -> Result<String> {
        Ok(toml::to_string(self)?)
    }

    pub fn model(&self, key: &str) -> Result<&ModelSpec> {
        self.models
            .get(key)
            .ok_or_else(|| Error::Config(format!("model '{key}' is not defined")))
    }

    fn check_keys(&self, keys: &[String], what: &str) -> Result<()> {
        if keys.is_empty() {
            return Err(Error::Config(format!("{what} lists no models")));
        }
        for k in keys {
            self.model(k)?;
        }
        let mut sorted = keys.to_vec();
        sorted.sort();
        if sorted.windows(2).any(|w| w[0] == w[1]) {
            return Err(Error::Config(format!("{what} lists a model twice")));
        }
        Ok(())
    }

    /// Checks model definitions, key references and the settings of the
    /// configured experiment.
    pub fn validate(&self) -> Result<()> {
        if self.seed > i64::MAX as u64 {
            return Err(Error::Config("seed must fit in a signed 64-bit integer".into()));
        }
        for (k, m) in &self.models {
            m.validate().map_err(|e| Error::Config(format!("model '{k}': {e}")))?;
        }
        let missing = |name: &str| Error::Config(format!("experiment {name} needs a [{name}] section"));
        match self.experiment {
            Experiment::Study1 => {
                let s = self.study1.as_ref().ok_or_else(|| missing("study1"))?;
                self.check_keys(&s.models, "study1")?;
                if s.observations < 2 || s.draws < 2 || s.pixels < 8 || s.n_r < 2 || s.n_perm < 99 {
                    return Err(Error::Config(
                        "study1 needs observations >= 2, draws >= 2, pixels >= 8, n_r >= 2, n_perm >= 99".into(),
                    ));
                }
            }
            Experiment::Study2 => {
                let s = self.study2.as_ref().ok_or_else(|| missing("study2"))?;
                self.check_keys(&s.models, "study2")?;
                if !s.models.contains(&s.truth) {
                    return Err(Error::Config(format!("study2 truth '{}' is not among its models", s.truth)));
                }
                for k in &s.models {
                    if self.model(k)?.poisson_intensity().is_none() {
                        return Err(Error::Config(format!("study2 model '{k}' is not a Poisson model")));
                    }
                }
                if s.pool < s.max_obs.max(1) || s.box_sizes.iter().any(|&b| b == 0 || b > s.pool) {
                    return Err(Error::Config("study2 observation-set sizes must lie in 1..=pool".into()));
                }
                if s.draws < 2 || s.pixels < 8 || s.n_perm < 99 || s.repetitions == 0 {
                    return Err(Error::Config("study2 needs draws >= 2, pixels >= 8, n_perm >= 99".into()));
                }
            }
            Experiment::Sweep => {
                let s = self.sweep.as_ref().ok_or_else(|| missing("sweep"))?;
                if s.alphas.is_empty() || s.etas.is_empty() {
                    return Err(Error::Config("sweep needs alphas and etas".into()));
                }
                if s.train_blocks == 0 || s.train_blocks + 2 * s.gap_blocks >= s.blocks {
                    return Err(Error::Config(
                        "sweep needs 0 < train_blocks and train_blocks + 2 gap_blocks < blocks".into(),
                    ));
                }
                if !s.sigmas.is_empty() && (s.draws < 2 || s.pixels < 8) {
                    return Err(Error::Config("sweep intensity scores need draws >= 2, pixels >= 8".into()));
                }
            }
            Experiment::Trees => {
                let s = self.trees.as_ref().ok_or_else(|| missing("trees"))?;
                if s.families.is_empty() || s.draws < 2 || s.n_perm < 99 || s.n_boot < 100 {
                    return Err(Error::Config(
                        "trees needs families, draws >= 2, n_perm >= 99, n_boot >= 100".into(),
                    ));
                }
                if let Some(syn) = &s.synthetic {
                    self.model(&syn.model)?;
                }
            }
            Experiment::Custom => {}
        }
        Ok(())
    }

    /// Built-in configuration of an experiment.
    pub fn preset(experiment: Experiment, scale: Scale) -> RunConfig {
        let paper = scale == Scale::Paper;
        let sq = |side: f64| Window::square(side).expect("positive side");
        let mut cfg = RunConfig {
            experiment,
            seed: DEFAULT_SEED,
            window: sq(10.0),
            models: BTreeMap::new(),
            study1: None,
            study2: None,
            sweep: None,
            trees: None,
        };
        match experiment {
            Experiment::Study1 | Experiment::Custom => {
                let w = cfg.window;
                let ihp = IntensityFn::radial_with_mean_count(&w, [0.0, 0.0], 50.0).expect("valid window");
                let parent = IntensityFn::radial_with_mean_count(&w, [0.0, 0.0], 25.0).expect("valid window");
                cfg.models = BTreeMap::from([
                    ("hP".to_string(), ModelSpec::HomPoisson { lambda: 0.5 }),
                    ("hP+".to_string(), ModelSpec::HomPoisson { lambda: 0.6 }),
                    ("ihP".to_string(), ModelSpec::InhomPoisson { intensity: ihp }),
                    (
                        "Str".to_string(),
                        ModelSpec::Strauss {
                            beta: 1.15,
                            gamma: 0.5,
                            range: 1.0,
                            mcmc: McmcConfig::default(),
                        },
                    ),
                    (
                        "ihT".to_string(),
                        ModelSpec::Cluster(ClusterSpec {
                            parent,
                            offspring_mean: 2.0,
                            kernel: ClusterKernel::Thomas { sigma: 0.5 },
                            buffer: None,
                        }),
                    ),
                ]);
                if experiment == Experiment::Study1 {
                    cfg.study1 = Some(Study1Config {
                        models: keys(&["hP", "hP+", "ihP", "Str", "ihT"]),
                        observations: if paper { 100 } else { 30 },
                        draws: if paper { 100 } else { 50 },
                        fresh_draws: false,
                        sigma: 1.25,
                        pixels: 128,
                        upper_r: None,
                        n_r: 64,
                        k_plugin: KPlugin::default(),
                        n_perm: 999,
                        level: 0.95,
                    });
                }
            }
            Experiment::Study2 => {
                cfg.window = Window::new(-5.0, 5.0, -5.0, 5.0).expect("valid window");
                cfg.models = BTreeMap::from([
                    ("F1".to_string(), gaussian(100.0, [0.0, 0.0], [1.0, 1.0], 0.0)),
                    ("F2".to_string(), gaussian(100.0, [0.1, 0.0], [1.0, 1.0], 0.0)),
                    ("F3".to_string(), gaussian(100.0, [0.0, 0.0], [0.9, 0.9], 0.0)),
                    ("F4".to_string(), gaussian(100.0, [0.0, 0.0], [1.1, 1.1], 0.0)),
                    ("F5".to_string(), gaussian(100.0, [0.0, 0.0], [1.0, 1.0], 0.1)),
                    ("F6".to_string(), gaussian(105.0, [0.0, 0.0], [1.0, 1.0], 0.0)),
                ]);
                cfg.study2 = Some(Study2Config {
                    models: keys(&["F1", "F2", "F3", "F4", "F5", "F6"]),
                    truth: "F1".into(),
                    pool: if paper { 300 } else { 100 },
                    draws: if paper { 300 } else { 100 },
                    sigmas: vec![0.1, 0.2, 0.4, 0.8, 1.6],
                    pixels: 128,
                    max_obs: 15,
                    repetitions: 100,
                    n_perm: 100,
                    box_sizes: vec![10, 100],
                });
            }
            Experiment::Sweep => {
                cfg.window = sq(100.0);
                cfg.sweep = Some(SweepConfig {
                    alphas: (0..=8).map(|k| 0.6 + 0.05 * k as f64).map(|a| (a * 100.0).round() / 100.0).collect(),
                    etas: vec![2.0, 4.0, 8.0, 16.0, 32.0],
                    sigmas: vec![4.0, 8.0],
                    blocks: if paper { 52 } else { 10 },
                    train_blocks: if paper { 21 } else { 4 },
                    gap_blocks: 1,
                    draws: if paper { 100 } else { 10 },
                    pixels: if paper { 128 } else { 48 },
                    mode: SweepMode::Anchor,
                    smoothing_magnitude: 3.5,
                    count_magnitude: 3.0,
                    synthetic: Some(SyntheticCatalog {
                        alpha: 0.75,
                        eta: 4.0,
                        events: if paper { 10_000.0 } else { 2_500.0 },
                        anchors: 60,
                        faults: 4,
                    }),
                });
            }
            Experiment::Trees => {
                cfg.window = sq(25.0);
                cfg.models = BTreeMap::from([(
                    "cauchy".to_string(),
                    ModelSpec::Cluster(ClusterSpec {
                        parent: IntensityFn::Constant { value: 0.02 },
                        offspring_mean: 8.0,
                        kernel: ClusterKernel::Cauchy { sigma: 0.5 },
                        buffer: None,
                    }),
                )]);
                cfg.trees = Some(TreesConfig {
                    families: vec![Family::Matern, Family::Thomas, Family::Cauchy, Family::VarGamma, Family::Lgcp],
                    train_size: None,
                    fit: FitConfig::default(),
                    upper_r: None,
                    n_r: 32,
                    draws: if paper { 100 } else { 30 },
                    plugin: KPlugin::CountBased,
                    n_boot: 1000,
                    n_perm: 999,
                    synthetic: Some(SyntheticPlots {
                        model: "cauchy".into(),
                        plots: 8,
                    }),
                });
            }
        }
        cfg
    }
}

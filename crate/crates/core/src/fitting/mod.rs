//! Minimum-contrast fitting of cluster and log-Gaussian Cox models to the
//! mean empirical K-function of a set of training patterns, and model
//! selection by the K-function score on held-out patterns.
//!
//! K does not identify the intensity, so after the contrast fit the first
//! moment is matched to the pooled training intensity `λ̂`: cluster models
//! get offspring mean `λ̂/κ̂` and the LGCP gets `μ = ln λ̂ - τ²/2`.

mod contrast;
mod family;
mod select;

use serde::{Deserialize, Serialize};

pub use contrast::{fit_min_contrast, ContrastProblem, FitResult};
pub use family::{model_k, model_k_with, Family, KMode, Theta};
pub use select::{select_by_k_score, FailedFit, RankedModel, Ranking, SelectionConfig};

use crate::error::{invalid, Error, Result};
use crate::estimate::{default_upper_r, k_hat_plugin, mean_curve, Curve, KPlugin};
use crate::geometry::{PointPattern, RGrid, Window};
use crate::intensity::IntensityFn;
use crate::simulate::{ClusterSpec, ModelSpec};

/// Settings of [`fit_family`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct FitConfig {
    /// Upper limit of the contrast integral; unset means a quarter of the
    /// shorter window side.
    pub r_max: Option<f64>,
    /// Number of grid nodes on `(0, r_max]`.
    pub n_r: usize,
    /// Intensity plug-in for each training K̂. Unset means the intensity
    /// pooled over all training patterns.
    pub plugin: Option<KPlugin>,
    /// Simplex iterations per restart.
    pub budget: u64,
    /// Exponent of the contrast.
    pub exponent: f64,
    pub mode: KMode,
    /// Simulation grid of fitted LGCP models.
    pub lgcp_grid: usize,
}

impl Default for FitConfig {
    fn default() -> Self {
        FitConfig {
            r_max: None,
            n_r: 64,
            plugin: None,
            budget: 1000,
            exponent: 0.25,
            mode: KMode::ClosedForm,
            lgcp_grid: 64,
        }
    }
}

/// A fitted family with a simulation-ready model.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FittedModel {
    pub family: Family,
    pub theta: Theta,
    /// Pooled training intensity the first moment was matched to.
    pub intensity: f64,
    pub spec: ModelSpec,
    /// Contrast fit; absent for the Poisson family, which has no free
    /// second-order parameters.
    pub fit: Option<FitResult>,
}

impl FittedModel {
    pub fn converged(&self) -> bool {
        self.fit.as_ref().is_none_or(|f| f.converged)
    }
}

fn common_window(patterns: &[PointPattern]) -> Result<Window> {
    let first = patterns.first().ok_or_else(|| Error::Empty("training patterns".into()))?;
    if patterns.iter().any(|p| p.window() != first.window()) {
        return Err(Error::GridMismatch("training patterns must share one window".into()));
    }
    Ok(*first.window())
}

/// Total point count over total observed area.
pub fn pooled_intensity(patterns: &[PointPattern]) -> Result<f64> {
    let w = common_window(patterns)?;
    let n: usize = patterns.iter().map(|p| p.len()).sum();
    Ok(n as f64 / (w.area() * patterns.len() as f64))
}

/// Pointwise mean of the K̂ curves of `patterns` on `grid`.
pub fn empirical_k(patterns: &[PointPattern], grid: &RGrid, plugin: Option<KPlugin>) -> Result<Curve> {
    let plugin = match plugin {
        Some(p) => p,
        None => {
            let lambda = pooled_intensity(patterns)?;
            if !(lambda > 0.0) {
                return Err(Error::Empty("training patterns contain no points".into()));
            }
            KPlugin::Constant { lambda }
        }
    };
    let curves = patterns
        .iter()
        .map(|p| Ok(k_hat_plugin(p, grid, &plugin)?.0))
        .collect::<Result<Vec<_>>>()?;
    mean_curve(&curves)
}

/// Deterministic starting values scaled to the data.
fn initial_theta(family: Family, lambda: f64, r_max: f64) -> Theta {
    let (kappa, sigma) = (lambda / 3.0, r_max / 5.0);
    match family {
        Family::Poisson => Theta::Poisson,
        Family::Thomas => Theta::Thomas { kappa, sigma },
        Family::Matern => Theta::Matern { kappa, sigma },
        Family::Cauchy => Theta::Cauchy { kappa, sigma },
        Family::VarGamma => Theta::VarGamma { kappa, sigma, nu: 0.5 },
        Family::Lgcp => Theta::Lgcp { tau2: 1.0, scale: sigma },
    }
}

/// Search box in unconstrained coordinates. Cluster models keep at least
/// 0.01 expected offspring per parent and scales stay below the window
/// diameter, so fitted models remain cheap to simulate.
fn search_bounds(family: Family, lambda: f64, r_max: f64, window: &Window) -> Option<(Vec<f64>, Vec<f64>)> {
    let kappa = ((lambda * 1e-4).ln(), (lambda * 100.0).ln());
    let scale = ((r_max * 1e-3).ln(), window.diameter().ln());
    match family {
        Family::Poisson => None,
        Family::Thomas | Family::Matern | Family::Cauchy => Some((vec![kappa.0, scale.0], vec![kappa.1, scale.1])),
        Family::VarGamma => Some((
            vec![kappa.0, scale.0, 1e-3f64.ln()],
            vec![kappa.1, scale.1, 20.5f64.ln()],
        )),
        Family::Lgcp => Some((vec![1e-6f64.ln(), scale.0], vec![20f64.ln(), scale.1])),
    }
}

/// Simulation model with the fitted second-order structure and intensity `lambda`.
pub fn model_from_theta(theta: &Theta, lambda: f64, lgcp_grid: usize) -> Result<ModelSpec> {
    theta.validate()?;
    if !(lambda > 0.0 && lambda.is_finite()) {
        return Err(invalid(format!("intensity {lambda} must be positive")));
    }
    let spec = match *theta {
        Theta::Poisson => ModelSpec::HomPoisson { lambda },
        Theta::Lgcp { tau2, scale } => ModelSpec::Lgcp {
            mu: lambda.ln() - tau2 / 2.0,
            tau2,
            scale,
            grid_n: lgcp_grid,
        },
        _ => {
            let (kappa, kernel) = theta.cluster().expect("cluster family");
            ModelSpec::Cluster(ClusterSpec {
                parent: IntensityFn::Constant { value: kappa },
                offspring_mean: lambda / kappa,
                kernel,
                buffer: None,
            })
        }
    };
    spec.validate()?;
    Ok(spec)
}

/// Fits `family` to the mean K̂ of `train` by minimum contrast and matches
/// the intensity to the pooled training intensity.
pub fn fit_family(family: Family, train: &[PointPattern], cfg: &FitConfig) -> Result<FittedModel> {
    let window = common_window(train)?;
    let lambda = pooled_intensity(train)?;
    if !(lambda > 0.0) {
        return Err(Error::Empty("training patterns contain no points".into()));
    }
    let r_max = cfg.r_max.unwrap_or_else(|| default_upper_r(&window));
    let theta0 = initial_theta(family, lambda, r_max);
    if family == Family::Poisson {
        return Ok(FittedModel {
            family,
            theta: theta0,
            intensity: lambda,
            spec: model_from_theta(&theta0, lambda, cfg.lgcp_grid)?,
            fit: None,
        });
    }
    let grid = RGrid::uniform(r_max, cfg.n_r)?;
    let k_emp = empirical_k(train, &grid, cfg.plugin)?;
    let mut problem = ContrastProblem::with_exponent(family, &k_emp, r_max, cfg.exponent)?.with_mode(cfg.mode);
    if let Some((lo, hi)) = search_bounds(family, lambda, r_max, &window) {
        problem = problem.with_bounds(lo, hi)?;
    }
    let fit = fit_min_contrast(&problem, &theta0, cfg.budget)?;
    Ok(FittedModel {
        family,
        theta: fit.theta,
        intensity: lambda,
        spec: model_from_theta(&fit.theta, lambda, cfg.lgcp_grid)?,
        fit: Some(fit),
    })
}

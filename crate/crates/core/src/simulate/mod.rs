//! Seeded generators for every model family: Poisson, Strauss, Neyman–Scott
//! cluster processes, log-Gaussian Cox processes and the kernel/flat mixture.
//!
//! [`ModelSpec::prepare`] performs the per-model precomputation (intensity
//! normalisation, covariance factorisation) once; [`PreparedModel::draw`] is
//! then cheap and pure in its seed.

mod cluster;
mod lgcp;
mod mixture;
mod strauss;

use serde::{Deserialize, Serialize};

pub use cluster::{ClusterKernel, ClusterSpec};
pub use lgcp::LgcpField;
pub use mixture::build_mixture_intensity;
pub use strauss::{sample_strauss, McmcConfig};

use crate::error::{invalid, Error, Result};
use crate::geometry::{PointPattern, Window};
use crate::intensity::{uniform_points, IntensityFn};
use crate::rng::{child_seed, rng};

fn default_grid() -> usize {
    64
}

/// A generative point-process model.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ModelSpec {
    HomPoisson {
        lambda: f64,
    },
    InhomPoisson {
        intensity: IntensityFn,
    },
    Strauss {
        beta: f64,
        gamma: f64,
        range: f64,
        #[serde(default)]
        mcmc: McmcConfig,
    },
    Cluster(ClusterSpec),
    Lgcp {
        mu: f64,
        tau2: f64,
        scale: f64,
        #[serde(default = "default_grid")]
        grid_n: usize,
    },
    Mixture {
        alpha: f64,
        smoothed: IntensityFn,
        nu_flat: f64,
    },
}

impl ModelSpec {
    pub fn validate(&self) -> Result<()> {
        match self {
            ModelSpec::HomPoisson { lambda } => {
                if *lambda >= 0.0 && lambda.is_finite() {
                    Ok(())
                } else {
                    Err(invalid(format!("Poisson intensity {lambda} must be finite and >= 0")))
                }
            }
            ModelSpec::InhomPoisson { intensity } => intensity.validate(),
            ModelSpec::Strauss {
                beta,
                gamma,
                range,
                mcmc,
            } => {
                if !(*beta > 0.0) || !(*range > 0.0) {
                    return Err(invalid("Strauss needs beta > 0 and range > 0"));
                }
                if !(*gamma > 0.0 && *gamma <= 1.0) {
                    return Err(invalid(format!("Strauss gamma {gamma} must lie in (0, 1]")));
                }
                mcmc.validate()
            }
            ModelSpec::Cluster(spec) => spec.validate(),
            ModelSpec::Lgcp {
                mu,
                tau2,
                scale,
                grid_n,
            } => {
                if !mu.is_finite() || !(*tau2 >= 0.0) || !(*scale > 0.0) || *grid_n < 16 {
                    Err(invalid("LGCP needs finite mu, tau2 >= 0, scale > 0, grid_n >= 16"))
                } else {
                    Ok(())
                }
            }
            ModelSpec::Mixture {
                alpha,
                smoothed,
                nu_flat,
            } => {
                if !(0.0..=1.0).contains(alpha) || !(*nu_flat >= 0.0) {
                    return Err(invalid("mixture needs alpha in [0, 1] and nu_flat >= 0"));
                }
                smoothed.validate()
            }
        }
    }

    /// Intensity of the model when it is a Poisson process (log and
    /// intensity-likelihood scores need it).
    pub fn poisson_intensity(&self) -> Option<IntensityFn> {
        match self {
            ModelSpec::HomPoisson { lambda } => Some(IntensityFn::Constant { value: *lambda }),
            ModelSpec::InhomPoisson { intensity } => Some(intensity.clone()),
            ModelSpec::Mixture {
                alpha,
                smoothed,
                nu_flat,
            } => Some(IntensityFn::Mixture {
                alpha: *alpha,
                smoothed: Box::new(smoothed.clone()),
                nu_flat: *nu_flat,
            }),
            _ => None,
        }
    }

    pub fn prepare(&self, window: &Window) -> Result<PreparedModel> {
        self.validate()?;
        let kind = match self {
            ModelSpec::HomPoisson { lambda } => Prepared::Poisson(IntensityFn::Constant { value: *lambda }),
            ModelSpec::InhomPoisson { .. } | ModelSpec::Mixture { .. } => {
                Prepared::Poisson(self.poisson_intensity().expect("poisson-type model"))
            }
            ModelSpec::Strauss { .. } => Prepared::Strauss,
            ModelSpec::Cluster(spec) => Prepared::Cluster(spec.prepare(window)?),
            ModelSpec::Lgcp {
                mu,
                tau2,
                scale,
                grid_n,
            } => Prepared::Lgcp(LgcpField::new(*mu, *tau2, *scale, *grid_n, *window)?),
        };
        Ok(PreparedModel {
            spec: self.clone(),
            window: *window,
            kind,
        })
    }
}

#[derive(Debug)]
enum Prepared {
    Poisson(IntensityFn),
    Strauss,
    Cluster(cluster::PreparedCluster),
    Lgcp(LgcpField),
}

/// A model bound to a window with its precomputation done.
#[derive(Debug)]
pub struct PreparedModel {
    spec: ModelSpec,
    window: Window,
    kind: Prepared,
}

impl PreparedModel {
    pub fn spec(&self) -> &ModelSpec {
        &self.spec
    }

    pub fn window(&self) -> &Window {
        &self.window
    }

    pub fn draw(&self, seed: u64) -> Result<PointPattern> {
        let w = &self.window;
        let points = match &self.kind {
            Prepared::Poisson(f) => f.sample_poisson(w, &mut rng(seed))?,
            Prepared::Strauss => {
                let ModelSpec::Strauss {
                    beta,
                    gamma,
                    range,
                    mcmc,
                } = &self.spec
                else {
                    unreachable!("prepared Strauss from Strauss spec")
                };
                return sample_strauss(*beta, *gamma, *range, w, mcmc, seed);
            }
            Prepared::Cluster(c) => c.draw(&mut rng(seed))?,
            Prepared::Lgcp(field) => field.draw(&mut rng(seed)),
        };
        Ok(PointPattern::from_trusted(points, *w))
    }

    /// `n` draws with seeds `child_seed(seed, i)`.
    pub fn draw_many(&self, n: usize, seed: u64) -> Result<Vec<PointPattern>> {
        use rayon::prelude::*;
        (0..n)
            .into_par_iter()
            .map(|i| {
                self.draw(child_seed(seed, i as u64)).map_err(|e| Error::Draw {
                    index: i,
                    source: Box::new(e),
                })
            })
            .collect()
    }
}

/// One draw of `model` on `window`.
pub fn sample(model: &ModelSpec, window: &Window, seed: u64) -> Result<PointPattern> {
    model.prepare(window)?.draw(seed)
}

pub fn sample_hom_poisson(lambda: f64, window: &Window, seed: u64) -> Result<PointPattern> {
    if !(lambda >= 0.0 && lambda.is_finite()) {
        return Err(invalid(format!("Poisson intensity {lambda} must be finite and >= 0")));
    }
    let pts = uniform_points(lambda, window, &mut rng(seed));
    Ok(PointPattern::from_trusted(pts, *window))
}

pub fn sample_inhom_poisson(intensity: &IntensityFn, window: &Window, seed: u64) -> Result<PointPattern> {
    intensity.validate()?;
    let pts = intensity.sample_poisson(window, &mut rng(seed))?;
    Ok(PointPattern::from_trusted(pts, *window))
}

pub fn sample_cluster(spec: &ClusterSpec, window: &Window, seed: u64) -> Result<PointPattern> {
    spec.validate()?;
    let pts = spec.prepare(window)?.draw(&mut rng(seed))?;
    Ok(PointPattern::from_trusted(pts, *window))
}

pub fn sample_lgcp(mu: f64, tau2: f64, scale: f64, grid_n: usize, window: &Window, seed: u64) -> Result<PointPattern> {
    let field = LgcpField::new(mu, tau2, scale, grid_n, *window)?;
    Ok(PointPattern::from_trusted(field.draw(&mut rng(seed)), *window))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sq10() -> Window {
        Window::square(10.0).unwrap()
    }

    fn mean_and_var(counts: &[f64]) -> (f64, f64) {
        let n = counts.len() as f64;
        let m = counts.iter().sum::<f64>() / n;
        let v = counts.iter().map(|c| (c - m).powi(2)).sum::<f64>() / (n - 1.0);
        (m, v)
    }

    #[test]
    fn identical_seeds_identical_patterns() {
        let m = ModelSpec::HomPoisson { lambda: 0.5 };
        let a = sample(&m, &sq10(), 42).unwrap();
        let b = sample(&m, &sq10(), 42).unwrap();
        assert_eq!(a, b);
        assert_ne!(a, sample(&m, &sq10(), 43).unwrap());
    }

    #[test]
    fn zero_intensity_is_empty() {
        assert!(sample(&ModelSpec::HomPoisson { lambda: 0.0 }, &sq10(), 1).unwrap().is_empty());
        assert!(sample_hom_poisson(-1.0, &sq10(), 1).is_err());
    }

    #[test]
    fn hom_poisson_moments() {
        for (lambda, w, expect) in [
            (0.5, sq10(), 50.0),
            (0.6, sq10(), 60.0),
            (10.0, Window::square(1.0).unwrap(), 10.0),
        ] {
            let counts: Vec<f64> = (0..2000)
                .map(|s| sample_hom_poisson(lambda, &w, s).unwrap().len() as f64)
                .collect();
            let (m, v) = mean_and_var(&counts);
            let se = (expect / 2000f64).sqrt();
            assert!((m - expect).abs() < 4.0 * se, "mean {m} vs {expect}");
            assert!((v / expect - 1.0).abs() < 0.12, "variance {v} vs {expect}");
        }
    }

    #[test]
    fn constant_thinning_matches_hom_poisson() {
        // Two-sample comparison of count means at matched intensity.
        let w = sq10();
        let f = IntensityFn::Radial { scale: 0.0, center: [0.0, 0.0] };
        assert!(sample_inhom_poisson(&f, &w, 3).unwrap().is_empty());
        let c = IntensityFn::Constant { value: 0.5 };
        let a: Vec<f64> = (0..1000).map(|s| sample_inhom_poisson(&c, &w, s).unwrap().len() as f64).collect();
        let b: Vec<f64> = (0..1000).map(|s| sample_hom_poisson(0.5, &w, 10_000 + s).unwrap().len() as f64).collect();
        let (ma, va) = mean_and_var(&a);
        let (mb, vb) = mean_and_var(&b);
        let se = ((va + vb) / 1000.0).sqrt();
        assert!((ma - mb).abs() < 4.0 * se);
    }

    #[test]
    fn inhomogeneous_study_models_have_expected_counts() {
        let w = sq10();
        let ihp = IntensityFn::radial_with_mean_count(&w, [0.0, 0.0], 50.0).unwrap();
        let counts: Vec<f64> = (0..1000).map(|s| sample_inhom_poisson(&ihp, &w, s).unwrap().len() as f64).collect();
        let (m, _) = mean_and_var(&counts);
        assert!((m - 50.0).abs() < 4.0 * (50.0f64 / 1000.0).sqrt());

        let w2 = Window::new(-5.0, 5.0, -5.0, 5.0).unwrap();
        let f1 = IntensityFn::Gaussian { scale: 100.0, mean: [0.0, 0.0], sd: [1.0, 1.0], rho: 0.0 };
        let counts: Vec<f64> = (0..1000).map(|s| sample_inhom_poisson(&f1, &w2, s).unwrap().len() as f64).collect();
        let (m, _) = mean_and_var(&counts);
        assert!((m - 100.0).abs() < 4.0 * (100.0f64 / 1000.0).sqrt());
    }

    #[test]
    fn model_spec_round_trips_through_toml() {
        let text = r#"
            kind = "cluster"
            offspring_mean = 2.0
            parent = { kind = "constant", value = 0.25 }
            kernel = { type = "thomas", sigma = 0.5 }
        "#;
        let m: ModelSpec = toml::from_str(text).unwrap();
        m.validate().unwrap();
        let back: ModelSpec = toml::from_str(&toml::to_string(&m).unwrap()).unwrap();
        assert_eq!(m, back);
        let strauss: ModelSpec = toml::from_str("kind = \"strauss\"\nbeta = 1.15\ngamma = 0.5\nrange = 1.0").unwrap();
        strauss.validate().unwrap();
        let bad: ModelSpec = toml::from_str("kind = \"strauss\"\nbeta = 1.15\ngamma = 1.5\nrange = 1.0").unwrap();
        assert!(bad.validate().is_err());
    }

    #[test]
    fn draw_many_is_order_independent() {
        let m = ModelSpec::HomPoisson { lambda: 0.5 }.prepare(&sq10()).unwrap();
        let all = m.draw_many(8, 9).unwrap();
        assert_eq!(all[5], m.draw(child_seed(9, 5)).unwrap());
    }
}

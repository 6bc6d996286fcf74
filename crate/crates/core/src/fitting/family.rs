use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};
use crate::estimate::Curve;
use crate::geometry::RGrid;
use crate::numeric::{cumulative_integral, gamma_expectation};
use crate::simulate::ClusterKernel;

/// Model families that can be fitted to an empirical K-function.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Family {
    Poisson,
    Thomas,
    Matern,
    Cauchy,
    VarGamma,
    Lgcp,
}

impl Family {
    pub const ALL: [Family; 6] = [
        Family::Poisson,
        Family::Thomas,
        Family::Matern,
        Family::Cauchy,
        Family::VarGamma,
        Family::Lgcp,
    ];

    pub fn name(&self) -> &'static str {
        match self {
            Family::Poisson => "poisson",
            Family::Thomas => "thomas",
            Family::Matern => "matern",
            Family::Cauchy => "cauchy",
            Family::VarGamma => "var_gamma",
            Family::Lgcp => "lgcp",
        }
    }

    pub fn parse(name: &str) -> Result<Family> {
        Family::ALL
            .into_iter()
            .find(|f| f.name() == name)
            .ok_or_else(|| invalid(format!("unknown model family '{name}'")))
    }
}

impl std::fmt::Display for Family {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

/// Second-order parameters of a family. The offspring mean of cluster
/// models and the LGCP mean do not enter K and are set separately.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case")]
pub enum Theta {
    Poisson,
    Thomas { kappa: f64, sigma: f64 },
    Matern { kappa: f64, sigma: f64 },
    Cauchy { kappa: f64, sigma: f64 },
    VarGamma { kappa: f64, sigma: f64, nu: f64 },
    Lgcp { tau2: f64, scale: f64 },
}

impl Theta {
    pub fn family(&self) -> Family {
        match self {
            Theta::Poisson => Family::Poisson,
            Theta::Thomas { .. } => Family::Thomas,
            Theta::Matern { .. } => Family::Matern,
            Theta::Cauchy { .. } => Family::Cauchy,
            Theta::VarGamma { .. } => Family::VarGamma,
            Theta::Lgcp { .. } => Family::Lgcp,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let ok = |v: f64| v > 0.0 && v.is_finite();
        let valid = match *self {
            Theta::Poisson => true,
            Theta::Thomas { kappa, sigma } | Theta::Matern { kappa, sigma } | Theta::Cauchy { kappa, sigma } => {
                ok(kappa) && ok(sigma)
            }
            Theta::VarGamma { kappa, sigma, nu } => ok(kappa) && ok(sigma) && nu > -0.5 && nu.is_finite(),
            Theta::Lgcp { tau2, scale } => ok(tau2) && ok(scale),
        };
        if valid {
            Ok(())
        } else {
            Err(invalid(format!("parameters {self:?} outside the family domain")))
        }
    }

    /// Parent intensity and displacement kernel of a cluster family.
    pub fn cluster(&self) -> Option<(f64, ClusterKernel)> {
        match *self {
            Theta::Thomas { kappa, sigma } => Some((kappa, ClusterKernel::Thomas { sigma })),
            Theta::Matern { kappa, sigma } => Some((kappa, ClusterKernel::Matern { sigma })),
            Theta::Cauchy { kappa, sigma } => Some((kappa, ClusterKernel::Cauchy { sigma })),
            Theta::VarGamma { kappa, sigma, nu } => Some((kappa, ClusterKernel::VarGamma { sigma, nu })),
            _ => None,
        }
    }

    /// Unconstrained coordinates: logs of positive parameters and
    /// `ln(ν + 1/2)` for the variance-gamma shape.
    pub fn to_unconstrained(&self) -> Vec<f64> {
        match *self {
            Theta::Poisson => Vec::new(),
            Theta::Thomas { kappa, sigma } | Theta::Matern { kappa, sigma } | Theta::Cauchy { kappa, sigma } => {
                vec![kappa.ln(), sigma.ln()]
            }
            Theta::VarGamma { kappa, sigma, nu } => vec![kappa.ln(), sigma.ln(), (nu + 0.5).ln()],
            Theta::Lgcp { tau2, scale } => vec![tau2.ln(), scale.ln()],
        }
    }

    pub fn from_unconstrained(family: Family, x: &[f64]) -> Theta {
        match family {
            Family::Poisson => Theta::Poisson,
            Family::Thomas => Theta::Thomas {
                kappa: x[0].exp(),
                sigma: x[1].exp(),
            },
            Family::Matern => Theta::Matern {
                kappa: x[0].exp(),
                sigma: x[1].exp(),
            },
            Family::Cauchy => Theta::Cauchy {
                kappa: x[0].exp(),
                sigma: x[1].exp(),
            },
            Family::VarGamma => Theta::VarGamma {
                kappa: x[0].exp(),
                sigma: x[1].exp(),
                nu: x[2].exp() - 0.5,
            },
            Family::Lgcp => Theta::Lgcp {
                tau2: x[0].exp(),
                scale: x[1].exp(),
            },
        }
    }

    /// Pair-correlation function `g(r)`.
    pub fn pair_correlation(&self, r: f64) -> f64 {
        match *self {
            Theta::Poisson => 1.0,
            Theta::Lgcp { tau2, scale } => (tau2 * (-r / scale).exp()).exp(),
            Theta::Thomas { kappa, sigma } => {
                1.0 + (-r * r / (4.0 * sigma * sigma)).exp() / (4.0 * PI * sigma * sigma * kappa)
            }
            Theta::Matern { kappa, sigma } => {
                let t = r / (2.0 * sigma);
                if t >= 1.0 {
                    return 1.0;
                }
                // Disc overlap area over the squared disc area, as a density in the plane.
                let overlap = 2.0 * sigma * sigma * (t.acos() - t * (1.0 - t * t).sqrt());
                1.0 + overlap / (PI * sigma * sigma).powi(2) / kappa
            }
            Theta::Cauchy { kappa, sigma } => {
                let s = 2.0 * sigma;
                1.0 + (1.0 + r * r / (s * s)).powf(-1.5) / (2.0 * PI * s * s * kappa)
            }
            Theta::VarGamma { kappa, sigma, nu } => {
                let h = gamma_expectation(2.0 * nu + 2.0, 2.0 * sigma * sigma, |v| {
                    (-r * r / (2.0 * v)).exp() / (2.0 * PI * v)
                });
                1.0 + h / kappa
            }
        }
    }
}

/// Panels per grid gap for numeric pair-correlation integration.
const PANELS_PER_GAP: usize = 8;

/// Theoretical K-function on `grid`. Cluster families use
/// `K(r) = πr² + F_D(r)/κ` with `F_D` the CDF of the distance between two
/// siblings; the LGCP integrates `2π s (g(s) - 1)` numerically.
pub fn model_k(theta: &Theta, grid: &RGrid) -> Result<Curve> {
    theta.validate()?;
    let r = grid.values();
    let pois: Vec<f64> = r.iter().map(|r| PI * r * r).collect();
    let values = match theta {
        Theta::Poisson => pois,
        Theta::Lgcp { .. } => {
            let extra = cumulative_integral(r, PANELS_PER_GAP, |s| 2.0 * PI * s * (theta.pair_correlation(s) - 1.0));
            pois.iter().zip(extra).map(|(a, b)| a + b).collect()
        }
        _ => {
            let (kappa, kernel) = theta.cluster().expect("cluster family");
            pois.iter()
                .zip(r)
                .map(|(p, &r)| p + kernel.sibling_distance_cdf(r) / kappa)
                .collect()
        }
    };
    Curve::new(grid.clone(), values)
}

/// How [`model_k_with`] evaluates the theoretical K-function.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum KMode {
    /// [`model_k`]: sibling-distance CDFs for cluster families.
    #[default]
    ClosedForm,
    /// `K(r) = 2π ∫₀^r s g(s) ds` integrated numerically for every family.
    Numeric,
}

pub fn model_k_with(theta: &Theta, grid: &RGrid, mode: KMode) -> Result<Curve> {
    match mode {
        KMode::ClosedForm => model_k(theta, grid),
        KMode::Numeric => {
            theta.validate()?;
            let values = cumulative_integral(grid.values(), PANELS_PER_GAP, |s| {
                2.0 * PI * s * theta.pair_correlation(s)
            });
            Curve::new(grid.clone(), values)
        }
    }
}

use rand::Rng as _;
use rand_distr::{Distribution, Gamma, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};
use crate::geometry::{Point, Window};
use crate::intensity::{poisson_count, IntensityFn};
use crate::numeric::gamma_expectation;
use crate::rng::Rng;

/// Offspring displacement kernel of a Neyman–Scott process; each integrates to one.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum ClusterKernel {
    /// Isotropic Gaussian with standard deviation `sigma` per coordinate.
    #[serde(alias = "gaussian_thomas")]
    Thomas { sigma: f64 },
    /// Uniform on the disc of radius `sigma`.
    #[serde(alias = "matern_disk")]
    Matern { sigma: f64 },
    /// `(2π σ²)⁻¹ (1 + |w|²/σ²)^{-3/2}`.
    Cauchy { sigma: f64 },
    /// Variance-gamma kernel `∝ (|w|/σ)^ν K_ν(|w|/σ)`, `ν > -1/2`.
    VarGamma { sigma: f64, nu: f64 },
}

/// Tail mass beyond the default parent buffer for heavy-tailed kernels.
const BUFFER_TAIL: f64 = 0.01;

impl ClusterKernel {
    pub fn sigma(&self) -> f64 {
        match *self {
            ClusterKernel::Thomas { sigma }
            | ClusterKernel::Matern { sigma }
            | ClusterKernel::Cauchy { sigma }
            | ClusterKernel::VarGamma { sigma, .. } => sigma,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.sigma() > 0.0 && self.sigma().is_finite()) {
            return Err(invalid("cluster kernel scale must be positive"));
        }
        if let ClusterKernel::VarGamma { nu, .. } = self {
            if !(*nu > -0.5) {
                return Err(invalid(format!("variance-gamma shape nu = {nu} must exceed -1/2")));
            }
        }
        Ok(())
    }

    /// CDF of the distance between an offspring and its parent.
    pub fn radial_cdf(&self, r: f64) -> f64 {
        if r <= 0.0 {
            return 0.0;
        }
        match *self {
            ClusterKernel::Thomas { sigma } => 1.0 - (-r * r / (2.0 * sigma * sigma)).exp(),
            ClusterKernel::Matern { sigma } => (r / sigma).powi(2).min(1.0),
            ClusterKernel::Cauchy { sigma } => 1.0 - (1.0 + (r / sigma).powi(2)).powf(-0.5),
            ClusterKernel::VarGamma { sigma, nu } => {
                1.0 - gamma_expectation(nu + 1.0, 2.0 * sigma * sigma, |v| (-r * r / (2.0 * v)).exp())
            }
        }
    }

    /// CDF of the distance between two offspring of the same parent.
    pub fn sibling_distance_cdf(&self, r: f64) -> f64 {
        if r <= 0.0 {
            return 0.0;
        }
        match *self {
            ClusterKernel::Thomas { sigma } => 1.0 - (-r * r / (4.0 * sigma * sigma)).exp(),
            ClusterKernel::Matern { sigma } => matern_sibling_cdf(r / (2.0 * sigma)),
            // Cauchy is 2-stable: the difference of two draws has scale 2σ.
            ClusterKernel::Cauchy { sigma } => 1.0 - (1.0 + (r / (2.0 * sigma)).powi(2)).powf(-0.5),
            // Difference of two Gaussian scale mixtures: variances add, Gamma shapes add.
            ClusterKernel::VarGamma { sigma, nu } => {
                1.0 - gamma_expectation(2.0 * nu + 2.0, 2.0 * sigma * sigma, |v| {
                    (-r * r / (2.0 * v)).exp()
                })
            }
        }
    }

    /// Default buffer around the window for parent generation.
    pub fn default_buffer(&self) -> f64 {
        match *self {
            ClusterKernel::Thomas { sigma } => 4.0 * sigma,
            ClusterKernel::Matern { sigma } => sigma,
            ClusterKernel::Cauchy { .. } | ClusterKernel::VarGamma { .. } => {
                (4.0 * self.sigma()).max(self.radial_quantile(1.0 - BUFFER_TAIL))
            }
        }
    }

    fn radial_quantile(&self, p: f64) -> f64 {
        let mut hi = self.sigma();
        while self.radial_cdf(hi) < p {
            hi *= 2.0;
        }
        let mut lo = 0.0;
        for _ in 0..80 {
            let mid = 0.5 * (lo + hi);
            if self.radial_cdf(mid) < p {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        hi
    }

    pub fn sample_offset(&self, rng: &mut Rng) -> (f64, f64) {
        match *self {
            ClusterKernel::Thomas { sigma } => {
                let a: f64 = StandardNormal.sample(rng);
                let b: f64 = StandardNormal.sample(rng);
                (sigma * a, sigma * b)
            }
            ClusterKernel::Matern { sigma } => {
                let r = sigma * rng.random::<f64>().sqrt();
                polar(r, rng)
            }
            ClusterKernel::Cauchy { sigma } => {
                // Inverse of 1 - (1 + r²/σ²)^{-1/2}.
                let u: f64 = rng.random();
                let r = sigma * ((1.0 - u).powi(-2) - 1.0).max(0.0).sqrt();
                polar(r, rng)
            }
            ClusterKernel::VarGamma { sigma, nu } => {
                // Gaussian with Gamma(ν + 1, 2σ²) distributed variance.
                let v = Gamma::new(nu + 1.0, 2.0 * sigma * sigma)
                    .expect("validated kernel")
                    .sample(rng);
                let a: f64 = StandardNormal.sample(rng);
                let b: f64 = StandardNormal.sample(rng);
                (v.sqrt() * a, v.sqrt() * b)
            }
        }
    }
}

fn polar(r: f64, rng: &mut Rng) -> (f64, f64) {
    let theta = std::f64::consts::TAU * rng.random::<f64>();
    (r * theta.cos(), r * theta.sin())
}

/// Distance CDF between two independent uniform points of a disc, as a
/// function of `t = r / diameter`.
fn matern_sibling_cdf(t: f64) -> f64 {
    if t >= 1.0 {
        return 1.0;
    }
    let s = (1.0 - t * t).sqrt();
    let acos = t.acos();
    let asin = t.asin();
    let first = 0.5 * t * t * acos + 0.25 * (asin - t * s);
    let second = (t * (2.0 * t * t - 1.0) * s + asin) / 8.0;
    (16.0 / std::f64::consts::PI * (first - second)).clamp(0.0, 1.0)
}

/// Neyman–Scott process: parents from `parent` on the buffered window,
/// Poisson(`offspring_mean`) children per parent displaced by `kernel`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClusterSpec {
    pub parent: IntensityFn,
    pub offspring_mean: f64,
    pub kernel: ClusterKernel,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub buffer: Option<f64>,
}

impl ClusterSpec {
    pub fn validate(&self) -> Result<()> {
        self.parent.validate()?;
        self.kernel.validate()?;
        if !(self.offspring_mean > 0.0 && self.offspring_mean.is_finite()) {
            return Err(invalid("offspring mean must be positive"));
        }
        if let Some(b) = self.buffer {
            if !(b >= 0.0) {
                return Err(invalid("cluster buffer must be non-negative"));
            }
        }
        Ok(())
    }

    pub fn buffer(&self) -> f64 {
        self.buffer.unwrap_or_else(|| self.kernel.default_buffer())
    }

    pub(crate) fn prepare(&self, window: &Window) -> Result<PreparedCluster> {
        self.validate()?;
        Ok(PreparedCluster {
            spec: self.clone(),
            window: *window,
            expanded: window.dilate(self.buffer()),
        })
    }
}

#[derive(Debug)]
pub(crate) struct PreparedCluster {
    spec: ClusterSpec,
    window: Window,
    expanded: Window,
}

impl PreparedCluster {
    pub(crate) fn draw(&self, rng: &mut Rng) -> Result<Vec<Point>> {
        let parents = self.spec.parent.sample_poisson(&self.expanded, rng)?;
        let mut out = Vec::new();
        for p in parents {
            let k = poisson_count(self.spec.offspring_mean, rng);
            for _ in 0..k {
                let (dx, dy) = self.spec.kernel.sample_offset(rng);
                let (x, y) = (p.x + dx, p.y + dy);
                if self.window.contains(x, y) {
                    out.push(Point::new(x, y));
                }
            }
        }
        Ok(out)
    }
}

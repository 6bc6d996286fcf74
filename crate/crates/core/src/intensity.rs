//! Deterministic intensity functions λ(x, y) and Poisson sampling from them.

use rand::Rng as _;
use rand_distr::{Distribution, Poisson, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::geometry::{Point, Window};
use crate::numeric::{bivariate_normal_pdf, bivariate_normal_rect};
use crate::rng::Rng;

fn unit_sd() -> [f64; 2] {
    [1.0, 1.0]
}

/// Midpoint-rule resolution used when no closed-form integral exists.
const QUADRATURE_CELLS: usize = 512;

/// Points-per-unit-area intensity on the plane.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum IntensityFn {
    Constant {
        value: f64,
    },
    /// `scale * ||(x, y) - center||`.
    Radial {
        scale: f64,
        #[serde(default)]
        center: [f64; 2],
    },
    /// `scale` times a bivariate normal density.
    Gaussian {
        scale: f64,
        #[serde(default)]
        mean: [f64; 2],
        #[serde(default = "unit_sd")]
        sd: [f64; 2],
        #[serde(default)]
        rho: f64,
    },
    /// `weight * Σ_k φ(x - p_k)` for a correlated Gaussian φ; `mass` is the
    /// integral over `window`.
    KernelSmooth {
        points: Vec<[f64; 2]>,
        sd: [f64; 2],
        rho: f64,
        weight: f64,
        window: Window,
        mass: f64,
    },
    /// `alpha * smoothed + (1 - alpha) * nu_flat`.
    Mixture {
        alpha: f64,
        smoothed: Box<IntensityFn>,
        nu_flat: f64,
    },
}

impl IntensityFn {
    /// Radial intensity about `center` scaled to `expected` points on `window`.
    pub fn radial_with_mean_count(window: &Window, center: [f64; 2], expected: f64) -> Result<Self> {
        if !(expected >= 0.0) {
            return Err(invalid("expected count must be non-negative"));
        }
        let unit = IntensityFn::Radial { scale: 1.0, center };
        let mass = unit.integral(window);
        Ok(IntensityFn::Radial {
            scale: expected / mass,
            center,
        })
    }

    /// Gaussian-kernel smoothing of `points` normalised to integrate to
    /// `total` over `window`.
    pub fn kernel_smooth(
        points: Vec<[f64; 2]>,
        sd: [f64; 2],
        rho: f64,
        total: f64,
        window: Window,
    ) -> Result<Self> {
        if points.is_empty() {
            return Err(Error::Empty("smoothing pattern".into()));
        }
        if !(sd[0] > 0.0 && sd[1] > 0.0) || !(rho.abs() < 1.0) || !(total >= 0.0) {
            return Err(invalid("kernel smoothing needs sd > 0, |rho| < 1, total >= 0"));
        }
        let z: f64 = points
            .iter()
            .map(|p| kernel_mass(*p, sd, rho, &window))
            .sum();
        if !(z > 0.0) {
            return Err(invalid("smoothing kernels carry no mass inside the window"));
        }
        Ok(IntensityFn::KernelSmooth {
            points,
            sd,
            rho,
            weight: total / z,
            window,
            mass: total,
        })
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            IntensityFn::Constant { value } if !(*value >= 0.0 && value.is_finite()) => {
                Err(invalid(format!("constant intensity {value} must be finite and >= 0")))
            }
            IntensityFn::Radial { scale, .. } if !(*scale >= 0.0 && scale.is_finite()) => {
                Err(invalid("radial scale must be finite and >= 0"))
            }
            IntensityFn::Gaussian { scale, sd, rho, .. } => {
                if !(*scale >= 0.0) || !(sd[0] > 0.0 && sd[1] > 0.0) || !(rho.abs() < 1.0) {
                    Err(invalid("gaussian intensity needs scale >= 0, sd > 0, |rho| < 1"))
                } else {
                    Ok(())
                }
            }
            IntensityFn::KernelSmooth { points, weight, .. } => {
                if points.is_empty() || !(*weight >= 0.0) {
                    Err(invalid("kernel smoothing needs points and weight >= 0"))
                } else {
                    Ok(())
                }
            }
            IntensityFn::Mixture {
                alpha,
                smoothed,
                nu_flat,
            } => {
                if !(0.0..=1.0).contains(alpha) || !(*nu_flat >= 0.0) {
                    return Err(invalid("mixture needs alpha in [0, 1] and nu_flat >= 0"));
                }
                smoothed.validate()
            }
            _ => Ok(()),
        }
    }

    pub fn eval(&self, x: f64, y: f64) -> f64 {
        match self {
            IntensityFn::Constant { value } => *value,
            IntensityFn::Radial { scale, center } => scale * (x - center[0]).hypot(y - center[1]),
            IntensityFn::Gaussian {
                scale,
                mean,
                sd,
                rho,
            } => scale * bivariate_normal_pdf(x - mean[0], y - mean[1], *sd, *rho),
            IntensityFn::KernelSmooth {
                points,
                sd,
                rho,
                weight,
                ..
            } => {
                let s: f64 = points
                    .iter()
                    .map(|p| bivariate_normal_pdf(x - p[0], y - p[1], *sd, *rho))
                    .sum();
                weight * s
            }
            IntensityFn::Mixture {
                alpha,
                smoothed,
                nu_flat,
            } => alpha * smoothed.eval(x, y) + (1.0 - alpha) * nu_flat,
        }
    }

    /// An upper bound of λ on `window`, as required by thinning.
    pub fn upper_bound(&self, window: &Window) -> f64 {
        match self {
            IntensityFn::Constant { value } => *value,
            IntensityFn::Radial { scale, center } => {
                let dx = (window.xmin() - center[0]).abs().max((window.xmax() - center[0]).abs());
                let dy = (window.ymin() - center[1]).abs().max((window.ymax() - center[1]).abs());
                scale * dx.hypot(dy)
            }
            IntensityFn::Gaussian { scale, sd, rho, .. } => {
                scale * bivariate_normal_pdf(0.0, 0.0, *sd, *rho)
            }
            IntensityFn::KernelSmooth {
                points,
                sd,
                rho,
                weight,
                ..
            } => weight * points.len() as f64 * bivariate_normal_pdf(0.0, 0.0, *sd, *rho),
            IntensityFn::Mixture {
                alpha,
                smoothed,
                nu_flat,
            } => alpha * smoothed.upper_bound(window) + (1.0 - alpha) * nu_flat,
        }
    }

    /// `∫_window λ`.
    pub fn integral(&self, window: &Window) -> f64 {
        match self {
            IntensityFn::Constant { value } => value * window.area(),
            IntensityFn::Gaussian {
                scale,
                mean,
                sd,
                rho,
            } => {
                scale
                    * bivariate_normal_rect(
                        *mean,
                        *sd,
                        *rho,
                        window.xmin(),
                        window.xmax(),
                        window.ymin(),
                        window.ymax(),
                    )
            }
            IntensityFn::KernelSmooth {
                points,
                sd,
                rho,
                weight,
                window: own,
                mass,
            } => {
                if own == window {
                    *mass
                } else {
                    weight * points.iter().map(|p| kernel_mass(*p, *sd, *rho, window)).sum::<f64>()
                }
            }
            IntensityFn::Mixture {
                alpha,
                smoothed,
                nu_flat,
            } => alpha * smoothed.integral(window) + (1.0 - alpha) * nu_flat * window.area(),
            IntensityFn::Radial { .. } => self.midpoint_integral(window, QUADRATURE_CELLS),
        }
    }

    pub fn midpoint_integral(&self, window: &Window, cells: usize) -> f64 {
        let hx = window.width() / cells as f64;
        let hy = window.height() / cells as f64;
        let mut acc = 0.0;
        for j in 0..cells {
            let y = window.ymin() + (j as f64 + 0.5) * hy;
            let mut row = 0.0;
            for i in 0..cells {
                row += self.eval(window.xmin() + (i as f64 + 0.5) * hx, y);
            }
            acc += row;
        }
        acc * hx * hy
    }

    /// One realisation of the Poisson process with this intensity on `window`.
    pub fn sample_poisson(&self, window: &Window, rng: &mut Rng) -> Result<Vec<Point>> {
        match self {
            IntensityFn::Constant { value } => Ok(uniform_points(*value, window, rng)),
            IntensityFn::Gaussian { mean, sd, rho, .. } => {
                let n = poisson_count(self.integral(window), rng);
                Ok(truncated_gaussian_points(n, &[*mean], *sd, *rho, window, rng))
            }
            IntensityFn::KernelSmooth {
                points, sd, rho, ..
            } => {
                let n = poisson_count(self.integral(window), rng);
                Ok(truncated_gaussian_points(n, points, *sd, *rho, window, rng))
            }
            IntensityFn::Mixture {
                alpha,
                smoothed,
                nu_flat,
            } => {
                let mut pts = uniform_points((1.0 - alpha) * nu_flat, window, rng);
                if *alpha > 0.0 {
                    let scaled = smoothed.scaled(*alpha);
                    pts.extend(scaled.sample_poisson(window, rng)?);
                }
                Ok(pts)
            }
            IntensityFn::Radial { .. } => thin(self, self.upper_bound(window), window, rng),
        }
    }

    /// `factor * λ`.
    pub fn scaled(&self, factor: f64) -> IntensityFn {
        match self {
            IntensityFn::Constant { value } => IntensityFn::Constant {
                value: value * factor,
            },
            IntensityFn::Radial { scale, center } => IntensityFn::Radial {
                scale: scale * factor,
                center: *center,
            },
            IntensityFn::Gaussian {
                scale,
                mean,
                sd,
                rho,
            } => IntensityFn::Gaussian {
                scale: scale * factor,
                mean: *mean,
                sd: *sd,
                rho: *rho,
            },
            IntensityFn::KernelSmooth {
                points,
                sd,
                rho,
                weight,
                window,
                mass,
            } => IntensityFn::KernelSmooth {
                points: points.clone(),
                sd: *sd,
                rho: *rho,
                weight: weight * factor,
                window: *window,
                mass: mass * factor,
            },
            IntensityFn::Mixture {
                alpha,
                smoothed,
                nu_flat,
            } => IntensityFn::Mixture {
                alpha: *alpha,
                smoothed: Box::new(smoothed.scaled(factor)),
                nu_flat: nu_flat * factor,
            },
        }
    }
}

fn kernel_mass(p: [f64; 2], sd: [f64; 2], rho: f64, w: &Window) -> f64 {
    bivariate_normal_rect(p, sd, rho, w.xmin(), w.xmax(), w.ymin(), w.ymax())
}

pub(crate) fn poisson_count(mean: f64, rng: &mut Rng) -> u64 {
    if !(mean > 0.0) {
        return 0;
    }
    let d = Poisson::new(mean).expect("positive finite mean");
    d.sample(rng) as u64
}

pub(crate) fn uniform_points(lambda: f64, window: &Window, rng: &mut Rng) -> Vec<Point> {
    let n = poisson_count(lambda * window.area(), rng);
    (0..n).map(|_| uniform_point(window, rng)).collect()
}

pub(crate) fn uniform_point(window: &Window, rng: &mut Rng) -> Point {
    Point::new(
        window.xmin() + window.width() * rng.random::<f64>(),
        window.ymin() + window.height() * rng.random::<f64>(),
    )
}

/// `n` draws from the equal-weight Gaussian mixture over `centers`,
/// conditioned on falling in `window` (rejection).
fn truncated_gaussian_points(
    n: u64,
    centers: &[[f64; 2]],
    sd: [f64; 2],
    rho: f64,
    window: &Window,
    rng: &mut Rng,
) -> Vec<Point> {
    let c = (1.0 - rho * rho).sqrt();
    let mut out = Vec::with_capacity(n as usize);
    while (out.len() as u64) < n {
        let k = rng.random_range(0..centers.len());
        let z1: f64 = StandardNormal.sample(rng);
        let z2: f64 = StandardNormal.sample(rng);
        let x = centers[k][0] + sd[0] * z1;
        let y = centers[k][1] + sd[1] * (rho * z1 + c * z2);
        if window.contains(x, y) {
            out.push(Point::new(x, y));
        }
    }
    out
}

/// Lewis–Shedler thinning of a homogeneous process at the declared bound.
pub(crate) fn thin(
    intensity: &IntensityFn,
    bound: f64,
    window: &Window,
    rng: &mut Rng,
) -> Result<Vec<Point>> {
    let proposals = uniform_points(bound, window, rng);
    let mut out = Vec::with_capacity(proposals.len());
    for p in proposals {
        let value = intensity.eval(p.x, p.y);
        if value > bound * (1.0 + 1e-12) || value < 0.0 {
            return Err(Error::IntensityBound {
                x: p.x,
                y: p.y,
                value,
                bound,
            });
        }
        let u: f64 = rng.random();
        if u * bound < value {
            out.push(p);
        }
    }
    Ok(out)
}

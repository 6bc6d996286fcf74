use serde::{Deserialize, Serialize};

use super::field::{default_bandwidth, kernel_intensity_at_points, IntensityField};
use super::spatial::CellIndex;
use super::Curve;
use crate::error::{invalid, Result};
use crate::geometry::{PointPattern, RGrid};

/// Lower bound applied to plug-in intensity values in the K weights.
pub const LAMBDA_FLOOR: f64 = 1e-8;

/// Intensity used in the pair weights of [`k_hat`].
#[derive(Debug, Clone, Copy)]
pub enum LambdaSource<'a> {
    Constant(f64),
    /// Bilinear interpolation of a pixelated estimate at each point.
    Field(&'a IntensityField),
    /// One value per pattern point, in pattern order.
    AtPoints(&'a [f64]),
}

/// How the K-function estimator obtains its intensity plug-in.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum KPlugin {
    /// A known constant intensity.
    Constant { lambda: f64 },
    /// Homogeneous plug-in with `λ² = n(n-1)/|W|²`.
    CountBased,
    /// Edge-corrected Gaussian kernel estimate at the data points. A missing
    /// bandwidth means [`default_bandwidth`].
    Kernel {
        #[serde(default)]
        sigma: Option<f64>,
        #[serde(default = "yes")]
        leave_one_out: bool,
    },
}

fn yes() -> bool {
    true
}

impl Default for KPlugin {
    fn default() -> Self {
        KPlugin::Kernel {
            sigma: None,
            leave_one_out: true,
        }
    }
}

/// Conditions noticed while estimating K; none of them is an error.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct KDiagnostics {
    /// Fewer than two points, so the curve is identically zero.
    pub too_few_points: bool,
    /// Number of points whose plug-in intensity was raised to [`LAMBDA_FLOOR`].
    pub clamped: usize,
}

impl KDiagnostics {
    pub fn is_clean(&self) -> bool {
        !self.too_few_points && self.clamped == 0
    }
}

fn check_grid(p: &PointPattern, grid: &RGrid) -> Result<()> {
    if grid.max() >= p.window().min_side() {
        return Err(invalid(format!(
            "largest distance {} must be below the shorter window side {}",
            grid.max(),
            p.window().min_side()
        )));
    }
    Ok(())
}

/// Ripley's K estimate with translation edge correction.
pub fn k_hat(p: &PointPattern, grid: &RGrid, lambda: LambdaSource<'_>) -> Result<Curve> {
    Ok(k_hat_diagnostics(p, grid, lambda)?.0)
}

pub fn k_hat_diagnostics(
    p: &PointPattern,
    grid: &RGrid,
    lambda: LambdaSource<'_>,
) -> Result<(Curve, KDiagnostics)> {
    check_grid(p, grid)?;
    let mut diag = KDiagnostics::default();
    let n = p.len();
    if n < 2 {
        diag.too_few_points = true;
        return Ok((Curve::zeros(grid.clone()), diag));
    }
    let pts = p.points();
    let raw: Vec<f64> = match lambda {
        LambdaSource::Constant(l) => {
            if !(l > 0.0) {
                return Err(invalid(format!("plug-in intensity {l} must be positive")));
            }
            vec![l; n]
        }
        LambdaSource::Field(f) => pts.iter().map(|q| f.eval(q.x, q.y)).collect(),
        LambdaSource::AtPoints(v) => {
            if v.len() != n {
                return Err(invalid(format!("{} intensity values for {n} points", v.len())));
            }
            v.to_vec()
        }
    };
    let lam: Vec<f64> = raw
        .iter()
        .map(|&l| {
            if l < LAMBDA_FLOOR {
                diag.clamped += 1;
                LAMBDA_FLOOR
            } else {
                l
            }
        })
        .collect();
    let r = grid.values();
    let rmax = grid.max();
    let w = p.window();
    let mut bins = vec![0.0; r.len()];
    CellIndex::new(pts, w, rmax).for_each_candidate_pair(|i, j| {
        let (dx, dy) = (pts[i].x - pts[j].x, pts[i].y - pts[j].y);
        let d = dx.hypot(dy);
        if d >= rmax {
            return;
        }
        let k = r.partition_point(|&rk| rk <= d);
        if k < r.len() {
            bins[k] += 2.0 / (lam[i] * lam[j] * w.translation_overlap(dx, dy));
        }
    });
    let mut acc = 0.0;
    let values = bins
        .iter()
        .map(|b| {
            acc += b;
            acc
        })
        .collect();
    Ok((Curve::new(grid.clone(), values)?, diag))
}

/// K estimate with the intensity obtained from `plugin`.
pub fn k_hat_plugin(p: &PointPattern, grid: &RGrid, plugin: &KPlugin) -> Result<(Curve, KDiagnostics)> {
    match *plugin {
        KPlugin::Constant { lambda } => k_hat_diagnostics(p, grid, LambdaSource::Constant(lambda)),
        KPlugin::CountBased => {
            let n = p.len() as f64;
            let lambda = (n * (n - 1.0)).max(0.0).sqrt() / p.window().area();
            if p.len() < 2 {
                check_grid(p, grid)?;
                let diag = KDiagnostics {
                    too_few_points: true,
                    clamped: 0,
                };
                return Ok((Curve::zeros(grid.clone()), diag));
            }
            k_hat_diagnostics(p, grid, LambdaSource::Constant(lambda))
        }
        KPlugin::Kernel { sigma, leave_one_out } => {
            let sigma = sigma.unwrap_or_else(|| default_bandwidth(p.window()));
            let lam = kernel_intensity_at_points(p, sigma, leave_one_out)?;
            k_hat_diagnostics(p, grid, LambdaSource::AtPoints(&lam))
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{Point, Window};
    use crate::simulate::sample_hom_poisson;
    use proptest::prelude::*;

    fn sq10() -> Window {
        Window::square(10.0).unwrap()
    }

    fn pattern(pts: &[(f64, f64)], w: Window) -> PointPattern {
        PointPattern::new(pts.iter().map(|&(x, y)| Point::new(x, y)).collect(), w).unwrap()
    }

    /// Direct double sum over ordered pairs for every grid value.
    fn brute_force(p: &PointPattern, grid: &RGrid, lambda: f64) -> Vec<f64> {
        let pts = p.points();
        grid.values()
            .iter()
            .map(|&r| {
                let mut s = 0.0;
                for (i, a) in pts.iter().enumerate() {
                    for (j, b) in pts.iter().enumerate() {
                        if i != j && a.dist(b) < r {
                            s += 1.0 / (lambda * lambda * p.window().translation_overlap(a.x - b.x, a.y - b.y));
                        }
                    }
                }
                s
            })
            .collect()
    }

    #[test]
    fn empty_and_singleton_give_zero_curves() {
        let grid = RGrid::uniform(2.0, 10).unwrap();
        for p in [PointPattern::empty(sq10()), pattern(&[(1.0, 1.0)], sq10())] {
            let (c, d) = k_hat_diagnostics(&p, &grid, LambdaSource::Constant(0.5)).unwrap();
            assert!(c.values().iter().all(|&v| v == 0.0));
            assert!(d.too_few_points);
        }
    }

    #[test]
    fn two_points_hand_evaluation() {
        let p = pattern(&[(2.0, 3.0), (5.0, 7.0)], sq10());
        let grid = RGrid::new(vec![4.9, 5.0, 5.1], vec![1.0; 3]).unwrap();
        let c = k_hat(&p, &grid, LambdaSource::Constant(0.5)).unwrap();
        let expect = 2.0 / (0.25 * (7.0 * 6.0));
        assert_eq!(c.values()[0], 0.0);
        assert_eq!(c.values()[1], 0.0, "strict inequality at r = d");
        assert!((c.values()[2] - expect).abs() < 1e-12);
        assert_eq!(c.values().to_vec(), brute_force(&p, &grid, 0.5));
    }

    #[test]
    fn matches_brute_force_on_random_patterns() {
        let w = Window::new(-1.0, 6.0, 0.0, 4.0).unwrap();
        let grid = RGrid::uniform(1.5, 30).unwrap();
        for seed in 0..5 {
            let p = sample_hom_poisson(4.0, &w, seed).unwrap();
            let c = k_hat(&p, &grid, LambdaSource::Constant(4.0)).unwrap();
            for (a, b) in c.values().iter().zip(brute_force(&p, &grid, 4.0)) {
                assert!((a - b).abs() <= 1e-10 * b.max(1.0));
            }
        }
    }

    #[test]
    fn unbiased_under_poisson_with_true_intensity() {
        let grid = RGrid::new(vec![0.5, 1.0, 1.5, 2.0, 2.5], vec![1.0; 5]).unwrap();
        let curves: Vec<Vec<f64>> = (0..500)
            .map(|s| {
                let p = sample_hom_poisson(0.5, &sq10(), s).unwrap();
                k_hat(&p, &grid, LambdaSource::Constant(0.5)).unwrap().values().to_vec()
            })
            .collect();
        for (k, r) in grid.values().iter().enumerate() {
            let xs: Vec<f64> = curves.iter().map(|c| c[k]).collect();
            let m = xs.iter().sum::<f64>() / 500.0;
            let se = (xs.iter().map(|x| (x - m).powi(2)).sum::<f64>() / 499.0 / 500.0).sqrt();
            let truth = std::f64::consts::PI * r * r;
            assert!((m - truth).abs() < 3.0 * se, "r={r}: {m} vs {truth} (se {se})");
        }
    }

    #[test]
    fn rejects_grid_beyond_window_side() {
        let p = pattern(&[(1.0, 1.0), (2.0, 2.0)], Window::new(0.0, 10.0, 0.0, 3.0).unwrap());
        assert!(k_hat(&p, &RGrid::uniform(3.0, 5).unwrap(), LambdaSource::Constant(1.0)).is_err());
        assert!(k_hat(&p, &RGrid::uniform(2.9, 5).unwrap(), LambdaSource::Constant(1.0)).is_ok());
    }

    #[test]
    fn clamps_tiny_plugin_values() {
        let p = pattern(&[(1.0, 1.0), (2.0, 2.0)], sq10());
        let lam = [1e-12, 0.5];
        let (c, d) = k_hat_diagnostics(&p, &RGrid::uniform(2.0, 4).unwrap(), LambdaSource::AtPoints(&lam)).unwrap();
        assert_eq!(d.clamped, 1);
        assert!(c.values().iter().all(|v| v.is_finite()));
    }

    #[test]
    fn kernel_plugin_and_count_plugin_run() {
        let p = sample_hom_poisson(0.5, &sq10(), 4).unwrap();
        let grid = RGrid::uniform(2.5, 20).unwrap();
        let (a, da) = k_hat_plugin(&p, &grid, &KPlugin::default()).unwrap();
        let (b, db) = k_hat_plugin(&p, &grid, &KPlugin::CountBased).unwrap();
        assert!(da.is_clean() && db.is_clean());
        assert!(a.values().windows(2).all(|w| w[1] >= w[0]));
        let n = p.len() as f64;
        let c = k_hat(&p, &grid, LambdaSource::Constant((n * (n - 1.0)).sqrt() / 100.0)).unwrap();
        assert_eq!(b, c);
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]

        #[test]
        fn translation_equivariant(seed in 0u64..1000, dx in -50.0f64..50.0, dy in -50.0f64..50.0) {
            let p = sample_hom_poisson(0.8, &sq10(), seed).unwrap();
            let grid = RGrid::uniform(2.5, 16).unwrap();
            let a = k_hat(&p, &grid, LambdaSource::Constant(0.8)).unwrap();
            let b = k_hat(&p.shifted(dx, dy), &grid, LambdaSource::Constant(0.8)).unwrap();
            for (u, v) in a.values().iter().zip(b.values()) {
                prop_assert!((u - v).abs() <= 1e-9 * u.abs().max(1.0));
            }
        }

        #[test]
        fn scales_inverse_square_in_lambda(seed in 0u64..1000, c in 0.1f64..10.0) {
            let p = sample_hom_poisson(0.8, &sq10(), seed).unwrap();
            let grid = RGrid::uniform(2.5, 16).unwrap();
            let a = k_hat(&p, &grid, LambdaSource::Constant(0.8)).unwrap();
            let b = k_hat(&p, &grid, LambdaSource::Constant(0.8 * c)).unwrap();
            for (u, v) in a.values().iter().zip(b.values()) {
                prop_assert!((u / (c * c) - v).abs() <= 1e-12 * u.abs().max(1.0));
            }
        }

        #[test]
        fn nondecreasing_and_nonnegative(seed in 0u64..1000) {
            let p = sample_hom_poisson(1.0, &sq10(), seed).unwrap();
            let c = k_hat_plugin(&p, &RGrid::uniform(3.0, 30).unwrap(), &KPlugin::default()).unwrap().0;
            prop_assert!(c.values()[0] >= 0.0);
            prop_assert!(c.values().windows(2).all(|w| w[1] >= w[0]));
        }
    }
}

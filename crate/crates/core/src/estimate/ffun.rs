use serde::{Deserialize, Serialize};

use super::spatial::CellIndex;
use super::Curve;
use crate::error::{invalid, Result};
use crate::geometry::{PointPattern, RGrid, Window};

/// Default probe lattice spacing: 1/64 of the shorter window side.
pub fn default_probe_spacing(window: &Window) -> f64 {
    window.min_side() / 64.0
}

/// Empty-space function of a homogeneous Poisson process, `1 - exp(-λπr²)`.
pub fn poisson_f(lambda: f64, r: f64) -> f64 {
    1.0 - (-lambda * std::f64::consts::PI * r * r).exp()
}

/// Probe lattice `xmin + (k + 1/2) s` in each coordinate, row-major.
fn probes(window: &Window, spacing: f64) -> Vec<(f64, f64)> {
    let nx = (window.width() / spacing + 0.5).floor().max(1.0) as usize;
    let ny = (window.height() / spacing + 0.5).floor().max(1.0) as usize;
    let mut out = Vec::with_capacity(nx * ny);
    for j in 0..ny {
        for i in 0..nx {
            let x = window.xmin() + (i as f64 + 0.5) * spacing;
            let y = window.ymin() + (j as f64 + 0.5) * spacing;
            if window.contains(x, y) {
                out.push((x, y));
            }
        }
    }
    out
}

/// Which probes enter the empty-space estimate at distance `r`.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Erosion {
    /// Probes at least `r` from the boundary. Unbiased at every `r`, but the
    /// probe set shrinks with `r`, so single curves need not be monotone.
    #[default]
    PerRadius,
    /// Probes at least the largest grid distance from the boundary for every
    /// `r`. Unbiased and nondecreasing, at the cost of fewer probes.
    Fixed,
}

/// Empty-space function estimate: the fraction of probes at least `r` from
/// the window boundary whose nearest pattern point is within distance `r`.
pub fn f_hat(p: &PointPattern, grid: &RGrid, probe_spacing: Option<f64>) -> Result<Curve> {
    f_hat_with(p, grid, probe_spacing, Erosion::PerRadius)
}

pub fn f_hat_with(p: &PointPattern, grid: &RGrid, probe_spacing: Option<f64>, erosion: Erosion) -> Result<Curve> {
    let w = p.window();
    let spacing = probe_spacing.unwrap_or_else(|| default_probe_spacing(w));
    if !(spacing > 0.0) {
        return Err(invalid(format!("probe spacing {spacing} must be positive")));
    }
    let rmax = grid.max();
    let probes = probes(w, spacing);
    let boundary: Vec<f64> = probes
        .iter()
        .map(|&(x, y)| (x - w.xmin()).min(w.xmax() - x).min(y - w.ymin()).min(w.ymax() - y))
        .collect();
    if !boundary.iter().any(|&b| b >= rmax) {
        return Err(invalid(format!(
            "no probe lies at distance {rmax} from the window boundary"
        )));
    }
    let index = CellIndex::new(p.points(), w, rmax);
    let nearest: Vec<f64> = probes
        .iter()
        .map(|&(x, y)| index.nearest_within(p.points(), x, y, rmax))
        .collect();
    let values = grid
        .values()
        .iter()
        .map(|&r| {
            let (mut inside, mut hit) = (0usize, 0usize);
            let margin = match erosion {
                Erosion::PerRadius => r,
                Erosion::Fixed => rmax,
            };
            for (b, d) in boundary.iter().zip(&nearest) {
                if *b >= margin {
                    inside += 1;
                    if *d <= r {
                        hit += 1;
                    }
                }
            }
            hit as f64 / inside as f64
        })
        .collect();
    Curve::new(grid.clone(), values)
}

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};
use crate::geometry::{Point, PointPattern, Window};
use crate::numeric::{norm_cdf, norm_pdf};

/// Regular `nx x ny` lattice of cells over a window, evaluated at cell centres.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PixelGrid {
    window: Window,
    nx: usize,
    ny: usize,
}

impl PixelGrid {
    pub fn new(window: Window, nx: usize, ny: usize) -> Result<Self> {
        if nx < 8 || ny < 8 {
            return Err(invalid(format!("pixel grid {nx}x{ny} must be at least 8x8")));
        }
        Ok(PixelGrid { window, nx, ny })
    }

    pub fn window(&self) -> &Window {
        &self.window
    }

    pub fn nx(&self) -> usize {
        self.nx
    }

    pub fn ny(&self) -> usize {
        self.ny
    }

    pub fn len(&self) -> usize {
        self.nx * self.ny
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn cell_width(&self) -> f64 {
        self.window.width() / self.nx as f64
    }

    pub fn cell_height(&self) -> f64 {
        self.window.height() / self.ny as f64
    }

    pub fn cell_area(&self) -> f64 {
        self.cell_width() * self.cell_height()
    }

    pub fn x_centres(&self) -> Vec<f64> {
        let h = self.cell_width();
        (0..self.nx).map(|i| self.window.xmin() + (i as f64 + 0.5) * h).collect()
    }

    pub fn y_centres(&self) -> Vec<f64> {
        let h = self.cell_height();
        (0..self.ny).map(|j| self.window.ymin() + (j as f64 + 0.5) * h).collect()
    }

    /// Centre of pixel `k` in row-major `(iy, ix)` order.
    pub fn centre(&self, k: usize) -> (f64, f64) {
        let (iy, ix) = (k / self.nx, k % self.nx);
        (
            self.window.xmin() + (ix as f64 + 0.5) * self.cell_width(),
            self.window.ymin() + (iy as f64 + 0.5) * self.cell_height(),
        )
    }
}

/// Pixelated intensity estimate, values row-major over `(iy, ix)`.
#[derive(Debug, Clone, PartialEq)]
pub struct IntensityField {
    grid: PixelGrid,
    values: Vec<f64>,
    sigma: f64,
}

impl IntensityField {
    pub fn new(grid: PixelGrid, values: Vec<f64>, sigma: f64) -> Result<Self> {
        if values.len() != grid.len() {
            return Err(crate::Error::GridMismatch(format!(
                "{} values for a {}x{} pixel grid",
                values.len(),
                grid.nx(),
                grid.ny()
            )));
        }
        Ok(IntensityField { grid, values, sigma })
    }

    pub fn grid(&self) -> &PixelGrid {
        &self.grid
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn sigma(&self) -> f64 {
        self.sigma
    }

    /// Midpoint-rule integral over the window.
    pub fn integral(&self) -> f64 {
        self.values.iter().sum::<f64>() * self.grid.cell_area()
    }

    /// Bilinear interpolation between cell centres; positions beyond the
    /// outermost centres take the nearest centre's value along that axis.
    pub fn eval(&self, x: f64, y: f64) -> f64 {
        let g = &self.grid;
        let (i0, i1, tx) = bracket((x - g.window.xmin()) / g.cell_width() - 0.5, g.nx);
        let (j0, j1, ty) = bracket((y - g.window.ymin()) / g.cell_height() - 0.5, g.ny);
        let v = |i: usize, j: usize| self.values[j * g.nx + i];
        (1.0 - ty) * ((1.0 - tx) * v(i0, j0) + tx * v(i1, j0)) + ty * ((1.0 - tx) * v(i0, j1) + tx * v(i1, j1))
    }
}

fn bracket(u: f64, n: usize) -> (usize, usize, f64) {
    let u = u.clamp(0.0, (n - 1) as f64);
    let i0 = (u.floor() as usize).min(n - 2);
    (i0, i0 + 1, u - i0 as f64)
}

/// Spatial default bandwidth: 1.25 on a 10 x 10 window, scaled with the
/// window diameter.
pub fn default_bandwidth(window: &Window) -> f64 {
    1.25 * window.diameter() / (10.0 * std::f64::consts::SQRT_2)
}

/// Mass of the isotropic Gaussian kernel centred at `y` that lies in `w`.
pub fn edge_correction(y: &Point, w: &Window, sigma: f64) -> f64 {
    let px = norm_cdf((w.xmax() - y.x) / sigma) - norm_cdf((w.xmin() - y.x) / sigma);
    let py = norm_cdf((w.ymax() - y.y) / sigma) - norm_cdf((w.ymin() - y.y) / sigma);
    px * py
}

fn check_sigma(sigma: f64) -> Result<()> {
    if sigma > 0.0 && sigma.is_finite() {
        Ok(())
    } else {
        Err(invalid(format!("bandwidth {sigma} must be positive")))
    }
}

/// Edge-corrected Gaussian kernel intensity estimate on a pixel grid.
pub fn kernel_intensity(p: &PointPattern, sigma: f64, grid: &PixelGrid) -> Result<IntensityField> {
    check_sigma(sigma)?;
    let xs = grid.x_centres();
    let ys = grid.y_centres();
    let nx = grid.nx();
    let mut values = vec![0.0; grid.len()];
    let mut gx = vec![0.0; nx];
    for q in p.points() {
        let c = edge_correction(q, grid.window(), sigma);
        for (g, x) in gx.iter_mut().zip(&xs) {
            *g = norm_pdf((x - q.x) / sigma) / sigma;
        }
        for (row, y) in values.chunks_exact_mut(nx).zip(&ys) {
            let a = norm_pdf((y - q.y) / sigma) / (sigma * c);
            if a == 0.0 {
                continue;
            }
            for (v, g) in row.iter_mut().zip(&gx) {
                *v += a * g;
            }
        }
    }
    IntensityField::new(*grid, values, sigma)
}

/// Kernel intensity estimate evaluated exactly at the pattern's own points.
/// With `leave_one_out` each point's own kernel is excluded.
pub fn kernel_intensity_at_points(p: &PointPattern, sigma: f64, leave_one_out: bool) -> Result<Vec<f64>> {
    check_sigma(sigma)?;
    let pts = p.points();
    let inv_c: Vec<f64> = pts.iter().map(|q| 1.0 / edge_correction(q, p.window(), sigma)).collect();
    let norm = 1.0 / (2.0 * std::f64::consts::PI * sigma * sigma);
    Ok(pts
        .iter()
        .enumerate()
        .map(|(i, a)| {
            pts.iter()
                .enumerate()
                .filter(|(j, _)| !leave_one_out || *j != i)
                .map(|(j, b)| {
                    let d2 = (a.x - b.x).powi(2) + (a.y - b.y).powi(2);
                    norm * (-0.5 * d2 / (sigma * sigma)).exp() * inv_c[j]
                })
                .sum()
        })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numeric::simpson;

    fn sq10() -> Window {
        Window::square(10.0).unwrap()
    }

    fn grid128() -> PixelGrid {
        PixelGrid::new(sq10(), 128, 128).unwrap()
    }

    fn single(x: f64, y: f64) -> PointPattern {
        PointPattern::new(vec![Point::new(x, y)], sq10()).unwrap()
    }

    #[test]
    fn edge_correction_landmarks() {
        let w = sq10();
        let s = 0.1;
        assert!((edge_correction(&Point::new(5.0, 5.0), &w, s) - 1.0).abs() < 1e-12);
        assert!((edge_correction(&Point::new(0.0, 0.0), &w, s) - 0.25).abs() < 1e-12);
        assert!((edge_correction(&Point::new(5.0, 10.0), &w, s) - 0.5).abs() < 1e-12);
    }

    #[test]
    fn edge_correction_matches_quadrature_oracle() {
        let w = sq10();
        let (y, s) = (Point::new(0.7, 9.1), 1.3);
        let marginal = |c: f64, lo: f64, hi: f64| {
            simpson(lo, hi, 4000, |t| (-(t - c).powi(2) / (2.0 * s * s)).exp() / (s * (2.0 * std::f64::consts::PI).sqrt()))
        };
        let oracle = marginal(y.x, 0.0, 10.0) * marginal(y.y, 0.0, 10.0);
        assert!((edge_correction(&y, &w, s) - oracle).abs() < 1e-10);
    }

    #[test]
    fn empty_pattern_gives_zero_field() {
        let f = kernel_intensity(&PointPattern::empty(sq10()), 1.0, &grid128()).unwrap();
        assert!(f.values().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn single_point_field_integrates_to_one() {
        for (x, y, s) in [(5.0, 5.0, 0.1), (0.0, 0.0, 0.1), (10.0, 3.0, 0.3), (0.2, 9.9, 0.3)] {
            let f = kernel_intensity(&single(x, y), s, &grid128()).unwrap();
            assert!((f.integral() - 1.0).abs() < 0.01, "({x}, {y}): {}", f.integral());
        }
    }

    #[test]
    fn bilinear_reproduces_centres_and_interpolates() {
        let g = PixelGrid::new(sq10(), 10, 8).unwrap();
        let values: Vec<f64> = (0..80).map(|k| g.centre(k).0 * 2.0 + g.centre(k).1).collect();
        let f = IntensityField::new(g, values.clone(), 1.0).unwrap();
        for k in [0, 13, 79] {
            let (x, y) = g.centre(k);
            assert!((f.eval(x, y) - values[k]).abs() < 1e-12);
        }
        // Exact for affine functions between centres, clamped outside.
        assert!((f.eval(3.3, 4.1) - (6.6 + 4.1)).abs() < 1e-12);
        assert!((f.eval(0.0, 4.1) - (1.0 + 4.1)).abs() < 1e-12);
    }

    #[test]
    fn at_points_agrees_with_field() {
        let p = PointPattern::new(
            vec![Point::new(2.0, 3.0), Point::new(2.5, 3.5), Point::new(8.0, 1.0)],
            sq10(),
        )
        .unwrap();
        let f = kernel_intensity(&p, 1.25, &PixelGrid::new(sq10(), 400, 400).unwrap()).unwrap();
        let exact = kernel_intensity_at_points(&p, 1.25, false).unwrap();
        for (q, e) in p.points().iter().zip(&exact) {
            assert!((f.eval(q.x, q.y) - e).abs() < 2e-3 * e, "{} vs {e}", f.eval(q.x, q.y));
        }
        let loo = kernel_intensity_at_points(&p, 1.25, true).unwrap();
        let self_term = 1.0 / (2.0 * std::f64::consts::PI * 1.25 * 1.25 * edge_correction(&p.points()[2], &sq10(), 1.25));
        assert!((exact[2] - loo[2] - self_term).abs() < 1e-12);
    }

    #[test]
    fn default_bandwidth_on_study_window() {
        assert!((default_bandwidth(&sq10()) - 1.25).abs() < 1e-12);
    }

    #[test]
    fn rejects_small_grids_and_bad_sigma() {
        assert!(PixelGrid::new(sq10(), 4, 64).is_err());
        assert!(kernel_intensity(&single(1.0, 1.0), 0.0, &grid128()).is_err());
    }
}

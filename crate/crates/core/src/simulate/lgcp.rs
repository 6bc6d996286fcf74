use faer::{Mat, Side};
use rand::Rng as _;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{invalid, Error, Result};
use crate::geometry::{Point, Window};
use crate::intensity::poisson_count;
use crate::rng::Rng;

/// Diagonal jitter added to the covariance when the factorisation fails.
const JITTER: f64 = 1e-10;

/// Log-Gaussian Cox process on a `grid_n x grid_n` lattice of cells with
/// covariance `tau2 * exp(-d / scale)` between cell centres. The Cholesky
/// factor is computed once and reused by every draw.
#[derive(Debug, Clone)]
pub struct LgcpField {
    mu: f64,
    grid_n: usize,
    window: Window,
    /// Packed lower triangle of the Cholesky factor, row-major.
    factor: Option<Vec<f64>>,
}

impl LgcpField {
    pub fn new(mu: f64, tau2: f64, scale: f64, grid_n: usize, window: Window) -> Result<Self> {
        if !mu.is_finite() || !(tau2 >= 0.0) || !(scale > 0.0) || grid_n < 16 {
            return Err(invalid("LGCP needs finite mu, tau2 >= 0, scale > 0, grid_n >= 16"));
        }
        let factor = if tau2 == 0.0 {
            None
        } else {
            Some(cholesky(tau2, scale, grid_n, &window)?)
        };
        Ok(LgcpField {
            mu,
            grid_n,
            window,
            factor,
        })
    }

    pub fn grid_n(&self) -> usize {
        self.grid_n
    }

    fn cell_centre(&self, k: usize) -> (f64, f64) {
        cell_centre(&self.window, self.grid_n, k)
    }

    /// One realisation of the Gaussian field at the cell centres, row-major
    /// over `(iy, ix)`.
    pub fn draw_field(&self, rng: &mut Rng) -> Vec<f64> {
        let m = self.grid_n * self.grid_n;
        let Some(l) = &self.factor else {
            return vec![self.mu; m];
        };
        let z: Vec<f64> = (0..m).map(|_| StandardNormal.sample(rng)).collect();
        let mut out = Vec::with_capacity(m);
        let mut offset = 0;
        for i in 0..m {
            let row = &l[offset..offset + i + 1];
            let s: f64 = row.iter().zip(&z[..=i]).map(|(a, b)| a * b).sum();
            out.push(self.mu + s);
            offset += i + 1;
        }
        out
    }

    pub fn draw(&self, rng: &mut Rng) -> Vec<Point> {
        let field = self.draw_field(rng);
        let hx = self.window.width() / self.grid_n as f64;
        let hy = self.window.height() / self.grid_n as f64;
        let mut pts = Vec::new();
        for (k, z) in field.iter().enumerate() {
            let n = poisson_count(z.exp() * hx * hy, rng);
            let (cx, cy) = self.cell_centre(k);
            for _ in 0..n {
                let x = cx + hx * (rng.random::<f64>() - 0.5);
                let y = cy + hy * (rng.random::<f64>() - 0.5);
                pts.push(Point::new(
                    x.clamp(self.window.xmin(), self.window.xmax()),
                    y.clamp(self.window.ymin(), self.window.ymax()),
                ));
            }
        }
        pts
    }
}

fn cell_centre(w: &Window, n: usize, k: usize) -> (f64, f64) {
    let (iy, ix) = (k / n, k % n);
    (
        w.xmin() + (ix as f64 + 0.5) * w.width() / n as f64,
        w.ymin() + (iy as f64 + 0.5) * w.height() / n as f64,
    )
}

fn cholesky(tau2: f64, scale: f64, n: usize, w: &Window) -> Result<Vec<f64>> {
    let m = n * n;
    let centres: Vec<(f64, f64)> = (0..m).map(|k| cell_centre(w, n, k)).collect();
    let mut jitter = 0.0;
    for _ in 0..6 {
        let cov = Mat::<f64>::from_fn(m, m, |i, j| {
            let (a, b) = (centres[i], centres[j]);
            let d = (a.0 - b.0).hypot(a.1 - b.1);
            tau2 * (-d / scale).exp() + if i == j { jitter } else { 0.0 }
        });
        match cov.llt(Side::Lower) {
            Ok(llt) => {
                let l = llt.L();
                let mut packed = Vec::with_capacity(m * (m + 1) / 2);
                for i in 0..m {
                    for j in 0..=i {
                        packed.push(l[(i, j)]);
                    }
                }
                return Ok(packed);
            }
            Err(_) => {
                log::warn!("LGCP covariance not positive definite, adding jitter");
                jitter = if jitter == 0.0 { JITTER } else { jitter * 100.0 };
            }
        }
    }
    Err(Error::Factorization(format!(
        "exponential covariance on a {n}x{n} grid is not positive definite"
    )))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::rng;

    fn sq10() -> Window {
        Window::square(10.0).unwrap()
    }

    fn mean_count(field: &LgcpField, draws: u64, offset: u64) -> (f64, f64) {
        let c: Vec<f64> = (0..draws).map(|s| field.draw(&mut rng(offset + s)).len() as f64).collect();
        let m = c.iter().sum::<f64>() / draws as f64;
        let v = c.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (draws - 1) as f64;
        (m, v / draws as f64)
    }

    #[test]
    fn degenerate_field_is_homogeneous_poisson() {
        let f = LgcpField::new(0.5f64.ln(), 0.0, 1.0, 16, sq10()).unwrap();
        let (m, se2) = mean_count(&f, 2000, 0);
        assert!((m - 50.0).abs() < 4.0 * (50.0f64 / 2000.0).sqrt(), "{m}");
        assert!((se2 * 2000.0 / 50.0 - 1.0).abs() < 0.15, "variance ratio");
    }

    #[test]
    fn field_has_target_covariance() {
        let f = LgcpField::new(0.0, 0.8, 2.0, 16, sq10()).unwrap();
        let fields: Vec<Vec<f64>> = (0..3000).map(|s| f.draw_field(&mut rng(s))).collect();
        let var0 = fields.iter().map(|z| z[0] * z[0]).sum::<f64>() / 3000.0;
        let cov01 = fields.iter().map(|z| z[0] * z[1]).sum::<f64>() / 3000.0;
        let d = 10.0 / 16.0;
        assert!((var0 - 0.8).abs() < 0.08, "{var0}");
        assert!((cov01 - 0.8 * (-d / 2.0f64).exp()).abs() < 0.08, "{cov01}");
    }

    #[test]
    fn mean_count_is_lognormal_mean() {
        let (mu, tau2) = (-1.0, 0.5);
        let f = LgcpField::new(mu, tau2, 1.5, 16, sq10()).unwrap();
        let (m, se2) = mean_count(&f, 2000, 0);
        let expect = (mu + tau2 / 2.0f64).exp() * 100.0;
        assert!((m - expect).abs() < 4.0 * se2.sqrt(), "{m} vs {expect}");
    }

    #[test]
    fn resolutions_agree_on_mean_count() {
        let a = LgcpField::new(-1.0, 0.5, 1.5, 16, sq10()).unwrap();
        let b = LgcpField::new(-1.0, 0.5, 1.5, 32, sq10()).unwrap();
        let (ma, va) = mean_count(&a, 1000, 0);
        let (mb, vb) = mean_count(&b, 1000, 50_000);
        assert!((ma - mb).abs() < 4.0 * (va + vb).sqrt(), "{ma} vs {mb}");
    }

    #[test]
    fn rejects_coarse_grid() {
        assert!(LgcpField::new(0.0, 1.0, 1.0, 8, sq10()).is_err());
    }
}

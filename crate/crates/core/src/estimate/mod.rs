//! Summary-statistic estimators: kernel intensity, Ripley's K and the
//! empty-space function F.

mod ffun;
mod field;
mod kfun;
mod spatial;

use serde::{Deserialize, Serialize};

pub use ffun::{default_probe_spacing, f_hat, f_hat_with, poisson_f, Erosion};
pub use field::{
    default_bandwidth, edge_correction, kernel_intensity, kernel_intensity_at_points, IntensityField, PixelGrid,
};
pub use kfun::{k_hat, k_hat_diagnostics, k_hat_plugin, KDiagnostics, KPlugin, LambdaSource, LAMBDA_FLOOR};

use crate::error::{Error, Result};
use crate::geometry::{RGrid, Window};

/// Values of a summary statistic on a distance grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Curve {
    grid: RGrid,
    values: Vec<f64>,
}

impl Curve {
    pub fn new(grid: RGrid, values: Vec<f64>) -> Result<Self> {
        if values.len() != grid.len() {
            return Err(Error::GridMismatch(format!(
                "{} values for a grid of {}",
                values.len(),
                grid.len()
            )));
        }
        Ok(Curve { grid, values })
    }

    pub fn zeros(grid: RGrid) -> Self {
        let values = vec![0.0; grid.len()];
        Curve { grid, values }
    }

    pub fn grid(&self) -> &RGrid {
        &self.grid
    }

    pub fn r(&self) -> &[f64] {
        self.grid.values()
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }
}

/// Pointwise mean of curves sharing one grid.
pub fn mean_curve(curves: &[Curve]) -> Result<Curve> {
    let first = curves.first().ok_or_else(|| Error::Empty("curve list".into()))?;
    if let Some(bad) = curves.iter().find(|c| c.grid.values() != first.grid.values()) {
        return Err(Error::GridMismatch(format!(
            "curves on grids of length {} and {}",
            first.grid.len(),
            bad.grid.len()
        )));
    }
    let n = curves.len() as f64;
    let values = (0..first.values.len())
        .map(|k| curves.iter().map(|c| c.values[k]).sum::<f64>() / n)
        .collect();
    Curve::new(first.grid.clone(), values)
}

/// Default upper integration limit for K-type scores: a quarter of the
/// shorter window side.
pub fn default_upper_r(window: &Window) -> f64 {
    window.min_side() / 4.0
}

#[cfg(test)]
mod tests {
    use super::*;

    fn grid() -> RGrid {
        RGrid::uniform(1.0, 4).unwrap()
    }

    #[test]
    fn mean_of_one_curve_is_itself() {
        let c = Curve::new(grid(), vec![1.0, 3.0, 2.0, 5.0]).unwrap();
        assert_eq!(mean_curve(std::slice::from_ref(&c)).unwrap(), c);
    }

    #[test]
    fn mean_of_zero_and_two_is_one() {
        let a = Curve::zeros(grid());
        let b = Curve::new(grid(), vec![2.0; 4]).unwrap();
        assert_eq!(mean_curve(&[a, b]).unwrap().values(), &[1.0; 4]);
    }

    #[test]
    fn mean_is_order_independent() {
        let cs: Vec<Curve> = (0..5)
            .map(|k| Curve::new(grid(), vec![k as f64, 0.5, 2.0 * k as f64, 1.0]).unwrap())
            .collect();
        let mut rev = cs.clone();
        rev.reverse();
        assert_eq!(mean_curve(&cs).unwrap(), mean_curve(&rev).unwrap());
    }

    #[test]
    fn rejects_mismatched_grids() {
        let a = Curve::zeros(grid());
        let b = Curve::zeros(RGrid::uniform(2.0, 4).unwrap());
        assert!(mean_curve(&[a, b]).is_err());
        assert!(mean_curve(&[]).is_err());
        assert!(Curve::new(grid(), vec![1.0]).is_err());
    }
}

use crate::error::{Error, Result};
use crate::estimate::{f_hat_with, mean_curve, poisson_f, Curve, Erosion};
use crate::geometry::{PointPattern, RGrid, Window};
use crate::simulate::ModelSpec;

/// `∫ (a(r) - b(r))² w(r) dr` by the trapezoid rule on the shared grid.
pub fn se_score(observed: &Curve, reference: &Curve) -> Result<f64> {
    if observed.r() != reference.r() {
        return Err(Error::GridMismatch("curves on different distance grids".into()));
    }
    let q = observed.grid().quadrature();
    Ok(observed
        .values()
        .iter()
        .zip(reference.values())
        .zip(&q)
        .map(|((a, b), w)| w * (a - b).powi(2))
        .sum())
}

/// Empty-space function of a homogeneous Poisson process on `grid`.
pub fn f_reference_poisson(grid: &RGrid, lambda: f64) -> Curve {
    let values = grid.values().iter().map(|&r| poisson_f(lambda, r)).collect();
    Curve::new(grid.clone(), values).expect("one value per node")
}

/// Monte-Carlo mean of F̂ over `n` draws of `model`.
pub fn f_reference_mc(
    model: &ModelSpec,
    window: &Window,
    grid: &RGrid,
    probe_spacing: Option<f64>,
    n: usize,
    seed: u64,
) -> Result<Curve> {
    let draws = model.prepare(window)?.draw_many(n, seed)?;
    let curves: Vec<Curve> = draws
        .iter()
        .map(|d| f_hat_with(d, grid, probe_spacing, Erosion::PerRadius))
        .collect::<Result<_>>()?;
    mean_curve(&curves)
}

/// Squared-error F score of `y` against a reference curve.
pub fn f_function_se_score(y: &PointPattern, reference: &Curve, probe_spacing: Option<f64>) -> Result<f64> {
    let observed = f_hat_with(y, reference.grid(), probe_spacing, Erosion::PerRadius)?;
    se_score(&observed, reference)
}

//! Scores for Poisson forecasts with a known intensity. The log score uses
//! the density with respect to the unit-rate Poisson process, so it is
//! defined up to an additive constant; rankings and paired tests are
//! unaffected.

use crate::error::{invalid, Result};
use crate::geometry::{PointPattern, Window};
use crate::intensity::IntensityFn;

/// A Poisson forecast with its intensity mass over the window precomputed.
#[derive(Debug, Clone, PartialEq)]
pub struct PoissonForecast {
    intensity: IntensityFn,
    window: Window,
    mass: f64,
}

impl PoissonForecast {
    pub fn new(intensity: IntensityFn, window: &Window) -> Result<Self> {
        intensity.validate()?;
        let mass = intensity.integral(window);
        Ok(PoissonForecast {
            intensity,
            window: *window,
            mass,
        })
    }

    pub fn intensity(&self) -> &IntensityFn {
        &self.intensity
    }

    /// `∫_W λ`.
    pub fn mass(&self) -> f64 {
        self.mass
    }

    fn log_sum(&self, y: &PointPattern) -> f64 {
        let mut acc = 0.0;
        for p in y.points() {
            let l = self.intensity.eval(p.x, p.y);
            if !(l > 0.0) {
                return f64::NEG_INFINITY;
            }
            acc += l.ln();
        }
        acc
    }

    /// `-Σ log λ(yᵢ) + ∫_W λ`; infinite when λ vanishes at an observed point.
    pub fn log_score(&self, y: &PointPattern) -> f64 {
        debug_assert_eq!(*y.window(), self.window);
        -self.log_sum(y) + self.mass
    }

    /// `-Σ log(λ(yᵢ)/|Λ|) + c(|Λ| - n)²` with `|Λ| = ∫_W λ`: the log score of
    /// the normalised intensity as a location density plus a quadratic
    /// penalty on the expected count.
    pub fn brehmer_score(&self, y: &PointPattern, c: f64) -> Result<f64> {
        if !(c > 0.0) {
            return Err(invalid(format!("Brehmer penalty c = {c} must be positive")));
        }
        let n = y.len() as f64;
        let location = if n > 0.0 { n * self.mass.ln() } else { 0.0 };
        Ok(-self.log_sum(y) + location + c * (self.mass - n).powi(2))
    }
}

pub fn log_score_poisson(y: &PointPattern, intensity: &IntensityFn) -> Result<f64> {
    Ok(PoissonForecast::new(intensity.clone(), y.window())?.log_score(y))
}

pub fn brehmer_intensity_score(y: &PointPattern, intensity: &IntensityFn, c: f64) -> Result<f64> {
    PoissonForecast::new(intensity.clone(), y.window())?.brehmer_score(y, c)
}

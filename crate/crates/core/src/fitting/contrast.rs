use argmin::core::{CostFunction, Executor, State, TerminationReason, TerminationStatus};
use argmin::solver::neldermead::NelderMead;
use serde::{Deserialize, Serialize};

use super::family::{model_k_with, Family, KMode, Theta};
use crate::error::{invalid, Error, Result};
use crate::estimate::Curve;
use crate::geometry::RGrid;

/// Minimum-contrast problem: `∫₀^{r_max} (K̂(r)^p - K(r; θ)^p)² dr`,
/// discretised by the trapezoid rule on the grid nodes up to `r_max`.
#[derive(Debug, Clone, PartialEq)]
pub struct ContrastProblem {
    family: Family,
    grid: RGrid,
    target: Vec<f64>,
    exponent: f64,
    mode: KMode,
    bounds: Option<(Vec<f64>, Vec<f64>)>,
}

impl ContrastProblem {
    pub fn new(family: Family, k_emp: &Curve, r_max: f64) -> Result<Self> {
        Self::with_exponent(family, k_emp, r_max, 0.25)
    }

    pub fn with_exponent(family: Family, k_emp: &Curve, r_max: f64, exponent: f64) -> Result<Self> {
        if !(exponent > 0.0) {
            return Err(invalid(format!("contrast exponent {exponent} must be positive")));
        }
        if r_max > k_emp.grid().max() {
            return Err(invalid(format!(
                "r_max {r_max} exceeds the largest grid distance {}",
                k_emp.grid().max()
            )));
        }
        let keep = k_emp.r().iter().take_while(|&&r| r <= r_max).count();
        if keep < 2 {
            return Err(invalid("contrast needs at least two grid nodes below r_max"));
        }
        let grid = RGrid::new(k_emp.r()[..keep].to_vec(), k_emp.grid().weights()[..keep].to_vec())?;
        let target = k_emp.values()[..keep].iter().map(|v| v.max(0.0).powf(exponent)).collect();
        Ok(ContrastProblem {
            family,
            grid,
            target,
            exponent,
            mode: KMode::default(),
            bounds: None,
        })
    }

    pub fn with_mode(mut self, mode: KMode) -> Self {
        self.mode = mode;
        self
    }

    /// Box constraints on the unconstrained coordinates; the search treats
    /// points outside the box as infeasible.
    pub fn with_bounds(mut self, lower: Vec<f64>, upper: Vec<f64>) -> Result<Self> {
        let dim = Theta::from_unconstrained(self.family, &[0.0; 3]).to_unconstrained().len();
        if lower.len() != dim || upper.len() != dim || lower.iter().zip(&upper).any(|(l, u)| !(l < u)) {
            return Err(invalid(format!("bounds for {} need {dim} increasing pairs", self.family)));
        }
        self.bounds = Some((lower, upper));
        Ok(self)
    }

    fn in_bounds(&self, x: &[f64]) -> bool {
        match &self.bounds {
            None => true,
            Some((lo, hi)) => x.iter().zip(lo.iter().zip(hi)).all(|(v, (l, h))| v >= l && v <= h),
        }
    }

    pub fn family(&self) -> Family {
        self.family
    }

    pub fn objective(&self, theta: &Theta) -> Result<f64> {
        if theta.family() != self.family {
            return Err(invalid(format!("{:?} parameters for a {} fit", theta, self.family)));
        }
        let k = model_k_with(theta, &self.grid, self.mode)?;
        Ok(self
            .grid
            .quadrature()
            .iter()
            .zip(k.values())
            .zip(&self.target)
            .map(|((q, m), t)| q * (m.max(0.0).powf(self.exponent) - t).powi(2))
            .sum())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitResult {
    pub theta: Theta,
    pub objective: f64,
    pub converged: bool,
    pub iterations: u64,
}

struct Cost<'a>(&'a ContrastProblem);

impl CostFunction for Cost<'_> {
    type Param = Vec<f64>;
    type Output = f64;

    fn cost(&self, x: &Self::Param) -> std::result::Result<f64, argmin::core::Error> {
        if x.iter().any(|v| !v.is_finite() || v.abs() > 50.0) || !self.0.in_bounds(x) {
            return Ok(f64::INFINITY);
        }
        let theta = Theta::from_unconstrained(self.0.family, x);
        Ok(self.0.objective(&theta).unwrap_or(f64::INFINITY))
    }
}

/// Log-space step of the initial simplex.
const SIMPLEX_STEP: f64 = 0.4;
/// Offsets of the restarts from the initial point in log space.
const RESTART_SHIFTS: [f64; 3] = [0.0, 0.7, -0.7];

fn simplex_run(problem: &ContrastProblem, x0: &[f64], budget: u64) -> Result<(Vec<f64>, f64, bool, u64)> {
    let mut simplex = vec![x0.to_vec()];
    for i in 0..x0.len() {
        let mut v = x0.to_vec();
        v[i] += SIMPLEX_STEP;
        simplex.push(v);
    }
    let solver = NelderMead::new(simplex)
        .with_sd_tolerance(1e-15)
        .map_err(|e| Error::InvalidParameter(e.to_string()))?;
    let res = Executor::new(Cost(problem), solver)
        .configure(|s| s.max_iters(budget))
        .run()
        .map_err(|e| Error::InvalidParameter(format!("simplex failed: {e}")))?;
    let state = res.state();
    let best = state.get_best_param().cloned().unwrap_or_else(|| x0.to_vec());
    let converged = matches!(
        state.get_termination_status(),
        TerminationStatus::Terminated(TerminationReason::SolverConverged)
    );
    Ok((best, state.get_best_cost(), converged, state.get_iter()))
}

/// Simplex minimisation of the contrast in unconstrained coordinates, from
/// `init` and two shifted copies of it, followed by a polishing restart
/// from the best point. `budget` bounds the iterations of each run.
pub fn fit_min_contrast(problem: &ContrastProblem, init: &Theta, budget: u64) -> Result<FitResult> {
    init.validate()?;
    if init.family() != problem.family {
        return Err(invalid(format!("{init:?} does not start a {} fit", problem.family)));
    }
    let x0 = init.to_unconstrained();
    if !problem.in_bounds(&x0) {
        return Err(invalid(format!("initial value {init:?} lies outside the search bounds")));
    }
    if x0.is_empty() {
        return Ok(FitResult {
            theta: *init,
            objective: problem.objective(init)?,
            converged: true,
            iterations: 0,
        });
    }
    let mut best: Option<(Vec<f64>, f64)> = None;
    let mut iterations = 0;
    for (k, shift) in RESTART_SHIFTS.iter().enumerate() {
        let start: Vec<f64> = x0
            .iter()
            .enumerate()
            .map(|(i, v)| {
                let v = v + if (i + k) % 2 == 0 { *shift } else { -shift };
                match &problem.bounds {
                    Some((lo, hi)) => v.clamp(lo[i], hi[i]),
                    None => v,
                }
            })
            .collect();
        let (x, cost, _, it) = simplex_run(problem, &start, budget)?;
        iterations += it;
        if best.as_ref().is_none_or(|(_, c)| cost < *c) {
            best = Some((x, cost));
        }
    }
    let (x, _) = best.expect("at least one restart");
    let (x, cost, converged, it) = simplex_run(problem, &x, budget)?;
    iterations += it;
    if !converged {
        log::warn!("{} contrast fit stopped at the iteration budget", problem.family);
    }
    Ok(FitResult {
        theta: Theta::from_unconstrained(problem.family, &x),
        objective: cost,
        converged,
        iterations,
    })
}

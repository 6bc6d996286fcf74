use rand::Rng as _;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};
use crate::geometry::{Point, PointPattern, Window};
use crate::intensity::uniform_point;
use crate::rng::rng;

/// Birth–death Metropolis–Hastings settings.
///
/// `burn_in` counts proposals; unset means `10 * ceil(beta * area)`.
/// Birth and death are proposed with probability 1/2 each.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct McmcConfig {
    #[serde(default)]
    pub burn_in: Option<u64>,
}

impl McmcConfig {
    pub fn validate(&self) -> Result<()> {
        match self.burn_in {
            Some(0) => Err(invalid("burn-in must be at least 1")),
            _ => Ok(()),
        }
    }

    pub fn proposals(&self, beta: f64, window: &Window) -> u64 {
        self.burn_in
            .unwrap_or_else(|| 10 * (beta * window.area()).ceil().max(1.0) as u64)
    }
}

fn neighbours(points: &[Point], u: &Point, range: f64, skip: Option<usize>) -> i32 {
    let r2 = range * range;
    points
        .iter()
        .enumerate()
        .filter(|(i, p)| Some(*i) != skip && (p.x - u.x).powi(2) + (p.y - u.y).powi(2) < r2)
        .count() as i32
}

/// One draw from the Strauss process with density `∝ beta^n gamma^{s_R}`,
/// taken as the state of a birth–death chain started from the empty pattern.
pub fn sample_strauss(
    beta: f64,
    gamma: f64,
    range: f64,
    window: &Window,
    mcmc: &McmcConfig,
    seed: u64,
) -> Result<PointPattern> {
    if !(beta > 0.0) || !(range > 0.0) {
        return Err(invalid("Strauss needs beta > 0 and range > 0"));
    }
    if !(gamma > 0.0 && gamma <= 1.0) {
        return Err(invalid(format!("Strauss gamma {gamma} must lie in (0, 1]")));
    }
    mcmc.validate()?;
    let mut rng = rng(seed);
    let area = window.area();
    let mut pts: Vec<Point> = Vec::new();
    for _ in 0..mcmc.proposals(beta, window) {
        if rng.random::<bool>() {
            let u = uniform_point(window, &mut rng);
            let t = neighbours(&pts, &u, range, None);
            let ratio = beta * area * gamma.powi(t) / (pts.len() as f64 + 1.0);
            if rng.random::<f64>() < ratio {
                pts.push(u);
            }
        } else if !pts.is_empty() {
            let i = rng.random_range(0..pts.len());
            let t = neighbours(&pts, &pts[i], range, Some(i));
            let ratio = pts.len() as f64 / (beta * area * gamma.powi(t));
            if rng.random::<f64>() < ratio {
                pts.swap_remove(i);
            }
        }
    }
    Ok(PointPattern::from_trusted(pts, *window))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sq10() -> Window {
        Window::square(10.0).unwrap()
    }

    fn stats(draws: &[PointPattern], r: f64) -> (f64, f64, f64) {
        let n = draws.len() as f64;
        let counts: Vec<f64> = draws.iter().map(|p| p.len() as f64).collect();
        let m = counts.iter().sum::<f64>() / n;
        let v = counts.iter().map(|c| (c - m).powi(2)).sum::<f64>() / (n - 1.0);
        let s = draws.iter().map(|p| p.close_pairs(r) as f64).sum::<f64>() / n;
        (m, v, s)
    }

    #[test]
    fn gamma_one_is_poisson() {
        let draws: Vec<_> = (0..1000)
            .map(|s| sample_strauss(0.5, 1.0, 1.0, &sq10(), &McmcConfig::default(), s).unwrap())
            .collect();
        let (m, v, _) = stats(&draws, 1.0);
        let se = (50.0f64 / 1000.0).sqrt();
        assert!((m - 50.0).abs() < 4.0 * se, "mean {m}");
        assert!((v / 50.0 - 1.0).abs() < 0.15, "var {v}");
    }

    #[test]
    fn study_strauss_has_about_fifty_points_and_fewer_close_pairs() {
        let draws: Vec<_> = (0..1000)
            .map(|s| sample_strauss(1.15, 0.5, 1.0, &sq10(), &McmcConfig::default(), s).unwrap())
            .collect();
        let (m, _, s_str) = stats(&draws, 1.0);
        assert!((m - 50.0).abs() < 2.5, "mean count {m}");
        // Poisson with the same mean count: E[s_R] ≈ n(n-1)/2 * P(d < 1).
        let pois: Vec<_> = (0..1000)
            .map(|s| crate::simulate::sample_hom_poisson(m / 100.0, &sq10(), 50_000 + s).unwrap())
            .collect();
        let (_, _, s_pois) = stats(&pois, 1.0);
        assert!(s_str < s_pois, "{s_str} vs {s_pois}");
    }

    #[test]
    fn default_burn_in_matches_long_chain() {
        let long = McmcConfig { burn_in: Some(20_000) };
        let a: Vec<_> = (0..400)
            .map(|s| sample_strauss(1.15, 0.5, 1.0, &sq10(), &McmcConfig::default(), s).unwrap())
            .collect();
        let b: Vec<_> = (0..400)
            .map(|s| sample_strauss(1.15, 0.5, 1.0, &sq10(), &long, 7_000 + s).unwrap())
            .collect();
        let (ma, va, sa) = stats(&a, 1.0);
        let (mb, vb, sb) = stats(&b, 1.0);
        let se = ((va + vb) / 400.0).sqrt();
        assert!((ma - mb).abs() < 4.0 * se, "{ma} vs {mb}");
        assert!((sa - sb).abs() < 0.2 * sb.max(1.0), "{sa} vs {sb}");
    }

    #[test]
    fn rejects_gamma_above_one() {
        assert!(sample_strauss(1.0, 1.2, 1.0, &sq10(), &McmcConfig::default(), 0).is_err());
        assert!(McmcConfig { burn_in: Some(0) }.validate().is_err());
    }
}

use crate::error::{invalid, Error, Result};
use crate::geometry::{PointPattern, Window};
use crate::intensity::IntensityFn;

/// Sample correlation of the point coordinates, zero when undefined.
pub fn coordinate_correlation(pattern: &PointPattern) -> f64 {
    let pts = pattern.points();
    let n = pts.len() as f64;
    if pts.len() < 3 {
        return 0.0;
    }
    let mx = pts.iter().map(|p| p.x).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.y).sum::<f64>() / n;
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for p in pts {
        sxy += (p.x - mx) * (p.y - my);
        sxx += (p.x - mx).powi(2);
        syy += (p.y - my).powi(2);
    }
    if sxx <= 0.0 || syy <= 0.0 {
        return 0.0;
    }
    (sxy / (sxx * syy).sqrt()).clamp(-0.95, 0.95)
}

/// `alpha * mu_eta + (1 - alpha) * nu` on `window`.
///
/// `mu_eta` smooths `smoothing` with a Gaussian kernel of per-coordinate
/// standard deviation `eta` and the sample correlation of the smoothing
/// points, normalised to `total_count` over the window. `nu` is the flat
/// intensity `total_count / area`, so the result integrates to `total_count`.
pub fn build_mixture_intensity(
    smoothing: &PointPattern,
    alpha: f64,
    eta: f64,
    total_count: f64,
    window: &Window,
) -> Result<IntensityFn> {
    if !(0.0..=1.0).contains(&alpha) {
        return Err(invalid(format!("mixture weight {alpha} must lie in [0, 1]")));
    }
    if !(eta > 0.0) || !(total_count >= 0.0) {
        return Err(invalid("mixture needs eta > 0 and total_count >= 0"));
    }
    if smoothing.is_empty() {
        return Err(Error::Empty("smoothing catalog".into()));
    }
    let rho = coordinate_correlation(smoothing);
    let points = smoothing.points().iter().map(|p| [p.x, p.y]).collect();
    let smoothed = IntensityFn::kernel_smooth(points, [eta, eta], rho, total_count, *window)?;
    Ok(IntensityFn::Mixture {
        alpha,
        smoothed: Box::new(smoothed),
        nu_flat: total_count / window.area(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::Point;

    fn w() -> Window {
        Window::new(0.0, 20.0, 0.0, 10.0).unwrap()
    }

    fn pattern(pts: &[(f64, f64)]) -> PointPattern {
        PointPattern::new(pts.iter().map(|&(x, y)| Point::new(x, y)).collect(), w()).unwrap()
    }

    #[test]
    fn alpha_zero_is_flat() {
        let f = build_mixture_intensity(&pattern(&[(3.0, 4.0), (5.0, 5.0)]), 0.0, 1.0, 40.0, &w()).unwrap();
        for (x, y) in [(0.0, 0.0), (3.0, 4.0), (19.0, 9.0)] {
            assert!((f.eval(x, y) - 0.2).abs() < 1e-12);
        }
    }

    #[test]
    fn single_point_gives_one_bump() {
        let f = build_mixture_intensity(&pattern(&[(10.0, 5.0)]), 1.0, 1.5, 30.0, &w()).unwrap();
        let phi = |dx: f64, dy: f64| (-(dx * dx + dy * dy) / (2.0 * 1.5 * 1.5)).exp();
        let ratio = f.eval(11.0, 6.0) / f.eval(10.0, 5.0);
        assert!((ratio - phi(1.0, 1.0)).abs() < 1e-12);
    }

    #[test]
    fn integrates_to_total_count() {
        let p = pattern(&[(1.0, 1.0), (2.0, 9.0), (15.0, 3.0), (19.5, 0.5), (8.0, 8.0)]);
        for alpha in [0.0, 0.3, 1.0] {
            for eta in [0.3, 2.0, 6.0] {
                let f = build_mixture_intensity(&p, alpha, eta, 75.0, &w()).unwrap();
                let q = f.midpoint_integral(&w(), 600);
                assert!((q - 75.0).abs() < 0.05, "{alpha} {eta}: {q}");
            }
        }
    }

    #[test]
    fn empty_catalog_rejected() {
        assert!(build_mixture_intensity(&PointPattern::empty(w()), 0.5, 1.0, 10.0, &w()).is_err());
    }
}

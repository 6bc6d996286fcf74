//! Small numerical helpers shared by estimators and model K-functions.

use statrs::function::erf::erfc;

/// Standard normal CDF.
pub fn norm_cdf(z: f64) -> f64 {
    0.5 * erfc(-z / std::f64::consts::SQRT_2)
}

/// Standard normal density.
pub fn norm_pdf(z: f64) -> f64 {
    (-0.5 * z * z).exp() / (2.0 * std::f64::consts::PI).sqrt()
}

/// Composite Simpson rule on `[a, b]` with `panels` (rounded up to even) panels.
pub fn simpson(a: f64, b: f64, panels: usize, f: impl Fn(f64) -> f64) -> f64 {
    if b <= a {
        return 0.0;
    }
    let m = (panels.max(2) + 1) & !1;
    let h = (b - a) / m as f64;
    let mut acc = f(a) + f(b);
    for k in 1..m {
        let x = a + k as f64 * h;
        acc += if k % 2 == 1 { 4.0 } else { 2.0 } * f(x);
    }
    acc * h / 3.0
}

/// `∫_0^{r_k} f(s) ds` for each node of an increasing grid, accumulated
/// piecewise with Simpson's rule on each gap.
pub fn cumulative_integral(grid: &[f64], panels_per_gap: usize, f: impl Fn(f64) -> f64) -> Vec<f64> {
    let mut out = Vec::with_capacity(grid.len());
    let mut acc = 0.0;
    let mut prev = 0.0;
    for &r in grid {
        acc += simpson(prev, r, panels_per_gap, &f);
        out.push(acc);
        prev = r;
    }
    out
}

/// Probability that a bivariate normal with the given means, standard
/// deviations and correlation falls in `[x0, x1] x [y0, y1]`.
pub fn bivariate_normal_rect(
    mean: [f64; 2],
    sd: [f64; 2],
    rho: f64,
    x0: f64,
    x1: f64,
    y0: f64,
    y1: f64,
) -> f64 {
    let px = |a: f64, b: f64| norm_cdf((b - mean[0]) / sd[0]) - norm_cdf((a - mean[0]) / sd[0]);
    if rho == 0.0 {
        let py = norm_cdf((y1 - mean[1]) / sd[1]) - norm_cdf((y0 - mean[1]) / sd[1]);
        return px(x0, x1) * py;
    }
    // Integrate the x-marginal against the conditional y-probability.
    let lo = x0.max(mean[0] - 9.0 * sd[0]);
    let hi = x1.min(mean[0] + 9.0 * sd[0]);
    if hi <= lo {
        return 0.0;
    }
    let cond_sd = sd[1] * (1.0 - rho * rho).sqrt();
    let integrand = |x: f64| {
        let zx = (x - mean[0]) / sd[0];
        let m = mean[1] + rho * sd[1] * zx;
        let py = norm_cdf((y1 - m) / cond_sd) - norm_cdf((y0 - m) / cond_sd);
        norm_pdf(zx) / sd[0] * py
    };
    simpson(lo, hi, 400, integrand).clamp(0.0, 1.0)
}

/// Correlated bivariate normal density with zero mean.
pub fn bivariate_normal_pdf(dx: f64, dy: f64, sd: [f64; 2], rho: f64) -> f64 {
    let zx = dx / sd[0];
    let zy = dy / sd[1];
    let one_m = 1.0 - rho * rho;
    let q = (zx * zx - 2.0 * rho * zx * zy + zy * zy) / one_m;
    (-0.5 * q).exp() / (2.0 * std::f64::consts::PI * sd[0] * sd[1] * one_m.sqrt())
}

/// `E[f(V)]` for `V ~ Gamma(shape, scale)`, by Simpson's rule in `log V`.
/// The weights are renormalised, so the result is exact for constant `f`.
pub fn gamma_expectation(shape: f64, scale: f64, f: impl Fn(f64) -> f64) -> f64 {
    let a = shape;
    let lo = a.ln() - 1.0 - 40.0 / a;
    let hi = (4.0 * a + 60.0).ln();
    let m = 800;
    let h = (hi - lo) / m as f64;
    let peak = a * a.ln() - a;
    let (mut num, mut den) = (0.0, 0.0);
    for k in 0..=m {
        let u = lo + k as f64 * h;
        let c = if k == 0 || k == m {
            1.0
        } else if k % 2 == 1 {
            4.0
        } else {
            2.0
        };
        let w = c * (a * u - u.exp() - peak).exp();
        num += w * f(scale * u.exp());
        den += w;
    }
    num / den
}

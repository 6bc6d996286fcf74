//! Rectangular observation windows, point patterns and distance grids.
//!
//! Every edge correction used by the estimators has a closed form on an
//! axis-aligned rectangle, which is the only window shape supported.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Axis-aligned rectangle `[xmin, xmax] x [ymin, ymax]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawWindow", into = "RawWindow")]
pub struct Window {
    xmin: f64,
    xmax: f64,
    ymin: f64,
    ymax: f64,
}

#[derive(Serialize, Deserialize)]
struct RawWindow {
    xmin: f64,
    xmax: f64,
    ymin: f64,
    ymax: f64,
}

impl TryFrom<RawWindow> for Window {
    type Error = Error;

    fn try_from(raw: RawWindow) -> Result<Self> {
        Window::new(raw.xmin, raw.xmax, raw.ymin, raw.ymax)
    }
}

impl From<Window> for RawWindow {
    fn from(w: Window) -> Self {
        RawWindow {
            xmin: w.xmin,
            xmax: w.xmax,
            ymin: w.ymin,
            ymax: w.ymax,
        }
    }
}

impl Window {
    pub fn new(xmin: f64, xmax: f64, ymin: f64, ymax: f64) -> Result<Self> {
        let finite = [xmin, xmax, ymin, ymax].iter().all(|v| v.is_finite());
        if !finite || xmax <= xmin || ymax <= ymin {
            return Err(Error::InvalidWindow(format!(
                "[{xmin}, {xmax}] x [{ymin}, {ymax}]"
            )));
        }
        Ok(Window {
            xmin,
            xmax,
            ymin,
            ymax,
        })
    }

    /// The square `[0, side] x [0, side]`.
    pub fn square(side: f64) -> Result<Self> {
        Window::new(0.0, side, 0.0, side)
    }

    pub fn xmin(&self) -> f64 {
        self.xmin
    }
    pub fn xmax(&self) -> f64 {
        self.xmax
    }
    pub fn ymin(&self) -> f64 {
        self.ymin
    }
    pub fn ymax(&self) -> f64 {
        self.ymax
    }

    pub fn width(&self) -> f64 {
        self.xmax - self.xmin
    }

    pub fn height(&self) -> f64 {
        self.ymax - self.ymin
    }

    pub fn area(&self) -> f64 {
        self.width() * self.height()
    }

    pub fn min_side(&self) -> f64 {
        self.width().min(self.height())
    }

    pub fn diameter(&self) -> f64 {
        self.width().hypot(self.height())
    }

    /// Boundary-inclusive membership.
    pub fn contains(&self, x: f64, y: f64) -> bool {
        x >= self.xmin && x <= self.xmax && y >= self.ymin && y <= self.ymax
    }

    /// Area of `W ∩ (W + (dx, dy))`.
    pub fn translation_overlap(&self, dx: f64, dy: f64) -> f64 {
        let ox = (self.width() - dx.abs()).max(0.0);
        let oy = (self.height() - dy.abs()).max(0.0);
        ox * oy
    }

    /// The set of locations whose closed disc of radius `r` lies in the window.
    /// `None` once `2r` reaches a side length.
    pub fn erode(&self, r: f64) -> Option<Window> {
        assert!(r >= 0.0, "erosion radius must be non-negative");
        if 2.0 * r >= self.width() || 2.0 * r >= self.height() {
            return None;
        }
        Some(Window {
            xmin: self.xmin + r,
            xmax: self.xmax - r,
            ymin: self.ymin + r,
            ymax: self.ymax - r,
        })
    }

    /// Grows the window by `b` on every side.
    pub fn dilate(&self, b: f64) -> Window {
        assert!(b >= 0.0, "dilation must be non-negative");
        Window {
            xmin: self.xmin - b,
            xmax: self.xmax + b,
            ymin: self.ymin - b,
            ymax: self.ymax + b,
        }
    }

    pub fn shifted(&self, dx: f64, dy: f64) -> Window {
        Window {
            xmin: self.xmin + dx,
            xmax: self.xmax + dx,
            ymin: self.ymin + dy,
            ymax: self.ymax + dy,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Point {
    pub x: f64,
    pub y: f64,
}

impl Point {
    pub fn new(x: f64, y: f64) -> Self {
        Point { x, y }
    }

    pub fn dist(&self, other: &Point) -> f64 {
        (self.x - other.x).hypot(self.y - other.y)
    }
}

/// Finite set of locations observed in a window.
#[derive(Debug, Clone, PartialEq)]
pub struct PointPattern {
    points: Vec<Point>,
    window: Window,
}

/// Result of [`PointPattern::validate`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct PatternCheck {
    /// Number of points that repeat an earlier location exactly.
    pub duplicates: usize,
}

impl PatternCheck {
    pub fn is_clean(&self) -> bool {
        self.duplicates == 0
    }
}

impl PointPattern {
    pub fn new(points: Vec<Point>, window: Window) -> Result<Self> {
        if let Some(p) = points.iter().find(|p| !window.contains(p.x, p.y)) {
            return Err(Error::PointOutsideWindow { x: p.x, y: p.y });
        }
        Ok(PointPattern { points, window })
    }

    pub fn empty(window: Window) -> Self {
        PointPattern {
            points: Vec::new(),
            window,
        }
    }

    /// Builds a pattern from points already known to lie in `window`.
    pub(crate) fn from_trusted(points: Vec<Point>, window: Window) -> Self {
        debug_assert!(points.iter().all(|p| window.contains(p.x, p.y)));
        PointPattern { points, window }
    }

    pub fn points(&self) -> &[Point] {
        &self.points
    }

    pub fn window(&self) -> &Window {
        &self.window
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn into_points(self) -> Vec<Point> {
        self.points
    }

    /// Reports exact duplicate locations. Duplicates are legal.
    pub fn validate(&self) -> PatternCheck {
        let mut keys: Vec<(u64, u64)> = self
            .points
            .iter()
            .map(|p| (p.x.to_bits(), p.y.to_bits()))
            .collect();
        keys.sort_unstable();
        let duplicates = keys.windows(2).filter(|w| w[0] == w[1]).count();
        PatternCheck { duplicates }
    }

    /// Distances of all unordered pairs, in `(i, j)` order with `i < j`.
    pub fn pairwise_distances(&self) -> Vec<f64> {
        let n = self.points.len();
        let mut out = Vec::with_capacity(n * n.saturating_sub(1) / 2);
        for i in 0..n {
            for j in (i + 1)..n {
                out.push(self.points[i].dist(&self.points[j]));
            }
        }
        out
    }

    /// Number of unordered pairs closer than `r`.
    pub fn close_pairs(&self, r: f64) -> usize {
        self.pairwise_distances().iter().filter(|&&d| d < r).count()
    }

    /// Translates the pattern and its window together.
    pub fn shifted(&self, dx: f64, dy: f64) -> PointPattern {
        PointPattern {
            points: self
                .points
                .iter()
                .map(|p| Point::new(p.x + dx, p.y + dy))
                .collect(),
            window: self.window.shifted(dx, dy),
        }
    }

    /// Points of `self` that fall inside `window`, re-windowed.
    pub fn restrict(&self, window: Window) -> PointPattern {
        PointPattern {
            points: self
                .points
                .iter()
                .copied()
                .filter(|p| window.contains(p.x, p.y))
                .collect(),
            window,
        }
    }
}

/// Distance grid with integration weights `w(r)` at each node.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RGrid {
    values: Vec<f64>,
    weights: Vec<f64>,
}

impl RGrid {
    pub fn new(values: Vec<f64>, weights: Vec<f64>) -> Result<Self> {
        if values.is_empty() {
            return Err(Error::Empty("distance grid".into()));
        }
        if values.len() != weights.len() {
            return Err(Error::GridMismatch(format!(
                "{} grid values but {} weights",
                values.len(),
                weights.len()
            )));
        }
        if values[0] < 0.0 || values.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::InvalidParameter(
                "grid values must be non-negative and strictly increasing".into(),
            ));
        }
        if weights.iter().any(|w| !(*w >= 0.0)) {
            return Err(Error::InvalidParameter("grid weights must be non-negative".into()));
        }
        Ok(RGrid { values, weights })
    }

    /// `n` equally spaced nodes `upper * k / n`, `k = 1..=n`, with unit weight.
    pub fn uniform(upper: f64, n: usize) -> Result<Self> {
        if !(upper > 0.0) || n == 0 {
            return Err(Error::InvalidParameter(format!(
                "uniform grid needs upper > 0 and n >= 1 (got {upper}, {n})"
            )));
        }
        let values = (1..=n).map(|k| upper * k as f64 / n as f64).collect();
        RGrid::new(values, vec![1.0; n])
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn max(&self) -> f64 {
        *self.values.last().expect("grid is never empty")
    }

    pub fn with_weights(&self, weights: Vec<f64>) -> Result<Self> {
        RGrid::new(self.values.clone(), weights)
    }

    /// Trapezoid-rule coefficients multiplied by `w(r)`, so that
    /// `sum(q[k] * f(r_k)) ≈ ∫ f(r) w(r) dr` over `[r_0, r_max]`.
    pub fn quadrature(&self) -> Vec<f64> {
        let r = &self.values;
        let n = r.len();
        let mut q = vec![0.0; n];
        for k in 0..n.saturating_sub(1) {
            let h = 0.5 * (r[k + 1] - r[k]);
            q[k] += h;
            q[k + 1] += h;
        }
        q.iter_mut().zip(&self.weights).for_each(|(q, w)| *q *= w);
        q
    }
}

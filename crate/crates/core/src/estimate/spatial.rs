//! Uniform bucket grid for fixed-radius neighbour queries.

use crate::geometry::{Point, Window};

const MAX_CELLS_PER_SIDE: usize = 512;

pub(crate) struct CellIndex {
    xmin: f64,
    ymin: f64,
    hx: f64,
    hy: f64,
    nx: usize,
    ny: usize,
    cells: Vec<Vec<usize>>,
}

impl CellIndex {
    /// Buckets of side at least `radius` covering `window`.
    pub(crate) fn new(points: &[Point], window: &Window, radius: f64) -> Self {
        let cells_for = |len: f64| ((len / radius).floor() as usize).clamp(1, MAX_CELLS_PER_SIDE);
        let nx = cells_for(window.width());
        let ny = cells_for(window.height());
        let mut index = CellIndex {
            xmin: window.xmin(),
            ymin: window.ymin(),
            hx: window.width() / nx as f64,
            hy: window.height() / ny as f64,
            nx,
            ny,
            cells: vec![Vec::new(); nx * ny],
        };
        for (i, p) in points.iter().enumerate() {
            let (cx, cy) = index.cell_of(p.x, p.y);
            index.cells[cy * nx + cx].push(i);
        }
        index
    }

    fn cell_of(&self, x: f64, y: f64) -> (usize, usize) {
        let cx = (((x - self.xmin) / self.hx).floor().max(0.0) as usize).min(self.nx - 1);
        let cy = (((y - self.ymin) / self.hy).floor().max(0.0) as usize).min(self.ny - 1);
        (cx, cy)
    }

    fn neighbourhood(&self, cx: usize, cy: usize) -> impl Iterator<Item = &Vec<usize>> {
        let xs = cx.saturating_sub(1)..=(cx + 1).min(self.nx - 1);
        let ys = cy.saturating_sub(1)..=(cy + 1).min(self.ny - 1);
        ys.flat_map(move |y| xs.clone().map(move |x| &self.cells[y * self.nx + x]))
    }

    /// Distance from `(x, y)` to the nearest point if it is at most the
    /// index radius, `f64::INFINITY` otherwise. Points outside the window
    /// are treated as lying in the nearest boundary bucket.
    pub(crate) fn nearest_within(&self, points: &[Point], x: f64, y: f64, radius: f64) -> f64 {
        let (cx, cy) = self.cell_of(x, y);
        let mut best = f64::INFINITY;
        for cell in self.neighbourhood(cx, cy) {
            for &j in cell {
                let d = (points[j].x - x).hypot(points[j].y - y);
                if d < best {
                    best = d;
                }
            }
        }
        if best <= radius {
            best
        } else {
            f64::INFINITY
        }
    }

    /// Calls `f(i, j)` once for every unordered pair `i < j` that could be
    /// closer than the index radius, in a deterministic order.
    pub(crate) fn for_each_candidate_pair(&self, mut f: impl FnMut(usize, usize)) {
        for cy in 0..self.ny {
            for cx in 0..self.nx {
                let here = &self.cells[cy * self.nx + cx];
                for cell in self.neighbourhood(cx, cy) {
                    for &i in here {
                        for &j in cell {
                            if i < j {
                                f(i, j);
                            }
                        }
                    }
                }
            }
        }
    }
}

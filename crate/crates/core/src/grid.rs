//! Uniform sampling grids and the step-function controllers defined on them.
//!
//! A controller `u_m` is stored as one value per grid point. Off-grid
//! evaluation uses nearest-neighbour lookup (ties go to the lower index) and
//! clamps to the boundary values outside `[a, b]`, so every grid point owns the
//! cell `[y_i - h/2, y_i + h/2]` and the two end cells extend to infinity.

use std::ops::RangeInclusive;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Bounds and resolution of a grid, as written in configuration files.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridSpec {
    pub a: f64,
    pub b: f64,
    pub d: usize,
}

impl GridSpec {
    pub fn new(a: f64, b: f64, d: usize) -> Self {
        Self { a, b, d }
    }

    pub fn build(&self) -> Result<Grid> {
        Grid::new(self.a, self.b, self.d)
    }
}

/// Linearly spaced sample points `y_i = a + i * spacing`, `i = 0..d`.
#[derive(Debug, Clone, PartialEq)]
pub struct Grid {
    a: f64,
    b: f64,
    spacing: f64,
    points: Vec<f64>,
}

impl Grid {
    pub fn new(a: f64, b: f64, d: usize) -> Result<Self> {
        if !a.is_finite() || !b.is_finite() {
            return Err(Error::InvalidGrid(format!("bounds must be finite (got a={a}, b={b})")));
        }
        if a >= b {
            return Err(Error::InvalidGrid(format!("need a < b (got a={a}, b={b})")));
        }
        if d < 2 {
            return Err(Error::InvalidGrid(format!("grid.d must be at least 2 (got {d})")));
        }
        let spacing = (b - a) / (d - 1) as f64;
        let mut points: Vec<f64> = (0..d).map(|i| a + i as f64 * spacing).collect();
        points[d - 1] = b;
        Ok(Self { a, b, spacing, points })
    }

    pub fn lower(&self) -> f64 {
        self.a
    }

    pub fn upper(&self) -> f64 {
        self.b
    }

    pub fn spacing(&self) -> f64 {
        self.spacing
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    /// Always false: a grid has at least two points.
    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn points(&self) -> &[f64] {
        &self.points
    }

    pub fn point(&self, i: usize) -> f64 {
        self.points[i]
    }

    /// Index of the grid point nearest to `y`, clamped to the grid. Exact
    /// midpoints round toward the lower index.
    pub fn nearest_index(&self, y: f64) -> usize {
        let t = (y - self.a) / self.spacing;
        if !(t > 0.0) {
            // also catches NaN
            return 0;
        }
        let i = (t - 0.5).ceil();
        if i >= (self.len() - 1) as f64 {
            self.len() - 1
        } else {
            i as usize
        }
    }

    /// Contiguous index range `{i : |y_i - center| <= r}`, widened if needed so
    /// that it always contains the nearest index of `center`.
    pub fn window_indices(&self, center: f64, r: f64) -> Result<RangeInclusive<usize>> {
        if !(r > 0.0) || !r.is_finite() {
            return Err(Error::InvalidConfig(format!("window radius must be positive (got {r})")));
        }
        let c = self.nearest_index(center);
        let last = self.len() - 1;
        let mut lo = ((center - r - self.a) / self.spacing).ceil().max(0.0).min(last as f64) as usize;
        let mut hi = ((center + r - self.a) / self.spacing).floor().max(0.0).min(last as f64) as usize;
        // the float estimates can be off by one at the boundary
        while lo > 0 && (self.points[lo - 1] - center).abs() <= r {
            lo -= 1;
        }
        while lo < last && (self.points[lo] - center).abs() > r && self.points[lo] < center {
            lo += 1;
        }
        while hi < last && (self.points[hi + 1] - center).abs() <= r {
            hi += 1;
        }
        while hi > 0 && (self.points[hi] - center).abs() > r && self.points[hi] > center {
            hi -= 1;
        }
        Ok(lo.min(c)..=hi.max(c))
    }

    /// Lower and upper edge of the cell owned by point `i`; the end cells are
    /// unbounded.
    pub fn cell(&self, i: usize) -> (f64, f64) {
        let half = 0.5 * self.spacing;
        let lo = if i == 0 { f64::NEG_INFINITY } else { self.points[i] - half };
        let hi = if i + 1 == self.len() { f64::INFINITY } else { self.points[i] + half };
        (lo, hi)
    }
}

/// Step-function approximation of one controller.
#[derive(Debug, Clone, PartialEq)]
pub struct SampledController {
    grid: Grid,
    values: Vec<f64>,
}

impl SampledController {
    pub fn new(grid: Grid, values: Vec<f64>) -> Result<Self> {
        if values.len() != grid.len() {
            return Err(Error::InvalidController(format!(
                "expected {} values, got {}",
                grid.len(),
                values.len()
            )));
        }
        if let Some(i) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::InvalidController(format!("non-finite value at index {i}")));
        }
        Ok(Self { grid, values })
    }

    /// `u(y) = y` at every grid point.
    pub fn identity(grid: Grid) -> Self {
        let values = grid.points().to_vec();
        Self { grid, values }
    }

    pub fn constant(grid: Grid, c: f64) -> Self {
        let values = vec![c; grid.len()];
        Self { grid, values }
    }

    pub fn from_fn(grid: Grid, f: impl Fn(f64) -> f64) -> Self {
        let values = grid.points().iter().map(|&y| f(y)).collect();
        Self { grid, values }
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn eval(&self, y: f64) -> f64 {
        self.values[self.grid.nearest_index(y)]
    }

    /// Replace the stored values. Used by the solver at phase boundaries.
    pub(crate) fn set_values(&mut self, values: Vec<f64>) {
        debug_assert_eq!(values.len(), self.grid.len());
        self.values = values;
    }

}

/// One controller per stage, `U = {u_0, ..., u_{M-1}}`.
#[derive(Debug, Clone, PartialEq)]
pub struct ControllerSet {
    controllers: Vec<SampledController>,
}

impl ControllerSet {
    pub fn new(controllers: Vec<SampledController>) -> Self {
        Self { controllers }
    }

    pub fn identity(grids: &[Grid]) -> Self {
        Self::new(grids.iter().cloned().map(SampledController::identity).collect())
    }

    pub fn len(&self) -> usize {
        self.controllers.len()
    }

    pub fn is_empty(&self) -> bool {
        self.controllers.is_empty()
    }

    pub fn stage(&self, m: usize) -> &SampledController {
        &self.controllers[m]
    }

    pub(crate) fn stage_mut(&mut self, m: usize) -> &mut SampledController {
        &mut self.controllers[m]
    }

    pub fn iter(&self) -> impl Iterator<Item = &SampledController> {
        self.controllers.iter()
    }

    /// Copy of the set with stage `m` replaced by `values`.
    pub fn with_stage_values(&self, m: usize, values: Vec<f64>) -> Result<Self> {
        let mut out = self.clone();
        let grid = out.controllers[m].grid().clone();
        out.controllers[m] = SampledController::new(grid, values)?;
        Ok(out)
    }

    /// Check that stage count and grids match what a problem expects.
    pub fn check_conforms(&self, grids: &[Grid]) -> Result<()> {
        if self.len() != grids.len() {
            return Err(Error::InvalidController(format!(
                "expected {} controllers, got {}",
                grids.len(),
                self.len()
            )));
        }
        for (m, (c, g)) in self.controllers.iter().zip(grids).enumerate() {
            if c.grid() != g {
                return Err(Error::InvalidController(format!("controller {m} is not on the stage grid")));
            }
        }
        Ok(())
    }
}

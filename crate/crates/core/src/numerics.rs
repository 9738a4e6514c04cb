//! Densities, quadrature and finite differences.
//!
//! All sums run in ascending index order so that results do not depend on how
//! work is split between threads.

use std::f64::consts::PI;

use crate::error::{Error, Result};
use crate::grid::Grid;

/// Gaussian tails beyond this many standard deviations are dropped.
pub const GAUSSIAN_CUTOFF: f64 = 8.0;

const RECURRENCE_RESTART: usize = 32;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Density {
    Gaussian { mean: f64, std_dev: f64 },
    Uniform { lo: f64, hi: f64 },
}

impl Density {
    pub fn gaussian(mean: f64, std_dev: f64) -> Result<Self> {
        if !(std_dev > 0.0) || !std_dev.is_finite() || !mean.is_finite() {
            return Err(Error::InvalidConfig(format!("gaussian needs finite mean and sigma > 0 (got {mean}, {std_dev})")));
        }
        Ok(Density::Gaussian { mean, std_dev })
    }

    pub fn uniform(lo: f64, hi: f64) -> Result<Self> {
        if !(lo < hi) || !lo.is_finite() || !hi.is_finite() {
            return Err(Error::InvalidConfig(format!("uniform needs finite lo < hi (got {lo}, {hi})")));
        }
        Ok(Density::Uniform { lo, hi })
    }

    pub fn pdf(&self, x: f64) -> f64 {
        match *self {
            Density::Gaussian { mean, std_dev } => normal_pdf((x - mean) / std_dev) / std_dev,
            Density::Uniform { lo, hi } => {
                if (lo..=hi).contains(&x) {
                    1.0 / (hi - lo)
                } else {
                    0.0
                }
            }
        }
    }
}

/// Standard normal density.
#[inline]
pub fn normal_pdf(z: f64) -> f64 {
    (-0.5 * z * z).exp() / (2.0 * PI).sqrt()
}

/// Composite trapezoid rule on uniformly spaced samples. A single sample
/// integrates to zero.
pub fn trapezoid(samples: &[f64], spacing: f64) -> Result<f64> {
    if samples.is_empty() {
        return Err(Error::EmptyInput("trapezoid"));
    }
    if !(spacing > 0.0) {
        return Err(Error::InvalidConfig(format!("trapezoid spacing must be positive (got {spacing})")));
    }
    let n = samples.len();
    if n == 1 {
        return Ok(0.0);
    }
    let interior: f64 = samples[1..n - 1].iter().sum();
    Ok(spacing * (0.5 * samples[0] + interior + 0.5 * samples[n - 1]))
}

/// Central first difference `(f(u+h) - f(u-h)) / 2h`.
pub fn fd_first(f: impl Fn(f64) -> f64, u: f64, h: f64) -> Result<f64> {
    check_step(h)?;
    let (lo, hi) = (f(u - h), f(u + h));
    finite_or_err(lo, u - h)?;
    finite_or_err(hi, u + h)?;
    Ok((hi - lo) / (2.0 * h))
}

/// Central second difference `(f(u+h) - 2f(u) + f(u-h)) / h^2`.
pub fn fd_second(f: impl Fn(f64) -> f64, u: f64, h: f64) -> Result<f64> {
    check_step(h)?;
    let (lo, mid, hi) = (f(u - h), f(u), f(u + h));
    finite_or_err(lo, u - h)?;
    finite_or_err(mid, u)?;
    finite_or_err(hi, u + h)?;
    Ok((hi - 2.0 * mid + lo) / (h * h))
}

/// Both central differences from the same three evaluations.
pub fn fd_both(f: impl Fn(f64) -> f64, u: f64, h: f64) -> (f64, f64) {
    let (lo, mid, hi) = (f(u - h), f(u), f(u + h));
    ((hi - lo) / (2.0 * h), (hi - 2.0 * mid + lo) / (h * h))
}

fn check_step(h: f64) -> Result<()> {
    if h > 0.0 && h.is_finite() {
        Ok(())
    } else {
        Err(Error::InvalidConfig(format!("finite-difference step must be positive (got {h})")))
    }
}

fn finite_or_err(v: f64, u: f64) -> Result<()> {
    if v.is_finite() {
        Ok(())
    } else {
        Err(Error::NonFiniteFunction { u, value: v })
    }
}

/// `E[g(X)]` for `X ~ N(mean, std_dev^2)` by the trapezoid rule on `n` points
/// spanning `mean +- 8 std_dev`.
pub fn gaussian_expectation(mean: f64, std_dev: f64, n: usize, g: impl Fn(f64) -> f64) -> Result<f64> {
    let half = GAUSSIAN_CUTOFF * std_dev;
    let grid = Grid::new(mean - half, mean + half, n)?;
    let samples: Vec<f64> = grid
        .points()
        .iter()
        .map(|&x| normal_pdf((x - mean) / std_dev) / std_dev * g(x))
        .collect();
    trapezoid(&samples, grid.spacing())
}

/// Visits every grid point within `GAUSSIAN_CUTOFF` standard deviations of
/// `center` in ascending order, passing `spacing * pdf(y_j)` for the normal
/// density `N(center, sigma^2)`.
///
/// The weights are produced by a multiplicative recurrence (two products per
/// point) instead of one `exp` per point, restarted every
/// `RECURRENCE_RESTART` points.
#[inline]
pub fn for_each_gaussian_weight(grid: &Grid, center: f64, sigma: f64, mut f: impl FnMut(usize, f64)) {
    let s = grid.spacing();
    let last = grid.len() - 1;
    let reach = GAUSSIAN_CUTOFF * sigma;
    let lo_f = ((center - reach - grid.lower()) / s).ceil();
    let hi_f = ((center + reach - grid.lower()) / s).floor();
    if hi_f < 0.0 || lo_f > last as f64 {
        return;
    }
    let lo = lo_f.max(0.0) as usize;
    let hi = (hi_f as usize).min(last);
    let q = s / sigma;
    let norm = s / (sigma * (2.0 * PI).sqrt());
    let decay = (-q * q).exp();
    let (mut weight, mut ratio) = (0.0, 0.0);
    for j in lo..=hi {
        // re-anchor periodically so rounding in the products cannot build up
        if (j - lo).is_multiple_of(RECURRENCE_RESTART) {
            let t = (grid.lower() + j as f64 * s - center) / sigma;
            weight = (-0.5 * t * t).exp() * norm;
            ratio = (-t * q - 0.5 * q * q).exp();
        }
        f(j, weight);
        weight *= ratio;
        ratio *= decay;
    }
}

/// Standard normal upper tail `P(Z > z)`.
pub fn normal_sf(z: f64) -> f64 {
    0.5 * libm::erfc(z / std::f64::consts::SQRT_2)
}

/// Like [`for_each_gaussian_weight`], but the two unbounded end cells get
/// their exact tail probabilities, so the weights are the probabilities of
/// landing in each cell and mass beyond the grid is not lost.
#[inline]
pub fn for_each_gaussian_cell_mass(grid: &Grid, center: f64, sigma: f64, mut f: impl FnMut(usize, f64)) {
    let last = grid.len() - 1;
    let below = normal_sf((center - grid.cell(0).1) / sigma);
    if below > 0.0 {
        f(0, below);
    }
    for_each_gaussian_weight(grid, center, sigma, |j, w| {
        if j != 0 && j != last {
            f(j, w)
        }
    });
    let above = normal_sf((grid.cell(last).0 - center) / sigma);
    if above > 0.0 {
        f(last, above);
    }
}

/// Visits every grid cell that meets the interval `[lo, hi]` in ascending
/// order, passing the length of the intersection. The end cells extend to
/// infinity, so the lengths always sum to `hi - lo`.
#[inline]
pub fn for_each_cell_overlap(grid: &Grid, lo: f64, hi: f64, mut f: impl FnMut(usize, f64)) {
    debug_assert!(lo <= hi);
    let first = cell_index(grid, lo);
    let last = cell_index(grid, hi);
    for j in first..=last {
        let (c_lo, c_hi) = grid.cell(j);
        let len = hi.min(c_hi) - lo.max(c_lo);
        if len > 0.0 {
            f(j, len);
        }
    }
}

/// Index of the cell containing `x`, consistent with [`Grid::cell`] edges.
fn cell_index(grid: &Grid, x: f64) -> usize {
    let j = grid.nearest_index(x);
    // nearest_index and the cell edges may disagree by one ulp at a boundary
    let (lo, hi) = grid.cell(j);
    if x < lo && j > 0 {
        j - 1
    } else if x > hi && j + 1 < grid.len() {
        j + 1
    } else {
        j
    }
}

/// Antiderivative of a step function on a grid (nearest-neighbour cells, end
/// cells extended to infinity), for O(1) integrals over arbitrary intervals.
#[derive(Debug, Clone)]
pub struct StepIntegral {
    origin: f64,
    spacing: f64,
    prefix: Vec<f64>,
    values: Vec<f64>,
}

impl StepIntegral {
    pub fn new(grid: &Grid, values: impl IntoIterator<Item = f64>) -> Self {
        let values: Vec<f64> = values.into_iter().collect();
        debug_assert_eq!(values.len(), grid.len());
        let spacing = grid.spacing();
        let mut prefix = Vec::with_capacity(values.len());
        let mut acc = 0.0;
        for v in &values {
            prefix.push(acc);
            acc += spacing * v;
        }
        Self { origin: grid.lower() - 0.5 * spacing, spacing, prefix, values }
    }

    /// Integral from the left edge of the first bounded cell to `x`.
    #[inline]
    fn antiderivative(&self, x: f64) -> f64 {
        let t = (x - self.origin) / self.spacing;
        if t <= 0.0 {
            return self.values[0] * (x - self.origin);
        }
        let j = (t.floor() as usize).min(self.values.len() - 1);
        self.prefix[j] + self.values[j] * (x - (self.origin + j as f64 * self.spacing))
    }

    #[inline]
    pub fn integral(&self, lo: f64, hi: f64) -> f64 {
        self.antiderivative(hi) - self.antiderivative(lo)
    }
}

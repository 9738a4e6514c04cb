//! Witsenhausen's counterexample.
//!
//! `J = E[k^2 u_0(y_0)^2 + x_2^2]` with `x_0 ~ N(0, sigma^2)`, `y_0 = x_0`,
//! `x_1 = x_0 + u_0(y_0)`, `y_1 = x_1 + w`, `w ~ N(0, 1)`, `x_2 = x_1 - u_1(y_1)`.
//!
//! Both expectations are taken on the controller grids: the outer one over the
//! stage-0 grid (density of `x_0` at each point times the spacing) and the one
//! over `w` by the change of variables `w = y_1 - x_1`, which puts it on the
//! stage-1 grid. With that choice the double sum
//!
//! ```text
//! J = sum_i h0 f(y_i) [k^2 u0_i^2 + sum_j h1 phi(y1_j - x1_i) (x1_i - u1_j)^2]
//! ```
//!
//! where `h1 phi(y1_j - x)` at the two end cells is replaced by the exact
//! normal tail probability beyond the cell edge, matching the clamped
//! decoder, and each term is linear in each stored value's marginal cost:
//!
//! ```text
//! C_0(u, y)    = f(y) [k^2 u^2 + G(y + u)],   G(x) = sum_j h1 phi(y1_j - x) (x - u1_j)^2
//! C_1(u, y1_j) = sum_i h0 f(y_i) phi(y1_j - x1_i) (x1_i - u)^2
//! ```

use rand::RngCore;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{ControllerSet, Grid, GridSpec};
use crate::numerics::{for_each_gaussian_cell_mass, normal_pdf, GAUSSIAN_CUTOFF};
use crate::problem::{sum_contributions, MarginalCost, Problem};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct WitsenhausenParams {
    /// Control-cost weight.
    pub k: f64,
    /// Standard deviation of the initial state.
    pub sigma: f64,
}

impl Default for WitsenhausenParams {
    fn default() -> Self {
        Self { k: 0.2, sigma: 5.0 }
    }
}

impl WitsenhausenParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.k > 0.0 && self.k.is_finite()) {
            return Err(Error::InvalidConfig(format!("witsenhausen.k must be positive (got {})", self.k)));
        }
        if !(self.sigma > 0.0 && self.sigma.is_finite()) {
            return Err(Error::InvalidConfig(format!("witsenhausen.sigma must be positive (got {})", self.sigma)));
        }
        Ok(())
    }

    /// `[-25, 25]` for both stages, i.e. five standard deviations at sigma = 5.
    pub fn default_grids(&self, d: usize) -> Vec<GridSpec> {
        let half = 5.0 * self.sigma;
        vec![GridSpec::new(-half, half, d), GridSpec::new(-half, half, d)]
    }
}

#[derive(Debug, Clone)]
pub struct Witsenhausen {
    params: WitsenhausenParams,
    grids: Vec<Grid>,
    /// density of x_0 at each stage-0 grid point
    prior: Vec<f64>,
}

impl Witsenhausen {
    pub fn new(params: WitsenhausenParams, grids: Vec<Grid>) -> Result<Self> {
        params.validate()?;
        if grids.len() != 2 {
            return Err(Error::InvalidConfig(format!("witsenhausen has 2 stages, got {} grids", grids.len())));
        }
        let prior = grids[0].points().iter().map(|&y| normal_pdf(y / params.sigma) / params.sigma).collect();
        Ok(Self { params, grids, prior })
    }

    pub fn with_resolution(params: WitsenhausenParams, d: usize) -> Result<Self> {
        let grids = params.default_grids(d).iter().map(GridSpec::build).collect::<Result<_>>()?;
        Self::new(params, grids)
    }

    pub fn params(&self) -> &WitsenhausenParams {
        &self.params
    }

    fn prior_at(&self, y: f64) -> f64 {
        normal_pdf(y / self.params.sigma) / self.params.sigma
    }

    /// Weight of each stage-0 point in the outer expectation, rescaled so the
    /// stage-1 marginal cost is a density in `y_1`.
    fn stage1_weights(&self) -> impl Iterator<Item = f64> + '_ {
        let ratio = self.grids[0].spacing() / self.grids[1].spacing();
        self.prior.iter().map(move |f| f * ratio)
    }
}

/// `G(x) = E_w[(x - u_1(x + w))^2]` on the stage-1 grid.
#[inline]
fn decoding_error(grid1: &Grid, u1: &[f64], x: f64) -> f64 {
    let mut acc = 0.0;
    for_each_gaussian_cell_mass(grid1, x, 1.0, |j, w| {
        let e = x - u1[j];
        acc += w * e * e;
    });
    acc
}

impl Problem for Witsenhausen {
    fn name(&self) -> &'static str {
        "witsenhausen"
    }

    fn grids(&self) -> &[Grid] {
        &self.grids
    }

    fn objective(&self, controllers: &ControllerSet) -> Result<f64> {
        let k2 = self.params.k * self.params.k;
        let (g0, g1) = (&self.grids[0], &self.grids[1]);
        let u0 = controllers.stage(0).values();
        let u1 = controllers.stage(1).values();
        let terms: Vec<f64> = (0..g0.len())
            .into_par_iter()
            .map(|i| {
                let x1 = g0.point(i) + u0[i];
                g0.spacing() * self.prior[i] * (k2 * u0[i] * u0[i] + decoding_error(g1, u1, x1))
            })
            .collect();
        sum_contributions(0, g0, u0, &terms)
    }

    fn marginal<'a>(&'a self, m: usize, controllers: &'a ControllerSet) -> Result<Box<dyn MarginalCost + 'a>> {
        match m {
            0 => Ok(Box::new(EncoderCost { problem: self, u1: controllers.stage(1).values() })),
            1 => Ok(Box::new(DecoderCost::new(self, controllers.stage(0).values()))),
            _ => Err(Error::InvalidConfig(format!("witsenhausen has no stage {m}"))),
        }
    }

    fn observation_density(&self, m: usize, controllers: &ControllerSet) -> Result<Vec<f64>> {
        match m {
            0 => Ok(self.prior.clone()),
            1 => Ok(DecoderCost::new(self, controllers.stage(0).values()).mass),
            _ => Err(Error::InvalidConfig(format!("witsenhausen has no stage {m}"))),
        }
    }

    fn sample_cost(&self, controllers: &ControllerSet, rng: &mut dyn RngCore) -> f64 {
        let z0: f64 = StandardNormal.sample(rng);
        let w: f64 = StandardNormal.sample(rng);
        let x0 = self.params.sigma * z0;
        let u0 = controllers.stage(0).eval(x0);
        let x1 = x0 + u0;
        let x2 = x1 - controllers.stage(1).eval(x1 + w);
        let k = self.params.k;
        k * k * u0 * u0 + x2 * x2
    }
}

/// `C_0` with `u_1` frozen.
struct EncoderCost<'a> {
    problem: &'a Witsenhausen,
    u1: &'a [f64],
}

impl EncoderCost<'_> {
    #[inline]
    fn eval(&self, u: f64, y: f64, density: f64) -> f64 {
        let k2 = self.problem.params.k * self.problem.params.k;
        density * (k2 * u * u + decoding_error(&self.problem.grids[1], self.u1, y + u))
    }
}

impl MarginalCost for EncoderCost<'_> {
    fn cost_at(&self, u: f64, i: usize) -> f64 {
        self.eval(u, self.problem.grids[0].point(i), self.problem.prior[i])
    }

    fn cost(&self, u: f64, y: f64) -> f64 {
        let g0 = &self.problem.grids[0];
        let i = g0.nearest_index(y);
        if g0.point(i) == y {
            return self.cost_at(u, i);
        }
        self.eval(u, y, self.problem.prior_at(y))
    }

    fn derivatives_at(&self, u: f64, i: usize) -> Option<(f64, f64)> {
        let p = self.problem;
        let k2 = p.params.k * p.params.k;
        let g1 = &p.grids[1];
        let x = p.grids[0].point(i) + u;
        let last = g1.len() - 1;
        let (below, above) = (g1.cell(0).1, g1.cell(last).0);
        let (mut d1, mut d2) = (0.0, 0.0);
        for_each_gaussian_cell_mass(g1, x, 1.0, |j, w| {
            // first and second x-derivatives of the cell probability
            let (w1, w2) = if j == 0 {
                let t = below - x;
                (-normal_pdf(t), -t * normal_pdf(t))
            } else if j == last {
                let t = above - x;
                (normal_pdf(t), t * normal_pdf(t))
            } else {
                let t = g1.point(j) - x;
                (t * w, (t * t - 1.0) * w)
            };
            let e = x - self.u1[j];
            d1 += w1 * e * e + 2.0 * w * e;
            d2 += w2 * e * e + 4.0 * w1 * e + 2.0 * w;
        });
        let f = p.prior[i];
        Some((f * (2.0 * k2 * u + d1), f * (2.0 * k2 + d2)))
    }
}

/// `C_1` with `u_0` frozen. Quadratic in `u`: `mass * (u - mean)^2 + spread`.
struct DecoderCost<'a> {
    problem: &'a Witsenhausen,
    u0: &'a [f64],
    mass: Vec<f64>,
    mean: Vec<f64>,
    spread: Vec<f64>,
}

impl<'a> DecoderCost<'a> {
    fn new(problem: &'a Witsenhausen, u0: &'a [f64]) -> Self {
        let (g0, g1) = (&problem.grids[0], &problem.grids[1]);
        let n = g1.len();
        let x1: Vec<f64> = g0.points().iter().zip(u0).map(|(y, u)| y + u).collect();
        let weights: Vec<f64> = problem.stage1_weights().collect();
        let mut mass = vec![0.0; n];
        let mut first = vec![0.0; n];
        for (&x, &wi) in x1.iter().zip(&weights) {
            for_each_gaussian_cell_mass(g1, x, 1.0, |j, w| {
                let p = wi * w;
                mass[j] += p;
                first[j] += p * x;
            });
        }
        let mean: Vec<f64> =
            mass.iter().zip(&first).map(|(&m, &b)| if m > 0.0 { b / m } else { 0.0 }).collect();
        let mut spread = vec![0.0; n];
        for (&x, &wi) in x1.iter().zip(&weights) {
            for_each_gaussian_cell_mass(g1, x, 1.0, |j, w| {
                let e = x - mean[j];
                spread[j] += wi * w * e * e;
            });
        }
        Self { problem, u0, mass, mean, spread }
    }
}

impl MarginalCost for DecoderCost<'_> {
    fn cost_at(&self, u: f64, j: usize) -> f64 {
        let e = u - self.mean[j];
        self.mass[j] * e * e + self.spread[j]
    }

    fn cost(&self, u: f64, y: f64) -> f64 {
        let (g0, g1) = (&self.problem.grids[0], &self.problem.grids[1]);
        let j = g1.nearest_index(y);
        if g1.point(j) == y {
            return self.cost_at(u, j);
        }
        let mut acc = 0.0;
        for (i, f) in self.problem.prior.iter().enumerate() {
            let x1 = g0.point(i) + self.u0[i];
            let t = y - x1;
            if t.abs() <= GAUSSIAN_CUTOFF {
                let e = x1 - u;
                acc += g0.spacing() * f * normal_pdf(t) * e * e;
            }
        }
        acc
    }

    fn derivatives_at(&self, u: f64, j: usize) -> Option<(f64, f64)> {
        Some((2.0 * self.mass[j] * (u - self.mean[j]), 2.0 * self.mass[j]))
    }
}

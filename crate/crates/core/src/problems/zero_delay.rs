//! Zero-delay source-channel coding.
//!
//! `J = E[lambda u_0(x_0)^2 + (u_1(x_1) - x_0)^2]` with `x_0 ~ N(0, 1)`,
//! `x_1 = u_0(x_0) + w`, `w ~ U(-1, 1)`; the decoder observes `x_1`.
//!
//! The channel noise is uniform, so its expectation against the step-function
//! decoder is computed exactly from cell overlaps rather than sampled.

use rand::{Rng, RngCore};
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{ControllerSet, Grid, GridSpec};
use crate::numerics::{for_each_cell_overlap, normal_pdf, StepIntegral};
use crate::problem::{sum_contributions, MarginalCost, Problem};

/// Half-width of the uniform channel noise.
const NOISE_HALF_WIDTH: f64 = 1.0;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ZeroDelayParams {
    /// Weight of the channel-input power.
    pub lambda: f64,
}

impl Default for ZeroDelayParams {
    fn default() -> Self {
        Self { lambda: 2.0 }
    }
}

impl ZeroDelayParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.lambda > 0.0 && self.lambda.is_finite()) {
            return Err(Error::InvalidConfig(format!("zero_delay.lambda must be positive (got {})", self.lambda)));
        }
        Ok(())
    }

    /// Encoder on `[-5, 5]`; decoder on `[-6, 6]`, which holds the encoder
    /// range widened by the noise support.
    pub fn default_grids(&self, d: usize) -> Vec<GridSpec> {
        vec![GridSpec::new(-5.0, 5.0, d), GridSpec::new(-6.0, 6.0, d)]
    }
}

#[derive(Debug, Clone)]
pub struct ZeroDelay {
    params: ZeroDelayParams,
    grids: Vec<Grid>,
    prior: Vec<f64>,
}

impl ZeroDelay {
    pub fn new(params: ZeroDelayParams, grids: Vec<Grid>) -> Result<Self> {
        params.validate()?;
        if grids.len() != 2 {
            return Err(Error::InvalidConfig(format!("zero_delay has 2 stages, got {} grids", grids.len())));
        }
        let prior = grids[0].points().iter().map(|&y| normal_pdf(y)).collect();
        Ok(Self { params, grids, prior })
    }

    pub fn with_resolution(params: ZeroDelayParams, d: usize) -> Result<Self> {
        let grids = params.default_grids(d).iter().map(GridSpec::build).collect::<Result<_>>()?;
        Self::new(params, grids)
    }

    pub fn params(&self) -> &ZeroDelayParams {
        &self.params
    }
}

/// Step-function integrals of `u_1^0, u_1^1, u_1^2`, for the distortion
/// `E_w[(u_1(v + w) - x)^2]` in O(1).
struct DecoderMoments {
    first: StepIntegral,
    second: StepIntegral,
}

impl DecoderMoments {
    fn new(grid: &Grid, u1: &[f64]) -> Self {
        Self {
            first: StepIntegral::new(grid, u1.iter().copied()),
            second: StepIntegral::new(grid, u1.iter().map(|v| v * v)),
        }
    }

    /// `E_w[(u_1(v + w) - x)^2]`.
    #[inline]
    fn distortion(&self, v: f64, x: f64) -> f64 {
        let (lo, hi) = (v - NOISE_HALF_WIDTH, v + NOISE_HALF_WIDTH);
        let width = hi - lo;
        (self.second.integral(lo, hi) - 2.0 * x * self.first.integral(lo, hi) + x * x * width) / width
    }
}

impl Problem for ZeroDelay {
    fn name(&self) -> &'static str {
        "zero_delay"
    }

    fn grids(&self) -> &[Grid] {
        &self.grids
    }

    fn objective(&self, controllers: &ControllerSet) -> Result<f64> {
        let g0 = &self.grids[0];
        let u0 = controllers.stage(0).values();
        let moments = DecoderMoments::new(&self.grids[1], controllers.stage(1).values());
        let lambda = self.params.lambda;
        let terms: Vec<f64> = (0..g0.len())
            .into_par_iter()
            .map(|i| {
                let v = u0[i];
                g0.spacing() * self.prior[i] * (lambda * v * v + moments.distortion(v, g0.point(i)))
            })
            .collect();
        sum_contributions(0, g0, u0, &terms)
    }

    fn marginal<'a>(&'a self, m: usize, controllers: &'a ControllerSet) -> Result<Box<dyn MarginalCost + 'a>> {
        match m {
            0 => Ok(Box::new(EncoderCost {
                problem: self,
                moments: DecoderMoments::new(&self.grids[1], controllers.stage(1).values()),
            })),
            1 => Ok(Box::new(DecoderCost::new(self, controllers.stage(0).values()))),
            _ => Err(Error::InvalidConfig(format!("zero_delay has no stage {m}"))),
        }
    }

    fn observation_density(&self, m: usize, controllers: &ControllerSet) -> Result<Vec<f64>> {
        match m {
            0 => Ok(self.prior.clone()),
            1 => Ok(DecoderCost::new(self, controllers.stage(0).values()).mass),
            _ => Err(Error::InvalidConfig(format!("zero_delay has no stage {m}"))),
        }
    }

    fn sample_cost(&self, controllers: &ControllerSet, rng: &mut dyn RngCore) -> f64 {
        let x0: f64 = StandardNormal.sample(rng);
        let w: f64 = rng.random_range(-NOISE_HALF_WIDTH..NOISE_HALF_WIDTH);
        let u0 = controllers.stage(0).eval(x0);
        let estimate = controllers.stage(1).eval(u0 + w);
        let e = estimate - x0;
        self.params.lambda * u0 * u0 + e * e
    }
}

struct EncoderCost<'a> {
    problem: &'a ZeroDelay,
    moments: DecoderMoments,
}

impl MarginalCost for EncoderCost<'_> {
    fn cost_at(&self, u: f64, i: usize) -> f64 {
        let y = self.problem.grids[0].point(i);
        self.problem.prior[i] * (self.problem.params.lambda * u * u + self.moments.distortion(u, y))
    }

    fn cost(&self, u: f64, y: f64) -> f64 {
        let g0 = &self.problem.grids[0];
        let i = g0.nearest_index(y);
        if g0.point(i) == y {
            return self.cost_at(u, i);
        }
        normal_pdf(y) * (self.problem.params.lambda * u * u + self.moments.distortion(u, y))
    }
}

/// `C_1(u, y_j) = mass_j (u - mean_j)^2 + spread_j`, where `mass_j` is the
/// density of `x_1` averaged over cell `j`.
struct DecoderCost<'a> {
    problem: &'a ZeroDelay,
    u0: &'a [f64],
    mass: Vec<f64>,
    mean: Vec<f64>,
    spread: Vec<f64>,
}

impl<'a> DecoderCost<'a> {
    fn new(problem: &'a ZeroDelay, u0: &'a [f64]) -> Self {
        let (g0, g1) = (&problem.grids[0], &problem.grids[1]);
        let n = g1.len();
        let scale = g0.spacing() / (2.0 * NOISE_HALF_WIDTH * g1.spacing());
        let mut mass = vec![0.0; n];
        let mut first = vec![0.0; n];
        for (i, (&v, &f)) in u0.iter().zip(&problem.prior).enumerate() {
            let x0 = g0.point(i);
            for_each_cell_overlap(g1, v - NOISE_HALF_WIDTH, v + NOISE_HALF_WIDTH, |j, len| {
                let p = scale * f * len;
                mass[j] += p;
                first[j] += p * x0;
            });
        }
        let mean: Vec<f64> =
            mass.iter().zip(&first).map(|(&m, &b)| if m > 0.0 { b / m } else { 0.0 }).collect();
        let mut spread = vec![0.0; n];
        for (i, (&v, &f)) in u0.iter().zip(&problem.prior).enumerate() {
            let x0 = g0.point(i);
            for_each_cell_overlap(g1, v - NOISE_HALF_WIDTH, v + NOISE_HALF_WIDTH, |j, len| {
                let e = x0 - mean[j];
                spread[j] += scale * f * len * e * e;
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
        let half = 0.5 * g1.spacing();
        let scale = g0.spacing() / (2.0 * NOISE_HALF_WIDTH * g1.spacing());
        let mut acc = 0.0;
        for (i, (&v, &f)) in self.u0.iter().zip(&self.problem.prior).enumerate() {
            let len = (y + half).min(v + NOISE_HALF_WIDTH) - (y - half).max(v - NOISE_HALF_WIDTH);
            if len > 0.0 {
                let e = g0.point(i) - u;
                acc += scale * f * len * e * e;
            }
        }
        acc
    }

    fn derivatives_at(&self, u: f64, j: usize) -> Option<(f64, f64)> {
        Some((2.0 * self.mass[j] * (u - self.mean[j]), 2.0 * self.mass[j]))
    }
}

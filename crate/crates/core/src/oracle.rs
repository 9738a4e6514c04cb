//! Brute-force checks that do not share code paths with the solver: grid
//! search over `u` for the marginal cost, and Monte Carlo simulation of the
//! objective.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::ControllerSet;
use crate::problem::{MarginalCost, Problem};

/// Samples per Monte Carlo chunk; chunk `c` draws from ChaCha8 stream `c`.
const MC_CHUNK: usize = 1 << 16;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct OracleConfig {
    pub u_lo: f64,
    pub u_hi: f64,
    /// Number of evenly spaced `u` values searched, endpoints included.
    pub steps: usize,
    pub mc_samples: usize,
    pub seed: u64,
}

impl Default for OracleConfig {
    fn default() -> Self {
        Self { u_lo: -25.0, u_hi: 25.0, steps: 100_000, mc_samples: 1_000_000, seed: 7 }
    }
}

impl OracleConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.u_lo < self.u_hi) || !self.u_lo.is_finite() || !self.u_hi.is_finite() {
            return Err(Error::InvalidConfig(format!(
                "oracle needs finite u_lo < u_hi (got {}, {})",
                self.u_lo, self.u_hi
            )));
        }
        if self.steps < 2 {
            return Err(Error::InvalidConfig(format!("oracle.steps must be at least 2 (got {})", self.steps)));
        }
        Ok(())
    }

    /// Distance between neighbouring searched values.
    pub fn step(&self) -> f64 {
        (self.u_hi - self.u_lo) / (self.steps - 1) as f64
    }
}

/// `argmin_u C_m(u, y)` over the evenly spaced values of `oc`; the smallest
/// `u` wins ties.
pub fn exhaustive_argmin(
    problem: &dyn Problem,
    m: usize,
    y: f64,
    controllers: &ControllerSet,
    oc: &OracleConfig,
) -> Result<f64> {
    oc.validate()?;
    let ctx = stage_context(problem, m, controllers)?;
    exhaustive_argmin_in(ctx.as_ref(), y, oc)
}

/// [`exhaustive_argmin`] on an already built stage context.
pub fn exhaustive_argmin_in(ctx: &dyn MarginalCost, y: f64, oc: &OracleConfig) -> Result<f64> {
    oc.validate()?;
    let step = oc.step();
    let last = oc.steps - 1;
    let candidates = (0..oc.steps).map(|i| if i == last { oc.u_hi } else { oc.u_lo + i as f64 * step });
    argmin(ctx, y, candidates)
}

/// `argmin` of `C_m(., y)` over an explicit candidate list; the earliest
/// candidate wins ties.
pub fn candidate_argmin(
    problem: &dyn Problem,
    m: usize,
    y: f64,
    controllers: &ControllerSet,
    candidates: &[f64],
) -> Result<f64> {
    let ctx = stage_context(problem, m, controllers)?;
    candidate_argmin_in(ctx.as_ref(), y, candidates)
}

pub fn candidate_argmin_in(ctx: &dyn MarginalCost, y: f64, candidates: &[f64]) -> Result<f64> {
    if candidates.is_empty() {
        return Err(Error::EmptyInput("candidate_argmin"));
    }
    argmin(ctx, y, candidates.iter().copied())
}

fn stage_context<'a>(
    problem: &'a dyn Problem,
    m: usize,
    controllers: &'a ControllerSet,
) -> Result<Box<dyn MarginalCost + 'a>> {
    if m >= problem.stages() {
        return Err(Error::InvalidConfig(format!("stage {m} out of range (problem has {})", problem.stages())));
    }
    controllers.check_conforms(problem.grids())?;
    problem.marginal(m, controllers)
}

fn argmin(ctx: &dyn MarginalCost, y: f64, candidates: impl Iterator<Item = f64>) -> Result<f64> {
    let mut best = (f64::INFINITY, f64::NAN);
    for u in candidates {
        let c = ctx.cost(u, y);
        if !c.is_finite() {
            return Err(Error::NonFiniteFunction { u, value: c });
        }
        if c < best.0 {
            best = (c, u);
        }
    }
    Ok(best.1)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct McEstimate {
    pub estimate: f64,
    /// Sample standard deviation over `sqrt(n)`.
    pub stderr: f64,
    pub samples: usize,
}

/// Sample-mean estimate of `J[U]` by simulating the problem with ChaCha8.
///
/// Samples are drawn in fixed-size chunks, each on its own stream of the
/// seeded generator, and the chunk statistics are merged in chunk order, so
/// the estimate depends only on the seed and sample count.
pub fn monte_carlo_objective(problem: &dyn Problem, controllers: &ControllerSet, oc: &OracleConfig) -> Result<McEstimate> {
    if oc.mc_samples < 1000 {
        return Err(Error::InvalidConfig(format!("oracle.mc_samples must be at least 1000 (got {})", oc.mc_samples)));
    }
    controllers.check_conforms(problem.grids())?;
    let n = oc.mc_samples;
    let chunks: Vec<(usize, f64, f64)> = (0..n.div_ceil(MC_CHUNK))
        .into_par_iter()
        .map(|c| {
            let mut rng = ChaCha8Rng::seed_from_u64(oc.seed);
            rng.set_stream(c as u64);
            let len = MC_CHUNK.min(n - c * MC_CHUNK);
            // Welford within the chunk
            let (mut mean, mut m2) = (0.0, 0.0);
            for k in 0..len {
                let x = problem.sample_cost(controllers, &mut rng);
                let delta = x - mean;
                mean += delta / (k + 1) as f64;
                m2 += delta * (x - mean);
            }
            (len, mean, m2)
        })
        .collect();

    let (mut count, mut mean, mut m2) = (0usize, 0.0, 0.0);
    for (len, cm, cm2) in chunks {
        let total = count + len;
        let delta = cm - mean;
        mean += delta * len as f64 / total as f64;
        m2 += cm2 + delta * delta * count as f64 * len as f64 / total as f64;
        count = total;
    }
    let std = (m2 / (count - 1) as f64).sqrt();
    Ok(McEstimate { estimate: mean, stderr: std / (count as f64).sqrt(), samples: count })
}

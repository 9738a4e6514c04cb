//! A one-stage tracking problem with a known optimum, for testing the solver.
//!
//! `J = E[(u_0(y) - a y)^2]` with `y ~ N(0, 1)`; the optimum is `u_0(y) = a y`
//! with `J = 0`.

use rand::RngCore;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{ControllerSet, Grid, GridSpec};
use crate::numerics::normal_pdf;
use crate::problem::{sum_contributions, MarginalCost, Problem};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct QuadraticParams {
    /// Slope of the target controller.
    pub slope: f64,
}

impl Default for QuadraticParams {
    fn default() -> Self {
        Self { slope: 2.0 }
    }
}

impl QuadraticParams {
    pub fn validate(&self) -> Result<()> {
        if !self.slope.is_finite() {
            return Err(Error::InvalidConfig(format!("quadratic.slope must be finite (got {})", self.slope)));
        }
        Ok(())
    }

    pub fn default_grids(&self, d: usize) -> Vec<GridSpec> {
        vec![GridSpec::new(-5.0, 5.0, d)]
    }
}

#[derive(Debug, Clone)]
pub struct Quadratic {
    params: QuadraticParams,
    grids: Vec<Grid>,
    prior: Vec<f64>,
}

impl Quadratic {
    pub fn new(params: QuadraticParams, grids: Vec<Grid>) -> Result<Self> {
        params.validate()?;
        if grids.len() != 1 {
            return Err(Error::InvalidConfig(format!("quadratic has 1 stage, got {} grids", grids.len())));
        }
        let prior = grids[0].points().iter().map(|&y| normal_pdf(y)).collect();
        Ok(Self { params, grids, prior })
    }

    pub fn with_resolution(params: QuadraticParams, d: usize) -> Result<Self> {
        let grids = params.default_grids(d).iter().map(GridSpec::build).collect::<Result<_>>()?;
        Self::new(params, grids)
    }
}

impl Problem for Quadratic {
    fn name(&self) -> &'static str {
        "quadratic"
    }

    fn grids(&self) -> &[Grid] {
        &self.grids
    }

    fn objective(&self, controllers: &ControllerSet) -> Result<f64> {
        let g = &self.grids[0];
        let u = controllers.stage(0).values();
        let ctx = Tracking { problem: self };
        let terms: Vec<f64> = (0..g.len()).map(|i| g.spacing() * ctx.cost_at(u[i], i)).collect();
        sum_contributions(0, g, u, &terms)
    }

    fn marginal<'a>(&'a self, m: usize, _controllers: &'a ControllerSet) -> Result<Box<dyn MarginalCost + 'a>> {
        if m != 0 {
            return Err(Error::InvalidConfig(format!("quadratic has no stage {m}")));
        }
        Ok(Box::new(Tracking { problem: self }))
    }

    fn observation_density(&self, m: usize, _controllers: &ControllerSet) -> Result<Vec<f64>> {
        if m != 0 {
            return Err(Error::InvalidConfig(format!("quadratic has no stage {m}")));
        }
        Ok(self.prior.clone())
    }

    fn sample_cost(&self, controllers: &ControllerSet, rng: &mut dyn RngCore) -> f64 {
        let y: f64 = StandardNormal.sample(rng);
        let e = controllers.stage(0).eval(y) - self.params.slope * y;
        e * e
    }
}

struct Tracking<'a> {
    problem: &'a Quadratic,
}

impl MarginalCost for Tracking<'_> {
    fn cost_at(&self, u: f64, i: usize) -> f64 {
        let e = u - self.problem.params.slope * self.problem.grids[0].point(i);
        e * e * self.problem.prior[i]
    }

    fn cost(&self, u: f64, y: f64) -> f64 {
        let e = u - self.problem.params.slope * y;
        e * e * normal_pdf(y)
    }

    fn derivatives_at(&self, u: f64, i: usize) -> Option<(f64, f64)> {
        let f = self.problem.prior[i];
        Some((2.0 * (u - self.problem.params.slope * self.problem.grids[0].point(i)) * f, 2.0 * f))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::SampledController;

    #[test]
    fn objective_closed_forms() {
        let p = Quadratic::with_resolution(QuadraticParams::default(), 101).unwrap();
        let g = p.grids()[0].clone();
        let best = ControllerSet::new(vec![SampledController::from_fn(g.clone(), |y| 2.0 * y)]);
        assert!(p.objective(&best).unwrap().abs() < 1e-9);
        let zero = ControllerSet::new(vec![SampledController::constant(g, 0.0)]);
        assert!((p.objective(&zero).unwrap() - 4.0).abs() < 4e-3);
    }

    #[test]
    fn marginal_minimiser_tracks_slope() {
        let p = Quadratic::with_resolution(QuadraticParams { slope: -1.5 }, 101).unwrap();
        let u = p.initial_controllers();
        let ctx = p.marginal(0, &u).unwrap();
        for i in [0usize, 17, 50, 100] {
            let (d1, d2) = ctx.derivatives_at(0.0, i).unwrap();
            assert!((-d1 / d2 - (-1.5 * p.grids()[0].point(i))).abs() < 1e-12);
        }
    }
}

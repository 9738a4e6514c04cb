//! The interface between a control problem and the solver.
//!
//! A problem supplies its objective `J[U]` and, for every stage `m`, the
//! marginal cost `C_m(u, y)`: the integrand of `J` with respect to `y_m` when
//! `u_m(y)` is replaced by `u` and every other controller is held fixed.
//! Pointwise minimisers of `C_m` are exactly what an optimal `u_m` must take
//! almost everywhere, which is what the solver exploits.
//!
//! Problems are discretised so that the objective is, for every stage,
//! `J = sum_i spacing_m * C_m(u_m(y_i), y_i) + (terms without u_m)`. Changing
//! one stored value therefore moves `J` by exactly `spacing * dC`.

use rand::RngCore;

use crate::error::{Error, Result};
use crate::grid::{ControllerSet, Grid};

/// `C_m(., .)` for one stage with the other controllers frozen.
///
/// Implementations precompute whatever depends only on `U_{-m}` when they are
/// built, so evaluations are cheap and may run concurrently.
pub trait MarginalCost: Sync {
    /// `C_m(u, y_i)` at grid point `i` of the stage grid.
    fn cost_at(&self, u: f64, i: usize) -> f64;

    /// `C_m(u, y)` at an arbitrary observation. Must agree bit for bit with
    /// [`MarginalCost::cost_at`] when `y` is a grid point.
    fn cost(&self, u: f64, y: f64) -> f64;

    /// Analytic `(C'_m, C''_m)` with respect to `u`, if the problem has them.
    /// The solver falls back to central differences otherwise.
    fn derivatives_at(&self, _u: f64, _i: usize) -> Option<(f64, f64)> {
        None
    }
}

pub trait Problem: Send + Sync {
    fn name(&self) -> &'static str;

    /// One grid per stage; `grids().len()` is the number of controllers.
    fn grids(&self) -> &[Grid];

    fn stages(&self) -> usize {
        self.grids().len()
    }

    /// `J[U]` by quadrature.
    fn objective(&self, controllers: &ControllerSet) -> Result<f64>;

    /// Builds the marginal cost of stage `m` under `controllers`.
    fn marginal<'a>(&'a self, m: usize, controllers: &'a ControllerSet) -> Result<Box<dyn MarginalCost + 'a>>;

    /// Maps stage-`m` values back into the feasible set. Identity for
    /// unconstrained problems.
    fn project(&self, _m: usize, _values: &mut [f64]) {}

    fn is_constrained(&self) -> bool {
        false
    }

    /// Density of the stage-`m` observation at each grid point under
    /// `controllers`.
    fn observation_density(&self, m: usize, controllers: &ControllerSet) -> Result<Vec<f64>>;

    /// Draws one realisation of the random variables and returns the cost it
    /// incurs, evaluating controllers as step functions.
    fn sample_cost(&self, controllers: &ControllerSet, rng: &mut dyn RngCore) -> f64;

    fn initial_controllers(&self) -> ControllerSet {
        ControllerSet::identity(self.grids())
    }
}

/// `J[U]` after checking that `controllers` fits the problem.
pub fn objective(problem: &dyn Problem, controllers: &ControllerSet) -> Result<f64> {
    controllers.check_conforms(problem.grids())?;
    problem.objective(controllers)
}

/// `C_m(u, y)` under `controllers`. Builds the stage context on every call;
/// use [`Problem::marginal`] directly for repeated evaluation.
pub fn marginal_cost(problem: &dyn Problem, m: usize, u: f64, y: f64, controllers: &ControllerSet) -> Result<f64> {
    if m >= problem.stages() {
        return Err(Error::InvalidConfig(format!("stage {m} out of range (problem has {})", problem.stages())));
    }
    if !u.is_finite() || !y.is_finite() {
        return Err(Error::InvalidConfig(format!("marginal cost needs finite u and y (got {u}, {y})")));
    }
    controllers.check_conforms(problem.grids())?;
    let ctx = problem.marginal(m, controllers)?;
    let c = ctx.cost(u, y);
    if !c.is_finite() {
        let index = problem.grids()[m].nearest_index(y);
        return Err(Error::NonFinite { what: "marginal cost", stage: m, index, y, u, value: c });
    }
    Ok(c)
}

pub fn project(problem: &dyn Problem, m: usize, values: &[f64]) -> Vec<f64> {
    let mut out = values.to_vec();
    problem.project(m, &mut out);
    out
}

/// Sums per-point objective contributions in ascending order, reporting the
/// first non-finite one.
pub(crate) fn sum_contributions(stage: usize, grid: &Grid, values: &[f64], terms: &[f64]) -> Result<f64> {
    let mut total = 0.0;
    for (i, &t) in terms.iter().enumerate() {
        if !t.is_finite() {
            return Err(Error::NonFinite {
                what: "objective term",
                stage,
                index: i,
                y: grid.point(i),
                u: values[i],
                value: t,
            });
        }
        total += t;
    }
    Ok(total)
}

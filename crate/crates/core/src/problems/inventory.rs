//! Multi-stage inventory control.
//!
//! `J = E[sum_m xi u_m(x_m) + gamma(x_{m+1})]` with `x_0 ~ U(-1, 1)`,
//! `x_{m+1} = x_m + u_m(x_m) - w_m`, `w_m ~ U(-1, 1)` and orders `u_m >= 0`.
//! Each controller observes the current stock level.
//!
//! The state law is carried forward as probability mass per grid cell, and the
//! cost-to-go backward as a step function on the next stage's grid, so the
//! uniform noise is integrated exactly against both. With `P_m` the cell
//! masses and `V_m` the cost-to-go,
//!
//! ```text
//! J = sum_i P_0[i] V_0[i]
//! V_m[i] = xi u_m[i] + g(z_i) + E_w V_{m+1}(z_i - w),   z_i = y_i + u_m[i]
//! ```
//!
//! where `g(z) = E_w gamma(z - w)` is known in closed form.

use rand::{Rng, RngCore};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{ControllerSet, Grid, GridSpec, SampledController};
use crate::numerics::{for_each_cell_overlap, StepIntegral};
use crate::problem::{sum_contributions, MarginalCost, Problem};

/// Half-width of both the initial stock law and the demand noise.
const HALF_WIDTH: f64 = 1.0;

/// Per-stage holding/shortage cost `gamma`, minimal at zero stock.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum StageCost {
    /// `gamma(x) = x^2`
    Quadratic,
    /// `gamma(x) = h max(x, 0) + b max(-x, 0)`
    PiecewiseLinear { h: f64, b: f64 },
}

impl StageCost {
    pub fn eval(&self, x: f64) -> f64 {
        match *self {
            StageCost::Quadratic => x * x,
            StageCost::PiecewiseLinear { h, b } => {
                if x >= 0.0 {
                    h * x
                } else {
                    -b * x
                }
            }
        }
    }

    /// `E[gamma(z - w)]` for `w ~ U(-1, 1)`.
    pub fn expected(&self, z: f64) -> f64 {
        match *self {
            StageCost::Quadratic => z * z + 1.0 / 3.0,
            StageCost::PiecewiseLinear { h, b } => {
                // E[max(X, 0)] and E[max(-X, 0)] for X ~ U(z - 1, z + 1)
                let pos = if z >= 1.0 {
                    z
                } else if z <= -1.0 {
                    0.0
                } else {
                    (z + 1.0) * (z + 1.0) / 4.0
                };
                let neg = if z <= -1.0 {
                    -z
                } else if z >= 1.0 {
                    0.0
                } else {
                    (1.0 - z) * (1.0 - z) / 4.0
                };
                h * pos + b * neg
            }
        }
    }

    fn validate(&self) -> Result<()> {
        if let StageCost::PiecewiseLinear { h, b } = *self {
            if !(h > 0.0 && h.is_finite() && b > 0.0 && b.is_finite()) {
                return Err(Error::InvalidConfig(format!(
                    "inventory.stage_cost needs positive h and b (got h={h}, b={b})"
                )));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct InventoryParams {
    /// Number of ordering decisions.
    pub stages: usize,
    /// Cost per unit ordered.
    pub order_cost: f64,
    pub stage_cost: StageCost,
}

impl Default for InventoryParams {
    fn default() -> Self {
        Self { stages: 2, order_cost: 0.1, stage_cost: StageCost::PiecewiseLinear { h: 1.0, b: 1.0 } }
    }
}

impl InventoryParams {
    pub fn validate(&self) -> Result<()> {
        if self.stages == 0 {
            return Err(Error::InvalidConfig("inventory.stages must be at least 1".into()));
        }
        if !(self.order_cost >= 0.0 && self.order_cost.is_finite()) {
            return Err(Error::InvalidConfig(format!(
                "inventory.order_cost must be non-negative (got {})",
                self.order_cost
            )));
        }
        self.stage_cost.validate()
    }

    pub fn default_grids(&self, d: usize) -> Vec<GridSpec> {
        vec![GridSpec::new(-3.0, 3.0, d); self.stages]
    }
}

#[derive(Debug, Clone)]
pub struct Inventory {
    params: InventoryParams,
    grids: Vec<Grid>,
    /// cell masses of x_0
    initial_mass: Vec<f64>,
}

impl Inventory {
    pub fn new(params: InventoryParams, grids: Vec<Grid>) -> Result<Self> {
        params.validate()?;
        if grids.len() != params.stages {
            return Err(Error::InvalidConfig(format!(
                "inventory has {} stages, got {} grids",
                params.stages,
                grids.len()
            )));
        }
        let mut initial_mass = vec![0.0; grids[0].len()];
        for_each_cell_overlap(&grids[0], -HALF_WIDTH, HALF_WIDTH, |i, len| {
            initial_mass[i] += len / (2.0 * HALF_WIDTH)
        });
        Ok(Self { params, grids, initial_mass })
    }

    pub fn with_resolution(params: InventoryParams, d: usize) -> Result<Self> {
        let grids = params.default_grids(d).iter().map(GridSpec::build).collect::<Result<_>>()?;
        Self::new(params, grids)
    }

    pub fn params(&self) -> &InventoryParams {
        &self.params
    }

    /// Cell masses of `x_0 .. x_m` under `controllers`.
    fn masses_through(&self, m: usize, controllers: &ControllerSet) -> Vec<Vec<f64>> {
        let mut out = vec![self.initial_mass.clone()];
        for k in 0..m {
            let (from, to) = (&self.grids[k], &self.grids[k + 1]);
            let u = controllers.stage(k).values();
            let prev = &out[k];
            let mut next = vec![0.0; to.len()];
            for (i, &p) in prev.iter().enumerate() {
                if p == 0.0 {
                    continue;
                }
                let z = from.point(i) + u[i];
                for_each_cell_overlap(to, z - HALF_WIDTH, z + HALF_WIDTH, |j, len| {
                    next[j] += p * len / (2.0 * HALF_WIDTH)
                });
            }
            out.push(next);
        }
        out
    }

    /// Stored cost-to-go of stage `m` at every point of its grid. Stage `M`
    /// has none; it is identically zero.
    fn cost_to_go_values(&self, m: usize, controllers: &ControllerSet) -> Vec<f64> {
        let mut next: Option<StepIntegral> = None;
        let mut values = Vec::new();
        for k in (m..self.params.stages).rev() {
            let grid = &self.grids[k];
            let u = controllers.stage(k).values();
            values = (0..grid.len()).map(|i| self.stage_value(grid.point(i), u[i], next.as_ref())).collect();
            next = Some(StepIntegral::new(grid, values.iter().copied()));
        }
        values
    }

    fn continuation(&self, m: usize, controllers: &ControllerSet) -> Option<StepIntegral> {
        (m + 1 < self.params.stages)
            .then(|| StepIntegral::new(&self.grids[m + 1], self.cost_to_go_values(m + 1, controllers)))
    }

    /// `xi u + g(x + u) + E_w V_next(x + u - w)`
    #[inline]
    fn stage_value(&self, x: f64, u: f64, next: Option<&StepIntegral>) -> f64 {
        let z = x + u;
        let cont = next.map_or(0.0, |v| v.integral(z - HALF_WIDTH, z + HALF_WIDTH) / (2.0 * HALF_WIDTH));
        self.params.order_cost * u + self.params.stage_cost.expected(z) + cont
    }

    /// Density of `x_m` at each stage-`m` grid point (cell mass over spacing).
    pub fn forward_density(&self, m: usize, controllers: &ControllerSet) -> Result<Vec<f64>> {
        self.check_stage(m)?;
        controllers.check_conforms(&self.grids)?;
        let s = self.grids[m].spacing();
        Ok(self.masses_through(m, controllers).pop().unwrap_or_default().into_iter().map(|p| p / s).collect())
    }

    /// Expected cost from stage `m` on when `x_m = x`; zero for `m = M`.
    pub fn cost_to_go(&self, m: usize, x: f64, controllers: &ControllerSet) -> Result<f64> {
        if m == self.params.stages {
            return Ok(0.0);
        }
        self.check_stage(m)?;
        controllers.check_conforms(&self.grids)?;
        let next = self.continuation(m, controllers);
        Ok(self.stage_value(x, controllers.stage(m).eval(x), next.as_ref()))
    }

    fn check_stage(&self, m: usize) -> Result<()> {
        if m >= self.params.stages {
            return Err(Error::InvalidConfig(format!("inventory has no stage {m}")));
        }
        Ok(())
    }
}

impl Problem for Inventory {
    fn name(&self) -> &'static str {
        "inventory"
    }

    fn grids(&self) -> &[Grid] {
        &self.grids
    }

    fn objective(&self, controllers: &ControllerSet) -> Result<f64> {
        let v0 = self.cost_to_go_values(0, controllers);
        let terms: Vec<f64> = self.initial_mass.par_iter().zip(&v0).map(|(&p, &v)| p * v).collect();
        sum_contributions(0, &self.grids[0], controllers.stage(0).values(), &terms)
    }

    fn marginal<'a>(&'a self, m: usize, controllers: &'a ControllerSet) -> Result<Box<dyn MarginalCost + 'a>> {
        self.check_stage(m)?;
        let s = self.grids[m].spacing();
        let density = self.masses_through(m, controllers).pop().unwrap_or_default().into_iter().map(|p| p / s).collect();
        Ok(Box::new(StageCostContext { problem: self, m, density, next: self.continuation(m, controllers) }))
    }

    fn project(&self, _m: usize, values: &mut [f64]) {
        for v in values {
            *v = v.max(0.0);
        }
    }

    fn is_constrained(&self) -> bool {
        true
    }

    fn observation_density(&self, m: usize, controllers: &ControllerSet) -> Result<Vec<f64>> {
        self.forward_density(m, controllers)
    }

    fn sample_cost(&self, controllers: &ControllerSet, rng: &mut dyn RngCore) -> f64 {
        let mut x: f64 = rng.random_range(-HALF_WIDTH..HALF_WIDTH);
        let mut cost = 0.0;
        for c in controllers.iter() {
            let u = c.eval(x);
            let w: f64 = rng.random_range(-HALF_WIDTH..HALF_WIDTH);
            x = x + u - w;
            cost += self.params.order_cost * u + self.params.stage_cost.eval(x);
        }
        cost
    }

    /// Identity orders, clipped to be feasible.
    fn initial_controllers(&self) -> ControllerSet {
        ControllerSet::new(
            self.grids.iter().map(|g| SampledController::from_fn(g.clone(), |y| y.max(0.0))).collect(),
        )
    }
}

/// `C_m(u, y) = f_m(y) (xi u + g(y + u) + E_w V_{m+1}(y + u - w))`
struct StageCostContext<'a> {
    problem: &'a Inventory,
    m: usize,
    density: Vec<f64>,
    next: Option<StepIntegral>,
}

impl MarginalCost for StageCostContext<'_> {
    fn cost_at(&self, u: f64, i: usize) -> f64 {
        let y = self.problem.grids[self.m].point(i);
        self.density[i] * self.problem.stage_value(y, u, self.next.as_ref())
    }

    fn cost(&self, u: f64, y: f64) -> f64 {
        let i = self.problem.grids[self.m].nearest_index(y);
        self.density[i] * self.problem.stage_value(y, u, self.next.as_ref())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::oracle::{exhaustive_argmin, OracleConfig};
    use crate::problem::marginal_cost;

    fn problem(params: InventoryParams, d: usize) -> Inventory {
        Inventory::with_resolution(params, d).unwrap()
    }

    fn constant(p: &Inventory, c: f64) -> ControllerSet {
        ControllerSet::new(p.grids().iter().map(|g| SampledController::constant(g.clone(), c)).collect())
    }

    fn density_at(p: &Inventory, m: usize, u: &ControllerSet, x: f64) -> f64 {
        let dens = p.forward_density(m, u).unwrap();
        dens[p.grids()[m].nearest_index(x)]
    }

    #[test]
    fn expected_stage_cost_matches_direct_average() {
        for gamma in [StageCost::Quadratic, StageCost::PiecewiseLinear { h: 1.0, b: 3.0 }] {
            for z in [-2.5, -1.0, -0.4, 0.0, 0.7, 1.0, 1.9] {
                let n = 200_000;
                let direct: f64 = (0..n)
                    .map(|k| gamma.eval(z - (-1.0 + 2.0 * (k as f64 + 0.5) / n as f64)))
                    .sum::<f64>()
                    / n as f64;
                assert!((gamma.expected(z) - direct).abs() < 1e-8, "{gamma:?} z={z}");
            }
        }
    }

    #[test]
    fn initial_density_is_uniform() {
        let p = problem(InventoryParams::default(), 601);
        let u = constant(&p, 0.0);
        for x in [-0.9, -0.2, 0.0, 0.55, 0.98] {
            assert!((density_at(&p, 0, &u, x) - 0.5).abs() < 1e-12);
        }
        for x in [-2.0, 1.5, 2.9] {
            assert_eq!(density_at(&p, 0, &u, x), 0.0);
        }
    }

    #[test]
    fn propagated_density_is_triangular() {
        let p = problem(InventoryParams::default(), 601);
        let zero = constant(&p, 0.0);
        // the kink at the peak is smoothed over one cell: error spacing / 8
        assert!((density_at(&p, 1, &zero, 0.0) - 0.5).abs() < 2e-3);
        assert!((density_at(&p, 1, &zero, 1.0) - 0.25).abs() < 1e-4);
        assert!(density_at(&p, 1, &zero, 2.5) == 0.0);
        let one = constant(&p, 1.0);
        assert!((density_at(&p, 1, &one, 1.0) - 0.5).abs() < 2e-3);
        assert!((density_at(&p, 1, &one, -0.5) - 0.125).abs() < 1e-4);
        assert!(density_at(&p, 1, &one, -1.5) == 0.0);
    }

    #[test]
    fn densities_integrate_to_one() {
        let params = InventoryParams { stages: 3, ..Default::default() };
        let p = problem(params, 601);
        let u = ControllerSet::new(
            p.grids().iter().map(|g| SampledController::from_fn(g.clone(), |y| (0.3 - y).max(0.0))).collect(),
        );
        for m in 0..3 {
            let s = p.grids()[m].spacing();
            let mass: f64 = p.forward_density(m, &u).unwrap().iter().map(|f| f * s).sum();
            assert!((mass - 1.0).abs() < 1e-12, "stage {m}: {mass}");
        }
    }

    #[test]
    fn cost_to_go_closed_form_with_idle_orders() {
        // gamma quadratic, u = 0: V_{M-k}(x) = k x^2 + k(k+1)/6
        let params = InventoryParams { stages: 3, order_cost: 0.1, stage_cost: StageCost::Quadratic };
        let p = problem(params, 6001);
        let u = constant(&p, 0.0);
        for k in 0..=3usize {
            for x in [-0.8, -0.25, 0.0, 0.4, 1.0] {
                let v = p.cost_to_go(3 - k, x, &u).unwrap();
                let kf = k as f64;
                let exact = kf * x * x + kf * (kf + 1.0) / 6.0;
                assert!((v - exact).abs() < 1e-6, "k={k} x={x}: {v} vs {exact}");
            }
        }
    }

    #[test]
    fn matches_reference_quadrature() {
        // identity orders (not clipped), gamma = |x|, computed independently
        let p = problem(InventoryParams::default(), 601);
        let u = ControllerSet::identity(p.grids());
        let c0 = marginal_cost(&p, 0, 0.3, -0.2, &u).unwrap();
        assert!((c0 - 0.819_166_666_666_666_7).abs() < 1e-4, "{c0}");
        let v0 = p.cost_to_go(0, 0.25, &u).unwrap();
        assert!((v0 - 2.033_333_333_333_333).abs() < 1e-4, "{v0}");
    }

    #[test]
    fn single_stage_orders_restore_zero_stock() {
        let params = InventoryParams { stages: 1, order_cost: 0.0, stage_cost: StageCost::Quadratic };
        let p = problem(params, 601);
        let u = constant(&p, 0.0);
        let oc = OracleConfig { u_lo: -2.0, u_hi: 2.0, steps: 4001, ..Default::default() };
        for (y, expect) in [(0.0, 0.0), (-0.5, 0.5), (0.3, -0.3)] {
            let arg = exhaustive_argmin(&p, 0, y, &u, &oc).unwrap();
            assert!((arg - expect).abs() < 1e-9, "y={y}: {arg}");
        }
    }

    #[test]
    fn projection_clips_negative_orders() {
        let p = problem(InventoryParams::default(), 11);
        let mut v = vec![-0.5, 0.2, 0.0];
        p.project(0, &mut v);
        assert_eq!(v, [0.0, 0.2, 0.0]);
        let mut again = v.clone();
        p.project(0, &mut again);
        assert_eq!(again, v);
        assert!(p.initial_controllers().iter().all(|c| c.values().iter().all(|&x| x >= 0.0)));
    }

    #[test]
    fn rejects_bad_params() {
        let bad = InventoryParams { stages: 0, ..Default::default() };
        assert!(Inventory::with_resolution(bad, 11).is_err());
        let bad = InventoryParams { order_cost: -1.0, ..Default::default() };
        assert!(Inventory::with_resolution(bad, 11).is_err());
        let bad = InventoryParams { stage_cost: StageCost::PiecewiseLinear { h: 0.0, b: 1.0 }, ..Default::default() };
        assert!(Inventory::with_resolution(bad, 11).is_err());
    }
}

//! The alternating minimisation loop.
//!
//! Each round runs `N_L` local-update iterations and then `N_P` partial
//! exhaustion iterations, where one iteration sweeps every stage in order.
//! The objective improvement of each block decides how the next round's `N`
//! iterations are split.
//!
//! Every sweep reads a frozen copy of the controllers and writes a fresh value
//! vector, so the per-point work is order-free and results do not depend on
//! the number of worker threads.

use std::ops::ControlFlow;
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{ControllerSet, Grid};
use crate::numerics::fd_both;
use crate::problem::{MarginalCost, Problem};

/// Step halvings tried before a local update leaves a point unchanged.
const MAX_HALVINGS: usize = 10;

/// How the `N` iterations of a round are divided between the two methods.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum Schedule {
    /// Proportional to each method's improvement in the previous round.
    #[default]
    Adaptive,
    /// Always `n_local` local updates and `N - n_local` exhaustion sweeps.
    FixedSplit(usize),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SolverConfig {
    /// Iterations per round (`N`).
    pub iterations: usize,
    /// Stop once the round's total improvement is at most this.
    pub precision: f64,
    /// Gradient step used where the marginal cost is not convex.
    pub step_size: f64,
    /// Partial-exhaustion radius; `None` means `(b - a) / 100` of each stage grid.
    pub radius: Option<f64>,
    /// Base finite-difference step, scaled by `1 + |u|`.
    pub fd_step: f64,
    /// Newton is used only where `C'' > min_curvature`.
    pub min_curvature: f64,
    /// Largest Newton step; `None` means `(b - a) / 10` of each stage grid.
    pub newton_cap: Option<f64>,
    pub max_rounds: usize,
    /// Worker threads; `None` uses the machine's available parallelism.
    pub workers: Option<usize>,
    pub mode: Schedule,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self {
            iterations: 20,
            precision: 1e-10,
            step_size: 0.1,
            radius: None,
            fd_step: 1e-4,
            min_curvature: 1e-9,
            newton_cap: None,
            max_rounds: 10_000,
            workers: None,
            mode: Schedule::Adaptive,
        }
    }
}

impl SolverConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |field: &str, why: String| Err(Error::InvalidConfig(format!("solver.{field} {why}")));
        if self.iterations < 2 {
            return bad("iterations", format!("must be at least 2 (got {})", self.iterations));
        }
        if !(self.precision >= 0.0 && self.precision.is_finite()) {
            return bad("precision", format!("must be non-negative (got {})", self.precision));
        }
        for (field, v) in [
            ("step_size", Some(self.step_size)),
            ("radius", self.radius),
            ("fd_step", Some(self.fd_step)),
            ("min_curvature", Some(self.min_curvature)),
            ("newton_cap", self.newton_cap),
        ] {
            if let Some(v) = v {
                if !(v > 0.0 && v.is_finite()) {
                    return bad(field, format!("must be positive (got {v})"));
                }
            }
        }
        if self.max_rounds == 0 {
            return bad("max_rounds", "must be at least 1".into());
        }
        if self.workers == Some(0) {
            return bad("workers", "must be at least 1".into());
        }
        if let Schedule::FixedSplit(n) = self.mode {
            if n == 0 || n >= self.iterations {
                return bad("mode", format!("fixed_split needs 1 <= n_local <= {} (got {n})", self.iterations - 1));
            }
        }
        Ok(())
    }

    pub fn radius_for(&self, grid: &Grid) -> f64 {
        self.radius.unwrap_or((grid.upper() - grid.lower()) / 100.0)
    }

    pub fn newton_cap_for(&self, grid: &Grid) -> f64 {
        self.newton_cap.unwrap_or((grid.upper() - grid.lower()) / 10.0)
    }

    fn thread_pool(&self) -> Result<rayon::ThreadPool> {
        let n = self.workers.unwrap_or_else(|| std::thread::available_parallelism().map_or(1, |n| n.get()));
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build()
            .map_err(|e| Error::InvalidConfig(format!("solver.workers: cannot start {n} threads: {e}")))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Termination {
    Converged,
    MaxRoundsReached,
    /// The round callback asked to stop.
    Stopped,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RoundReport {
    pub round: usize,
    /// Objective at the end of the round.
    #[serde(rename = "J")]
    pub objective: f64,
    /// Objective between the local-update and partial-exhaustion blocks.
    #[serde(rename = "J_local")]
    pub objective_after_local: f64,
    #[serde(rename = "I_L")]
    pub improvement_local: f64,
    #[serde(rename = "I_P")]
    pub improvement_partial: f64,
    #[serde(rename = "N_L")]
    pub n_local: usize,
    #[serde(rename = "N_P")]
    pub n_partial: usize,
    pub wall_ms: f64,
}

#[derive(Debug, Clone)]
pub struct SolveResult {
    pub controllers: ControllerSet,
    pub initial_objective: f64,
    pub final_objective: f64,
    pub rounds: Vec<RoundReport>,
    pub termination: Termination,
    pub wall_ms: f64,
}

/// One safeguarded Newton step, or a gradient step where the curvature is
/// not clearly positive.
pub fn newton_or_gradient_step(c1: f64, c2: f64, u: f64, cfg: &SolverConfig, grid: &Grid) -> f64 {
    if c2 > cfg.min_curvature {
        let cap = cfg.newton_cap_for(grid);
        u - (c1 / c2).clamp(-cap, cap)
    } else {
        u - cfg.step_size * c1
    }
}

/// Splits `n` iterations in proportion to the last improvements, keeping at
/// least one for each method. An all-zero round splits evenly.
pub fn adaptive_allocation(improvement_local: f64, improvement_partial: f64, n: usize) -> (usize, usize) {
    assert!(n >= 2, "adaptive_allocation needs n >= 2");
    let total = improvement_local + improvement_partial;
    let n_local = if total > 0.0 && total.is_finite() {
        let share = (improvement_local * n as f64 / total).floor();
        share.clamp(1.0, (n - 1) as f64) as usize
    } else {
        n / 2
    };
    (n_local, n - n_local)
}

fn non_finite(problem: &dyn Problem, m: usize, i: usize, u: f64, value: f64, what: &'static str) -> Error {
    Error::NonFinite { what, stage: m, index: i, y: problem.grids()[m].point(i), u, value }
}

fn local_step(
    problem: &dyn Problem,
    ctx: &dyn MarginalCost,
    m: usize,
    i: usize,
    u: f64,
    cfg: &SolverConfig,
) -> Result<f64> {
    let (c1, c2) = ctx.derivatives_at(u, i).unwrap_or_else(|| {
        let h = cfg.fd_step * (1.0 + u.abs());
        fd_both(|v| ctx.cost_at(v, i), u, h)
    });
    if !c1.is_finite() || !c2.is_finite() {
        let bad = if c1.is_finite() { c2 } else { c1 };
        return Err(non_finite(problem, m, i, u, bad, "marginal cost derivative"));
    }
    let proposal = newton_or_gradient_step(c1, c2, u, cfg, &problem.grids()[m]);
    if !proposal.is_finite() {
        return Err(non_finite(problem, m, i, u, proposal, "local update"));
    }
    // damped: halve the step while it does not lower this point's cost
    let current = ctx.cost_at(u, i);
    if !current.is_finite() {
        return Err(non_finite(problem, m, i, u, current, "marginal cost"));
    }
    let mut step = proposal - u;
    for _ in 0..=MAX_HALVINGS {
        let mut candidate = [u + step];
        problem.project(m, &mut candidate);
        let c = ctx.cost_at(candidate[0], i);
        if !c.is_finite() {
            return Err(non_finite(problem, m, i, candidate[0], c, "marginal cost"));
        }
        if c < current {
            return Ok(candidate[0]);
        }
        step *= 0.5;
    }
    Ok(u)
}

/// One Newton/gradient sweep of stage `m`; returns the new stage values.
///
/// Steps are damped per point: a step that does not lower `C_m(., y_i)` is
/// halved, up to `MAX_HALVINGS` times, and the point keeps its value if none
/// helps.
pub fn local_update_phase(problem: &dyn Problem, m: usize, controllers: &ControllerSet, cfg: &SolverConfig) -> Result<Vec<f64>> {
    let ctx = problem.marginal(m, controllers)?;
    let ctx = ctx.as_ref();
    let values = controllers.stage(m).values();
    let mut next = values
        .par_iter()
        .enumerate()
        .map(|(i, &u)| local_step(problem, ctx, m, i, u, cfg))
        .collect::<Result<Vec<f64>>>()?;
    problem.project(m, &mut next);
    Ok(next)
}

/// Best of the window candidates for point `i`; the first (smallest index)
/// wins ties.
fn exhaust_window(
    problem: &dyn Problem,
    ctx: &dyn MarginalCost,
    m: usize,
    i: usize,
    values: &[f64],
    radius: f64,
) -> Result<f64> {
    let grid = &problem.grids()[m];
    let window = grid.window_indices(grid.point(i), radius)?;
    let mut best = (f64::INFINITY, values[i]);
    let mut previous = None;
    for &v in &values[window] {
        // runs of equal values are common in flat regions and cost the same
        if previous == Some(v.to_bits()) {
            continue;
        }
        previous = Some(v.to_bits());
        let c = ctx.cost_at(v, i);
        if !c.is_finite() {
            return Err(non_finite(problem, m, i, v, c, "marginal cost"));
        }
        if c < best.0 {
            best = (c, v);
        }
    }
    Ok(best.1)
}

/// One partial-exhaustion sweep of stage `m`: each point takes the stored
/// value, among those within the radius, that minimises its marginal cost.
pub fn partial_exhaustion_phase(
    problem: &dyn Problem,
    m: usize,
    controllers: &ControllerSet,
    cfg: &SolverConfig,
) -> Result<Vec<f64>> {
    let ctx = problem.marginal(m, controllers)?;
    let ctx = ctx.as_ref();
    let values = controllers.stage(m).values();
    let radius = cfg.radius_for(&problem.grids()[m]);
    let mut next = (0..values.len())
        .into_par_iter()
        .map(|i| exhaust_window(problem, ctx, m, i, values, radius))
        .collect::<Result<Vec<f64>>>()?;
    problem.project(m, &mut next);
    Ok(next)
}

type Phase = fn(&dyn Problem, usize, &ControllerSet, &SolverConfig) -> Result<Vec<f64>>;

fn sweep(problem: &dyn Problem, controllers: &mut ControllerSet, cfg: &SolverConfig, phase: Phase) -> Result<()> {
    for m in 0..problem.stages() {
        let next = phase(problem, m, controllers, cfg)?;
        controllers.stage_mut(m).set_values(next);
    }
    Ok(())
}

/// Runs the loop from `initial`, or from the problem's default start.
pub fn solve(problem: &dyn Problem, cfg: &SolverConfig, initial: Option<ControllerSet>) -> Result<SolveResult> {
    solve_with(problem, cfg, initial, |_, _| ControlFlow::Continue(()))
}

/// [`solve`] with a callback after every round; returning `Break` ends the
/// run with [`Termination::Stopped`].
pub fn solve_with(
    problem: &dyn Problem,
    cfg: &SolverConfig,
    initial: Option<ControllerSet>,
    mut on_round: impl FnMut(&RoundReport, &ControllerSet) -> ControlFlow<()>,
) -> Result<SolveResult> {
    cfg.validate()?;
    let mut controllers = initial.unwrap_or_else(|| problem.initial_controllers());
    controllers.check_conforms(problem.grids())?;
    let pool = cfg.thread_pool()?;
    let start = Instant::now();

    let objective_of = |u: &ControllerSet| pool.install(|| problem.objective(u));
    let run_sweep = |u: &mut ControllerSet, phase: Phase| pool.install(|| sweep(problem, u, cfg, phase));

    let initial_objective = objective_of(&controllers)?;
    let mut objective = initial_objective;
    let n = cfg.iterations;
    let mut n_local = match cfg.mode {
        Schedule::Adaptive => n / 2,
        Schedule::FixedSplit(k) => k,
    };
    let mut rounds = Vec::new();
    let mut termination = Termination::MaxRoundsReached;

    for round in 1..=cfg.max_rounds {
        let t0 = Instant::now();
        for _ in 0..n_local {
            run_sweep(&mut controllers, local_update_phase)?;
        }
        let after_local = objective_of(&controllers)?;
        for _ in 0..n - n_local {
            run_sweep(&mut controllers, partial_exhaustion_phase)?;
        }
        let after_partial = objective_of(&controllers)?;

        let report = RoundReport {
            round,
            objective: after_partial,
            objective_after_local: after_local,
            improvement_local: (objective - after_local).abs(),
            improvement_partial: (after_local - after_partial).abs(),
            n_local,
            n_partial: n - n_local,
            wall_ms: t0.elapsed().as_secs_f64() * 1e3,
        };
        objective = after_partial;
        let done = report.improvement_local + report.improvement_partial <= cfg.precision;
        if let Schedule::Adaptive = cfg.mode {
            n_local = adaptive_allocation(report.improvement_local, report.improvement_partial, n).0;
        }
        let flow = on_round(&report, &controllers);
        rounds.push(report);
        if done {
            termination = Termination::Converged;
            break;
        }
        if flow.is_break() {
            termination = Termination::Stopped;
            break;
        }
    }

    Ok(SolveResult {
        controllers,
        initial_objective,
        final_objective: objective,
        rounds,
        termination,
        wall_ms: start.elapsed().as_secs_f64() * 1e3,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::SampledController;
    use crate::problems::{Inventory, InventoryParams, Quadratic, QuadraticParams, Witsenhausen, WitsenhausenParams};
    use proptest::prelude::*;

    fn unit_grid() -> Grid {
        Grid::new(-25.0, 25.0, 11).unwrap()
    }

    #[test]
    fn step_examples() {
        let cfg = SolverConfig::default();
        let g = unit_grid();
        assert_eq!(newton_or_gradient_step(-6.0, 2.0, 0.0, &cfg, &g), 3.0);
        assert!((newton_or_gradient_step(-6.0, -1.0, 0.0, &cfg, &g) - 0.6).abs() < 1e-15);
        assert_eq!(newton_or_gradient_step(0.0, 2.0, 1.5, &cfg, &g), 1.5);
        assert_eq!(newton_or_gradient_step(0.0, -4.0, 1.5, &cfg, &g), 1.5);
    }

    #[test]
    fn newton_step_is_capped() {
        let cfg = SolverConfig { newton_cap: Some(0.5), ..Default::default() };
        assert_eq!(newton_or_gradient_step(-100.0, 1.0, 0.0, &cfg, &unit_grid()), 0.5);
        // default cap is a tenth of the grid range
        let cfg = SolverConfig::default();
        assert_eq!(newton_or_gradient_step(100.0, 1.0, 0.0, &cfg, &unit_grid()), -5.0);
    }

    #[test]
    fn allocation_examples() {
        assert_eq!(adaptive_allocation(1.0, 1.0, 20), (10, 10));
        assert_eq!(adaptive_allocation(0.0, 5.0, 20), (1, 19));
        assert_eq!(adaptive_allocation(5.0, 0.0, 20), (19, 1));
        assert_eq!(adaptive_allocation(3.0, 1.0, 20), (15, 5));
        assert_eq!(adaptive_allocation(0.0, 0.0, 20), (10, 10));
        assert_eq!(adaptive_allocation(0.0, 0.0, 7), (3, 4));
    }

    proptest! {
        #[test]
        fn allocation_bounds(il in 0.0f64..1e6, ip in 0.0f64..1e6, n in 2usize..500) {
            let (nl, np) = adaptive_allocation(il, ip, n);
            prop_assert_eq!(nl + np, n);
            prop_assert!(nl >= 1 && nl < n);
        }
    }

    #[test]
    fn rejects_bad_config() {
        for cfg in [
            SolverConfig { iterations: 1, ..Default::default() },
            SolverConfig { precision: -1.0, ..Default::default() },
            SolverConfig { step_size: 0.0, ..Default::default() },
            SolverConfig { radius: Some(-0.1), ..Default::default() },
            SolverConfig { workers: Some(0), ..Default::default() },
            SolverConfig { mode: Schedule::FixedSplit(20), ..Default::default() },
            SolverConfig { mode: Schedule::FixedSplit(0), ..Default::default() },
        ] {
            assert!(cfg.validate().unwrap_err().is_config_error());
        }
    }

    fn quadratic() -> Quadratic {
        Quadratic::with_resolution(QuadraticParams::default(), 101).unwrap()
    }

    #[test]
    fn one_local_phase_solves_the_quadratic() {
        let p = quadratic();
        let u = ControllerSet::new(vec![SampledController::constant(p.grids()[0].clone(), 0.0)]);
        let cfg = SolverConfig { newton_cap: Some(100.0), ..Default::default() };
        let next = local_update_phase(&p, 0, &u, &cfg).unwrap();
        for (y, v) in p.grids()[0].points().iter().zip(&next) {
            assert!((v - 2.0 * y).abs() < 1e-12);
        }
    }

    #[test]
    fn one_local_phase_finds_the_linear_encoder() {
        let p = Witsenhausen::with_resolution(WitsenhausenParams::default(), 400).unwrap();
        let zero = ControllerSet::new(p.grids().iter().map(|g| SampledController::constant(g.clone(), 0.0)).collect());
        let cfg = SolverConfig { newton_cap: Some(100.0), ..Default::default() };
        let next = local_update_phase(&p, 0, &zero, &cfg).unwrap();
        let g = &p.grids()[0];
        // where the decoder grid covers the noise window around both y and the
        // target, the encoder cost is exactly quadratic
        for i in (80..320).step_by(7) {
            let want = -g.point(i) / 1.04;
            assert!((next[i] - want).abs() < 1e-6, "y={} got {} want {want}", g.point(i), next[i]);
        }
    }

    #[test]
    fn exhaustion_leaves_constants_and_tiny_windows_alone() {
        let p = Witsenhausen::with_resolution(WitsenhausenParams::default(), 300).unwrap();
        let flat = ControllerSet::new(p.grids().iter().map(|g| SampledController::constant(g.clone(), 1.25)).collect());
        for m in 0..2 {
            let next = partial_exhaustion_phase(&p, m, &flat, &SolverConfig::default()).unwrap();
            assert!(next.iter().all(|&v| v == 1.25));
        }
        let u = p.initial_controllers();
        let tiny = SolverConfig { radius: Some(0.4 * p.grids()[0].spacing()), ..Default::default() };
        for m in 0..2 {
            let next = partial_exhaustion_phase(&p, m, &u, &tiny).unwrap();
            assert_eq!(next, u.stage(m).values());
        }
    }

    #[test]
    fn projection_applies_after_each_phase() {
        let p = Inventory::with_resolution(InventoryParams::default(), 121).unwrap();
        let start = ControllerSet::new(
            p.grids().iter().map(|g| SampledController::from_fn(g.clone(), |y| -y)).collect(),
        );
        let cfg = SolverConfig { step_size: 50.0, ..Default::default() };
        for m in 0..2 {
            assert!(local_update_phase(&p, m, &start, &cfg).unwrap().iter().all(|&v| v >= 0.0));
            assert!(partial_exhaustion_phase(&p, m, &start, &cfg).unwrap().iter().all(|&v| v >= 0.0));
        }
    }

    #[test]
    fn quadratic_converges_exactly() {
        let p = quadratic();
        let res = solve(&p, &SolverConfig::default(), None).unwrap();
        assert_eq!(res.termination, Termination::Converged);
        assert!(res.rounds.len() <= 2, "{} rounds", res.rounds.len());
        for (y, v) in p.grids()[0].points().iter().zip(res.controllers.stage(0).values()) {
            assert!((v - 2.0 * y).abs() <= 1e-9);
        }
        assert_eq!(res.final_objective, res.rounds.last().unwrap().objective);
    }

    #[test]
    fn zero_precision_runs_one_round_at_least() {
        let p = quadratic();
        let cfg = SolverConfig { precision: 0.0, max_rounds: 3, ..Default::default() };
        let res = solve(&p, &cfg, None).unwrap();
        assert!(!res.rounds.is_empty());
    }

    #[test]
    fn max_rounds_is_reported() {
        let p = Witsenhausen::with_resolution(WitsenhausenParams::default(), 200).unwrap();
        let cfg = SolverConfig { max_rounds: 2, iterations: 4, ..Default::default() };
        let res = solve(&p, &cfg, None).unwrap();
        assert_eq!(res.termination, Termination::MaxRoundsReached);
        assert_eq!(res.rounds.len(), 2);
        for r in &res.rounds {
            assert_eq!(r.n_local + r.n_partial, 4);
        }
    }

    #[test]
    fn fixed_split_keeps_its_split() {
        let p = Witsenhausen::with_resolution(WitsenhausenParams::default(), 200).unwrap();
        let cfg = SolverConfig { max_rounds: 3, mode: Schedule::FixedSplit(19), ..Default::default() };
        let res = solve(&p, &cfg, None).unwrap();
        assert!(res.rounds.iter().all(|r| r.n_local == 19 && r.n_partial == 1));
    }

    #[test]
    fn callback_can_stop_the_run() {
        let p = Witsenhausen::with_resolution(WitsenhausenParams::default(), 200).unwrap();
        let cfg = SolverConfig { iterations: 4, ..Default::default() };
        let res = solve_with(&p, &cfg, None, |r, _| {
            if r.round == 2 {
                ControlFlow::Break(())
            } else {
                ControlFlow::Continue(())
            }
        })
        .unwrap();
        assert_eq!(res.termination, Termination::Stopped);
        assert_eq!(res.rounds.len(), 2);
    }

    #[test]
    fn exhaustion_fixed_point_has_no_improvement() {
        let p = Witsenhausen::with_resolution(WitsenhausenParams::default(), 200).unwrap();
        let cfg = SolverConfig { iterations: 4, max_rounds: 30, ..Default::default() };
        let res = solve(&p, &cfg, None).unwrap();
        // sweep until the partial-exhaustion output stops changing
        let mut u = res.controllers;
        for _ in 0..200 {
            let before = u.clone();
            sweep(&p, &mut u, &cfg, partial_exhaustion_phase).unwrap();
            if (0..2).all(|m| before.stage(m).values() == u.stage(m).values()) {
                break;
            }
        }
        let j0 = p.objective(&u).unwrap();
        sweep(&p, &mut u, &cfg, partial_exhaustion_phase).unwrap();
        assert_eq!(p.objective(&u).unwrap(), j0);
    }
}

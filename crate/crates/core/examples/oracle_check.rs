//! Cross-checks a converged zero-delay solution against the brute-force
//! oracles: full-range grid search of each marginal cost and a Monte Carlo
//! estimate of the objective.
//!
//! cargo run --release --example oracle_check

use ucp::oracle::{exhaustive_argmin_in, monte_carlo_objective, OracleConfig};
use ucp::problems::{ZeroDelay, ZeroDelayParams};
use ucp::solver::{solve, SolverConfig};
use ucp::Problem;

fn main() -> ucp::Result<()> {
    let problem = ZeroDelay::with_resolution(ZeroDelayParams::default(), 1000)?;
    let result = solve(&problem, &SolverConfig::default(), None)?;
    let u = &result.controllers;
    let oc = OracleConfig { u_lo: -10.0, u_hi: 10.0, ..Default::default() };

    for m in 0..problem.stages() {
        let grid = &problem.grids()[m];
        let ctx = problem.marginal(m, u)?;
        println!("stage {m}      y    solver    oracle");
        for y in [-3.0, -2.0, -1.0, -0.5, 0.0, 0.5, 1.0, 2.0, 3.0] {
            let i = grid.nearest_index(y);
            let arg = exhaustive_argmin_in(ctx.as_ref(), grid.point(i), &oc)?;
            println!("       {:6.3}  {:8.4}  {:8.4}", grid.point(i), u.stage(m).values()[i], arg);
        }
    }

    let mc = monte_carlo_objective(&problem, u, &oc)?;
    println!(
        "\nquadrature J = {:.6}, Monte Carlo J = {:.6} +- {:.6} ({} samples)",
        result.final_objective, mc.estimate, mc.stderr, mc.samples
    );
    Ok(())
}

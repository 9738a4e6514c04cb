//! The synthetic problem `J = E[(u(y) - a y)^2]`, whose optimum `u = a y` is
//! known. A quick check that the solver lands on it to machine precision.
//!
//! cargo run --release --example quadratic -- [d]

use ucp::problems::{Quadratic, QuadraticParams};
use ucp::solver::{solve, SolverConfig};

fn main() -> ucp::Result<()> {
    let d = std::env::args().nth(1).and_then(|s| s.parse().ok()).unwrap_or(101);
    let params = QuadraticParams::default();
    let problem = Quadratic::with_resolution(params, d)?;
    let result = solve(&problem, &SolverConfig::default(), None)?;

    let u0 = result.controllers.stage(0);
    let sup = u0.grid().points().iter().zip(u0.values()).map(|(y, u)| (u - params.slope * y).abs()).fold(0.0, f64::max);
    println!("{:?} after {} rounds", result.termination, result.rounds.len());
    println!("J: {:.3e} -> {:.3e}", result.initial_objective, result.final_objective);
    println!("max |u(y) - {} y| = {sup:.1e}", params.slope);
    Ok(())
}

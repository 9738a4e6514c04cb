//! Solves Witsenhausen's counterexample (k = 0.2, sigma = 5) and prints the
//! convergence trace and a coarse view of the staircase encoder.
//!
//! cargo run --release --example witsenhausen -- [d]

use std::ops::ControlFlow;

use ucp::problems::{Witsenhausen, WitsenhausenParams};
use ucp::solver::{solve_with, SolverConfig};

fn main() -> ucp::Result<()> {
    let d = std::env::args().nth(1).and_then(|s| s.parse().ok()).unwrap_or(2000);
    let problem = Witsenhausen::with_resolution(WitsenhausenParams::default(), d)?;
    let cfg = SolverConfig::default();

    let result = solve_with(&problem, &cfg, None, |r, _| {
        println!(
            "round {:4}  J = {:.6}  I_L = {:.2e}  I_P = {:.2e}  N_L/N_P = {}/{}  {:.0} ms",
            r.round, r.objective, r.improvement_local, r.improvement_partial, r.n_local, r.n_partial, r.wall_ms
        );
        ControlFlow::Continue(())
    })?;
    println!("{:?} after {} rounds, J = {:.6}, {:.1} s", result.termination, result.rounds.len(), result.final_objective, result.wall_ms / 1e3);

    let u0 = result.controllers.stage(0);
    println!("\n     y     y + u0(y)");
    for y in (-12..=12).map(|k| k as f64) {
        println!("{y:6.1}  {:10.4}", y + u0.eval(y));
    }
    Ok(())
}

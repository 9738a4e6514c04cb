//! Adaptive iteration allocation against a fixed 19:1 split on
//! Witsenhausen's problem: rounds and time needed to reach a target J.
//!
//! cargo run --release --example adaptive_vs_fixed -- [d] [target]

use std::ops::ControlFlow;

use ucp::problems::{Witsenhausen, WitsenhausenParams};
use ucp::solver::{solve_with, Schedule, SolverConfig};

fn main() -> ucp::Result<()> {
    let mut args = std::env::args().skip(1);
    let d = args.next().and_then(|s| s.parse().ok()).unwrap_or(1000);
    let target: f64 = args.next().and_then(|s| s.parse().ok()).unwrap_or(0.17);
    let problem = Witsenhausen::with_resolution(WitsenhausenParams::default(), d)?;

    for mode in [Schedule::Adaptive, Schedule::FixedSplit(19)] {
        let cfg = SolverConfig { mode, max_rounds: 200, ..Default::default() };
        let mut trace = Vec::new();
        let result = solve_with(&problem, &cfg, None, |r, _| {
            trace.push((r.round, r.objective, r.n_local));
            if r.objective <= target {
                ControlFlow::Break(())
            } else {
                ControlFlow::Continue(())
            }
        })?;
        println!("{mode:?}");
        for (round, j, n_local) in &trace {
            println!("  round {round:3}  J = {j:.6}  N_L = {n_local}");
        }
        let reached = result.final_objective <= target;
        println!(
            "  {} J <= {target} after {} rounds, {:.1} s\n",
            if reached { "reached" } else { "did not reach" },
            result.rounds.len(),
            result.wall_ms / 1e3
        );
    }
    Ok(())
}

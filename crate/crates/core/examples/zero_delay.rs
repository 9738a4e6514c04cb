//! Zero-delay source-channel coding with uniform channel noise (lambda = 2):
//! solves for the encoder/decoder pair and prints the quantiser it finds.
//!
//! cargo run --release --example zero_delay -- [d]

use std::ops::ControlFlow;

use ucp::problems::{ZeroDelay, ZeroDelayParams};
use ucp::solver::{solve_with, SolverConfig};

fn main() -> ucp::Result<()> {
    let d = std::env::args().nth(1).and_then(|s| s.parse().ok()).unwrap_or(2000);
    let problem = ZeroDelay::with_resolution(ZeroDelayParams::default(), d)?;
    let result = solve_with(&problem, &SolverConfig::default(), None, |r, _| {
        if r.round % 10 == 0 {
            println!(
                "round {:5}  J = {:.6}  I_L = {:.1e}  I_P = {:.1e}  N_L = {}",
                r.round, r.objective, r.improvement_local, r.improvement_partial, r.n_local
            );
        }
        ControlFlow::Continue(())
    })?;
    println!(
        "{:?} after {} rounds: J = {:.6} ({:.1} s)",
        result.termination,
        result.rounds.len(),
        result.final_objective,
        result.wall_ms / 1e3
    );

    let (enc, dec) = (result.controllers.stage(0), result.controllers.stage(1));
    println!("\n    x0   u0(x0)   u1(u0(x0))");
    for k in -12..=12 {
        let x = k as f64 * 0.25;
        let v = enc.eval(x);
        println!("{x:6.2} {v:8.4} {:10.4}", dec.eval(v));
    }
    Ok(())
}

//! Runs the same Witsenhausen solve with different worker counts and checks
//! that the controllers agree bit for bit.
//!
//! cargo run --release --example parallel_determinism -- [workers...]

use ucp::problems::{Witsenhausen, WitsenhausenParams};
use ucp::solver::{solve, SolverConfig};

fn main() -> ucp::Result<()> {
    let mut workers: Vec<usize> = std::env::args().skip(1).filter_map(|s| s.parse().ok()).collect();
    if workers.is_empty() {
        workers = vec![1, 2, 4];
    }
    let problem = Witsenhausen::with_resolution(WitsenhausenParams::default(), 1000)?;
    let mut reference = None;
    for w in workers {
        let cfg = SolverConfig { workers: Some(w), max_rounds: 5, ..Default::default() };
        let result = solve(&problem, &cfg, None)?;
        let bits: Vec<u64> = result.controllers.iter().flat_map(|c| c.values().iter().map(|v| v.to_bits())).collect();
        let same = reference.get_or_insert_with(|| bits.clone()) == &bits;
        println!(
            "{w} workers: J = {:.12}  {:.2} s  {}",
            result.final_objective,
            result.wall_ms / 1e3,
            if same { "identical" } else { "DIFFERENT" }
        );
    }
    Ok(())
}

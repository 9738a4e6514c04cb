//! Multi-stage inventory control: solves the ordering policy and prints it
//! next to the forward density of the stock level and the cost-to-go.
//!
//! cargo run --release --example inventory -- [stages]

use ucp::problems::{Inventory, InventoryParams};
use ucp::solver::{solve, SolverConfig};
use ucp::Problem;

fn main() -> ucp::Result<()> {
    let stages = std::env::args().nth(1).and_then(|s| s.parse().ok()).unwrap_or(2);
    let params = InventoryParams { stages, ..Default::default() };
    let problem = Inventory::with_resolution(params, 601)?;
    let result = solve(&problem, &SolverConfig::default(), None)?;
    println!("{:?} after {} rounds, J = {:.6}", result.termination, result.rounds.len(), result.final_objective);

    let u = &result.controllers;
    for m in 0..problem.stages() {
        let grid = &problem.grids()[m];
        let density = problem.forward_density(m, u)?;
        let mass: f64 = density.iter().map(|f| f * grid.spacing()).sum();
        println!("\nstage {m}: total mass {mass:.12}");
        println!("     x    u(x)  density  cost-to-go");
        for x in [-2.0, -1.5, -1.0, -0.5, 0.0, 0.5, 1.0, 1.5, 2.0] {
            let i = grid.nearest_index(x);
            println!("{x:6.2}  {:6.4}  {:7.4}  {:10.4}", u.stage(m).eval(x), density[i], problem.cost_to_go(m, x, u)?);
        }
    }
    Ok(())
}

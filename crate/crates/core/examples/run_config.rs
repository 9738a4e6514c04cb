//! Loads a run configuration file, applies `key=value` overrides and writes
//! the same artifacts as `ucp solve`: controller CSVs, report and
//! convergence table.
//!
//! cargo run --release --example run_config -- examples/configs/inventory.toml solver.max_rounds=50

use std::path::Path;

use ucp::cli::{run_solve, RunConfig};

fn main() -> ucp::Result<()> {
    let mut args = std::env::args().skip(1);
    let path = args.next().unwrap_or_else(|| "examples/configs/inventory.toml".into());
    let overrides: Vec<(String, String)> =
        args.filter_map(|a| a.split_once('=').map(|(k, v)| (k.to_string(), v.to_string()))).collect();
    let cfg = RunConfig::load(Some(Path::new(&path)), &overrides)?;
    let result = run_solve(&cfg, &cfg.output_dir)?;
    println!(
        "{} {:?} after {} rounds, J = {:.6}; artifacts in {}",
        cfg.problem,
        result.termination,
        result.rounds.len(),
        result.final_objective,
        cfg.output_dir.display()
    );
    Ok(())
}

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use ucp::cli::{exit_code, run_compare, run_pin, run_solve, RunConfig};

#[derive(Parser)]
#[command(version, about = "Marginal-cost solver for sampled control problems")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Solve one configured problem.
    Solve(RunArgs),
    /// Solve adaptively and with a fixed split, and compare.
    Compare {
        #[command(flatten)]
        run: RunArgs,
        /// Local-update iterations per round in the fixed-split run.
        #[arg(long, default_value_t = 19)]
        n_local: usize,
        /// Report the first round reaching this objective.
        #[arg(long)]
        target: Option<f64>,
    },
    /// Recompute the regression fixtures with brute-force quadrature.
    Pin {
        #[arg(long, default_value = "fixtures.json")]
        output: PathBuf,
        /// Quadrature points per integral.
        #[arg(long, default_value_t = 200_001)]
        points: usize,
    },
}

#[derive(Args)]
struct RunArgs {
    /// TOML run configuration.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Override a configuration key, e.g. `--set solver.iterations=30`.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    sets: Vec<String>,
    #[arg(long)]
    problem: Option<String>,
    /// Points per stage grid.
    #[arg(long)]
    d: Option<usize>,
    #[arg(long)]
    workers: Option<usize>,
    #[arg(long)]
    max_rounds: Option<usize>,
    /// `adaptive` or `fixed_split:<n_local>`.
    #[arg(long)]
    mode: Option<String>,
    #[arg(long)]
    output_dir: Option<PathBuf>,
}

impl RunArgs {
    fn load(&self) -> ucp::Result<RunConfig> {
        let mut overrides = Vec::new();
        for s in &self.sets {
            let (k, v) = s
                .split_once('=')
                .ok_or_else(|| ucp::Error::InvalidConfig(format!("--set expects KEY=VALUE (got {s:?})")))?;
            overrides.push((k.trim().to_string(), v.trim().to_string()));
        }
        let mut flag = |k: &str, v: Option<String>| {
            if let Some(v) = v {
                overrides.push((k.to_string(), v));
            }
        };
        flag("problem", self.problem.clone());
        flag("resolution", self.d.map(|d| d.to_string()));
        flag("solver.workers", self.workers.map(|w| w.to_string()));
        flag("solver.max_rounds", self.max_rounds.map(|r| r.to_string()));
        flag(
            "solver.mode",
            self.mode.as_ref().map(|m| match m.strip_prefix("fixed_split:") {
                Some(n) => format!("{{ fixed_split = {n} }}"),
                None => format!("{m:?}"),
            }),
        );
        flag("output_dir", self.output_dir.as_ref().map(|p| format!("{:?}", p.display().to_string())));
        RunConfig::load(self.config.as_deref(), &overrides)
    }
}

fn run(cli: Cli) -> ucp::Result<()> {
    match cli.command {
        Command::Solve(args) => {
            let cfg = args.load()?;
            let res = run_solve(&cfg, &cfg.output_dir)?;
            println!(
                "{}: J = {:.6} after {} rounds ({:?}, {:.1} s)",
                cfg.problem,
                res.final_objective,
                res.rounds.len(),
                res.termination,
                res.wall_ms / 1e3
            );
        }
        Command::Compare { run, n_local, target } => {
            let cfg = run.load()?;
            let summary = run_compare(&cfg, n_local, target, &cfg.output_dir)?;
            for r in &summary.runs {
                let reached = r.rounds_to_target.map_or("-".to_string(), |n| n.to_string());
                println!("{:?}: J = {:.6}, {} rounds, target reached at round {reached}", r.mode, r.final_J, r.total_rounds);
            }
        }
        Command::Pin { output, points } => {
            for f in run_pin(points, &output)? {
                println!("{:40} reference {:.12}  model {:.12}", f.name, f.reference, f.model);
            }
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e) as u8)
        }
    }
}

//! Solver for control problems whose objective is an integral of the
//! controllers, with each controller sampled as a step function on a grid.
//!
//! The solver alternates two pointwise minimisations of the marginal cost
//! `C_m(u, y)`: Newton/gradient steps in the controller's range, and a search
//! over values the controller already takes nearby in its domain.
//!
//! ```no_run
//! use ucp::problems::{Witsenhausen, WitsenhausenParams};
//! use ucp::solver::{solve, SolverConfig};
//!
//! let problem = Witsenhausen::with_resolution(WitsenhausenParams::default(), 2000)?;
//! let result = solve(&problem, &SolverConfig::default(), None)?;
//! println!("J = {}", result.final_objective);
//! # Ok::<(), ucp::Error>(())
//! ```

// `!(x > 0.0)` rejects NaN along with non-positive values
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod cli;
pub mod error;
pub mod grid;
pub mod numerics;
pub mod oracle;
pub mod problem;
pub mod problems;
pub mod solver;

pub use error::{Error, Result};
pub use grid::{ControllerSet, Grid, GridSpec, SampledController};
pub use problem::{MarginalCost, Problem};
pub use solver::{solve, SolveResult, SolverConfig};

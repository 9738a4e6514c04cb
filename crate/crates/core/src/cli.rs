//! Run configuration, result files and the command implementations behind the
//! `ucp` binary.
//!
//! A run is described by one TOML file:
//!
//! ```toml
//! problem = "witsenhausen"
//! resolution = 2000          # points per stage grid unless `grids` is given
//! output_dir = "out"
//!
//! [witsenhausen]
//! k = 0.2
//! sigma = 5.0
//!
//! [solver]
//! iterations = 20
//! mode = { fixed_split = 19 }   # or "adaptive"
//! ```
//!
//! Dotted `key=value` overrides are applied on top of the file before it is
//! validated, so flags always win.

use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{ControllerSet, Grid, GridSpec};
use crate::numerics::{gaussian_expectation, normal_pdf, trapezoid};
use crate::oracle::{exhaustive_argmin, OracleConfig};
use crate::problem::Problem;
use crate::problems::{
    Inventory, InventoryParams, Quadratic, QuadraticParams, StageCost, Witsenhausen, WitsenhausenParams, ZeroDelay,
    ZeroDelayParams,
};
use crate::solver::{solve, RoundReport, Schedule, SolveResult, SolverConfig, Termination};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum ProblemKind {
    #[default]
    Witsenhausen,
    ZeroDelay,
    Inventory,
    Quadratic,
}

impl ProblemKind {
    pub fn default_resolution(self) -> usize {
        match self {
            ProblemKind::Witsenhausen | ProblemKind::ZeroDelay => 2000,
            ProblemKind::Inventory => 601,
            ProblemKind::Quadratic => 101,
        }
    }
}

impl fmt::Display for ProblemKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let name = match self {
            ProblemKind::Witsenhausen => "witsenhausen",
            ProblemKind::ZeroDelay => "zero_delay",
            ProblemKind::Inventory => "inventory",
            ProblemKind::Quadratic => "quadratic",
        };
        f.write_str(name)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RunConfig {
    pub problem: ProblemKind,
    /// Grid size used with the problem's default sampling ranges.
    pub resolution: Option<usize>,
    /// Explicit per-stage grids; replaces `resolution` when present.
    pub grids: Option<Vec<GridSpec>>,
    pub output_dir: PathBuf,
    pub witsenhausen: WitsenhausenParams,
    pub zero_delay: ZeroDelayParams,
    pub inventory: InventoryParams,
    pub quadratic: QuadraticParams,
    pub solver: SolverConfig,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            problem: ProblemKind::default(),
            resolution: None,
            grids: None,
            output_dir: PathBuf::from("ucp-out"),
            witsenhausen: WitsenhausenParams::default(),
            zero_delay: ZeroDelayParams::default(),
            inventory: InventoryParams::default(),
            quadratic: QuadraticParams::default(),
            solver: SolverConfig::default(),
        }
    }
}

impl RunConfig {
    /// Reads `path` (if any), applies `overrides` and validates the result.
    pub fn load(path: Option<&Path>, overrides: &[(String, String)]) -> Result<Self> {
        let mut table = match path {
            Some(p) => {
                let text = fs::read_to_string(p).map_err(|e| Error::io(p, e))?;
                text.parse::<toml::Table>()
                    .map_err(|e| Error::Parse { path: p.to_path_buf(), message: e.to_string() })?
            }
            None => toml::Table::new(),
        };
        for (key, value) in overrides {
            set_dotted(&mut table, key, value)?;
        }
        let origin = path.map_or_else(|| PathBuf::from("<flags>"), Path::to_path_buf);
        let cfg: RunConfig = table
            .try_into()
            .map_err(|e: toml::de::Error| Error::Parse { path: origin, message: e.message().to_string() })?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        self.solver.validate()?;
        if let Some(d) = self.resolution {
            if d < 2 {
                return Err(Error::InvalidGrid(format!("grid.d must be at least 2 (resolution = {d})")));
            }
        }
        self.grid_specs().iter().try_for_each(|g| g.build().map(drop))
    }

    pub fn grid_specs(&self) -> Vec<GridSpec> {
        if let Some(g) = &self.grids {
            return g.clone();
        }
        let d = self.resolution.unwrap_or(self.problem.default_resolution());
        match self.problem {
            ProblemKind::Witsenhausen => self.witsenhausen.default_grids(d),
            ProblemKind::ZeroDelay => self.zero_delay.default_grids(d),
            ProblemKind::Inventory => self.inventory.default_grids(d),
            ProblemKind::Quadratic => self.quadratic.default_grids(d),
        }
    }
}

/// Sets `a.b.c = value` in `table`, reading `value` as a TOML value when it
/// parses as one and as a bare string otherwise.
fn set_dotted(table: &mut toml::Table, key: &str, value: &str) -> Result<()> {
    let parsed = format!("v = {value}")
        .parse::<toml::Table>()
        .ok()
        .and_then(|mut t| t.remove("v"))
        .unwrap_or_else(|| toml::Value::String(value.to_string()));
    let mut parts: Vec<&str> = key.split('.').collect();
    let leaf = parts.pop().filter(|k| !k.is_empty());
    let Some(leaf) = leaf else {
        return Err(Error::InvalidConfig(format!("empty override key {key:?}")));
    };
    let mut node = table;
    for part in parts {
        let entry = node.entry(part.to_string()).or_insert_with(|| toml::Value::Table(toml::Table::new()));
        node = entry
            .as_table_mut()
            .ok_or_else(|| Error::InvalidConfig(format!("override {key}: {part} is not a table")))?;
    }
    node.insert(leaf.to_string(), parsed);
    Ok(())
}

pub fn build_problem(cfg: &RunConfig) -> Result<Box<dyn Problem>> {
    let grids = cfg.grid_specs().iter().map(GridSpec::build).collect::<Result<Vec<_>>>()?;
    Ok(match cfg.problem {
        ProblemKind::Witsenhausen => Box::new(Witsenhausen::new(cfg.witsenhausen, grids)?),
        ProblemKind::ZeroDelay => Box::new(ZeroDelay::new(cfg.zero_delay, grids)?),
        ProblemKind::Inventory => Box::new(Inventory::new(cfg.inventory, grids)?),
        ProblemKind::Quadratic => Box::new(Quadratic::new(cfg.quadratic, grids)?),
    })
}

/// Process exit status for an error: 1 for bad input, 2 for numerical failure.
pub fn exit_code(err: &Error) -> i32 {
    match err {
        Error::NonFinite { .. } | Error::NonFiniteFunction { .. } | Error::EmptyInput(_) => 2,
        _ => 1,
    }
}

/// Solves the configured problem and writes controllers, `report.json` and
/// `convergence.csv` into `dir`.
pub fn run_solve(cfg: &RunConfig, dir: &Path) -> Result<SolveResult> {
    let problem = build_problem(cfg)?;
    let result = solve(problem.as_ref(), &cfg.solver, None)?;
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    export_controllers(&result.controllers, dir)?;
    write_report(&result, cfg, dir)?;
    write_convergence(&result.rounds, dir)?;
    Ok(result)
}

/// Writes `controller_<m>.csv` for every stage: header `y,u`, one row per
/// grid point in ascending `y`, 17 significant digits.
pub fn export_controllers(controllers: &ControllerSet, dir: &Path) -> Result<Vec<PathBuf>> {
    let mut paths = Vec::with_capacity(controllers.len());
    for (m, c) in controllers.iter().enumerate() {
        let path = dir.join(format!("controller_{m}.csv"));
        let mut w = csv::Writer::from_path(&path).map_err(|e| csv_error(&path, e))?;
        w.write_record(["y", "u"]).map_err(|e| csv_error(&path, e))?;
        for (y, u) in c.grid().points().iter().zip(c.values()) {
            w.write_record([format!("{y:.16e}"), format!("{u:.16e}")]).map_err(|e| csv_error(&path, e))?;
        }
        w.flush().map_err(|e| Error::io(&path, e))?;
        paths.push(path);
    }
    Ok(paths)
}

/// Reads a controller file written by [`export_controllers`] as `(y, u)`.
pub fn read_controller_csv(path: &Path) -> Result<(Vec<f64>, Vec<f64>)> {
    let mut r = csv::Reader::from_path(path).map_err(|e| csv_error(path, e))?;
    let (mut ys, mut us) = (Vec::new(), Vec::new());
    for row in r.deserialize::<(f64, f64)>() {
        let (y, u) = row.map_err(|e| csv_error(path, e))?;
        ys.push(y);
        us.push(u);
    }
    Ok((ys, us))
}

fn csv_error(path: &Path, e: csv::Error) -> Error {
    match e.into_kind() {
        csv::ErrorKind::Io(io) => Error::io(path, io),
        other => Error::Parse { path: path.to_path_buf(), message: format!("{other:?}") },
    }
}

#[allow(non_snake_case)]
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Report {
    pub problem: ProblemKind,
    pub initial_J: f64,
    pub final_J: f64,
    pub termination: Termination,
    pub total_rounds: usize,
    pub wall_ms: f64,
    pub config: RunConfig,
    pub rounds: Vec<RoundReport>,
}

pub fn write_report(result: &SolveResult, cfg: &RunConfig, dir: &Path) -> Result<PathBuf> {
    let report = Report {
        problem: cfg.problem,
        initial_J: result.initial_objective,
        final_J: result.final_objective,
        termination: result.termination,
        total_rounds: result.rounds.len(),
        wall_ms: result.wall_ms,
        config: cfg.clone(),
        rounds: result.rounds.clone(),
    };
    let path = dir.join("report.json");
    let text = serde_json::to_string_pretty(&report).expect("report serialises");
    fs::write(&path, text).map_err(|e| Error::io(&path, e))?;
    Ok(path)
}

pub fn read_report(path: &Path) -> Result<Report> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    serde_json::from_str(&text).map_err(|e| Error::Parse { path: path.to_path_buf(), message: e.to_string() })
}

/// Per-round table with the same fields as the report records.
pub fn write_convergence(rounds: &[RoundReport], dir: &Path) -> Result<PathBuf> {
    let path = dir.join("convergence.csv");
    let mut w = csv::Writer::from_path(&path).map_err(|e| csv_error(&path, e))?;
    for r in rounds {
        w.serialize(r).map_err(|e| csv_error(&path, e))?;
    }
    w.flush().map_err(|e| Error::io(&path, e))?;
    Ok(path)
}

#[allow(non_snake_case)]
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CompareSummary {
    pub target_J: Option<f64>,
    pub runs: Vec<CompareRun>,
}

#[allow(non_snake_case)]
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CompareRun {
    pub mode: Schedule,
    pub final_J: f64,
    pub total_rounds: usize,
    /// First round whose objective is at or below the target.
    pub rounds_to_target: Option<usize>,
    pub wall_ms: f64,
}

/// Solves the same problem adaptively and with a fixed `n_local` split,
/// writing each run into its own subdirectory and a `compare.json` summary.
pub fn run_compare(cfg: &RunConfig, n_local: usize, target: Option<f64>, dir: &Path) -> Result<CompareSummary> {
    let mut runs = Vec::new();
    for (mode, sub) in [(Schedule::Adaptive, "adaptive"), (Schedule::FixedSplit(n_local), "fixed_split")] {
        let mut run_cfg = cfg.clone();
        run_cfg.solver.mode = mode;
        run_cfg.validate()?;
        let result = run_solve(&run_cfg, &dir.join(sub))?;
        let rounds_to_target =
            target.and_then(|t| result.rounds.iter().find(|r| r.objective <= t).map(|r| r.round));
        runs.push(CompareRun {
            mode,
            final_J: result.final_objective,
            total_rounds: result.rounds.len(),
            rounds_to_target,
            wall_ms: result.wall_ms,
        });
    }
    let summary = CompareSummary { target_J: target, runs };
    let path = dir.join("compare.json");
    fs::write(&path, serde_json::to_string_pretty(&summary).expect("summary serialises"))
        .map_err(|e| Error::io(&path, e))?;
    Ok(summary)
}

/// One regression fixture: the value from a brute-force computation that
/// shares no code with the problem implementations, next to what the
/// problem's own marginal cost gives.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Fixture {
    pub name: String,
    pub reference: f64,
    pub model: f64,
}

/// Recomputes the regression values and writes them to `path` as JSON.
/// `points` sets the resolution of the brute-force quadratures.
pub fn run_pin(points: usize, path: &Path) -> Result<Vec<Fixture>> {
    let fixtures = pin_fixtures(points)?;
    if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
        fs::create_dir_all(parent).map_err(|e| Error::io(parent, e))?;
    }
    fs::write(path, serde_json::to_string_pretty(&fixtures).expect("fixtures serialise"))
        .map_err(|e| Error::io(path, e))?;
    Ok(fixtures)
}

/// `E[g(w)]` for `w ~ U(-1, 1)` by the trapezoid rule.
fn uniform_expectation(n: usize, g: impl Fn(f64) -> f64) -> Result<f64> {
    let h = 2.0 / (n - 1) as f64;
    let samples: Vec<f64> = (0..n).map(|i| g(-1.0 + i as f64 * h)).collect();
    Ok(trapezoid(&samples, h)? / 2.0)
}

pub fn pin_fixtures(points: usize) -> Result<Vec<Fixture>> {
    if points < 101 {
        return Err(Error::InvalidConfig(format!("pin needs at least 101 quadrature points (got {points})")));
    }
    let mut out = Vec::new();
    let zeros = |p: &dyn Problem| {
        ControllerSet::new(p.grids().iter().map(|g| crate::grid::SampledController::constant(g.clone(), 0.0)).collect())
    };

    let wp = WitsenhausenParams::default();
    let w = Witsenhausen::with_resolution(wp, 2000)?;
    let u = zeros(&w);
    // C_1(0.5, 1) = E_x0[(x0 - 0.5)^2 phi(1 - x0)] with u_0 = 0
    let reference = gaussian_expectation(0.0, wp.sigma, points, |x| (x - 0.5).powi(2) * normal_pdf(1.0 - x))?;
    let model = crate::problem::marginal_cost(&w, 1, 0.5, 1.0, &u)?;
    out.push(Fixture { name: "witsenhausen_c1_u0zero_u0.5_y1.0".into(), reference, model });
    let oc = OracleConfig::default();
    let model = exhaustive_argmin(&w, 1, 1.0, &u, &oc)?;
    let reference = wp.sigma.powi(2) / (wp.sigma.powi(2) + 1.0);
    out.push(Fixture { name: "witsenhausen_argmin_c1_u0zero_y1.0".into(), reference, model });

    let z = ZeroDelay::with_resolution(ZeroDelayParams::default(), 2000)?;
    let id = ControllerSet::identity(z.grids());
    // C_1(0.2, 0.5) = E_x0[(0.2 - x0)^2 f_w(0.5 - x0)] with u_0 = identity;
    // f_w(0.5 - x0) = 1/2 exactly on x0 in [-0.5, 1.5]
    let support = Grid::new(-0.5, 1.5, points)?;
    let samples: Vec<f64> = support.points().iter().map(|&x| 0.5 * normal_pdf(x) * (0.2 - x).powi(2)).collect();
    let reference = trapezoid(&samples, support.spacing())?;
    let model = crate::problem::marginal_cost(&z, 1, 0.2, 0.5, &id)?;
    out.push(Fixture { name: "zero_delay_c1_u0identity_u0.2_y0.5".into(), reference, model });

    // inventory, two stages, xi = 0.1, gamma = |x|, unclipped identity orders
    let ip = InventoryParams { stages: 2, order_cost: 0.1, stage_cost: StageCost::PiecewiseLinear { h: 1.0, b: 1.0 } };
    let inv = Inventory::with_resolution(ip, 601)?;
    let id = ControllerSet::identity(inv.grids());
    let gamma = |x: f64| x.abs();
    let n = points.min(4001);
    let v1 = |x: f64| -> Result<f64> { Ok(0.1 * x + uniform_expectation(n, |w| gamma(2.0 * x - w))?) };
    let (uu, y) = (0.3, -0.2);
    let zz = y + uu;
    let inner = uniform_expectation(n, |w| gamma(zz - w) + v1(zz - w).unwrap_or(f64::NAN))?;
    let reference = 0.5 * (0.1 * uu + inner);
    let model = crate::problem::marginal_cost(&inv, 0, uu, y, &id)?;
    out.push(Fixture { name: "inventory_c0_identity_u0.3_y-0.2".into(), reference, model });
    let x = 0.25;
    let reference = 0.1 * x + uniform_expectation(n, |w| gamma(2.0 * x - w) + v1(2.0 * x - w).unwrap_or(f64::NAN))?;
    let model = inv.cost_to_go(0, x, &id)?;
    out.push(Fixture { name: "inventory_v0_identity_x0.25".into(), reference, model });

    if let Some(bad) = out.iter().find(|f| !f.reference.is_finite() || !f.model.is_finite()) {
        return Err(Error::NonFiniteFunction { u: f64::NAN, value: if bad.reference.is_finite() { bad.model } else { bad.reference } });
    }
    Ok(out)
}

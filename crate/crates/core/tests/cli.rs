use std::path::Path;
use std::process::Command;

use ucp::cli::{read_controller_csv, read_report, Report};

fn ucp(args: &[&str]) -> std::process::Output {
    Command::new(env!("CARGO_BIN_EXE_ucp")).args(args).output().expect("run ucp")
}

fn out_arg(dir: &Path) -> String {
    dir.display().to_string()
}

#[test]
fn quadratic_defaults_write_controllers() {
    let dir = tempfile::tempdir().unwrap();
    let out = ucp(&["solve", "--problem", "quadratic", "--output-dir", &out_arg(dir.path())]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let (y, u) = read_controller_csv(&dir.path().join("controller_0.csv")).unwrap();
    assert_eq!(y.len(), 101);
    for (y, u) in y.iter().zip(&u) {
        assert!((u - 2.0 * y).abs() < 1e-9);
    }
    assert!(dir.path().join("report.json").exists());
    assert!(dir.path().join("convergence.csv").exists());
}

#[test]
fn csv_y_column_is_the_grid() {
    let dir = tempfile::tempdir().unwrap();
    let out = ucp(&["solve", "--problem", "inventory", "--d", "61", "--output-dir", &out_arg(dir.path())]);
    assert_eq!(out.status.code(), Some(0));
    let grid = ucp::Grid::new(-3.0, 3.0, 61).unwrap();
    for m in 0..2 {
        let (y, u) = read_controller_csv(&dir.path().join(format!("controller_{m}.csv"))).unwrap();
        assert_eq!(y, grid.points());
        assert!(u.iter().all(|&v| v >= 0.0));
    }
    assert!(!dir.path().join("controller_2.csv").exists());
}

#[test]
fn tiny_grid_is_a_config_error() {
    let dir = tempfile::tempdir().unwrap();
    let out = ucp(&["solve", "--problem", "quadratic", "--d", "1", "--output-dir", &out_arg(dir.path())]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("grid.d"));
}

#[test]
fn unknown_field_is_a_config_error() {
    let out = ucp(&["solve", "--set", "solver.iteratons=5"]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("iteratons"));
    let out = ucp(&["solve", "--mode", "fixed_split:20"]);
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn overflow_is_a_numeric_error() {
    let dir = tempfile::tempdir().unwrap();
    let out = ucp(&[
        "solve",
        "--problem",
        "quadratic",
        "--set",
        "quadratic.slope=1e300",
        "--output-dir",
        &out_arg(dir.path()),
    ]);
    assert_eq!(out.status.code(), Some(2), "{}", String::from_utf8_lossy(&out.stderr));
}

#[test]
fn config_file_with_flag_override() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("run.toml");
    std::fs::write(&cfg, "problem = \"inventory\"\nresolution = 61\n[solver]\nmax_rounds = 7\n").unwrap();
    let out_dir = dir.path().join("out");
    let out = ucp(&[
        "solve",
        "--config",
        cfg.to_str().unwrap(),
        "--max-rounds",
        "1",
        "--output-dir",
        &out_arg(&out_dir),
    ]);
    assert_eq!(out.status.code(), Some(0));
    let report = read_report(&out_dir.join("report.json")).unwrap();
    assert_eq!(report.total_rounds, 1);
    assert_eq!(report.config.solver.max_rounds, 1);
    assert_eq!(report.config.resolution, Some(61));
}

fn without_timing(mut r: Report) -> Report {
    r.wall_ms = 0.0;
    r.config.output_dir = Default::default();
    for x in &mut r.rounds {
        x.wall_ms = 0.0;
    }
    r
}

#[test]
fn repeated_runs_are_identical() {
    let dirs = [tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap()];
    for d in &dirs {
        let out = ucp(&["solve", "--problem", "zero_delay", "--d", "300", "--workers", "2", "--output-dir", &out_arg(d.path())]);
        assert_eq!(out.status.code(), Some(0));
    }
    for m in 0..2 {
        let name = format!("controller_{m}.csv");
        assert_eq!(std::fs::read(dirs[0].path().join(&name)).unwrap(), std::fs::read(dirs[1].path().join(&name)).unwrap());
    }
    let reports: Vec<Report> = dirs.iter().map(|d| without_timing(read_report(&d.path().join("report.json")).unwrap())).collect();
    assert_eq!(serde_json::to_value(&reports[0]).unwrap(), serde_json::to_value(&reports[1]).unwrap());
}

#[test]
fn report_records_follow_the_schedule() {
    let dir = tempfile::tempdir().unwrap();
    let out = ucp(&["solve", "--problem", "witsenhausen", "--d", "300", "--output-dir", &out_arg(dir.path())]);
    assert_eq!(out.status.code(), Some(0));
    let report = read_report(&dir.path().join("report.json")).unwrap();
    let n = report.config.solver.iterations;
    assert!(report.rounds.iter().all(|r| r.n_local + r.n_partial == n && r.n_local >= 1 && r.n_partial >= 1));
    assert_eq!(report.termination, ucp::solver::Termination::Converged);
    let last = report.rounds.last().unwrap();
    assert!(last.improvement_local + last.improvement_partial <= report.config.solver.precision);
    assert_eq!(report.final_J, last.objective);

    let text = std::fs::read_to_string(dir.path().join("report.json")).unwrap();
    let raw: serde_json::Value = serde_json::from_str(&text).unwrap();
    for key in ["round", "J", "I_L", "I_P", "N_L", "N_P", "wall_ms"] {
        assert!(raw["rounds"][0].get(key).is_some(), "missing {key}");
    }
}

#[test]
fn compare_runs_both_schedules() {
    let dir = tempfile::tempdir().unwrap();
    let out = ucp(&[
        "compare",
        "--problem",
        "witsenhausen",
        "--d",
        "300",
        "--max-rounds",
        "4",
        "--target",
        "0.3",
        "--output-dir",
        &out_arg(dir.path()),
    ]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let summary: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(dir.path().join("compare.json")).unwrap()).unwrap();
    assert_eq!(summary["runs"].as_array().unwrap().len(), 2);
    let fixed = dir.path().join("fixed_split").join("report.json");
    let report = read_report(&fixed).unwrap();
    assert!(report.rounds.iter().all(|r| r.n_local == 19 && r.n_partial == 1));
}

#[test]
fn pin_writes_fixtures() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("fixtures.json");
    let out = ucp(&["pin", "--points", "2001", "--output", path.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(0));
    let fixtures: Vec<ucp::cli::Fixture> = serde_json::from_str(&std::fs::read_to_string(&path).unwrap()).unwrap();
    assert_eq!(fixtures.len(), 5);
    assert_eq!(ucp(&["pin", "--points", "5"]).status.code(), Some(1));
}

//! The `solve`, `verify`, `kernel` and `report` pipelines.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use fracburgers_core::kernel::{density_envelope, gradient_envelope, StabilityParams, StableKernel};
use fracburgers_core::solver::{solve, Trajectory};
use fracburgers_core::verify::{CheckResult, Status};
use fracburgers_core::Error as CoreError;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::checks::{run_plan, CheckKind, CheckSpec};
use crate::config::Scenario;
use crate::error::{CliError, CliResult};
use crate::output::{
    read_table_csv, read_trajectory, table_csv, write_atomic, write_json, write_table,
    write_trajectory, LEDGER_CSV,
};
use crate::plot::{line_plot, table_series, trajectory_series};

pub const REPORT_JSON: &str = "report.json";
pub const CONFIG_TOML: &str = "config.toml";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunReport {
    pub scenario: String,
    pub config_hash: String,
    pub seed: u64,
    pub pass: bool,
    pub checks: Vec<CheckResult>,
    pub artifacts: Vec<String>,
    /// Wall-clock seconds per phase; the only part that differs between
    /// repeated runs.
    pub timings: BTreeMap<String, f64>,
}

#[derive(Debug, Clone, Default)]
pub struct RunOptions {
    /// Overrides the scenario's output directory.
    pub out_dir: Option<PathBuf>,
    /// Checks to run; all listed checks when empty. Unlisted checks run
    /// with default parameters.
    pub only: Vec<CheckKind>,
    /// Read the trajectory from the output directory when its hash matches.
    pub reuse: bool,
    pub seed: u64,
}

impl RunOptions {
    fn dir(&self, sc: &Scenario) -> PathBuf {
        self.out_dir.clone().unwrap_or_else(|| PathBuf::from(sc.output_dir()))
    }
}

fn relative(dir: &Path, paths: &[PathBuf]) -> Vec<String> {
    paths
        .iter()
        .map(|p| p.strip_prefix(dir).unwrap_or(p).display().to_string())
        .collect()
}

fn file_stem_for(name: &str) -> String {
    name.chars()
        .map(|c| if c.is_ascii_alphanumeric() || "._-".contains(c) { c } else { '_' })
        .collect::<String>()
        .trim_matches('_')
        .to_string()
}

fn solve_into(sc: &Scenario, dir: &Path, hash: &str, timings: &mut BTreeMap<String, f64>) -> CliResult<(Trajectory, Vec<PathBuf>)> {
    let start = Instant::now();
    log::info!("solving {} on {} points per axis", sc.name, sc.solver.grid.n);
    let traj = solve(&sc.solver)?;
    timings.insert("solve".into(), start.elapsed().as_secs_f64());
    let start = Instant::now();
    let paths = write_trajectory(dir, &traj, hash)?;
    timings.insert("write_trajectory".into(), start.elapsed().as_secs_f64());
    Ok((traj, paths))
}

fn finish(sc: &Scenario, dir: &Path, report: &RunReport) -> CliResult<()> {
    write_atomic(&dir.join(CONFIG_TOML), sc.to_text().as_bytes())?;
    write_json(&dir.join(REPORT_JSON), report)
}

/// Solve only: trajectory, ledger and a report without checks.
pub fn run_solve(sc: &Scenario, opts: &RunOptions) -> CliResult<RunReport> {
    let dir = opts.dir(sc);
    let hash = sc.content_hash();
    let mut timings = BTreeMap::new();
    let (_, mut paths) = solve_into(sc, &dir, &hash, &mut timings)?;
    paths.extend(render_dir(&dir)?);
    let report = RunReport {
        scenario: sc.name.clone(),
        config_hash: hash,
        seed: opts.seed,
        pass: true,
        checks: Vec::new(),
        artifacts: relative(&dir, &paths),
        timings,
    };
    finish(sc, &dir, &report)?;
    Ok(report)
}

fn selected(sc: &Scenario, only: &[CheckKind]) -> Vec<CheckSpec> {
    if only.is_empty() {
        return sc.checks.clone();
    }
    only.iter()
        .map(|&k| sc.check(k).cloned().unwrap_or_else(|| CheckSpec::new(k)))
        .collect()
}

/// Tables of `r` and its children as CSV files named after the check path.
fn write_tables(dir: &Path, prefix: &str, r: &mut CheckResult) -> CliResult<Vec<PathBuf>> {
    let mut paths = Vec::new();
    for t in &r.tables {
        let stem = if t.name == r.check || t.name == prefix {
            prefix.to_string()
        } else {
            format!("{prefix}.{}", file_stem_for(&t.name))
        };
        let path = dir.join(format!("{stem}.csv"));
        write_table(&path, t)?;
        paths.push(path);
    }
    for child in &mut r.children {
        let child_prefix = format!("{prefix}.{}", file_stem_for(&child.check));
        paths.extend(write_tables(dir, &child_prefix, child)?);
    }
    r.artifact_paths = relative(dir, &paths);
    Ok(paths)
}

fn failed(kind: CheckKind, err: &CoreError) -> CheckResult {
    let mut r = CheckResult::new(kind.name());
    r.note(err.to_string());
    r.decide(false)
}

/// Solve (or reuse), run the selected checks concurrently and write every
/// artifact. A numerical abort anywhere ends the run with an error.
pub fn run_verify(sc: &Scenario, opts: &RunOptions) -> CliResult<RunReport> {
    let dir = opts.dir(sc);
    let hash = sc.content_hash();
    let specs = selected(sc, &opts.only);
    let mut timings = BTreeMap::new();
    let mut paths = Vec::new();
    let plans = specs
        .iter()
        .map(|s| s.plan().map_err(|e| CliError::Validation(vec![e])))
        .collect::<CliResult<Vec<_>>>()?;

    let traj = if specs.iter().any(|s| s.kind.needs_trajectory()) {
        let reused = if opts.reuse { read_trajectory(&dir, &sc.solver, &hash).ok() } else { None };
        match reused {
            Some(t) => {
                log::info!("reusing the trajectory in {}", dir.display());
                Some(t)
            }
            None => {
                let (t, p) = solve_into(sc, &dir, &hash, &mut timings)?;
                paths.extend(p);
                Some(t)
            }
        }
    } else {
        None
    };

    let start = Instant::now();
    let outcomes: Vec<(CheckKind, Result<CheckResult, CoreError>, f64)> = specs
        .par_iter()
        .zip(plans.par_iter())
        .map(|(spec, plan)| {
            let t0 = Instant::now();
            let r = run_plan(plan, &sc.solver, traj.as_ref());
            (spec.kind, r, t0.elapsed().as_secs_f64())
        })
        .collect();
    timings.insert("checks".into(), start.elapsed().as_secs_f64());

    let mut results = Vec::with_capacity(outcomes.len());
    for (kind, outcome, secs) in outcomes {
        timings.insert(format!("check.{}", kind.name()), secs);
        let mut r = match outcome {
            Ok(r) => r,
            Err(e @ (CoreError::Abort { .. } | CoreError::HorizonTooLong { .. })) => return Err(e.into()),
            Err(e) => failed(kind, &e),
        };
        let mut written = write_tables(&dir, kind.name(), &mut r)?;
        let json = dir.join(format!("{}.json", kind.name()));
        r.artifact_paths.push(format!("{}.json", kind.name()));
        write_json(&json, &r)?;
        written.push(json);
        paths.extend(written);
        log::info!(
            "{}: {}",
            kind.name(),
            match r.status {
                Status::Pass => "pass",
                Status::Trivial => "pass (trivial)",
                Status::Fail => "FAIL",
            }
        );
        results.push(r);
    }
    paths.extend(render_dir(&dir)?);
    paths.sort();
    paths.dedup();
    let report = RunReport {
        scenario: sc.name.clone(),
        config_hash: hash,
        seed: opts.seed,
        pass: results.iter().all(|r| r.pass),
        checks: results,
        artifacts: relative(&dir, &paths),
        timings,
    };
    finish(sc, &dir, &report)?;
    Ok(report)
}

/// Re-render an SVG for every CSV table in `dir`; returns the SVG paths.
pub fn render_dir(dir: &Path) -> CliResult<Vec<PathBuf>> {
    let entries = fs::read_dir(dir).map_err(|e| CliError::io(dir, e))?;
    let mut csvs: Vec<PathBuf> = entries
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.extension().is_some_and(|x| x == "csv"))
        .filter(|p| p.file_name().is_some_and(|n| n != LEDGER_CSV))
        .collect();
    csvs.sort();
    let mut out = Vec::new();
    for csv in csvs {
        let (columns, rows) = read_table_csv(&csv)?;
        let stem = csv.file_stem().unwrap().to_string_lossy().to_string();
        let svg = match trajectory_series(&columns, &rows) {
            Some(series) => line_plot(&stem, "x", &series),
            None if columns.len() >= 2 && columns[..2] != ["t", "x1"] => {
                line_plot(&stem, &columns[0], &table_series(&columns, &rows))
            }
            None => continue,
        };
        let path = csv.with_extension("svg");
        write_atomic(&path, svg.as_bytes())?;
        out.push(path);
    }
    Ok(out)
}

/// Kernel profile at `t = 1`: density, radial derivative and the two
/// envelopes on a log sweep of radii.
pub fn kernel_table(params: StabilityParams, points_per_decade: usize) -> CliResult<String> {
    let kernel = StableKernel::new(params)?;
    let n = 6 * points_per_decade;
    let radii = std::iter::once(0.0).chain((0..=n).map(|i| 1e-3 * 10f64.powf(6.0 * i as f64 / n as f64)));
    let columns: Vec<String> = ["r", "density", "radial_derivative", "density_envelope", "gradient_envelope"]
        .iter()
        .map(|s| s.to_string())
        .collect();
    let rows: Vec<Vec<f64>> = radii
        .map(|r| {
            vec![
                r,
                kernel.density_radial(1.0, r),
                kernel.radial_derivative(1.0, r),
                density_envelope(params, 1.0, r),
                gradient_envelope(params, 1.0, r),
            ]
        })
        .collect();
    Ok(table_csv(&columns, &rows))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn stems_are_file_safe() {
        assert_eq!(file_stem_for("lemma_identity[beta=0.25]"), "lemma_identity_beta_0.25");
        assert_eq!(file_stem_for("large_x"), "large_x");
    }

    #[test]
    fn kernel_table_is_versioned_and_positive() {
        let text = kernel_table(StabilityParams::new(1.5, 1).unwrap(), 4).unwrap();
        let mut lines = text.lines();
        assert_eq!(lines.next(), Some(crate::output::CSV_VERSION_LINE));
        assert_eq!(lines.next(), Some("r,density,radial_derivative,density_envelope,gradient_envelope"));
        let rows: Vec<Vec<f64>> = lines.map(|l| l.split(',').map(|v| v.parse().unwrap()).collect()).collect();
        assert_eq!(rows.len(), 1 + 6 * 4 + 1);
        assert!(rows.iter().all(|r| r[1] > 0.0 && r[2] <= 0.0));
    }
}

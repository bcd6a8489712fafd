//! Artifact files: versioned CSV tables, trajectories and atomic writes.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use fracburgers_core::grid::Field;
use fracburgers_core::solver::{LedgerEntry, SolverConfig, Trajectory};
use fracburgers_core::verify::Table;
use serde::{Deserialize, Serialize};

use crate::error::{CliError, CliResult};

pub const CSV_VERSION_LINE: &str = "# fracburgers-csv v1";

/// Write `bytes` to `path` through a temporary file in the same directory
/// and a rename.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> CliResult<()> {
    let dir = path.parent().filter(|p| !p.as_os_str().is_empty()).unwrap_or(Path::new("."));
    fs::create_dir_all(dir).map_err(|e| CliError::io(dir, e))?;
    let mut tmp = tempfile::NamedTempFile::new_in(dir).map_err(|e| CliError::io(dir, e))?;
    tmp.write_all(bytes).map_err(|e| CliError::io(path, e))?;
    tmp.persist(path).map_err(|e| CliError::io(path, e.error))?;
    Ok(())
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> CliResult<()> {
    let mut text = serde_json::to_string_pretty(value)
        .map_err(|e| CliError::Artifact(format!("cannot serialize {}: {e}", path.display())))?;
    text.push('\n');
    write_atomic(path, text.as_bytes())
}

/// `v` in the shortest form that reads back to the same bits.
fn number(v: f64) -> String {
    if v.is_nan() {
        "nan".into()
    } else if v.is_infinite() {
        if v > 0.0 { "inf".into() } else { "-inf".into() }
    } else {
        format!("{v:?}")
    }
}

fn parse_number(s: &str) -> Option<f64> {
    match s {
        "nan" => Some(f64::NAN),
        "inf" => Some(f64::INFINITY),
        "-inf" => Some(f64::NEG_INFINITY),
        _ => s.parse().ok(),
    }
}

pub fn table_csv(columns: &[String], rows: &[Vec<f64>]) -> String {
    let mut out = String::with_capacity(32 * (rows.len() + 2));
    out.push_str(CSV_VERSION_LINE);
    out.push('\n');
    out.push_str(&columns.join(","));
    out.push('\n');
    for r in rows {
        let cells: Vec<String> = r.iter().map(|v| number(*v)).collect();
        out.push_str(&cells.join(","));
        out.push('\n');
    }
    out
}

/// Columns and rows of a CSV written by [`table_csv`].
pub fn read_table_csv(path: &Path) -> CliResult<(Vec<String>, Vec<Vec<f64>>)> {
    let text = fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
    let bad = |what: &str| CliError::Artifact(format!("{}: {what}", path.display()));
    let mut lines = text.lines();
    if lines.next() != Some(CSV_VERSION_LINE) {
        return Err(bad(&format!("first line is not `{CSV_VERSION_LINE}`")));
    }
    let columns: Vec<String> = lines
        .next()
        .ok_or_else(|| bad("missing header"))?
        .split(',')
        .map(str::to_string)
        .collect();
    let mut rows = Vec::new();
    for (i, line) in lines.enumerate() {
        let row: Option<Vec<f64>> = line.split(',').map(parse_number).collect();
        match row {
            Some(r) if r.len() == columns.len() => rows.push(r),
            _ => return Err(bad(&format!("malformed row on line {}", i + 3))),
        }
    }
    Ok((columns, rows))
}

pub fn write_table(path: &Path, table: &Table) -> CliResult<()> {
    write_atomic(path, table_csv(&table.columns, &table.rows).as_bytes())
}

fn coordinate_columns(dim: usize) -> Vec<String> {
    let mut c = vec!["t".to_string()];
    if dim == 1 {
        c.push("x".into());
    } else {
        c.push("x1".into());
        c.push("x2".into());
    }
    c.push("u".into());
    c
}

fn field_rows(f: &Field, rows: &mut Vec<Vec<f64>>) {
    for (i, &u) in f.values.iter().enumerate() {
        let p = f.grid.point(i);
        let mut r = vec![f.time];
        r.extend_from_slice(&p[..f.grid.dim]);
        r.push(u);
        rows.push(r);
    }
}

/// Everything a trajectory carries besides its fields and ledger.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrajectoryMeta {
    pub config_hash: String,
    pub snapshot_times: Vec<f64>,
    pub initial_mass: f64,
    pub rejected_steps: usize,
    pub datum_sup_power: f64,
    pub solution_sup_power: f64,
    pub max_mass_drift: f64,
    pub steps: usize,
}

pub const TRAJECTORY_CSV: &str = "trajectory.csv";
pub const LEDGER_CSV: &str = "ledger.csv";
pub const TRAJECTORY_JSON: &str = "trajectory.json";

const LEDGER_COLUMNS: [&str; 7] = ["step", "t", "dt", "mass", "min_u", "max_u", "clamped_mass"];

/// `trajectory.csv` (datum first, then every snapshot), `ledger.csv` and
/// `trajectory.json`; returns the paths written.
pub fn write_trajectory(dir: &Path, traj: &Trajectory, config_hash: &str) -> CliResult<Vec<PathBuf>> {
    let mut rows = Vec::new();
    field_rows(&traj.initial, &mut rows);
    for s in &traj.snapshots {
        field_rows(s, &mut rows);
    }
    let path_t = dir.join(TRAJECTORY_CSV);
    write_atomic(&path_t, table_csv(&coordinate_columns(traj.config.grid.dim), &rows).as_bytes())?;

    let ledger: Vec<Vec<f64>> = traj
        .ledger
        .iter()
        .map(|e| vec![e.step as f64, e.t, e.dt, e.mass, e.min_u, e.max_u, e.clamped_mass])
        .collect();
    let columns: Vec<String> = LEDGER_COLUMNS.iter().map(|c| c.to_string()).collect();
    let path_l = dir.join(LEDGER_CSV);
    write_atomic(&path_l, table_csv(&columns, &ledger).as_bytes())?;

    let meta = TrajectoryMeta {
        config_hash: config_hash.to_string(),
        snapshot_times: traj.snapshots.iter().map(|s| s.time).collect(),
        initial_mass: traj.initial_mass,
        rejected_steps: traj.rejected_steps,
        datum_sup_power: traj.datum_sup_power,
        solution_sup_power: traj.solution_sup_power,
        max_mass_drift: traj.max_mass_drift(),
        steps: traj.ledger.len(),
    };
    let path_m = dir.join(TRAJECTORY_JSON);
    write_json(&path_m, &meta)?;
    Ok(vec![path_t, path_l, path_m])
}

/// Read back what [`write_trajectory`] wrote. Fails unless the stored hash
/// equals `config_hash`.
pub fn read_trajectory(dir: &Path, config: &SolverConfig, config_hash: &str) -> CliResult<Trajectory> {
    let meta_path = dir.join(TRAJECTORY_JSON);
    let meta_text = fs::read_to_string(&meta_path)
        .map_err(|_| CliError::Artifact(format!("missing artifact {}; run `solve` first", meta_path.display())))?;
    let meta: TrajectoryMeta = serde_json::from_str(&meta_text)
        .map_err(|e| CliError::Artifact(format!("{}: {e}", meta_path.display())))?;
    if meta.config_hash != config_hash {
        return Err(CliError::Artifact(format!(
            "{} was produced by a different configuration (hash {} vs {config_hash})",
            meta_path.display(),
            meta.config_hash
        )));
    }
    let grid = config.grid;
    let (columns, rows) = read_table_csv(&dir.join(TRAJECTORY_CSV))?;
    let expected_rows = grid.len() * (1 + meta.snapshot_times.len());
    if columns != coordinate_columns(grid.dim) || rows.len() != expected_rows {
        return Err(CliError::Artifact(format!(
            "{} does not match the configured grid",
            dir.join(TRAJECTORY_CSV).display()
        )));
    }
    let u = columns.len() - 1;
    let mut fields = rows.chunks(grid.len()).map(|chunk| Field {
        grid,
        values: chunk.iter().map(|r| r[u]).collect(),
        time: chunk[0][0],
    });
    let initial = fields.next().unwrap();
    let snapshots: Vec<Field> = fields.collect();

    let (_, ledger_rows) = read_table_csv(&dir.join(LEDGER_CSV))?;
    let ledger = ledger_rows
        .iter()
        .map(|r| LedgerEntry {
            step: r[0] as usize,
            t: r[1],
            dt: r[2],
            mass: r[3],
            min_u: r[4],
            max_u: r[5],
            clamped_mass: r[6],
        })
        .collect();
    Ok(Trajectory {
        config: config.clone(),
        initial,
        snapshots,
        ledger,
        initial_mass: meta.initial_mass,
        rejected_steps: meta.rejected_steps,
        datum_sup_power: meta.datum_sup_power,
        solution_sup_power: meta.solution_sup_power,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn numbers_round_trip_bit_for_bit() {
        for v in [0.1, 1.0 / 3.0, 1e-300, -2.5e17, f64::MIN_POSITIVE, 0.0, f64::INFINITY, f64::NEG_INFINITY] {
            let back = parse_number(&number(v)).unwrap();
            assert_eq!(back.to_bits(), v.to_bits(), "{v}");
        }
        assert!(parse_number(&number(f64::NAN)).unwrap().is_nan());
    }

    proptest::proptest! {
        #[test]
        fn any_number_round_trips(bits in proptest::prelude::any::<u64>()) {
            let v = f64::from_bits(bits);
            let back = parse_number(&number(v)).unwrap();
            proptest::prop_assert!(back.to_bits() == v.to_bits() || (v.is_nan() && back.is_nan()));
        }
    }

    #[test]
    fn tables_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let mut t = Table::new("demo", &["t", "e"]);
        t.push(vec![1e-3, 0.123456789012345]);
        t.push(vec![1.0, f64::NAN]);
        let path = dir.path().join("demo.csv");
        write_table(&path, &t).unwrap();
        let text = fs::read_to_string(&path).unwrap();
        assert!(text.starts_with("# fracburgers-csv v1\nt,e\n"));
        let (cols, rows) = read_table_csv(&path).unwrap();
        assert_eq!(cols, vec!["t", "e"]);
        assert_eq!(rows[0], t.rows[0]);
        assert!(rows[1][1].is_nan());
    }

    #[test]
    fn unversioned_csv_is_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("x.csv");
        fs::write(&path, "t,e\n1,2\n").unwrap();
        assert!(matches!(read_table_csv(&path), Err(CliError::Artifact(_))));
    }

    #[test]
    fn atomic_write_replaces_content() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("sub").join("a.json");
        write_json(&path, &vec![1, 2]).unwrap();
        write_json(&path, &vec![3]).unwrap();
        let back: Vec<i32> = serde_json::from_str(&fs::read_to_string(&path).unwrap()).unwrap();
        assert_eq!(back, vec![3]);
        let leftovers = fs::read_dir(path.parent().unwrap()).unwrap().count();
        assert_eq!(leftovers, 1);
    }
}

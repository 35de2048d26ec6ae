//! CSV outputs. Comma-delimited, header row first, every float written
//! with 17 significant digits so it parses back to the same bits.

use std::fs::File;
use std::io::Write;
use std::path::Path;

use kinorrt::planner::HistoryRow;
use kinorrt::steer::{Trajectory, TrajectorySample};
use nalgebra::DVector;

use crate::error::CliError;

pub fn fmt_f64(v: f64) -> String {
    format!("{v:.16e}")
}

fn create(path: &Path) -> Result<csv::Writer<File>, CliError> {
    let file = File::create(path).map_err(|e| CliError::io(path, e))?;
    Ok(csv::Writer::from_writer(file))
}

fn finish(path: &Path, mut w: csv::Writer<File>) -> Result<(), CliError> {
    w.flush().map_err(|e| CliError::io(path, e))
}

fn csv_err(path: &Path, e: csv::Error) -> CliError {
    CliError::format(path, e)
}

/// Header `t, x_0.., u_0..`.
pub fn trajectory_header(n: usize, m: usize) -> Vec<String> {
    std::iter::once("t".to_string())
        .chain((0..n).map(|i| format!("x_{i}")))
        .chain((0..m).map(|j| format!("u_{j}")))
        .collect()
}

/// Writes `traj` with the header for an `n`-state, `m`-input system; an
/// empty trajectory leaves only the header.
pub fn write_trajectory(
    path: &Path,
    traj: &Trajectory<f64>,
    n: usize,
    m: usize,
) -> Result<(), CliError> {
    let mut w = create(path)?;
    w.write_record(trajectory_header(n, m))
        .map_err(|e| csv_err(path, e))?;
    for s in &traj.samples {
        let row = std::iter::once(s.t)
            .chain(s.x.iter().copied())
            .chain(s.u.iter().copied())
            .map(fmt_f64);
        w.write_record(row).map_err(|e| csv_err(path, e))?;
    }
    finish(path, w)
}

/// A trajectory file with its state and input dimensions.
#[derive(Debug, Clone, PartialEq)]
pub struct TrajectoryFile {
    pub state_dim: usize,
    pub control_dim: usize,
    pub trajectory: Trajectory<f64>,
}

pub fn read_trajectory(path: &Path) -> Result<TrajectoryFile, CliError> {
    let mut r = csv::Reader::from_path(path).map_err(|e| csv_err(path, e))?;
    let header = r.headers().map_err(|e| csv_err(path, e))?.clone();
    let n = header.iter().filter(|h| h.starts_with("x_")).count();
    let m = header.iter().filter(|h| h.starts_with("u_")).count();
    let expected = trajectory_header(n, m);
    if header.iter().ne(expected.iter().map(String::as_str)) {
        return Err(CliError::format(
            path,
            format!("header must be {}", expected.join(",")),
        ));
    }
    let mut samples = Vec::new();
    for (k, rec) in r.records().enumerate() {
        let rec = rec.map_err(|e| csv_err(path, e))?;
        let vals = rec
            .iter()
            .map(|f| f.trim().parse::<f64>())
            .collect::<Result<Vec<_>, _>>()
            .map_err(|e| CliError::format(path, format!("row {}: {e}", k + 2)))?;
        samples.push(TrajectorySample {
            t: vals[0],
            x: DVector::from_column_slice(&vals[1..1 + n]),
            u: DVector::from_column_slice(&vals[1 + n..]),
        });
    }
    let tau = samples.last().map_or(0.0, |s| s.t);
    Ok(TrajectoryFile {
        state_dim: n,
        control_dim: m,
        trajectory: Trajectory { tau, samples },
    })
}

pub const CONVERGENCE_HEADER: [&str; 4] = ["iteration", "nodes", "best_cost", "wall_time_s"];

/// Convergence log. Without `wall_time` the last column is left empty so
/// the file depends only on the inputs.
pub fn write_convergence(
    path: &Path,
    rows: &[HistoryRow<f64>],
    wall_time: bool,
) -> Result<(), CliError> {
    let mut w = create(path)?;
    w.write_record(CONVERGENCE_HEADER)
        .map_err(|e| csv_err(path, e))?;
    for row in rows {
        let t = if wall_time {
            fmt_f64(row.wall_time)
        } else {
            String::new()
        };
        w.write_record([
            row.iteration.to_string(),
            row.nodes.to_string(),
            fmt_f64(row.best_cost),
            t,
        ])
        .map_err(|e| csv_err(path, e))?;
    }
    finish(path, w)
}

/// One convergence log row; `wall_time_s` is `None` when not recorded.
#[derive(Debug, Clone, PartialEq)]
pub struct ConvergenceRow {
    pub iteration: usize,
    pub nodes: usize,
    pub best_cost: f64,
    pub wall_time_s: Option<f64>,
}

pub fn read_convergence(path: &Path) -> Result<Vec<ConvergenceRow>, CliError> {
    let mut r = csv::Reader::from_path(path).map_err(|e| csv_err(path, e))?;
    let header = r.headers().map_err(|e| csv_err(path, e))?.clone();
    if header.iter().ne(CONVERGENCE_HEADER) {
        return Err(CliError::format(
            path,
            format!("header must be {}", CONVERGENCE_HEADER.join(",")),
        ));
    }
    let mut rows = Vec::new();
    for (k, rec) in r.records().enumerate() {
        let rec = rec.map_err(|e| csv_err(path, e))?;
        let bad = |e: &dyn std::fmt::Display| CliError::format(path, format!("row {}: {e}", k + 2));
        let t = rec[3].trim();
        rows.push(ConvergenceRow {
            iteration: rec[0].parse().map_err(|e| bad(&e))?,
            nodes: rec[1].parse().map_err(|e| bad(&e))?,
            best_cost: rec[2].parse().map_err(|e| bad(&e))?,
            wall_time_s: if t.is_empty() {
                None
            } else {
                Some(t.parse().map_err(|e| bad(&e))?)
            },
        });
    }
    Ok(rows)
}

pub(crate) fn write_text(path: &Path, text: &str) -> Result<(), CliError> {
    let mut f = File::create(path).map_err(|e| CliError::io(path, e))?;
    f.write_all(text.as_bytes())
        .map_err(|e| CliError::io(path, e))
}

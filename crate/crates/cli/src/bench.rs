//! `bench`: identical seeded runs with each backend, timed at given node
//! counts.

use std::fmt;
use std::path::Path;
use std::time::Duration;

use kinorrt::planner::{plan, HistoryRow};
use kinorrt::scenarios::Scenario;
use kinorrt::steer::Backend;

use crate::error::CliError;
use crate::output::fmt_f64;

pub const BACKENDS: [Backend; 2] = [Backend::ClosedForm, Backend::Rk4];
pub const BENCH_FILE: &str = "bench.csv";

#[derive(Debug, Clone)]
pub struct BenchRequest {
    pub scenarios: Vec<Scenario>,
    pub backends: Vec<Backend>,
    /// Ascending tree sizes at which the elapsed time is read.
    pub node_counts: Vec<usize>,
    /// Wall-clock cap per run; counts not reached in time are partial.
    pub budget: Duration,
    /// Iteration cap per run, guarding against a tree that stops growing.
    pub max_iterations: usize,
}

/// Time and best cost when the tree first held `nodes` nodes.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BenchCell {
    pub wall_time_s: f64,
    pub best_cost: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BenchRun {
    pub scenario: String,
    pub backend: Backend,
    /// One entry per node count; `None` when the run stopped first.
    pub cells: Vec<Option<BenchCell>>,
    pub nodes_reached: usize,
    /// Planning time when the run stopped.
    pub elapsed_s: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BenchTable {
    pub node_counts: Vec<usize>,
    pub runs: Vec<BenchRun>,
}

/// First history row at or above each node count.
pub fn cells_at(history: &[HistoryRow<f64>], counts: &[usize]) -> Vec<Option<BenchCell>> {
    counts
        .iter()
        .map(|&n| {
            history.iter().find(|h| h.nodes >= n).map(|h| BenchCell {
                wall_time_s: h.wall_time,
                best_cost: h.best_cost,
            })
        })
        .collect()
}

pub fn cmd_bench(req: &BenchRequest) -> Result<BenchTable, CliError> {
    if req.node_counts.is_empty() || req.node_counts.windows(2).any(|w| w[0] >= w[1]) {
        return Err(CliError::Config(
            "node counts must be nonempty and strictly ascending".into(),
        ));
    }
    let max_nodes = *req.node_counts.last().expect("nonempty");
    let mut runs = Vec::new();
    for sc in &req.scenarios {
        let problem = sc.problem::<f64>()?;
        for &backend in &req.backends {
            let mut cfg = sc.planner.clone();
            cfg.backend = backend;
            cfg.max_nodes = Some(max_nodes);
            cfg.max_iterations = req.max_iterations;
            cfg.time_budget = Some(req.budget);
            log::info!("bench {} with {backend}", sc.name);
            let result = plan(&problem, &cfg)?;
            runs.push(BenchRun {
                scenario: sc.name.clone(),
                backend,
                cells: cells_at(&result.history, &req.node_counts),
                nodes_reached: result.tree.len(),
                elapsed_s: result.history.last().map_or(0.0, |h| h.wall_time),
            });
        }
    }
    Ok(BenchTable {
        node_counts: req.node_counts.clone(),
        runs,
    })
}

impl BenchTable {
    pub fn run(&self, scenario: &str, backend: Backend) -> Option<&BenchRun> {
        self.runs
            .iter()
            .find(|r| r.scenario == scenario && r.backend == backend)
    }

    fn scenarios(&self) -> Vec<&str> {
        let mut names: Vec<&str> = Vec::new();
        for r in &self.runs {
            if !names.contains(&r.scenario.as_str()) {
                names.push(&r.scenario);
            }
        }
        names
    }

    /// rk4 time over closed-form time at row `k`.
    pub fn speedup(&self, scenario: &str, k: usize) -> Option<f64> {
        let c = self.run(scenario, Backend::ClosedForm)?.cells[k]?;
        let r = self.run(scenario, Backend::Rk4)?.cells[k]?;
        Some(r.wall_time_s / c.wall_time_s)
    }

    /// Long format: one row per scenario, backend and node count.
    pub fn write_csv(&self, path: &Path) -> Result<(), CliError> {
        let mut w = csv::Writer::from_path(path).map_err(|e| CliError::format(path, e))?;
        let rec = |w: &mut csv::Writer<std::fs::File>, r: Vec<String>| {
            w.write_record(r).map_err(|e| CliError::format(path, e))
        };
        rec(
            &mut w,
            [
                "scenario",
                "backend",
                "nodes",
                "wall_time_s",
                "best_cost",
                "complete",
            ]
            .map(String::from)
            .to_vec(),
        )?;
        for run in &self.runs {
            for (&n, cell) in self.node_counts.iter().zip(&run.cells) {
                let (t, c, done) = match cell {
                    Some(c) => (fmt_f64(c.wall_time_s), fmt_f64(c.best_cost), "true"),
                    None => (String::new(), String::new(), "false"),
                };
                rec(
                    &mut w,
                    vec![
                        run.scenario.clone(),
                        run.backend.to_string(),
                        n.to_string(),
                        t,
                        c,
                        done.into(),
                    ],
                )?;
            }
        }
        w.flush().map_err(|e| CliError::io(path, e))
    }
}

/// Rows are node counts; per scenario one column per backend (seconds)
/// and the speedup. `-` marks counts a run did not reach.
impl fmt::Display for BenchTable {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let names = self.scenarios();
        let backends: Vec<Backend> = BACKENDS
            .into_iter()
            .filter(|b| self.runs.iter().any(|r| r.backend == *b))
            .collect();
        let both = backends.len() == BACKENDS.len();
        write!(f, "{:>8}", "nodes")?;
        for name in &names {
            for b in &backends {
                write!(f, " | {:>24}", format!("{name} {b}"))?;
            }
            if both {
                write!(f, " | {:>8}", "speedup")?;
            }
        }
        writeln!(f)?;
        for (k, n) in self.node_counts.iter().enumerate() {
            write!(f, "{n:>8}")?;
            for name in &names {
                for &b in &backends {
                    let cell = self.run(name, b).and_then(|r| r.cells[k]);
                    match cell {
                        Some(c) => write!(f, " | {:>24.3}", c.wall_time_s)?,
                        None => write!(f, " | {:>24}", "-")?,
                    }
                }
                if both {
                    match self.speedup(name, k) {
                        Some(s) => write!(f, " | {s:>8.1}")?,
                        None => write!(f, " | {:>8}", "-")?,
                    }
                }
            }
            writeln!(f)?;
        }
        let max = *self.node_counts.last().unwrap_or(&0);
        for r in &self.runs {
            if r.cells.iter().any(Option::is_none) {
                writeln!(
                    f,
                    "partial: {} {} stopped at {} of {max} nodes after {:.3} s (budget or iteration cap)",
                    r.scenario, r.backend, r.nodes_reached, r.elapsed_s
                )?;
            }
        }
        Ok(())
    }
}

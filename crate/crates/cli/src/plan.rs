//! `plan`: one seeded planning run, written out with the manifest that
//! reproduces it.

use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use kinorrt::planner::{plan, PlannerConfig, PlannerResult, Radius};
use kinorrt::scenarios::Scenario;
use kinorrt::steer::Backend;
use serde::{Deserialize, Serialize};

use crate::error::CliError;
use crate::output::{write_convergence, write_text, write_trajectory};
use crate::render::render_projection;

pub const TRAJECTORY_FILE: &str = "trajectory.csv";
pub const CONVERGENCE_FILE: &str = "convergence.csv";
pub const MANIFEST_FILE: &str = "manifest.json";
pub const PROJECTION_FILE: &str = "projection.svg";

/// Command-line overrides of a scenario's planner settings.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Overrides {
    pub seed: Option<u64>,
    pub iterations: Option<usize>,
    /// `closed` or `rk4`.
    pub backend: Option<String>,
    /// A positive number or `inf`.
    pub radius: Option<String>,
    pub sample_dt: Option<f64>,
}

impl Overrides {
    pub fn apply(&self, cfg: &mut PlannerConfig) -> Result<(), CliError> {
        if let Some(seed) = self.seed {
            cfg.rng_seed = seed;
        }
        if let Some(n) = self.iterations {
            cfg.max_iterations = n;
        }
        if let Some(b) = &self.backend {
            cfg.backend = parse_backend(b)?;
        }
        if let Some(r) = &self.radius {
            cfg.radius = parse_radius(r)?;
        }
        if let Some(dt) = self.sample_dt {
            cfg.sample_dt = Some(dt);
        }
        cfg.validate()?;
        Ok(())
    }
}

pub fn parse_backend(s: &str) -> Result<Backend, CliError> {
    s.parse().map_err(CliError::Config)
}

pub fn parse_radius(s: &str) -> Result<Radius, CliError> {
    let s = s.trim();
    if matches!(s, "inf" | "infinity" | "Inf") {
        return Ok(Radius::Infinite);
    }
    match s.parse::<f64>() {
        Ok(r) if r == f64::INFINITY => Ok(Radius::Infinite),
        Ok(r) if r > 0.0 && r.is_finite() => Ok(Radius::Fixed(r)),
        _ => Err(CliError::Config(format!(
            "radius must be a positive number or inf, got '{s}'"
        ))),
    }
}

/// Wall-clock facts of one run; never part of the reproducible outputs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WallClock {
    pub started_unix_s: f64,
    pub planning_s: f64,
}

/// Everything needed to reproduce a `plan` run. Written next to its
/// outputs; feeding it back reproduces them byte for byte.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunManifest {
    pub tool_version: String,
    pub command: String,
    pub scenario: PathBuf,
    pub out_dir: PathBuf,
    #[serde(default)]
    pub overrides: Overrides,
    /// State dimensions of the SVG projection, if one is wanted.
    #[serde(default)]
    pub svg_dims: Option<(usize, usize)>,
    /// Record wall times in the convergence log and the manifest. Those
    /// entries then differ between runs.
    #[serde(default)]
    pub record_wall_time: bool,
    #[serde(default)]
    pub wall_clock: Option<WallClock>,
}

impl RunManifest {
    pub fn new(scenario: impl Into<PathBuf>, out_dir: impl Into<PathBuf>) -> Self {
        Self {
            tool_version: env!("CARGO_PKG_VERSION").to_string(),
            command: "plan".to_string(),
            scenario: scenario.into(),
            out_dir: out_dir.into(),
            overrides: Overrides::default(),
            svg_dims: None,
            record_wall_time: false,
            wall_clock: None,
        }
    }

    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
        let m: Self = serde_json::from_str(&text).map_err(|e| CliError::format(path, e))?;
        if m.command != "plan" {
            return Err(CliError::format(
                path,
                format!("unsupported command '{}'", m.command),
            ));
        }
        Ok(m)
    }

    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("manifest serializes");
        s.push('\n');
        s
    }
}

/// What a `plan` run produced.
#[derive(Debug)]
pub struct PlanReport {
    pub scenario: Scenario,
    pub config: PlannerConfig,
    pub result: PlannerResult<f64>,
    pub files: Vec<PathBuf>,
}

impl PlanReport {
    pub fn summary(&self) -> String {
        let r = &self.result;
        let first = r.history.iter().find(|h| h.best_cost.is_finite());
        let mut s = format!(
            "scenario {}: {} iterations, {} nodes, best cost {}",
            self.scenario.name,
            r.stats.iterations,
            r.tree.len(),
            r.best_cost()
        );
        if let Some(h) = first {
            s.push_str(&format!(
                " (first solution {} at iteration {})",
                h.best_cost, h.iteration
            ));
        } else {
            s.push_str(" (no solution)");
        }
        s
    }
}

/// Loads the scenario, applies the overrides, plans and writes the
/// trajectory, convergence log, manifest and optional projection into
/// `manifest.out_dir`.
pub fn cmd_plan(manifest: &RunManifest) -> Result<PlanReport, CliError> {
    let scenario = Scenario::load(&manifest.scenario)?;
    let mut cfg = scenario.planner.clone();
    manifest.overrides.apply(&mut cfg)?;
    if let Some((i, j)) = manifest.svg_dims {
        let n = scenario.system.state_dim();
        if i >= n || j >= n {
            return Err(CliError::Config(format!(
                "projection dims ({i}, {j}) out of range for {n} states"
            )));
        }
    }
    let problem = scenario.problem::<f64>()?;
    let started_unix_s = SystemTime::now()
        .duration_since(UNIX_EPOCH)
        .map_or(0.0, |d| d.as_secs_f64());
    log::info!(
        "planning {} for {} iterations",
        scenario.name,
        cfg.max_iterations
    );
    let result = plan(&problem, &cfg)?;

    let out = &manifest.out_dir;
    std::fs::create_dir_all(out).map_err(|e| CliError::io(out, e))?;
    let (n, m) = (scenario.system.state_dim(), scenario.system.control_dim());
    let empty = kinorrt::steer::Trajectory::empty();
    let traj = result.solution.as_ref().unwrap_or(&empty);
    let mut files = Vec::new();

    let path = out.join(TRAJECTORY_FILE);
    write_trajectory(&path, traj, n, m)?;
    files.push(path);

    let path = out.join(CONVERGENCE_FILE);
    write_convergence(&path, &result.history, manifest.record_wall_time)?;
    files.push(path);

    if let Some(dims) = manifest.svg_dims {
        let path = out.join(PROJECTION_FILE);
        write_text(
            &path,
            &render_projection(traj, &scenario.environment, dims)?,
        )?;
        files.push(path);
    }

    let mut written = manifest.clone();
    written.wall_clock = manifest.record_wall_time.then(|| WallClock {
        started_unix_s,
        planning_s: result.history.last().map_or(0.0, |h| h.wall_time),
    });
    let path = out.join(MANIFEST_FILE);
    write_text(&path, &written.to_json())?;
    files.push(path);

    Ok(PlanReport {
        scenario,
        config: cfg,
        result,
        files,
    })
}

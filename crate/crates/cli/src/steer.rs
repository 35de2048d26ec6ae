//! `steer`: the optimal connection between two states of a scenario's
//! system, with one or both backends.

use std::fmt;
use std::path::PathBuf;

use kinorrt::scenarios::Scenario;
use kinorrt::steer::{Backend, Steer};
use nalgebra::DVector;

use crate::error::CliError;
use crate::output::write_trajectory;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BackendChoice {
    One(Backend),
    Both,
}

impl std::str::FromStr for BackendChoice {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        if s == "both" {
            Ok(BackendChoice::Both)
        } else {
            s.parse()
                .map(BackendChoice::One)
                .map_err(|e| format!("{e} or both"))
        }
    }
}

impl BackendChoice {
    pub fn backends(self) -> Vec<Backend> {
        match self {
            BackendChoice::One(b) => vec![b],
            BackendChoice::Both => vec![Backend::ClosedForm, Backend::Rk4],
        }
    }
}

#[derive(Debug, Clone)]
pub struct SteerRequest {
    pub scenario: Scenario,
    /// Defaults to the scenario's start.
    pub x0: Option<Vec<f64>>,
    /// Defaults to the scenario's goal.
    pub x1: Option<Vec<f64>>,
    pub backend: BackendChoice,
    pub sample_dt: Option<f64>,
    /// Largest accepted `|Δc*| / max(1, c*)` when both backends run.
    pub tolerance: f64,
    pub out_dir: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SteerOutcome {
    pub backend: Backend,
    pub tau_star: f64,
    pub cost: f64,
    pub samples: usize,
    pub file: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SteerReport {
    pub outcomes: Vec<SteerOutcome>,
}

impl SteerReport {
    /// `|c*_closed − c*_rk4|` when both ran.
    pub fn discrepancy(&self) -> Option<f64> {
        match self.outcomes.as_slice() {
            [a, b] => Some((a.cost - b.cost).abs()),
            _ => None,
        }
    }

    pub fn relative_discrepancy(&self) -> Option<f64> {
        let d = self.discrepancy()?;
        Some(d / self.outcomes[0].cost.abs().max(1.0))
    }
}

impl fmt::Display for SteerReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for o in &self.outcomes {
            writeln!(
                f,
                "{}: tau* = {:.12}, c* = {:.12}",
                o.backend, o.tau_star, o.cost
            )?;
        }
        if let (Some(d), Some(rel)) = (self.discrepancy(), self.relative_discrepancy()) {
            writeln!(f, "discrepancy: |dc*| = {d:.3e} (relative {rel:.3e})")?;
        }
        Ok(())
    }
}

pub const fn trajectory_file(backend: Backend) -> &'static str {
    match backend {
        Backend::ClosedForm => "steer_closed_form.csv",
        Backend::Rk4 => "steer_rk4.csv",
    }
}

fn state(
    name: &str,
    given: &Option<Vec<f64>>,
    default: &DVector<f64>,
) -> Result<DVector<f64>, CliError> {
    let x = given
        .as_ref()
        .map_or_else(|| default.clone(), |v| DVector::from_column_slice(v));
    if x.len() != default.len() {
        return Err(CliError::Config(format!(
            "{name} has {} entries, the system has {} states",
            x.len(),
            default.len()
        )));
    }
    if x.iter().any(|v| !v.is_finite()) {
        return Err(CliError::Config(format!("{name} must be finite")));
    }
    Ok(x)
}

/// Connects `x0 → x1`; the car is linearized about `x0`. With both
/// backends the costs must agree to `tolerance`.
pub fn cmd_steer(req: &SteerRequest) -> Result<SteerReport, CliError> {
    let sc = &req.scenario;
    let x0 = state("x0", &req.x0, &sc.start)?;
    let x1 = state("x1", &req.x1, &sc.goal)?;
    if let Some(dir) = &req.out_dir {
        std::fs::create_dir_all(dir).map_err(|e| CliError::io(dir, e))?;
    }
    let sys = sc.linear_model::<f64>(&x0)?;
    let (n, m) = (sys.state_dim(), sys.control_dim());
    let mut outcomes = Vec::new();
    for backend in req.backend.backends() {
        let steer = Steer::with_options(sys.clone(), backend, sc.planner.steer.clone())?;
        let conn = steer.optimal_arrival_time(&x0, &x1)?;
        let traj = steer.trajectory(&conn, req.sample_dt.or(sc.planner.sample_dt))?;
        let file = match &req.out_dir {
            Some(dir) => {
                let path = dir.join(trajectory_file(backend));
                write_trajectory(&path, &traj, n, m)?;
                Some(path)
            }
            None => None,
        };
        outcomes.push(SteerOutcome {
            backend,
            tau_star: conn.tau_star,
            cost: conn.cost,
            samples: traj.len(),
            file,
        });
    }
    let report = SteerReport { outcomes };
    if let Some(rel) = report.relative_discrepancy() {
        // a NaN discrepancy also fails
        if rel.is_nan() || rel > req.tolerance {
            return Err(CliError::Numerical(format!(
                "backends disagree: relative cost discrepancy {rel:.3e} exceeds {:.3e}\n{report}",
                req.tolerance
            )));
        }
    }
    Ok(report)
}

/// Parses a comma-separated state such as `0,0,1.5`.
pub fn parse_state(s: &str) -> Result<Vec<f64>, CliError> {
    s.split(',')
        .map(|v| {
            v.trim()
                .parse::<f64>()
                .map_err(|e| CliError::Config(format!("bad state entry '{v}': {e}")))
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use kinorrt::scenarios::line_example;

    fn request(backend: BackendChoice) -> SteerRequest {
        SteerRequest {
            scenario: line_example(),
            x0: None,
            x1: None,
            backend,
            sample_dt: None,
            tolerance: 1e-3,
            out_dir: None,
        }
    }

    #[test]
    fn backend_choice_parses() {
        assert_eq!(
            "both".parse::<BackendChoice>().unwrap(),
            BackendChoice::Both
        );
        assert_eq!(
            "closed".parse::<BackendChoice>().unwrap(),
            BackendChoice::One(Backend::ClosedForm)
        );
        assert_eq!(
            "rk4".parse::<BackendChoice>().unwrap(),
            BackendChoice::One(Backend::Rk4)
        );
        assert!("euler".parse::<BackendChoice>().is_err());
    }

    #[test]
    fn line_example_arrival_time() {
        let r = cmd_steer(&request(BackendChoice::One(Backend::ClosedForm))).unwrap();
        assert!((r.outcomes[0].tau_star - (7f64.sqrt() - 1.0)).abs() < 1e-9);
        assert!(r.discrepancy().is_none());
    }

    #[test]
    fn both_backends_agree_on_line_example() {
        let r = cmd_steer(&request(BackendChoice::Both)).unwrap();
        assert_eq!(r.outcomes.len(), 2);
        assert!(r.relative_discrepancy().unwrap() < 1e-3);
        assert!(r.to_string().contains("discrepancy"));
    }

    #[test]
    fn identical_states_give_empty_trajectory() {
        let dir = tempfile::tempdir().unwrap();
        let mut req = request(BackendChoice::One(Backend::ClosedForm));
        req.x0 = Some(vec![0.3, -0.2]);
        req.x1 = Some(vec![0.3, -0.2]);
        req.out_dir = Some(dir.path().to_path_buf());
        let r = cmd_steer(&req).unwrap();
        let o = &r.outcomes[0];
        assert_eq!((o.tau_star, o.cost, o.samples), (0.0, 0.0, 0));
        let text = std::fs::read_to_string(o.file.as_ref().unwrap()).unwrap();
        assert_eq!(text, "t,x_0,x_1,u_0\n");
    }

    #[test]
    fn wrong_dimension_is_config_error() {
        let mut req = request(BackendChoice::Both);
        req.x0 = Some(vec![0.0, 0.0, 0.0]);
        assert_eq!(
            cmd_steer(&req).unwrap_err().exit_code(),
            crate::error::EXIT_CONFIG
        );
    }

    #[test]
    fn state_parsing() {
        assert_eq!(parse_state("1, -2.5,3e2").unwrap(), vec![1.0, -2.5, 300.0]);
        assert!(parse_state("1,,2").is_err());
    }
}

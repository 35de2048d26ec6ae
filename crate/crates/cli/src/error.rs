use std::path::Path;

use kinorrt::dynamics::DynamicsError;
use kinorrt::planner::PlannerError;
use kinorrt::scenarios::ScenarioError;
use kinorrt::steer::SteerError;
use thiserror::Error;

/// Exit code for bad input: files, flags, scenario contents.
pub const EXIT_CONFIG: i32 = 1;
/// Exit code for failures inside the numerics.
pub const EXIT_NUMERICAL: i32 = 2;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Config(String),
    #[error("{path}: {source}")]
    Io {
        path: String,
        source: std::io::Error,
    },
    #[error("{path}: {message}")]
    Format { path: String, message: String },
    #[error(transparent)]
    Scenario(#[from] ScenarioError),
    #[error(transparent)]
    Planner(#[from] PlannerError),
    #[error(transparent)]
    Steer(#[from] SteerError),
    #[error("{0}")]
    Numerical(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_)
            | CliError::Io { .. }
            | CliError::Format { .. }
            | CliError::Scenario(_) => EXIT_CONFIG,
            CliError::Planner(e) => match e {
                PlannerError::Config(_)
                | PlannerError::StartNotFree
                | PlannerError::GoalNotFree
                | PlannerError::SamplingExhausted(_)
                | PlannerError::World(_) => EXIT_CONFIG,
                PlannerError::Steer(e) => steer_exit_code(e),
                PlannerError::Dynamics(_) | PlannerError::Invariant(_) => EXIT_NUMERICAL,
            },
            CliError::Steer(e) => steer_exit_code(e),
            CliError::Numerical(_) => EXIT_NUMERICAL,
        }
    }

    pub(crate) fn io(path: &Path, source: std::io::Error) -> Self {
        CliError::Io {
            path: path.display().to_string(),
            source,
        }
    }

    pub(crate) fn format(path: &Path, message: impl ToString) -> Self {
        CliError::Format {
            path: path.display().to_string(),
            message: message.to_string(),
        }
    }
}

fn steer_exit_code(e: &SteerError) -> i32 {
    match e {
        SteerError::Dimension(_) | SteerError::InvalidSampleStep(_) => EXIT_CONFIG,
        SteerError::Dynamics(DynamicsError::NotControllable { .. })
        | SteerError::Dynamics(_)
        | SteerError::IllConditioned { .. }
        | SteerError::NoOptimum
        | SteerError::InvalidTime(_)
        | SteerError::Roots(_) => EXIT_NUMERICAL,
    }
}

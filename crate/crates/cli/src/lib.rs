//! Batch front end for the kinodynamic planner: scenario files in, CSV
//! trajectories, convergence logs, timing tables and SVG plots out.

pub mod bench;
pub mod error;
pub mod output;
pub mod plan;
pub mod render;
pub mod steer;

pub use bench::{cmd_bench, BenchRequest, BenchTable};
pub use error::{CliError, EXIT_CONFIG, EXIT_NUMERICAL};
pub use plan::{cmd_plan, Overrides, PlanReport, RunManifest};
pub use render::{cmd_render, render_projection};
pub use steer::{cmd_steer, BackendChoice, SteerReport, SteerRequest};

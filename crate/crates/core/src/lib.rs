//! Kinodynamic RRT* for systems with controllable linear (or linearized)
//! dynamics.
//!
//! Pairs of states are connected by the exact fixed-final-state,
//! free-final-time optimal controller; the planner grows an RRT* tree over
//! those connections. Everything numeric is generic over [`Real`]; the
//! aliases at the crate root fix the scalar to `f64`.

// `!(x > 0)` is used on purpose: it also rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]
// Parallel arrays are indexed together in the numeric kernels.
#![allow(clippy::needless_range_loop)]
// The affected enums are built once per run, not stored in bulk.
#![allow(clippy::large_enum_variant)]

pub mod dynamics;
pub mod nonlinear;
pub mod planner;
pub mod poly;
pub mod scalar;
pub mod scenarios;
pub mod steer;
pub mod world;

pub use scalar::Real;

pub type LtiSystem64 = dynamics::LtiSystem<f64>;
pub type CarModel64 = nonlinear::CarModel<f64>;
pub type Steer64 = steer::Steer<f64>;
pub type Trajectory64 = steer::Trajectory<f64>;
pub type OptimalConnection64 = steer::OptimalConnection<f64>;
pub type Environment64 = world::Environment<f64>;
pub type Problem64 = planner::Problem<f64>;
pub type PlanTree64 = planner::PlanTree<f64>;
pub type PlannerResult64 = planner::PlannerResult<f64>;

//! The three benchmark systems (planar double integrator, linearized
//! quadrotor, car-like robot) with their bounds and default planner
//! settings, and the TOML scenario file format.
//!
//! Obstacle layouts and endpoints are illustrative: they reproduce the
//! corridor structure of the benchmark environments, not their geometry.

use std::f64::consts::PI;
use std::fmt;
use std::path::Path;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::dynamics::{DynamicsError, LtiSystem};
use crate::nonlinear::CarModel;
use crate::planner::{PlannerConfig, PlannerSystem, Problem, Radius};
use crate::scalar::Real;
use crate::steer::Backend;
use crate::world::{AaBox, Environment, WorldError};

/// Gravity in the quadrotor model, m/s².
pub const GRAVITY: f64 = 9.8;

#[derive(Debug, Error)]
pub enum ScenarioError {
    #[error("cannot read {path}: {source}")]
    Io {
        path: String,
        source: std::io::Error,
    },
    #[error("{0}")]
    Parse(#[from] toml::de::Error),
    #[error("cannot serialize scenario: {0}")]
    Emit(#[from] toml::ser::Error),
    #[error("field `{field}`: {message}")]
    Field { field: String, message: String },
    #[error(transparent)]
    World(#[from] WorldError),
    #[error(transparent)]
    Dynamics(#[from] DynamicsError),
}

fn field_error(field: impl Into<String>, message: impl Into<String>) -> ScenarioError {
    ScenarioError::Field {
        field: field.into(),
        message: message.into(),
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum ScenarioSystem {
    Linear(LtiSystem<f64>),
    Car(CarModel<f64>),
}

impl ScenarioSystem {
    pub fn state_dim(&self) -> usize {
        match self {
            ScenarioSystem::Linear(s) => s.state_dim(),
            ScenarioSystem::Car(_) => CarModel::<f64>::STATE_DIM,
        }
    }

    pub fn control_dim(&self) -> usize {
        match self {
            ScenarioSystem::Linear(s) => s.control_dim(),
            ScenarioSystem::Car(_) => CarModel::<f64>::CONTROL_DIM,
        }
    }
}

/// A complete planning setup. Immutable once built.
#[derive(Debug, Clone, PartialEq)]
pub struct Scenario {
    pub name: String,
    pub system: ScenarioSystem,
    pub environment: Environment<f64>,
    pub start: DVector<f64>,
    pub goal: DVector<f64>,
    pub planner: PlannerConfig,
}

fn cast_vector<T: Real>(v: &DVector<f64>) -> DVector<T> {
    v.map(T::lit)
}

fn cast_matrix<T: Real>(m: &DMatrix<f64>) -> DMatrix<T> {
    m.map(T::lit)
}

impl Scenario {
    /// Dimensions agree, the environment is well formed and both endpoints
    /// are collision-free.
    pub fn validate(&self) -> Result<(), ScenarioError> {
        let n = self.system.state_dim();
        let m = self.system.control_dim();
        self.environment.validate()?;
        if self.environment.state_dim() != n {
            return Err(field_error(
                "environment.state_lower",
                format!("expected {n} entries, got {}", self.environment.state_dim()),
            ));
        }
        if self.environment.control_dim() != m {
            return Err(field_error(
                "environment.control_lower",
                format!(
                    "expected {m} entries, got {}",
                    self.environment.control_dim()
                ),
            ));
        }
        for (field, x) in [
            ("endpoints.start", &self.start),
            ("endpoints.goal", &self.goal),
        ] {
            if x.len() != n {
                return Err(field_error(
                    field,
                    format!("expected {n} entries, got {}", x.len()),
                ));
            }
            if !self.environment.state_free(x.as_slice()) {
                return Err(field_error(field, "state is out of bounds or in collision"));
            }
        }
        self.planner
            .validate()
            .map_err(|e| field_error("planner", e.to_string()))?;
        Ok(())
    }

    /// The planning query in scalar type `T`.
    pub fn problem<T: Real>(&self) -> Result<Problem<T>, ScenarioError> {
        let system = match &self.system {
            ScenarioSystem::Linear(s) => PlannerSystem::Linear(cast_system(s)?),
            ScenarioSystem::Car(c) => {
                PlannerSystem::Nonlinear(Box::new(CarModel::new(cast_matrix(c.r()))?))
            }
        };
        let env = &self.environment;
        Ok(Problem {
            system,
            env: Environment {
                state_lower: cast_vector(&env.state_lower),
                state_upper: cast_vector(&env.state_upper),
                control_lower: cast_vector(&env.control_lower),
                control_upper: cast_vector(&env.control_upper),
                obstacles: env
                    .obstacles
                    .iter()
                    .map(|b| AaBox::new(cast_vector(&b.min), cast_vector(&b.max)))
                    .collect(),
                position_dims: env.position_dims.clone(),
                robot_radius: T::lit(env.robot_radius),
                angle_dims: env.angle_dims.clone(),
                sample_lower: env.sample_lower.as_ref().map(cast_vector),
                sample_upper: env.sample_upper.as_ref().map(cast_vector),
            },
            start: cast_vector(&self.start),
            goal: cast_vector(&self.goal),
        })
    }

    /// The linear model connections use: the system itself, or the car
    /// linearized about `x_hat` with zero control.
    pub fn linear_model<T: Real>(
        &self,
        x_hat: &DVector<f64>,
    ) -> Result<LtiSystem<T>, ScenarioError> {
        match &self.system {
            ScenarioSystem::Linear(s) => cast_system(s),
            ScenarioSystem::Car(c) => {
                let car = CarModel::<T>::new(cast_matrix(c.r()))?;
                Ok(car.linearize(cast_vector::<T>(x_hat).as_slice())?)
            }
        }
    }

    pub fn from_toml(text: &str) -> Result<Self, ScenarioError> {
        let file: ScenarioFile = toml::from_str(text)?;
        let scenario = file.into_scenario()?;
        scenario.validate()?;
        Ok(scenario)
    }

    pub fn to_toml(&self) -> Result<String, ScenarioError> {
        Ok(toml::to_string(&ScenarioFile::from_scenario(self))?)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, ScenarioError> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|source| ScenarioError::Io {
            path: path.display().to_string(),
            source,
        })?;
        Self::from_toml(&text)
    }
}

fn cast_system<T: Real>(s: &LtiSystem<f64>) -> Result<LtiSystem<T>, ScenarioError> {
    Ok(LtiSystem::new(
        cast_matrix(s.a()),
        cast_matrix(s.b()),
        cast_vector(s.c()),
        cast_matrix(s.r()),
    )?)
}

// ---------------------------------------------------------------------------
// Builders

/// Obstacle layouts for the double integrator.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DoubleIntegratorLayout {
    Empty,
    /// One box across the straight line from start to goal.
    Block,
    /// Three staggered walls forcing an S-shaped path.
    Slalom,
}

impl fmt::Display for DoubleIntegratorLayout {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            DoubleIntegratorLayout::Empty => "empty",
            DoubleIntegratorLayout::Block => "block",
            DoubleIntegratorLayout::Slalom => "slalom",
        })
    }
}

fn aabox(min: &[f64], max: &[f64]) -> AaBox<f64> {
    AaBox::new(
        DVector::from_column_slice(min),
        DVector::from_column_slice(max),
    )
}

fn vector(xs: &[f64]) -> DVector<f64> {
    DVector::from_column_slice(xs)
}

/// Planar double integrator: state `(p, v)`, control the acceleration,
/// `R = r·I`.
pub fn double_integrator_system<T: Real>(r: T) -> LtiSystem<T> {
    let mut a = DMatrix::zeros(4, 4);
    a[(0, 2)] = T::one();
    a[(1, 3)] = T::one();
    let mut b = DMatrix::zeros(4, 2);
    b[(2, 0)] = T::one();
    b[(3, 1)] = T::one();
    LtiSystem::new(a, b, DVector::zeros(4), DMatrix::identity(2, 2) * r)
        .expect("double integrator is well formed")
}

/// Double integrator with `r = 0.25`, `p ∈ [0,200]×[0,100]`,
/// `v ∈ [−10,10]²`, `a ∈ [−10,10]²` and an infinite neighbor radius.
pub fn double_integrator(layout: DoubleIntegratorLayout) -> Scenario {
    let (obstacles, start, goal) = match layout {
        // close enough that the direct connection stays under 10 m/s
        DoubleIntegratorLayout::Empty => (Vec::new(), [40.0, 50.0], [160.0, 50.0]),
        DoubleIntegratorLayout::Block => (
            vec![aabox(&[90.0, 20.0], &[110.0, 80.0])],
            [20.0, 50.0],
            [180.0, 50.0],
        ),
        DoubleIntegratorLayout::Slalom => (
            vec![
                aabox(&[45.0, 0.0], &[55.0, 65.0]),
                aabox(&[95.0, 35.0], &[105.0, 100.0]),
                aabox(&[145.0, 0.0], &[155.0, 65.0]),
            ],
            [15.0, 15.0],
            [185.0, 85.0],
        ),
    };
    Scenario {
        name: format!("double_integrator_{layout}"),
        system: ScenarioSystem::Linear(double_integrator_system(0.25)),
        environment: Environment {
            state_lower: vector(&[0.0, 0.0, -10.0, -10.0]),
            state_upper: vector(&[200.0, 100.0, 10.0, 10.0]),
            control_lower: vector(&[-10.0, -10.0]),
            control_upper: vector(&[10.0, 10.0]),
            obstacles,
            position_dims: vec![0, 1],
            robot_radius: 1.0,
            angle_dims: Vec::new(),
            sample_lower: None,
            sample_upper: None,
        },
        start: vector(&[start[0], start[1], 0.0, 0.0]),
        goal: vector(&[goal[0], goal[1], 0.0, 0.0]),
        planner: PlannerConfig {
            max_iterations: 2000,
            radius: Radius::Infinite,
            rng_seed: 1,
            ..PlannerConfig::default()
        },
    }
}

/// Physical constants of the quadrotor. The defaults are placeholders of
/// plausible magnitude for a small research quadrotor, not measured values.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QuadrotorParams {
    /// Mass, kg.
    pub mass: f64,
    /// Center-to-rotor distance, m.
    pub arm: f64,
    /// Moment of inertia about the in-plane axes, kg·m².
    pub inertia: f64,
}

impl Default for QuadrotorParams {
    fn default() -> Self {
        Self {
            mass: 0.5,
            arm: 0.17,
            inertia: 0.002,
        }
    }
}

/// Hover linearization with zero yaw: state `(p, v, r, w)` with `r` and `w`
/// two-dimensional, control `(u_f, u_x, u_y)`, `R = diag(1/4, 1/2, 1/2)`.
pub fn quadrotor_system<T: Real>(params: QuadrotorParams) -> Result<LtiSystem<T>, ScenarioError> {
    for (name, v) in [
        ("mass", params.mass),
        ("arm", params.arm),
        ("inertia", params.inertia),
    ] {
        if !(v > 0.0 && v.is_finite()) {
            return Err(field_error(name, format!("must be positive, got {v}")));
        }
    }
    let g = T::lit(GRAVITY);
    let mut a = DMatrix::zeros(10, 10);
    for k in 0..3 {
        a[(k, 3 + k)] = T::one();
    }
    // v̇x = g·r_y, v̇y = −g·r_x
    a[(3, 7)] = g;
    a[(4, 6)] = -g;
    a[(6, 8)] = T::one();
    a[(7, 9)] = T::one();
    let mut b = DMatrix::zeros(10, 3);
    b[(5, 0)] = T::lit(1.0 / params.mass);
    b[(8, 1)] = T::lit(params.arm / params.inertia);
    b[(9, 2)] = T::lit(params.arm / params.inertia);
    let r = DMatrix::from_diagonal(&DVector::from_column_slice(&[
        T::lit(0.25),
        T::lit(0.5),
        T::lit(0.5),
    ]));
    Ok(LtiSystem::new(a, b, DVector::zeros(10), r)?)
}

/// Quadrotor in a `[0,5]³` room split by a wall with one off-center window.
pub fn quadrotor(params: QuadrotorParams) -> Result<Scenario, ScenarioError> {
    let (x0, x1) = (2.3, 2.7);
    let wall = vec![
        aabox(&[x0, 0.0, 0.0], &[x1, 3.0, 5.0]),
        aabox(&[x0, 4.5, 0.0], &[x1, 5.0, 5.0]),
        aabox(&[x0, 3.0, 0.0], &[x1, 4.5, 0.5]),
        aabox(&[x0, 3.0, 2.0], &[x1, 4.5, 5.0]),
    ];
    let mut start = DVector::zeros(10);
    start.rows_mut(0, 3).copy_from_slice(&[0.5, 0.5, 0.5]);
    let mut goal = DVector::zeros(10);
    goal.rows_mut(0, 3).copy_from_slice(&[4.5, 4.5, 4.5]);
    let mut lower = vec![0.0; 3];
    lower.extend([-5.0; 3]);
    lower.extend([-1.0; 2]);
    lower.extend([-5.0; 2]);
    let mut upper = vec![5.0; 3];
    upper.extend([5.0; 3]);
    upper.extend([1.0; 2]);
    upper.extend([5.0; 2]);
    Ok(Scenario {
        name: "quadrotor".into(),
        system: ScenarioSystem::Linear(quadrotor_system(params)?),
        environment: Environment {
            state_lower: vector(&lower),
            state_upper: vector(&upper),
            control_lower: vector(&[-4.545, -3.62, -3.62]),
            control_upper: vector(&[9.935, 3.62, 3.62]),
            obstacles: wall,
            position_dims: vec![0, 1, 2],
            robot_radius: 0.15,
            angle_dims: Vec::new(),
            sample_lower: None,
            sample_upper: None,
        },
        start,
        goal,
        planner: PlannerConfig {
            max_iterations: 1000,
            radius: Radius::Infinite,
            rng_seed: 1,
            ..PlannerConfig::default()
        },
    })
}

/// Lowest sampled speed; the car linearization loses controllability at
/// `v = 0`.
pub const CAR_MIN_SAMPLE_SPEED: f64 = 0.1;

/// Car-like robot on a street grid: `p ∈ [0,200]×[0,100]`, `θ ∈ [−π,π]`,
/// `v ∈ [0,10]` (sampled from `[0.1, 10]`), `κ ∈ [−0.25, 0.25]`, `R = I`.
/// Connections are capped at a cost of 15, about one street width.
pub fn car() -> Scenario {
    let mut blocks = Vec::new();
    for (x0, x1) in [(15.0, 60.0), (75.0, 125.0), (140.0, 185.0)] {
        for (y0, y1) in [(15.0, 40.0), (55.0, 85.0)] {
            blocks.push(aabox(&[x0, y0], &[x1, y1]));
        }
    }
    Scenario {
        name: "car".into(),
        system: ScenarioSystem::Car(CarModel::default()),
        environment: Environment {
            state_lower: vector(&[0.0, 0.0, -PI, 0.0, -0.25]),
            state_upper: vector(&[200.0, 100.0, PI, 10.0, 0.25]),
            control_lower: vector(&[f64::NEG_INFINITY; 2]),
            control_upper: vector(&[f64::INFINITY; 2]),
            obstacles: blocks,
            position_dims: vec![0, 1],
            robot_radius: 1.0,
            angle_dims: vec![2],
            sample_lower: Some(vector(&[0.0, 0.0, -PI, CAR_MIN_SAMPLE_SPEED, -0.25])),
            sample_upper: Some(vector(&[200.0, 100.0, PI, 10.0, 0.25])),
        },
        start: vector(&[7.0, 7.0, 0.0, 2.0, 0.0]),
        goal: vector(&[192.0, 92.0, PI / 2.0, 2.0, 0.0]),
        planner: PlannerConfig {
            max_iterations: 2000,
            radius: Radius::Infinite,
            radius_cap: Some(15.0),
            rng_seed: 1,
            ..PlannerConfig::default()
        },
    }
}

/// One-dimensional double integrator with `R = 1` from rest at 0 to
/// `(1, 1)`, whose optimal arrival time is `√7 − 1`.
pub fn line_example() -> Scenario {
    let a = DMatrix::from_row_slice(2, 2, &[0.0, 1.0, 0.0, 0.0]);
    let b = DMatrix::from_row_slice(2, 1, &[0.0, 1.0]);
    let sys = LtiSystem::new(a, b, DVector::zeros(2), DMatrix::identity(1, 1))
        .expect("line example is well formed");
    Scenario {
        name: "line".into(),
        system: ScenarioSystem::Linear(sys),
        environment: Environment {
            state_lower: vector(&[-10.0, -10.0]),
            state_upper: vector(&[10.0, 10.0]),
            control_lower: vector(&[f64::NEG_INFINITY]),
            control_upper: vector(&[f64::INFINITY]),
            obstacles: Vec::new(),
            position_dims: vec![0],
            robot_radius: 0.0,
            angle_dims: Vec::new(),
            sample_lower: None,
            sample_upper: None,
        },
        start: vector(&[0.0, 0.0]),
        goal: vector(&[1.0, 1.0]),
        planner: PlannerConfig {
            max_iterations: 200,
            rng_seed: 1,
            ..PlannerConfig::default()
        },
    }
}

/// Every bundled scenario with its file name.
pub fn bundled() -> Vec<(&'static str, Scenario)> {
    vec![
        (
            "double_integrator_empty.toml",
            double_integrator(DoubleIntegratorLayout::Empty),
        ),
        (
            "double_integrator_block.toml",
            double_integrator(DoubleIntegratorLayout::Block),
        ),
        (
            "double_integrator_slalom.toml",
            double_integrator(DoubleIntegratorLayout::Slalom),
        ),
        (
            "quadrotor.toml",
            quadrotor(QuadrotorParams::default()).expect("default parameters are valid"),
        ),
        ("car.toml", car()),
        ("line_example.toml", line_example()),
    ]
}

// ---------------------------------------------------------------------------
// File format

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ScenarioFile {
    name: String,
    system: FileSystem,
    #[serde(default)]
    planner: FilePlanner,
    endpoints: FileEndpoints,
    environment: FileEnvironment,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
enum FileSystem {
    Linear {
        a: Vec<Vec<f64>>,
        b: Vec<Vec<f64>>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        c: Option<Vec<f64>>,
        r: FileWeight,
    },
    Car {
        #[serde(default, skip_serializing_if = "Option::is_none")]
        r: Option<FileWeight>,
    },
}

/// `R` as its diagonal or as full rows.
#[derive(Debug, Serialize, Deserialize)]
#[serde(untagged)]
enum FileWeight {
    Diagonal(Vec<f64>),
    Full(Vec<Vec<f64>>),
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct FileEnvironment {
    state_lower: Vec<f64>,
    state_upper: Vec<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    control_lower: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    control_upper: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    sample_lower: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    sample_upper: Option<Vec<f64>>,
    #[serde(default)]
    position_dims: Vec<usize>,
    #[serde(default)]
    angle_dims: Vec<usize>,
    #[serde(default)]
    robot_radius: f64,
    #[serde(default)]
    obstacles: Vec<FileBox>,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct FileBox {
    min: Vec<f64>,
    max: Vec<f64>,
}

/// A number, `inf`, or the string `"inf"`.
#[derive(Debug, Serialize, Deserialize)]
#[serde(untagged)]
enum FileRadius {
    Value(f64),
    Text(String),
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct FilePlanner {
    #[serde(default = "default_iterations")]
    iterations: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    radius: Option<FileRadius>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    gamma: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    d: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    radius_cap: Option<f64>,
    #[serde(default)]
    seed: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    backend: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    relinearize: Option<bool>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    sample_dt: Option<f64>,
}

fn default_iterations() -> usize {
    PlannerConfig::default().max_iterations
}

impl Default for FilePlanner {
    fn default() -> Self {
        Self {
            iterations: default_iterations(),
            radius: None,
            gamma: None,
            d: None,
            radius_cap: None,
            seed: 0,
            backend: None,
            relinearize: None,
            sample_dt: None,
        }
    }
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct FileEndpoints {
    start: Vec<f64>,
    goal: Vec<f64>,
}

fn rows_to_matrix(
    field: &str,
    rows: &[Vec<f64>],
    ncols_if_empty: usize,
) -> Result<DMatrix<f64>, ScenarioError> {
    let ncols = rows.first().map_or(ncols_if_empty, Vec::len);
    if let Some(k) = rows.iter().position(|r| r.len() != ncols) {
        return Err(field_error(
            field,
            format!("row {k} has {} entries, expected {ncols}", rows[k].len()),
        ));
    }
    Ok(DMatrix::from_row_iterator(
        rows.len(),
        ncols,
        rows.iter().flatten().copied(),
    ))
}

fn matrix_to_rows(m: &DMatrix<f64>) -> Vec<Vec<f64>> {
    m.row_iter().map(|r| r.iter().copied().collect()).collect()
}

fn weight_to_matrix(field: &str, w: &FileWeight) -> Result<DMatrix<f64>, ScenarioError> {
    match w {
        FileWeight::Diagonal(d) => Ok(DMatrix::from_diagonal(&DVector::from_column_slice(d))),
        FileWeight::Full(rows) => rows_to_matrix(field, rows, 0),
    }
}

fn matrix_to_weight(m: &DMatrix<f64>) -> FileWeight {
    let diagonal = (0..m.nrows()).all(|i| (0..m.ncols()).all(|j| i == j || m[(i, j)] == 0.0));
    if diagonal {
        FileWeight::Diagonal(m.diagonal().iter().copied().collect())
    } else {
        FileWeight::Full(matrix_to_rows(m))
    }
}

fn field_result<T, E: fmt::Display>(field: &str, r: Result<T, E>) -> Result<T, ScenarioError> {
    r.map_err(|e| field_error(field, e.to_string()))
}

impl ScenarioFile {
    fn into_scenario(self) -> Result<Scenario, ScenarioError> {
        let system = match &self.system {
            FileSystem::Linear { a, b, c, r } => {
                let a = rows_to_matrix("system.a", a, 0)?;
                let b = rows_to_matrix("system.b", b, 0)?;
                let c = DVector::from_column_slice(c.as_deref().unwrap_or(&vec![0.0; a.nrows()]));
                let r = weight_to_matrix("system.r", r)?;
                ScenarioSystem::Linear(field_result("system", LtiSystem::new(a, b, c, r))?)
            }
            FileSystem::Car { r } => {
                let car = match r {
                    Some(w) => {
                        field_result("system.r", CarModel::new(weight_to_matrix("system.r", w)?))?
                    }
                    None => CarModel::default(),
                };
                ScenarioSystem::Car(car)
            }
        };
        let m = system.control_dim();
        let env = self.environment;
        let environment = Environment {
            state_lower: DVector::from_vec(env.state_lower),
            state_upper: DVector::from_vec(env.state_upper),
            control_lower: DVector::from_vec(
                env.control_lower
                    .unwrap_or_else(|| vec![f64::NEG_INFINITY; m]),
            ),
            control_upper: DVector::from_vec(
                env.control_upper.unwrap_or_else(|| vec![f64::INFINITY; m]),
            ),
            obstacles: env
                .obstacles
                .into_iter()
                .map(|b| AaBox::new(DVector::from_vec(b.min), DVector::from_vec(b.max)))
                .collect(),
            position_dims: env.position_dims,
            robot_radius: env.robot_radius,
            angle_dims: env.angle_dims,
            sample_lower: env.sample_lower.map(DVector::from_vec),
            sample_upper: env.sample_upper.map(DVector::from_vec),
        };
        let p = self.planner;
        let radius = match (p.radius, p.gamma, p.d) {
            (None, Some(gamma), Some(dim)) => Radius::Schedule { gamma, dim },
            (Some(_), Some(_), _) => {
                return Err(field_error(
                    "planner.gamma",
                    "give either radius or gamma and d, not both",
                ))
            }
            (_, Some(_), None) | (_, None, Some(_)) => {
                return Err(field_error(
                    "planner.gamma",
                    "gamma and d must be given together",
                ))
            }
            (None, None, None) => Radius::Infinite,
            (Some(FileRadius::Value(r)), None, None) if r == f64::INFINITY => Radius::Infinite,
            (Some(FileRadius::Value(r)), None, None) => Radius::Fixed(r),
            (Some(FileRadius::Text(t)), None, None) => match t.trim() {
                "inf" | "infinite" | "infinity" => Radius::Infinite,
                other => {
                    return Err(field_error(
                        "planner.radius",
                        format!("expected a number or \"inf\", got \"{other}\""),
                    ))
                }
            },
        };
        let backend = match p.backend.as_deref() {
            None => Backend::ClosedForm,
            Some(s) => field_result("planner.backend", s.parse::<Backend>())?,
        };
        let planner = PlannerConfig {
            max_iterations: p.iterations,
            radius,
            radius_cap: p.radius_cap,
            rng_seed: p.seed,
            relinearize: p.relinearize.unwrap_or(true),
            backend,
            sample_dt: p.sample_dt,
            ..PlannerConfig::default()
        };
        Ok(Scenario {
            name: self.name,
            system,
            environment,
            start: DVector::from_vec(self.endpoints.start),
            goal: DVector::from_vec(self.endpoints.goal),
            planner,
        })
    }

    fn from_scenario(s: &Scenario) -> Self {
        let system = match &s.system {
            ScenarioSystem::Linear(sys) => FileSystem::Linear {
                a: matrix_to_rows(sys.a()),
                b: matrix_to_rows(sys.b()),
                c: (sys.c().iter().any(|&v| v != 0.0)).then(|| sys.c().iter().copied().collect()),
                r: matrix_to_weight(sys.r()),
            },
            ScenarioSystem::Car(car) => FileSystem::Car {
                r: (car != &CarModel::default()).then(|| matrix_to_weight(car.r())),
            },
        };
        let env = &s.environment;
        let vec = |v: &DVector<f64>| v.iter().copied().collect::<Vec<_>>();
        let cfg = &s.planner;
        let (radius, gamma, d) = match cfg.radius {
            Radius::Infinite => (Some(FileRadius::Value(f64::INFINITY)), None, None),
            Radius::Fixed(r) => (Some(FileRadius::Value(r)), None, None),
            Radius::Schedule { gamma, dim } => (None, Some(gamma), Some(dim)),
        };
        ScenarioFile {
            name: s.name.clone(),
            system,
            planner: FilePlanner {
                iterations: cfg.max_iterations,
                radius,
                gamma,
                d,
                radius_cap: cfg.radius_cap,
                seed: cfg.rng_seed,
                backend: Some(cfg.backend.to_string()),
                relinearize: (!cfg.relinearize).then_some(false),
                sample_dt: cfg.sample_dt,
            },
            endpoints: FileEndpoints {
                start: vec(&s.start),
                goal: vec(&s.goal),
            },
            environment: FileEnvironment {
                state_lower: vec(&env.state_lower),
                state_upper: vec(&env.state_upper),
                control_lower: Some(vec(&env.control_lower)),
                control_upper: Some(vec(&env.control_upper)),
                sample_lower: env.sample_lower.as_ref().map(vec),
                sample_upper: env.sample_upper.as_ref().map(vec),
                position_dims: env.position_dims.clone(),
                angle_dims: env.angle_dims.clone(),
                robot_radius: env.robot_radius,
                obstacles: env
                    .obstacles
                    .iter()
                    .map(|b| FileBox {
                        min: vec(&b.min),
                        max: vec(&b.max),
                    })
                    .collect(),
            },
        }
    }
}

#[cfg(test)]
mod tests;

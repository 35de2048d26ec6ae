//! Kinodynamic RRT*: every sample is connected to the tree by an exact
//! optimal trajectory, and the goal state is offered to each rewiring pass.

use std::collections::HashMap;
use std::fmt;
use std::time::{Duration, Instant};

use nalgebra::DVector;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::dynamics::{DynamicsError, LtiSystem};
use crate::nonlinear::NonlinearSystem;
use crate::scalar::Real;
use crate::steer::{
    Backend, OptimalConnection, OptimalCost, Steer, SteerError, SteerOptions, SteerScratch,
    Trajectory,
};
use crate::world::{Environment, WorldError};

/// Rejection-sampling attempts before the free space is declared empty.
pub const MAX_SAMPLE_DRAWS: usize = 1_000_000;

#[derive(Debug, Error)]
pub enum PlannerError {
    #[error("invalid planner configuration: {0}")]
    Config(String),
    #[error("start state is not collision-free")]
    StartNotFree,
    #[error("goal state is not collision-free")]
    GoalNotFree,
    #[error("no collision-free sample in {0} draws; the free space is (nearly) empty")]
    SamplingExhausted(usize),
    #[error(transparent)]
    World(#[from] WorldError),
    #[error(transparent)]
    Steer(#[from] SteerError),
    #[error(transparent)]
    Dynamics(#[from] DynamicsError),
    #[error("tree invariant violated: {0}")]
    Invariant(String),
}

/// Neighbor radius in cost units.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Radius {
    Infinite,
    Fixed(f64),
    /// `r = ((γ/ζ_d) log i / i)^{1/d}` with `ζ_d` the unit `d`-ball volume.
    Schedule {
        gamma: f64,
        dim: usize,
    },
}

impl fmt::Display for Radius {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Radius::Infinite => f.write_str("inf"),
            Radius::Fixed(r) => write!(f, "{r}"),
            Radius::Schedule { gamma, dim } => write!(f, "schedule(gamma={gamma}, d={dim})"),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PlannerConfig {
    pub max_iterations: usize,
    pub radius: Radius,
    /// Upper bound applied to every radius.
    pub radius_cap: Option<f64>,
    pub rng_seed: u64,
    /// Nonlinear systems only: linearize about each sample. When off, the
    /// linearization about the start state is used throughout.
    pub relinearize: bool,
    pub backend: Backend,
    pub steer: SteerOptions,
    /// Collision-check step along each connection; `None` uses
    /// [`crate::steer::default_sample_dt`] of the arrival time.
    pub sample_dt: Option<f64>,
    /// Stop once the tree holds this many nodes.
    pub max_nodes: Option<usize>,
    /// Stop once this much wall time has elapsed.
    pub time_budget: Option<Duration>,
    /// Recompute every edge cost and the tree structure after each
    /// iteration. Quadratic per iteration; meant for tests.
    pub check_invariants: bool,
}

impl Default for PlannerConfig {
    fn default() -> Self {
        Self {
            max_iterations: 1000,
            radius: Radius::Infinite,
            radius_cap: None,
            rng_seed: 0,
            relinearize: true,
            backend: Backend::ClosedForm,
            steer: SteerOptions::default(),
            sample_dt: None,
            max_nodes: None,
            time_budget: None,
            check_invariants: false,
        }
    }
}

impl PlannerConfig {
    pub fn validate(&self) -> Result<(), PlannerError> {
        if self.max_iterations == 0 {
            return Err(PlannerError::Config(
                "max_iterations must be at least 1".into(),
            ));
        }
        match self.radius {
            Radius::Infinite => {}
            Radius::Fixed(r) if r > 0.0 => {}
            Radius::Fixed(r) => {
                return Err(PlannerError::Config(format!(
                    "radius must be positive, got {r}"
                )))
            }
            Radius::Schedule { gamma, dim } => {
                if !(gamma > 0.0 && gamma.is_finite()) {
                    return Err(PlannerError::Config(format!(
                        "gamma must be positive and finite, got {gamma}"
                    )));
                }
                if dim == 0 {
                    return Err(PlannerError::Config(
                        "schedule dimension must be at least 1".into(),
                    ));
                }
            }
        }
        if let Some(cap) = self.radius_cap {
            if !(cap > 0.0) {
                return Err(PlannerError::Config(format!(
                    "radius_cap must be positive, got {cap}"
                )));
            }
        }
        if let Some(dt) = self.sample_dt {
            if !(dt > 0.0 && dt.is_finite()) {
                return Err(PlannerError::Config(format!(
                    "sample_dt must be positive and finite, got {dt}"
                )));
            }
        }
        Ok(())
    }
}

/// Volume of the unit ball in `d` dimensions.
pub fn unit_ball_volume(d: usize) -> f64 {
    let mut v = if d.is_multiple_of(2) { 1.0 } else { 2.0 };
    let mut k = if d.is_multiple_of(2) { 2 } else { 3 };
    while k <= d {
        v *= 2.0 * std::f64::consts::PI / k as f64;
        k += 2;
    }
    v
}

/// Neighbor radius for a tree of `nodes` nodes; `nodes < 2` is treated as 2
/// so the schedule never collapses to zero.
pub fn neighbor_radius(nodes: usize, cfg: &PlannerConfig) -> f64 {
    let r = match cfg.radius {
        Radius::Infinite => f64::INFINITY,
        Radius::Fixed(r) => r,
        Radius::Schedule { gamma, dim } => {
            let i = nodes.max(2) as f64;
            (gamma / unit_ball_volume(dim) * i.ln() / i).powf(1.0 / dim as f64)
        }
    };
    match cfg.radius_cap {
        Some(cap) => r.min(cap),
        None => r,
    }
}

/// Dynamics the planner connects states with.
pub enum PlannerSystem<T: Real> {
    Linear(LtiSystem<T>),
    /// Linearized with `û = 0` about each sample (or the start state).
    Nonlinear(Box<dyn NonlinearSystem<T> + Send + Sync>),
}

impl<T: Real> PlannerSystem<T> {
    pub fn state_dim(&self) -> usize {
        match self {
            PlannerSystem::Linear(s) => s.state_dim(),
            PlannerSystem::Nonlinear(s) => s.state_dim(),
        }
    }

    pub fn control_dim(&self) -> usize {
        match self {
            PlannerSystem::Linear(s) => s.control_dim(),
            PlannerSystem::Nonlinear(s) => s.control_dim(),
        }
    }

    /// Linear model used for connections linearized about `x_hat`.
    pub fn linear_model(&self, x_hat: &DVector<T>) -> Result<LtiSystem<T>, DynamicsError> {
        match self {
            PlannerSystem::Linear(s) => Ok(s.clone()),
            PlannerSystem::Nonlinear(s) => s.linearize_at(x_hat, &DVector::zeros(s.control_dim())),
        }
    }

    pub fn is_linear(&self) -> bool {
        matches!(self, PlannerSystem::Linear(_))
    }
}

impl<T: Real> fmt::Debug for PlannerSystem<T> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            PlannerSystem::Linear(s) => f.debug_tuple("Linear").field(s).finish(),
            PlannerSystem::Nonlinear(s) => write!(
                f,
                "Nonlinear(n = {}, m = {})",
                s.state_dim(),
                s.control_dim()
            ),
        }
    }
}

/// A planning query: dynamics, world and the two endpoints.
#[derive(Debug)]
pub struct Problem<T: Real> {
    pub system: PlannerSystem<T>,
    pub env: Environment<T>,
    pub start: DVector<T>,
    pub goal: DVector<T>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PlanNode<T: Real> {
    pub state: DVector<T>,
    pub parent: Option<usize>,
    /// Cost from the root.
    pub cost: T,
    /// Cost of the edge from the parent; zero at the root.
    pub edge_cost: T,
    pub children: Vec<usize>,
    /// Node whose state the incoming edge was linearized about. Equals the
    /// node itself or its parent; irrelevant for linear systems.
    pub linearized_at: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PlanTree<T: Real> {
    pub nodes: Vec<PlanNode<T>>,
    pub goal_node: Option<usize>,
}

impl<T: Real> PlanTree<T> {
    pub const ROOT: usize = 0;

    pub fn new(start: DVector<T>) -> Self {
        Self {
            nodes: vec![PlanNode {
                state: start,
                parent: None,
                cost: T::zero(),
                edge_cost: T::zero(),
                children: Vec::new(),
                linearized_at: 0,
            }],
            goal_node: None,
        }
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn best_cost(&self) -> T {
        self.goal_node
            .map_or_else(T::infinity, |g| self.nodes[g].cost)
    }

    /// Node indices from the root to `i`.
    pub fn path_to(&self, i: usize) -> Vec<usize> {
        let mut path = vec![i];
        let mut cur = i;
        while let Some(p) = self.nodes[cur].parent {
            path.push(p);
            cur = p;
        }
        path.reverse();
        path
    }

    pub fn is_ancestor(&self, a: usize, mut b: usize) -> bool {
        while let Some(p) = self.nodes[b].parent {
            if p == a {
                return true;
            }
            b = p;
        }
        false
    }

    fn push(&mut self, state: DVector<T>, parent: usize, edge_cost: T, lin: usize) -> usize {
        let i = self.nodes.len();
        let cost = self.nodes[parent].cost + edge_cost;
        self.nodes.push(PlanNode {
            state,
            parent: Some(parent),
            cost,
            edge_cost,
            children: Vec::new(),
            linearized_at: if lin == usize::MAX { i } else { lin },
        });
        self.nodes[parent].children.push(i);
        i
    }

    /// Moves `i` under `parent`, shifting the costs of its whole subtree.
    fn reparent(&mut self, i: usize, parent: usize, edge_cost: T, lin: usize) {
        let old = self.nodes[i].parent.expect("the root is never rewired");
        self.nodes[old].children.retain(|&c| c != i);
        self.nodes[parent].children.push(i);
        let node = &mut self.nodes[i];
        node.parent = Some(parent);
        node.edge_cost = edge_cost;
        node.linearized_at = lin;
        let delta = self.nodes[parent].cost + edge_cost - self.nodes[i].cost;
        let mut stack = vec![i];
        while let Some(k) = stack.pop() {
            self.nodes[k].cost += delta;
            stack.extend_from_slice(&self.nodes[k].children);
        }
    }

    /// Root at 0 with cost 0, acyclic parent links, children the inverse of
    /// parents, and `cost = cost[parent] + edge_cost`.
    pub fn check_structure(&self, tol: f64) -> Result<(), String> {
        let root = self.nodes.first().ok_or("tree is empty")?;
        if root.parent.is_some() || root.cost != T::zero() {
            return Err("node 0 must be a root with cost 0".into());
        }
        let mut child_count = vec![0usize; self.nodes.len()];
        for (i, node) in self.nodes.iter().enumerate().skip(1) {
            let p = node.parent.ok_or(format!("node {i} has no parent"))?;
            if p >= self.nodes.len() {
                return Err(format!("node {i} has parent {p} out of range"));
            }
            if !self.nodes[p].children.contains(&i) {
                return Err(format!("node {i} missing from children of {p}"));
            }
            let expect = self.nodes[p].cost + node.edge_cost;
            if (expect - node.cost).abs().to_f64_lossy()
                > tol * (1.0 + node.cost.abs().to_f64_lossy())
            {
                return Err(format!(
                    "node {i}: cost {} but parent cost + edge = {}",
                    node.cost, expect
                ));
            }
            child_count[p] += 1;
            let mut steps = 0;
            let mut cur = i;
            while let Some(q) = self.nodes[cur].parent {
                cur = q;
                steps += 1;
                if steps > self.nodes.len() {
                    return Err(format!("cycle through node {i}"));
                }
            }
        }
        for (i, node) in self.nodes.iter().enumerate() {
            if node.children.len() != child_count[i] {
                return Err(format!("children of node {i} do not match parent links"));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HistoryRow<T> {
    pub iteration: usize,
    pub nodes: usize,
    /// Cost of the goal node, infinite until the goal is connected.
    pub best_cost: T,
    /// Seconds since planning started.
    pub wall_time: f64,
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct PlannerStats {
    pub iterations: usize,
    pub samples_drawn: usize,
    pub discarded_no_parent: usize,
    pub discarded_uncontrollable: usize,
    pub rewires: usize,
    pub steer_calls: usize,
    pub collision_checks: usize,
}

#[derive(Debug, Clone)]
pub struct PlannerResult<T: Real> {
    pub tree: PlanTree<T>,
    /// One row after initialization and one per iteration.
    pub history: Vec<HistoryRow<T>>,
    pub solution: Option<Trajectory<T>>,
    pub stats: PlannerStats,
}

impl<T: Real> PlannerResult<T> {
    pub fn best_cost(&self) -> T {
        self.tree.best_cost()
    }
}

/// Steering for one linearization point, shared in linear mode.
enum Local<'a, T: Real> {
    Shared(&'a Steer<T>, &'a mut SteerScratch<T>),
    Owned(Steer<T>, SteerScratch<T>),
}

impl<'a, T: Real> Local<'a, T> {
    fn parts(&mut self) -> (&Steer<T>, &mut SteerScratch<T>) {
        match self {
            Local::Shared(s, sc) => (s, sc),
            Local::Owned(s, sc) => (s, sc),
        }
    }
}

/// Steering linearized about `x_hat`, or the shared instance when the
/// linearization is fixed. `None` when that linearization is not
/// controllable.
fn local<'a, T: Real>(
    shared: &'a mut Option<(Steer<T>, SteerScratch<T>)>,
    problem: &Problem<T>,
    cfg: &PlannerConfig,
    x_hat: &DVector<T>,
) -> Result<Option<Local<'a, T>>, PlannerError> {
    if let Some((s, sc)) = shared.as_mut() {
        return Ok(Some(Local::Shared(s, sc)));
    }
    let sys = problem.system.linear_model(x_hat)?;
    match Steer::with_options(sys, cfg.backend, cfg.steer.clone()) {
        Ok(s) => {
            let sc = s.scratch();
            Ok(Some(Local::Owned(s, sc)))
        }
        Err(SteerError::Dynamics(DynamicsError::NotControllable { .. })) => Ok(None),
        Err(e) => Err(e.into()),
    }
}

/// Incremental planner state; [`plan`] drives it to completion.
pub struct Planner<'p, T: Real> {
    problem: &'p Problem<T>,
    cfg: PlannerConfig,
    tree: PlanTree<T>,
    rng: ChaCha8Rng,
    shared: Option<(Steer<T>, SteerScratch<T>)>,
    sample_dt: Option<T>,
    stats: PlannerStats,
    /// Node indices by cost from the root, refreshed before each parent
    /// search.
    by_cost: Vec<usize>,
}

impl<'p, T: Real> Planner<'p, T> {
    /// Validates the query, roots the tree at the start and tries the direct
    /// start-to-goal connection.
    pub fn new(problem: &'p Problem<T>, cfg: PlannerConfig) -> Result<Self, PlannerError> {
        cfg.validate()?;
        problem.env.validate()?;
        problem.env.check_sampling()?;
        let n = problem.system.state_dim();
        if problem.env.state_dim() != n || problem.env.control_dim() != problem.system.control_dim()
        {
            return Err(PlannerError::Config(format!(
                "environment is {}x{} but the system is {}x{}",
                problem.env.state_dim(),
                problem.env.control_dim(),
                n,
                problem.system.control_dim()
            )));
        }
        if problem.start.len() != n || problem.goal.len() != n {
            return Err(PlannerError::Config(format!(
                "start and goal must have dimension {n}"
            )));
        }
        if !problem.env.state_free(problem.start.as_slice()) {
            return Err(PlannerError::StartNotFree);
        }
        if !problem.env.state_free(problem.goal.as_slice()) {
            return Err(PlannerError::GoalNotFree);
        }
        let shared = if problem.system.is_linear() || !cfg.relinearize {
            let sys = problem.system.linear_model(&problem.start)?;
            let steer = Steer::with_options(sys, cfg.backend, cfg.steer.clone())?;
            let scratch = steer.scratch();
            Some((steer, scratch))
        } else {
            None
        };
        let mut planner = Self {
            problem,
            sample_dt: cfg.sample_dt.map(T::lit),
            cfg,
            tree: PlanTree::new(problem.start.clone()),
            rng: ChaCha8Rng::seed_from_u64(0),
            shared,
            stats: PlannerStats::default(),
            by_cost: Vec::new(),
        };
        planner.rng = ChaCha8Rng::seed_from_u64(planner.cfg.rng_seed);
        let r = neighbor_radius(1, &planner.cfg);
        planner.rewire_from(PlanTree::<T>::ROOT, r, false)?;
        Ok(planner)
    }

    pub fn tree(&self) -> &PlanTree<T> {
        &self.tree
    }

    pub fn stats(&self) -> &PlannerStats {
        &self.stats
    }

    pub fn config(&self) -> &PlannerConfig {
        &self.cfg
    }

    /// Uniform sample over the sampling bounds, redrawn until collision-free.
    pub fn sample_free(&mut self) -> Result<DVector<T>, PlannerError> {
        for _ in 0..MAX_SAMPLE_DRAWS {
            self.stats.samples_drawn += 1;
            let x = self.problem.env.sample_uniform(&mut self.rng);
            if self.problem.env.state_free(x.as_slice()) {
                return Ok(x);
            }
        }
        Err(PlannerError::SamplingExhausted(MAX_SAMPLE_DRAWS))
    }

    fn linearization_point(&self, i: usize) -> &DVector<T> {
        if self.shared.is_some() {
            &self.problem.start
        } else {
            &self.tree.nodes[i].state
        }
    }

    /// The best collision-free parent for `x_new` within radius `r`, as
    /// `(parent, edge cost)`. Candidates are checked for collision in order
    /// of total cost, ties going to the lower index.
    pub fn choose_parent(
        &mut self,
        x_new: &DVector<T>,
        r: f64,
    ) -> Result<Option<(usize, T)>, PlannerError> {
        let Some(mut local) = local(&mut self.shared, self.problem, &self.cfg, x_new)? else {
            return Ok(None);
        };
        let (steer, scratch) = local.parts();
        let mut by_cost = Vec::new();
        sort_by_cost(&self.tree, &mut by_cost);
        choose_parent_with(
            &self.tree,
            &by_cost,
            &self.problem.env,
            x_new,
            r,
            self.sample_dt,
            steer,
            scratch,
            &mut self.stats,
        )
    }

    /// Tries every node and the goal as a child of node `i`, linearized
    /// about node `i`.
    pub fn rewire(&mut self, i: usize, r: f64) -> Result<(), PlannerError> {
        self.rewire_from(i, r, true)
    }

    fn rewire_from(&mut self, i: usize, r: f64, tree_nodes: bool) -> Result<(), PlannerError> {
        let x_hat = self.linearization_point(i).clone();
        let Some(mut local) = local(&mut self.shared, self.problem, &self.cfg, &x_hat)? else {
            return Ok(());
        };
        let (steer, scratch) = local.parts();
        rewire_with(
            &mut self.tree,
            &self.problem.env,
            &self.problem.goal,
            i,
            r,
            self.sample_dt,
            steer,
            scratch,
            &mut self.stats,
            tree_nodes,
        )
    }

    /// One sample, parent choice, insertion and rewiring pass. Returns the
    /// new node index, or `None` when the sample was discarded.
    pub fn step(&mut self) -> Result<Option<usize>, PlannerError> {
        self.stats.iterations += 1;
        let x_new = self.sample_free()?;
        let r = neighbor_radius(self.tree.len(), &self.cfg);
        let Some(mut local) = local(&mut self.shared, self.problem, &self.cfg, &x_new)? else {
            self.stats.discarded_uncontrollable += 1;
            return Ok(None);
        };
        let (steer, scratch) = local.parts();
        sort_by_cost(&self.tree, &mut self.by_cost);
        let parent = choose_parent_with(
            &self.tree,
            &self.by_cost,
            &self.problem.env,
            &x_new,
            r,
            self.sample_dt,
            steer,
            scratch,
            &mut self.stats,
        )?;
        let Some((parent, edge)) = parent else {
            self.stats.discarded_no_parent += 1;
            return Ok(None);
        };
        let i = self.tree.push(x_new, parent, edge, usize::MAX);
        rewire_with(
            &mut self.tree,
            &self.problem.env,
            &self.problem.goal,
            i,
            r,
            self.sample_dt,
            steer,
            scratch,
            &mut self.stats,
            true,
        )?;
        drop(local);
        if self.cfg.check_invariants {
            self.check_invariants()?;
        }
        Ok(Some(i))
    }

    /// Full recomputation of every edge cost against the stored costs.
    pub fn check_invariants(&mut self) -> Result<(), PlannerError> {
        self.tree
            .check_structure(1e-9)
            .map_err(PlannerError::Invariant)?;
        for i in 1..self.tree.len() {
            let node = &self.tree.nodes[i];
            let p = node.parent.expect("non-root");
            let lin = self.linearization_point(node.linearized_at).clone();
            let mut local =
                local(&mut self.shared, self.problem, &self.cfg, &lin)?.ok_or_else(|| {
                    PlannerError::Invariant(format!("edge into {i} is uncontrollable"))
                })?;
            let (steer, scratch) = local.parts();
            let node = &self.tree.nodes[i];
            let from = &self.tree.nodes[p].state;
            let c = steer
                .optimal_cost(from.as_slice(), node.state.as_slice(), scratch)?
                .cost;
            let stored = node.edge_cost;
            if (c - stored).abs().to_f64_lossy() > 1e-6 * (1.0 + c.abs().to_f64_lossy()) {
                return Err(PlannerError::Invariant(format!(
                    "edge into node {i}: stored cost {stored}, recomputed {c}"
                )));
            }
        }
        Ok(())
    }

    /// Concatenated optimal segments from the start to the goal node,
    /// recomputed from the stored parent links.
    pub fn extract_solution(&mut self) -> Result<Option<Trajectory<T>>, PlannerError> {
        let Some(goal) = self.tree.goal_node else {
            return Ok(None);
        };
        let path = self.tree.path_to(goal);
        let mut traj = Trajectory::empty();
        let mut cache: HashMap<usize, Steer<T>> = HashMap::new();
        for w in path.windows(2) {
            let (p, c) = (w[0], w[1]);
            let lin = self.tree.nodes[c].linearized_at;
            let (x0, x1) = (&self.tree.nodes[p].state, &self.tree.nodes[c].state);
            let seg = match &self.shared {
                Some((s, _)) => s.connect(x0, x1, self.sample_dt)?,
                None => {
                    if let std::collections::hash_map::Entry::Vacant(e) = cache.entry(lin) {
                        let sys = self
                            .problem
                            .system
                            .linear_model(&self.tree.nodes[lin].state)?;
                        let s = Steer::with_options(sys, self.cfg.backend, self.cfg.steer.clone())?;
                        e.insert(s);
                    }
                    cache[&lin].connect(x0, x1, self.sample_dt)?
                }
            };
            traj.append(&seg);
        }
        Ok(Some(traj))
    }

    /// Runs the configured iterations and extracts the solution.
    pub fn run(mut self) -> Result<PlannerResult<T>, PlannerError> {
        let started = Instant::now();
        let mut history = Vec::with_capacity(self.cfg.max_iterations + 1);
        history.push(HistoryRow {
            iteration: 0,
            nodes: self.tree.len(),
            best_cost: self.tree.best_cost(),
            wall_time: started.elapsed().as_secs_f64(),
        });
        for iteration in 1..=self.cfg.max_iterations {
            if self.cfg.max_nodes.is_some_and(|n| self.tree.len() >= n)
                || self.cfg.time_budget.is_some_and(|b| started.elapsed() >= b)
            {
                break;
            }
            self.step()?;
            history.push(HistoryRow {
                iteration,
                nodes: self.tree.len(),
                best_cost: self.tree.best_cost(),
                wall_time: started.elapsed().as_secs_f64(),
            });
        }
        let solution = self.extract_solution()?;
        Ok(PlannerResult {
            tree: self.tree,
            history,
            solution,
            stats: self.stats,
        })
    }
}

/// Runs Kinodynamic RRT* on `problem`.
pub fn plan<T: Real>(
    problem: &Problem<T>,
    cfg: &PlannerConfig,
) -> Result<PlannerResult<T>, PlannerError> {
    Planner::new(problem, cfg.clone())?.run()
}

/// Whether the optimal connection `x0 → x1` with solved `opt` stays in the
/// free state and control space at every sample.
fn edge_free<T: Real>(
    steer: &Steer<T>,
    env: &Environment<T>,
    x0: &DVector<T>,
    x1: &DVector<T>,
    opt: OptimalCost<T>,
    sample_dt: Option<T>,
    stats: &mut PlannerStats,
) -> Result<bool, PlannerError> {
    stats.collision_checks += 1;
    let conn: OptimalConnection<T> = steer.connection_from(x0, x1, opt)?;
    Ok(steer.all_samples(&conn, sample_dt, |_, x, u| env.sample_free(x, u))?)
}

/// Candidate parent ordered by total cost, then index.
struct Candidate<T> {
    /// Exact total, or a strict lower bound while `opt` is unresolved.
    total: T,
    index: usize,
    opt: Option<OptimalCost<T>>,
}

impl<T: Real> Candidate<T> {
    fn key(&self, other: &Self) -> std::cmp::Ordering {
        self.total
            .partial_cmp(&other.total)
            .unwrap_or(std::cmp::Ordering::Equal)
            .then(self.index.cmp(&other.index))
    }
}

impl<T: Real> PartialEq for Candidate<T> {
    fn eq(&self, other: &Self) -> bool {
        self.key(other).is_eq()
    }
}

impl<T: Real> Eq for Candidate<T> {}

impl<T: Real> PartialOrd for Candidate<T> {
    fn partial_cmp(&self, other: &Self) -> Option<std::cmp::Ordering> {
        Some(self.cmp(other))
    }
}

impl<T: Real> Ord for Candidate<T> {
    // reversed: BinaryHeap pops the least total first
    fn cmp(&self, other: &Self) -> std::cmp::Ordering {
        other.key(self)
    }
}

/// Node indices sorted by cost from the root, then index.
fn sort_by_cost<T: Real>(tree: &PlanTree<T>, order: &mut Vec<usize>) {
    order.extend(order.len()..tree.len());
    // stable sort: near-linear on the mostly sorted order kept between calls
    order.sort_by(|&a, &b| {
        tree.nodes[a]
            .cost
            .partial_cmp(&tree.nodes[b].cost)
            .unwrap_or(std::cmp::Ordering::Equal)
            .then(a.cmp(&b))
    });
}

/// Nodes are visited in order of cost from the root; once the cheapest
/// pending total is below the next node's cost, no unvisited node can beat
/// it (edge costs are nonnegative), so it is collision-checked before any
/// further steering.
///
/// Each node is steered with the bound it would have to beat. A node whose
/// cost is only known to exceed that bound waits in the heap under the
/// bound as a lower-bound key and is solved exactly if it reaches the top,
/// so the chosen parent is the same as with exact costs throughout.
#[allow(clippy::too_many_arguments)]
fn choose_parent_with<T: Real>(
    tree: &PlanTree<T>,
    by_cost: &[usize],
    env: &Environment<T>,
    x_new: &DVector<T>,
    r: f64,
    sample_dt: Option<T>,
    steer: &Steer<T>,
    scratch: &mut SteerScratch<T>,
    stats: &mut PlannerStats,
) -> Result<Option<(usize, T)>, PlannerError> {
    debug_assert_eq!(by_cost.len(), tree.len());
    let mut pending = std::collections::BinaryHeap::new();
    let mut next = 0;
    loop {
        while next < by_cost.len()
            && pending
                .peek()
                .is_none_or(|c: &Candidate<T>| !(c.total < tree.nodes[by_cost[next]].cost))
        {
            let i = by_cost[next];
            next += 1;
            let node = &tree.nodes[i];
            let beat = pending
                .peek()
                .map_or(T::infinity(), |c| c.total - node.cost);
            let bound = beat.min(T::lit(r));
            stats.steer_calls += 1;
            match steer.optimal_cost_below(node.state.as_slice(), x_new.as_slice(), bound, scratch)
            {
                Ok(Some(opt)) if opt.cost.to_f64_lossy() < r => pending.push(Candidate {
                    total: node.cost + opt.cost,
                    index: i,
                    opt: Some(opt),
                }),
                Ok(None) if beat < T::lit(r) => pending.push(Candidate {
                    total: node.cost + beat,
                    index: i,
                    opt: None,
                }),
                _ => {}
            }
        }
        let Some(c) = pending.pop() else {
            return Ok(None);
        };
        let Some(opt) = c.opt else {
            stats.steer_calls += 1;
            let x = tree.nodes[c.index].state.as_slice();
            if let Ok(Some(opt)) = steer.optimal_cost_below(x, x_new.as_slice(), T::lit(r), scratch)
            {
                if opt.cost.to_f64_lossy() < r {
                    pending.push(Candidate {
                        total: tree.nodes[c.index].cost + opt.cost,
                        index: c.index,
                        opt: Some(opt),
                    });
                }
            }
            continue;
        };
        if edge_free(
            steer,
            env,
            &tree.nodes[c.index].state,
            x_new,
            opt,
            sample_dt,
            stats,
        )? {
            return Ok(Some((c.index, opt.cost)));
        }
    }
}

#[allow(clippy::too_many_arguments)]
fn rewire_with<T: Real>(
    tree: &mut PlanTree<T>,
    env: &Environment<T>,
    goal: &DVector<T>,
    from: usize,
    r: f64,
    sample_dt: Option<T>,
    steer: &Steer<T>,
    scratch: &mut SteerScratch<T>,
    stats: &mut PlannerStats,
    tree_nodes: bool,
) -> Result<(), PlannerError> {
    let x_from = tree.nodes[from].state.clone();
    if tree_nodes {
        for j in 1..tree.len() {
            // Edge costs are positive, so only nodes costlier than `from`
            // can improve, and no ancestor of `from` is among them.
            if j == from || tree.nodes[j].cost <= tree.nodes[from].cost {
                continue;
            }
            stats.steer_calls += 1;
            let bound = (tree.nodes[j].cost - tree.nodes[from].cost).min(T::lit(r));
            let Ok(Some(opt)) = steer.optimal_cost_below(
                x_from.as_slice(),
                tree.nodes[j].state.as_slice(),
                bound,
                scratch,
            ) else {
                continue;
            };
            if !(opt.cost.to_f64_lossy() < r)
                || tree.nodes[from].cost + opt.cost >= tree.nodes[j].cost
            {
                continue;
            }
            if tree.is_ancestor(j, from) {
                continue;
            }
            let xj = tree.nodes[j].state.clone();
            if edge_free(steer, env, &x_from, &xj, opt, sample_dt, stats)? {
                tree.reparent(j, from, opt.cost, from);
                stats.rewires += 1;
            }
        }
    }
    if tree.goal_node.is_none() {
        stats.steer_calls += 1;
        let Ok(Some(opt)) =
            steer.optimal_cost_below(x_from.as_slice(), goal.as_slice(), T::lit(r), scratch)
        else {
            return Ok(());
        };
        if opt.cost.to_f64_lossy() < r
            && edge_free(steer, env, &x_from, goal, opt, sample_dt, stats)?
        {
            let g = tree.push(goal.clone(), from, opt.cost, from);
            tree.goal_node = Some(g);
        }
    }
    Ok(())
}

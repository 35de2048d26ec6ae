//! Optimal connections between two states.
//!
//! For `ẋ = Ax + Bu + c` and the cost `∫₀^τ (1 + uᵀRu) dt`, the cheapest way
//! to reach `x1` from `x0` in a *fixed* time `τ` costs
//!
//! ```text
//! c[τ] = τ + (x1 − x̄[τ])ᵀ G[τ]⁻¹ (x1 − x̄[τ])
//! ```
//!
//! where `G` is the weighted controllability Gramian and `x̄` the zero-input
//! drift. The optimal arrival time `τ*` minimizes `c[τ]` over `τ > 0`.
//!
//! Two interchangeable backends compute it:
//!
//! * [`Backend::ClosedForm`] (nilpotent `A` only): `G`, `x̄` and the
//!   numerator of `ċ[τ]` are polynomials in `τ`, so `τ*` is found among the
//!   positive real roots of a single polynomial.
//! * [`Backend::Rk4`] (any `A`): integrates the Lyapunov equation and the
//!   drift forward with a fixed step and stops once `τ` exceeds the best cost
//!   seen, which is valid because `c[τ] > τ`.

mod closed_form;
mod general;
mod graded;
pub(crate) mod linalg;
mod rk4;

use std::fmt;
use std::str::FromStr;

use nalgebra::{DMatrix, DVector};
use thiserror::Error;

use crate::dynamics::{DynamicsError, LtiSystem};
use crate::poly::RootError;
use crate::scalar::Real;

use closed_form::{ClosedForm, ClosedScratch};
use rk4::{Rk4, Rk4Scratch};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SteerError {
    #[error(transparent)]
    Dynamics(#[from] DynamicsError),
    #[error("Gramian is ill-conditioned at tau = {tau:e} (condition estimate {condition:e})")]
    IllConditioned { tau: f64, condition: f64 },
    #[error("no optimal arrival time found")]
    NoOptimum,
    #[error("invalid time {0}")]
    InvalidTime(f64),
    #[error("dimension mismatch: {0}")]
    Dimension(String),
    #[error("root finding failed: {0}")]
    Roots(#[from] RootError),
    #[error("sample step must be positive and finite, got {0}")]
    InvalidSampleStep(f64),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Backend {
    ClosedForm,
    Rk4,
}

impl fmt::Display for Backend {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Backend::ClosedForm => "closed_form",
            Backend::Rk4 => "rk4",
        })
    }
}

impl FromStr for Backend {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "closed" | "closed_form" | "closed-form" => Ok(Backend::ClosedForm),
            "rk4" => Ok(Backend::Rk4),
            other => Err(format!(
                "unknown backend '{other}' (expected closed or rk4)"
            )),
        }
    }
}

/// Numerical knobs for both backends.
#[derive(Debug, Clone, PartialEq)]
pub struct SteerOptions {
    /// Candidate arrival times at or below this are ignored.
    pub tau_min: f64,
    /// Gramian condition estimates above this are rejected.
    pub max_condition: f64,
    /// Eigenvalues with `|im| < root_imag_tol·(1 + |re|)` count as real.
    pub root_imag_tol: f64,
    /// RK4 scan step as a fraction of the probed cost upper bound.
    pub scan_fraction: f64,
    /// Ceiling on the RK4 scan and probe steps, for costs far above `τ*`.
    pub max_scan_step: f64,
    /// The RK4 rescan around the incumbent uses `step / refine_factor`.
    pub refine_factor: usize,
    /// Secant-polish the RK4 grid minimum on `ċ[τ] = 0`.
    pub polish: bool,
    /// First time of the geometric probe that bounds the RK4 scan.
    pub probe_start: f64,
    /// RK4 steps per probe doubling.
    pub probe_substeps: usize,
    pub max_probe_doublings: usize,
    /// Largest step used when integrating to a single time (Gramian, drift,
    /// trajectory reconstruction).
    pub rk4_step: f64,
    /// Fewest steps used when integrating to a single time.
    pub min_rk4_steps: usize,
}

impl Default for SteerOptions {
    fn default() -> Self {
        Self {
            tau_min: 1e-6,
            max_condition: 1e12,
            root_imag_tol: 1e-8,
            scan_fraction: 0.002,
            max_scan_step: 0.05,
            refine_factor: 10,
            polish: true,
            probe_start: 1e-3,
            probe_substeps: 8,
            max_probe_doublings: 64,
            rk4_step: 1e-3,
            min_rk4_steps: 200,
        }
    }
}

/// Optimal arrival time and cost, as returned by the hot path.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OptimalCost<T> {
    pub tau: T,
    pub cost: T,
}

/// `c[τ]`, `ċ[τ]` and `d[τ] = G[τ]⁻¹(x1 − x̄[τ])` at one arrival time.
#[derive(Debug, Clone, PartialEq)]
pub struct CostProfile<T: Real> {
    pub tau: T,
    pub cost: T,
    pub cost_derivative: T,
    pub d: DVector<T>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct OptimalConnection<T: Real> {
    pub x0: DVector<T>,
    pub x1: DVector<T>,
    pub tau_star: T,
    pub cost: T,
    pub d_star: DVector<T>,
    pub backend: Backend,
}

impl<T: Real> OptimalConnection<T> {
    /// `x0 = x1`, connected by the empty trajectory.
    pub fn is_identity(&self) -> bool {
        self.tau_star == T::zero()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrajectorySample<T: Real> {
    pub t: T,
    pub x: DVector<T>,
    pub u: DVector<T>,
}

/// States and controls sampled over `[0, tau]`, ascending in time.
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory<T: Real> {
    pub tau: T,
    pub samples: Vec<TrajectorySample<T>>,
}

impl<T: Real> Trajectory<T> {
    pub fn empty() -> Self {
        Self {
            tau: T::zero(),
            samples: Vec::new(),
        }
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    /// Appends `other`, shifting its times by this trajectory's duration.
    /// The first sample of `other` is dropped when it repeats the current
    /// last time.
    pub fn append(&mut self, other: &Trajectory<T>) {
        let offset = self.tau;
        let skip_first = !self.samples.is_empty();
        for (k, s) in other.samples.iter().enumerate() {
            if k == 0 && skip_first {
                continue;
            }
            self.samples.push(TrajectorySample {
                t: s.t + offset,
                x: s.x.clone(),
                u: s.u.clone(),
            });
        }
        self.tau = offset + other.tau;
    }
}

/// Reusable buffers for [`Steer::optimal_cost`]. One per thread.
#[derive(Debug, Clone)]
pub struct SteerScratch<T: Real> {
    closed: ClosedScratch<T>,
    rk4: Rk4Scratch<T>,
}

impl<T: Real> SteerScratch<T> {
    fn shape(&self) -> [usize; 6] {
        let [a, b, c, d, e] = self.closed.shape();
        [a, b, c, d, e, self.rk4.len()]
    }
}

/// Default trajectory sampling step: `τ/100`, clamped to `[1e-4, 0.05]`.
pub fn default_sample_dt<T: Real>(tau: T) -> T {
    let dt = tau / T::lit(100.0);
    dt.max(T::lit(1e-4)).min(T::lit(0.05))
}

/// Solver for one system with one backend.
///
/// Construction does the per-system work (polynomial precomputation for the
/// closed form), after which every query is a pure function of its inputs.
#[derive(Debug, Clone)]
pub struct Steer<T: Real> {
    sys: LtiSystem<T>,
    backend: Backend,
    opts: SteerOptions,
    closed: Option<ClosedForm<T>>,
    rk4: Rk4<T>,
    /// Buffer sizes of [`Self::scratch`]; a scratch of another shape is
    /// rebuilt before use.
    shape: [usize; 6],
}

impl<T: Real> Steer<T> {
    pub fn new(sys: LtiSystem<T>, backend: Backend) -> Result<Self, SteerError> {
        Self::with_options(sys, backend, SteerOptions::default())
    }

    /// Fails when the system is not controllable, or when the closed form is
    /// requested for a dynamics matrix that is not nilpotent.
    pub fn with_options(
        sys: LtiSystem<T>,
        backend: Backend,
        opts: SteerOptions,
    ) -> Result<Self, SteerError> {
        sys.ensure_controllable()?;
        let closed = match backend {
            Backend::ClosedForm => Some(ClosedForm::new(&sys)?),
            Backend::Rk4 => None,
        };
        let rk4 = Rk4::new(&sys);
        let mut steer = Self {
            sys,
            backend,
            opts,
            closed,
            rk4,
            shape: [0; 6],
        };
        steer.shape = steer.scratch().shape();
        Ok(steer)
    }

    /// Closed form when `A` is nilpotent, RK4 otherwise.
    pub fn auto(sys: LtiSystem<T>) -> Result<Self, SteerError> {
        let backend = if sys.nilpotency().is_nilpotent {
            Backend::ClosedForm
        } else {
            Backend::Rk4
        };
        Self::new(sys, backend)
    }

    pub fn system(&self) -> &LtiSystem<T> {
        &self.sys
    }

    pub fn backend(&self) -> Backend {
        self.backend
    }

    /// Whether the closed form runs on the exact graded kernel rather than
    /// the general adjugate expansion.
    pub fn is_graded(&self) -> bool {
        self.closed.as_ref().is_some_and(|cf| cf.is_graded())
    }

    pub fn options(&self) -> &SteerOptions {
        &self.opts
    }

    pub fn scratch(&self) -> SteerScratch<T> {
        let n = self.sys.state_dim();
        SteerScratch {
            closed: ClosedScratch::new(self.closed.as_ref()),
            rk4: Rk4Scratch::new(n),
        }
    }

    fn fit(&self, scratch: &mut SteerScratch<T>) {
        if scratch.shape() != self.shape {
            *scratch = self.scratch();
        }
    }

    fn check_state(&self, x: &[T], what: &str) -> Result<(), SteerError> {
        let n = self.sys.state_dim();
        if x.len() != n {
            return Err(SteerError::Dimension(format!(
                "{what} has length {}, expected {n}",
                x.len()
            )));
        }
        Ok(())
    }

    fn check_time(t: T) -> Result<(), SteerError> {
        if !t.is_finite_value() || t < T::zero() {
            return Err(SteerError::InvalidTime(t.to_f64_lossy()));
        }
        Ok(())
    }

    /// `G[t] = ∫₀ᵗ e^{As} B R⁻¹ Bᵀ e^{Aᵀs} ds`.
    pub fn gramian(&self, t: T) -> Result<DMatrix<T>, SteerError> {
        Self::check_time(t)?;
        Ok(match &self.closed {
            Some(cf) => cf.gramian(t),
            None => self.rk4.gramian_and_drift(t, None, &self.opts).0,
        })
    }

    /// Zero-input state `x̄[t] = e^{At} x0 + ∫₀ᵗ e^{As} c ds`.
    pub fn drift_state(&self, x0: &DVector<T>, t: T) -> Result<DVector<T>, SteerError> {
        self.check_state(x0.as_slice(), "x0")?;
        Self::check_time(t)?;
        Ok(match &self.closed {
            Some(cf) => cf.drift(x0.as_slice(), t),
            None => {
                self.rk4
                    .gramian_and_drift(t, Some(x0.as_slice()), &self.opts)
                    .1
            }
        })
    }

    /// Cost, cost derivative and `d` for the fixed arrival time `tau > 0`,
    /// from an explicit Cholesky solve against `G[tau]`.
    pub fn connection_cost(
        &self,
        x0: &DVector<T>,
        x1: &DVector<T>,
        tau: T,
    ) -> Result<CostProfile<T>, SteerError> {
        self.check_state(x0.as_slice(), "x0")?;
        self.check_state(x1.as_slice(), "x1")?;
        if !(tau > T::zero()) || !tau.is_finite_value() {
            return Err(SteerError::InvalidTime(tau.to_f64_lossy()));
        }
        let (g, xbar) = match &self.closed {
            Some(cf) => (cf.gramian(tau), cf.drift(x0.as_slice(), tau)),
            None => self
                .rk4
                .gramian_and_drift(tau, Some(x0.as_slice()), &self.opts),
        };
        self.profile_from(&g, &xbar, x1, tau)
    }

    fn profile_from(
        &self,
        g: &DMatrix<T>,
        xbar: &DVector<T>,
        x1: &DVector<T>,
        tau: T,
    ) -> Result<CostProfile<T>, SteerError> {
        let n = self.sys.state_dim();
        let mut l: Vec<T> = g.transpose().as_slice().to_vec();
        let condition = linalg::cholesky_in_place(&mut l, n).unwrap_or_else(T::infinity);
        if !(condition <= T::lit(self.opts.max_condition)) {
            return Err(SteerError::IllConditioned {
                tau: tau.to_f64_lossy(),
                condition: condition.to_f64_lossy(),
            });
        }
        let delta = x1 - xbar;
        let mut d = delta.as_slice().to_vec();
        linalg::cholesky_solve(&l, n, &mut d);
        let d = DVector::from_vec(d);
        let cost = tau + delta.dot(&d);
        let cost_derivative = self.cost_derivative(x1, &d);
        Ok(CostProfile {
            tau,
            cost,
            cost_derivative,
            d,
        })
    }

    /// `ċ = 1 − 2(A x1 + c)ᵀ d − dᵀ B R⁻¹ Bᵀ d`.
    fn cost_derivative(&self, x1: &DVector<T>, d: &DVector<T>) -> T {
        let drift = self.sys.a() * x1 + self.sys.c();
        let qd = self.sys.input_weight() * d;
        T::one() - T::lit(2.0) * drift.dot(d) - d.dot(&qd)
    }

    /// Optimal arrival time and cost without reconstructing the trajectory.
    /// This is the planner's inner loop; it allocates nothing beyond what
    /// the root finder needs.
    pub fn optimal_cost(
        &self,
        x0: &[T],
        x1: &[T],
        scratch: &mut SteerScratch<T>,
    ) -> Result<OptimalCost<T>, SteerError> {
        debug_assert_eq!(x0.len(), self.sys.state_dim());
        debug_assert_eq!(x1.len(), self.sys.state_dim());
        if x0 == x1 {
            return Ok(OptimalCost {
                tau: T::zero(),
                cost: T::zero(),
            });
        }
        self.fit(scratch);
        match &self.closed {
            Some(cf) => cf.optimal_cost(x0, x1, &self.opts, &mut scratch.closed),
            None => self
                .rk4
                .optimal_cost(x0, x1, T::infinity(), &self.opts, &mut scratch.rk4)?
                .ok_or(SteerError::NoOptimum),
        }
    }

    /// As [`Self::optimal_cost`], but may return `None` once `c* > bound`
    /// is certain. The closed form always solves exactly; RK4 stops
    /// integrating at `τ = bound`, which is what makes it affordable inside
    /// the planner.
    pub fn optimal_cost_below(
        &self,
        x0: &[T],
        x1: &[T],
        bound: T,
        scratch: &mut SteerScratch<T>,
    ) -> Result<Option<OptimalCost<T>>, SteerError> {
        if x0 == x1 {
            return Ok(Some(OptimalCost {
                tau: T::zero(),
                cost: T::zero(),
            }));
        }
        self.fit(scratch);
        match &self.closed {
            Some(cf) => cf
                .optimal_cost(x0, x1, &self.opts, &mut scratch.closed)
                .map(Some),
            None => self
                .rk4
                .optimal_cost(x0, x1, bound, &self.opts, &mut scratch.rk4),
        }
    }

    /// `τ*`, `c*` and `d[τ*]`.
    pub fn optimal_arrival_time(
        &self,
        x0: &DVector<T>,
        x1: &DVector<T>,
    ) -> Result<OptimalConnection<T>, SteerError> {
        self.check_state(x0.as_slice(), "x0")?;
        self.check_state(x1.as_slice(), "x1")?;
        let mut scratch = self.scratch();
        let opt = self.optimal_cost(x0.as_slice(), x1.as_slice(), &mut scratch)?;
        self.connection_from(x0, x1, opt)
    }

    /// Connection at an already solved `(τ*, c*)`; no root finding is repeated.
    pub fn connection_from(
        &self,
        x0: &DVector<T>,
        x1: &DVector<T>,
        opt: OptimalCost<T>,
    ) -> Result<OptimalConnection<T>, SteerError> {
        let n = self.sys.state_dim();
        let d_star = if opt.tau == T::zero() {
            DVector::zeros(n)
        } else {
            match &self.closed {
                Some(cf) => cf.costate(x0.as_slice(), x1.as_slice(), opt.tau),
                None => {
                    let (g, xbar) =
                        self.rk4
                            .gramian_and_drift(opt.tau, Some(x0.as_slice()), &self.opts);
                    self.profile_from(&g, &xbar, x1, opt.tau)?.d
                }
            }
        };
        Ok(OptimalConnection {
            x0: x0.clone(),
            x1: x1.clone(),
            tau_star: opt.tau,
            cost: opt.cost,
            d_star,
            backend: self.backend,
        })
    }

    /// Optimal trajectory from `x0` to `x1`, sampled every `sample_dt`
    /// (default [`default_sample_dt`] of `τ*`).
    pub fn connect(
        &self,
        x0: &DVector<T>,
        x1: &DVector<T>,
        sample_dt: Option<T>,
    ) -> Result<Trajectory<T>, SteerError> {
        let conn = self.optimal_arrival_time(x0, x1)?;
        self.trajectory(&conn, sample_dt)
    }

    /// Samples the trajectory of an already solved connection.
    pub fn trajectory(
        &self,
        conn: &OptimalConnection<T>,
        sample_dt: Option<T>,
    ) -> Result<Trajectory<T>, SteerError> {
        let mut samples = Vec::new();
        self.walk_samples(conn, sample_dt, |t, x, u| {
            samples.push(TrajectorySample {
                t,
                x: DVector::from_column_slice(x),
                u: DVector::from_column_slice(u),
            });
            true
        })?;
        Ok(Trajectory {
            tau: conn.tau_star,
            samples,
        })
    }

    /// Calls `visit(t, x, u)` on the uniform grid `t_k = kτ/K`,
    /// `K = ⌈τ/sample_dt⌉`, in ascending time, stopping early when `visit`
    /// returns `false`. Returns whether every sample was visited. Identity
    /// connections have no samples.
    pub fn walk_samples<F>(
        &self,
        conn: &OptimalConnection<T>,
        sample_dt: Option<T>,
        mut visit: F,
    ) -> Result<bool, SteerError>
    where
        F: FnMut(T, &[T], &[T]) -> bool,
    {
        if conn.is_identity() {
            return Ok(true);
        }
        let intervals = self.intervals(conn.tau_star, sample_dt)?;
        match &self.closed {
            Some(cf) => Ok(cf.walk(&self.sys, conn, intervals, &mut visit)),
            None => Ok(self
                .rk4
                .walk(&self.sys, conn, intervals, &self.opts, &mut visit)),
        }
    }

    /// Whether `pred(t, x, u)` holds at every sample of the grid used by
    /// [`Self::walk_samples`]. Samples are visited in an unspecified order
    /// (coarse to fine for the closed form), which finds violations early.
    pub fn all_samples<F>(
        &self,
        conn: &OptimalConnection<T>,
        sample_dt: Option<T>,
        mut pred: F,
    ) -> Result<bool, SteerError>
    where
        F: FnMut(T, &[T], &[T]) -> bool,
    {
        if conn.is_identity() {
            return Ok(true);
        }
        let intervals = self.intervals(conn.tau_star, sample_dt)?;
        match &self.closed {
            Some(cf) => Ok(cf.all_samples(&self.sys, conn, intervals, &mut pred)),
            None => Ok(self
                .rk4
                .walk(&self.sys, conn, intervals, &self.opts, &mut pred)),
        }
    }

    fn intervals(&self, tau: T, sample_dt: Option<T>) -> Result<usize, SteerError> {
        let dt = sample_dt.unwrap_or_else(|| default_sample_dt(tau));
        if !(dt > T::zero()) || !dt.is_finite_value() {
            return Err(SteerError::InvalidSampleStep(dt.to_f64_lossy()));
        }
        Ok((tau / dt).ceil().to_usize().unwrap_or(1).max(1))
    }
}

/// `u = R⁻¹ Bᵀ y` into `u`.
pub(crate) fn control_from_costate<T: Real>(sys: &LtiSystem<T>, y: &[T], u: &mut [T]) {
    let gain = sys.control_gain();
    for (i, ui) in u.iter_mut().enumerate() {
        let mut s = T::zero();
        for (j, yj) in y.iter().enumerate() {
            s += gain[(i, j)] * *yj;
        }
        *ui = s;
    }
}

//! Numerical backend for general `A`: classic fourth-order Runge–Kutta on
//!
//! ```text
//! Ġ = AG + GAᵀ + BR⁻¹Bᵀ,  G[0] = 0
//! x̄̇ = Ax̄ + c,            x̄[0] = x0
//! ```
//!
//! The optimal arrival time comes from a fixed-step scan of `c[τ]` that
//! stops once `τ` passes the best cost seen so far. The scan step is a
//! fraction of an upper bound on `c*` obtained by a cheap geometric probe.

use nalgebra::{DMatrix, DVector};

use super::linalg::{cholesky_in_place, cholesky_solve, dot};
use super::{control_from_costate, OptimalConnection, OptimalCost, SteerError, SteerOptions};
use crate::dynamics::LtiSystem;
use crate::scalar::Real;

#[derive(Debug, Clone)]
pub(crate) struct Rk4<T: Real> {
    n: usize,
    /// Nonzero entries `(i, j, A_ij)`.
    a: Vec<(usize, usize, T)>,
    /// `B R⁻¹ Bᵀ`, row-major.
    q: Vec<T>,
    c: Vec<T>,
}

/// `(G, x̄)` flattened: the first `n²` entries are `G` (row-major), the
/// last `n` are `x̄`.
type Flat<T> = Vec<T>;

#[derive(Debug, Clone)]
pub(crate) struct Rk4Scratch<T> {
    state: Flat<T>,
    prev: Flat<T>,
    left: Flat<T>,
    trial: Flat<T>,
    k: [Flat<T>; 4],
    stage: Flat<T>,
    ag: Vec<T>,
    chol: Vec<T>,
    rhs: Vec<T>,
    drift_x1: Vec<T>,
    qd: Vec<T>,
}

impl<T: Real> Rk4Scratch<T> {
    pub(crate) fn len(&self) -> usize {
        self.state.len()
    }

    pub(crate) fn new(n: usize) -> Self {
        let len = n * n + n;
        let v = || vec![T::zero(); len];
        Self {
            state: v(),
            prev: v(),
            left: v(),
            trial: v(),
            k: [v(), v(), v(), v()],
            stage: v(),
            ag: vec![T::zero(); n * n],
            chol: vec![T::zero(); n * n],
            rhs: vec![T::zero(); n],
            drift_x1: vec![T::zero(); n],
            qd: vec![T::zero(); n],
        }
    }
}

impl<T: Real> Rk4<T> {
    pub(crate) fn new(sys: &LtiSystem<T>) -> Self {
        let n = sys.state_dim();
        let mut a = Vec::new();
        for i in 0..n {
            for j in 0..n {
                let v = sys.a()[(i, j)];
                if v != T::zero() {
                    a.push((i, j, v));
                }
            }
        }
        let q = sys.input_weight().transpose().as_slice().to_vec();
        Self {
            n,
            a,
            q,
            c: sys.c().as_slice().to_vec(),
        }
    }

    fn derivative(&self, y: &[T], dy: &mut [T], ag: &mut [T]) {
        let n = self.n;
        let nn = n * n;
        ag.iter_mut().for_each(|v| *v = T::zero());
        let (dg, dx) = dy.split_at_mut(nn);
        dx.copy_from_slice(&self.c);
        for &(i, j, a) in &self.a {
            for k in 0..n {
                ag[i * n + k] += a * y[j * n + k];
            }
            dx[i] += a * y[nn + j];
        }
        for i in 0..n {
            for k in 0..n {
                dg[i * n + k] = ag[i * n + k] + ag[k * n + i] + self.q[i * n + k];
            }
        }
    }

    /// One RK4 step of size `h` on `y` (in place).
    fn step(&self, y: &mut [T], h: T, s: &mut Rk4Scratch<T>) {
        let half = h * T::lit(0.5);
        let [k1, k2, k3, k4] = &mut s.k;
        self.derivative(y, k1, &mut s.ag);
        for ((st, yi), ki) in s.stage.iter_mut().zip(y.iter()).zip(k1.iter()) {
            *st = *yi + half * *ki;
        }
        self.derivative(&s.stage, k2, &mut s.ag);
        for ((st, yi), ki) in s.stage.iter_mut().zip(y.iter()).zip(k2.iter()) {
            *st = *yi + half * *ki;
        }
        self.derivative(&s.stage, k3, &mut s.ag);
        for ((st, yi), ki) in s.stage.iter_mut().zip(y.iter()).zip(k3.iter()) {
            *st = *yi + h * *ki;
        }
        self.derivative(&s.stage, k4, &mut s.ag);
        let sixth = h / T::lit(6.0);
        for (i, yi) in y.iter_mut().enumerate() {
            *yi += sixth * (k1[i] + T::lit(2.0) * (k2[i] + k3[i]) + k4[i]);
        }
    }

    fn reset(&self, y: &mut [T], x0: &[T]) {
        let nn = self.n * self.n;
        y[..nn].iter_mut().for_each(|v| *v = T::zero());
        y[nn..].copy_from_slice(x0);
    }

    /// Solves for `d` at the state `y` (time `tau`), leaving it in
    /// `s.rhs`. Returns the cost, or `None` when `G` is too ill-conditioned.
    fn cost_at(&self, y: &[T], tau: T, x1: &[T], max_cond: T, s: &mut Rk4Scratch<T>) -> Option<T> {
        let n = self.n;
        let nn = n * n;
        s.chol.copy_from_slice(&y[..nn]);
        let cond = cholesky_in_place(&mut s.chol, n)?;
        if !(cond <= max_cond) {
            return None;
        }
        for i in 0..n {
            s.rhs[i] = x1[i] - y[nn + i];
        }
        // keep δ in qd while rhs becomes d
        s.qd.copy_from_slice(&s.rhs);
        cholesky_solve(&s.chol, n, &mut s.rhs);
        let quad = dot(&s.qd, &s.rhs);
        let cost = tau + quad.max(T::zero());
        cost.is_finite_value().then_some(cost)
    }

    /// `ċ` at the `d` left in `s.rhs` by [`Self::cost_at`].
    fn cost_derivative(&self, s: &mut Rk4Scratch<T>) -> T {
        let n = self.n;
        for i in 0..n {
            s.qd[i] = dot(&self.q[i * n..(i + 1) * n], &s.rhs);
        }
        T::one() - T::lit(2.0) * dot(&s.drift_x1, &s.rhs) - dot(&s.rhs, &s.qd)
    }

    /// `None` when `c* > bound` is certain: since `c[τ] > τ`, no arrival
    /// time beyond `bound` can cost less than `bound`, so neither the probe
    /// nor the scan integrates past it.
    pub(crate) fn optimal_cost(
        &self,
        x0: &[T],
        x1: &[T],
        bound: T,
        opts: &SteerOptions,
        s: &mut Rk4Scratch<T>,
    ) -> Result<Option<OptimalCost<T>>, SteerError> {
        let max_cond = T::lit(opts.max_condition);
        let tau_min = T::lit(opts.tau_min);

        // A x1 + c, for ċ
        s.drift_x1.copy_from_slice(&self.c);
        for &(i, j, a) in &self.a {
            s.drift_x1[i] += a * x1[j];
        }

        // geometric probe for an upper bound on c*
        let mut y = std::mem::take(&mut s.state);
        self.reset(&mut y, x0);
        let mut t = T::zero();
        let mut upper: Option<OptimalCost<T>> = None;
        let mut target = T::lit(opts.probe_start);
        let max_step = T::lit(opts.max_scan_step);
        for _ in 0..opts.max_probe_doublings {
            let by_step = ((target - t) / max_step)
                .ceil()
                .to_usize()
                .unwrap_or(usize::MAX);
            let substeps = opts.probe_substeps.max(by_step).max(1);
            let h = (target - t) / T::from_usize_lossy(substeps);
            for _ in 0..substeps {
                self.step(&mut y, h, s);
            }
            t = target;
            if let Some(cost) = self.cost_at(&y, t, x1, max_cond, s) {
                if upper.is_none_or(|u| cost < u.cost) {
                    upper = Some(OptimalCost { tau: t, cost });
                }
            }
            if upper.is_some_and(|u| t >= u.cost) || t >= bound {
                break;
            }
            target *= T::lit(2.0);
        }
        let limit = upper.map_or(bound, |u| u.cost.min(bound));
        if !limit.is_finite_value() {
            s.state = y;
            return Err(SteerError::NoOptimum);
        }

        // fixed-step scan until τ passes the incumbent cost
        let h = (T::lit(opts.scan_fraction) * limit).min(max_step);
        self.reset(&mut y, x0);
        let mut best: Option<OptimalCost<T>> = None;
        let mut k = 0usize;
        loop {
            s.prev.copy_from_slice(&y);
            self.step(&mut y, h, s);
            k += 1;
            let tau = h * T::from_usize_lossy(k);
            if tau > tau_min {
                if let Some(cost) = self.cost_at(&y, tau, x1, max_cond, s) {
                    if best.is_none_or(|b| cost < b.cost) {
                        best = Some(OptimalCost { tau, cost });
                        s.left.copy_from_slice(&s.prev);
                    }
                }
            }
            if tau >= best.map_or(limit, |b| b.cost.min(limit)) {
                break;
            }
        }
        let Some(coarse) = best else {
            s.state = y;
            return Ok(upper.filter(|u| u.cost <= bound));
        };

        // rescan [τ − h, τ + h] at h / refine_factor
        let factor = opts.refine_factor.max(1);
        let hf = h / T::from_usize_lossy(factor);
        let left_t = coarse.tau - h;
        y.copy_from_slice(&s.left);
        let mut fine = coarse;
        let mut fine_index = None;
        for j in 1..=(2 * factor) {
            s.prev.copy_from_slice(&y);
            self.step(&mut y, hf, s);
            let tau = left_t + hf * T::from_usize_lossy(j);
            if tau <= tau_min {
                continue;
            }
            if let Some(cost) = self.cost_at(&y, tau, x1, max_cond, s) {
                if cost < fine.cost {
                    fine = OptimalCost { tau, cost };
                    fine_index = Some(j);
                    s.trial.copy_from_slice(&s.prev);
                }
            }
        }
        let result = match (opts.polish, fine_index) {
            (true, Some(j)) if j < 2 * factor => {
                // bracket [τ − hf, τ + hf] from the saved left state
                s.left.copy_from_slice(&s.trial);
                let a = fine.tau - hf;
                self.polish(a, hf * T::lit(2.0), x1, max_cond, s)
                    .filter(|p| p.cost <= fine.cost)
                    .unwrap_or(fine)
            }
            _ => fine,
        };
        s.state = y;
        Ok((result.cost <= bound).then_some(result))
    }

    /// Cost and `ċ` at `a + offset`, one step from the state in `s.left`.
    fn probe_from_left(
        &self,
        a: T,
        offset: T,
        x1: &[T],
        max_cond: T,
        s: &mut Rk4Scratch<T>,
    ) -> Option<(T, T)> {
        let mut y = std::mem::take(&mut s.trial);
        y.copy_from_slice(&s.left);
        if offset != T::zero() {
            self.step(&mut y, offset, s);
        }
        let out = self
            .cost_at(&y, a + offset, x1, max_cond, s)
            .map(|c| (c, self.cost_derivative(s)));
        s.trial = y;
        out
    }

    /// Illinois iteration on `ċ = 0` inside `[a, a + width]`.
    fn polish(
        &self,
        a: T,
        width: T,
        x1: &[T],
        max_cond: T,
        s: &mut Rk4Scratch<T>,
    ) -> Option<OptimalCost<T>> {
        let (_, fa) = self.probe_from_left(a, T::zero(), x1, max_cond, s)?;
        let (_, fb) = self.probe_from_left(a, width, x1, max_cond, s)?;
        if !(fa < T::zero() && fb > T::zero()) {
            return None;
        }
        let (mut lo, mut hi) = (T::zero(), width);
        let (mut flo, mut fhi) = (fa, fb);
        let mut side = 0i8;
        let tol = T::lit(1e-13) * (T::one() + a + width);
        let mut off = lo;
        for _ in 0..60 {
            off = (lo * fhi - hi * flo) / (fhi - flo);
            if !(off > lo && off < hi) {
                off = (lo + hi) * T::lit(0.5);
            }
            let (_, f) = self.probe_from_left(a, off, x1, max_cond, s)?;
            if f == T::zero() {
                break;
            }
            if f < T::zero() {
                lo = off;
                flo = f;
                if side == -1 {
                    fhi *= T::lit(0.5);
                }
                side = -1;
            } else {
                hi = off;
                fhi = f;
                if side == 1 {
                    flo *= T::lit(0.5);
                }
                side = 1;
            }
            if hi - lo < tol {
                break;
            }
        }
        let (cost, _) = self.probe_from_left(a, off, x1, max_cond, s)?;
        Some(OptimalCost { tau: a + off, cost })
    }

    fn steps_for(&self, t: T, opts: &SteerOptions) -> usize {
        let by_step = (t / T::lit(opts.rk4_step))
            .ceil()
            .to_usize()
            .unwrap_or(usize::MAX);
        by_step.max(opts.min_rk4_steps).max(1)
    }

    /// `G[t]` and, when `x0` is given, `x̄[t]` (zero otherwise).
    pub(crate) fn gramian_and_drift(
        &self,
        t: T,
        x0: Option<&[T]>,
        opts: &SteerOptions,
    ) -> (DMatrix<T>, DVector<T>) {
        let n = self.n;
        let mut s = Rk4Scratch::new(n);
        let mut y = vec![T::zero(); n * n + n];
        if let Some(x0) = x0 {
            y[n * n..].copy_from_slice(x0);
        }
        if t > T::zero() {
            let steps = self.steps_for(t, opts);
            let h = t / T::from_usize_lossy(steps);
            for _ in 0..steps {
                self.step(&mut y, h, &mut s);
            }
        }
        let g = DMatrix::from_row_slice(n, n, &y[..n * n]);
        let g = (&g + g.transpose()) * T::lit(0.5);
        (g, DVector::from_column_slice(&y[n * n..]))
    }

    /// Integrates `ẋ = Ax + Qy + c`, `ẏ = −Aᵀy` backward from
    /// `(x1, d*)` at `τ*`, visiting the uniform grid in ascending time.
    pub(crate) fn walk<F>(
        &self,
        sys: &LtiSystem<T>,
        conn: &OptimalConnection<T>,
        intervals: usize,
        opts: &SteerOptions,
        visit: &mut F,
    ) -> bool
    where
        F: FnMut(T, &[T], &[T]) -> bool,
    {
        let n = self.n;
        let tau = conn.tau_star;
        let substeps = self.steps_for(tau, opts).div_ceil(intervals).max(1);
        let h = -(tau / T::from_usize_lossy(intervals * substeps));
        let mut states = vec![T::zero(); (intervals + 1) * 2 * n];
        let mut y = vec![T::zero(); 2 * n];
        y[..n].copy_from_slice(conn.x1.as_slice());
        y[n..].copy_from_slice(conn.d_star.as_slice());
        states[intervals * 2 * n..].copy_from_slice(&y);
        let mut k = [
            vec![T::zero(); 2 * n],
            vec![T::zero(); 2 * n],
            vec![T::zero(); 2 * n],
            vec![T::zero(); 2 * n],
        ];
        let mut stage = vec![T::zero(); 2 * n];
        for idx in (0..intervals).rev() {
            for _ in 0..substeps {
                self.composite_step(&mut y, h, &mut k, &mut stage);
            }
            states[idx * 2 * n..(idx + 1) * 2 * n].copy_from_slice(&y);
        }
        let mut u = vec![T::zero(); sys.control_dim()];
        for idx in 0..=intervals {
            let t = if idx == intervals {
                tau
            } else {
                tau * T::from_usize_lossy(idx) / T::from_usize_lossy(intervals)
            };
            let st = &states[idx * 2 * n..(idx + 1) * 2 * n];
            control_from_costate(sys, &st[n..], &mut u);
            if !visit(t, &st[..n], &u) {
                return false;
            }
        }
        true
    }

    fn composite_derivative(&self, y: &[T], dy: &mut [T]) {
        let n = self.n;
        let (x, costate) = y.split_at(n);
        let (dx, dcostate) = dy.split_at_mut(n);
        dx.copy_from_slice(&self.c);
        dcostate.iter_mut().for_each(|v| *v = T::zero());
        for &(i, j, a) in &self.a {
            dx[i] += a * x[j];
            dcostate[j] -= a * costate[i];
        }
        for i in 0..n {
            dx[i] += dot(&self.q[i * n..(i + 1) * n], costate);
        }
    }

    fn composite_step(&self, y: &mut [T], h: T, k: &mut [Vec<T>; 4], stage: &mut [T]) {
        let half = h * T::lit(0.5);
        let [k1, k2, k3, k4] = k;
        self.composite_derivative(y, k1);
        for i in 0..y.len() {
            stage[i] = y[i] + half * k1[i];
        }
        self.composite_derivative(stage, k2);
        for i in 0..y.len() {
            stage[i] = y[i] + half * k2[i];
        }
        self.composite_derivative(stage, k3);
        for i in 0..y.len() {
            stage[i] = y[i] + h * k3[i];
        }
        self.composite_derivative(stage, k4);
        let sixth = h / T::lit(6.0);
        for i in 0..y.len() {
            y[i] += sixth * (k1[i] + T::lit(2.0) * (k2[i] + k3[i]) + k4[i]);
        }
    }
}

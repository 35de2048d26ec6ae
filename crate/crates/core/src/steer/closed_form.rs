//! Closed-form backend for nilpotent `A`.
//!
//! With `E_k = A^k/k!` the exponential is the finite sum `Σ E_k t^k`, so the
//! Gramian and the drift are polynomials in `t` and `ċ[τ]` is a rational
//! function. A query expands the numerator of `ċ` for its endpoints, takes
//! the positive real roots as candidate arrival times and keeps the one of
//! least cost. Graded systems use the exact kernel in [`super::graded`];
//! anything else falls back to [`super::general`].

use nalgebra::{DMatrix, DVector};

use super::general::{General, GeneralScratch};
use super::graded::{Graded, GradedScratch};
use super::{control_from_costate, OptimalConnection, OptimalCost, SteerError, SteerOptions};
use crate::dynamics::exp_coefficients;
use crate::dynamics::LtiSystem;
use crate::poly::{companion_eigenvalues, horner, sign_change_roots, IsolationScratch};
use crate::scalar::Real;

#[derive(Debug, Clone)]
enum Kernel<T: Real> {
    Graded(Graded<T>),
    General(General<T>),
}

#[derive(Debug, Clone)]
pub(crate) struct ClosedForm<T: Real> {
    n: usize,
    /// `E_k = A^k/k!`
    exp: Vec<DMatrix<T>>,
    /// Gramian coefficients `G_p = Σ_{k+l+1=p} E_k Q E_lᵀ / p`.
    gram: Vec<DMatrix<T>>,
    /// Drift offset coefficients `ψ_p = E_{p−1} c / p`.
    psi: Vec<DVector<T>>,
    kernel: Kernel<T>,
    /// `M^k/k!` for the composite matrix `[[A, BR⁻¹Bᵀ], [0, −Aᵀ]]`.
    composite: Vec<DMatrix<T>>,
}

#[derive(Debug, Clone)]
pub(crate) struct ClosedScratch<T> {
    graded: GradedScratch<T>,
    general: GeneralScratch<T>,
    roots: IsolationScratch<T>,
}

impl<T: Real> ClosedScratch<T> {
    pub(crate) fn shape(&self) -> [usize; 5] {
        let [a, b] = self.graded.shape();
        let [c, d, e] = self.general.shape();
        [a, b, c, d, e]
    }

    pub(crate) fn new(cf: Option<&ClosedForm<T>>) -> Self {
        match cf.map(|cf| &cf.kernel) {
            Some(Kernel::Graded(g)) => Self {
                graded: g.scratch(),
                general: GeneralScratch::default(),
                roots: IsolationScratch::default(),
            },
            Some(Kernel::General(g)) => Self {
                graded: GradedScratch::default(),
                general: g.scratch(),
                roots: IsolationScratch::default(),
            },
            None => Self {
                graded: GradedScratch::default(),
                general: GeneralScratch::default(),
                roots: IsolationScratch::default(),
            },
        }
    }
}

impl<T: Real> ClosedForm<T> {
    pub(crate) fn new(sys: &LtiSystem<T>) -> Result<Self, SteerError> {
        let n = sys.state_dim();
        let exp = exp_coefficients(sys.a())?;
        let index = exp.len();
        let q = sys.input_weight();

        let mut gram = vec![DMatrix::zeros(n, n); 2 * index];
        for k in 0..index {
            let eq = &exp[k] * q;
            for l in 0..index {
                let p = k + l + 1;
                gram[p] += &eq * exp[l].transpose() / T::from_usize_lossy(p);
            }
        }
        for g in &mut gram {
            *g = (&*g + g.transpose()) * T::lit(0.5);
        }
        let mut psi = vec![DVector::zeros(n); index + 1];
        for p in 1..=index {
            psi[p] = &exp[p - 1] * sys.c() / T::from_usize_lossy(p);
        }

        let kernel = match Graded::new(sys) {
            Some(graded) => Kernel::Graded(graded?),
            None => Kernel::General(General::new(sys, &exp, &gram, &psi)?),
        };

        let mut m = DMatrix::zeros(2 * n, 2 * n);
        m.view_mut((0, 0), (n, n)).copy_from(sys.a());
        m.view_mut((0, n), (n, n)).copy_from(q);
        m.view_mut((n, n), (n, n))
            .copy_from(&(-sys.a().transpose()));
        let composite = exp_coefficients(&m)?;

        Ok(Self {
            n,
            exp,
            gram,
            psi,
            kernel,
            composite,
        })
    }

    /// Whether the exact graded kernel is in use.
    pub(crate) fn is_graded(&self) -> bool {
        matches!(self.kernel, Kernel::Graded(_))
    }

    pub(crate) fn gramian(&self, t: T) -> DMatrix<T> {
        crate::dynamics::eval_matrix_poly(&self.gram, t)
    }

    pub(crate) fn drift(&self, x0: &[T], t: T) -> DVector<T> {
        let x0 = DVector::from_column_slice(x0);
        let mut out = DVector::zeros(self.n);
        for k in (0..self.exp.len()).rev() {
            out = out * t + &self.exp[k] * &x0;
        }
        let mut offset = DVector::zeros(self.n);
        for p in (0..self.psi.len()).rev() {
            offset = offset * t + &self.psi[p];
        }
        out + offset
    }

    /// `d[τ] = G[τ]⁻¹(x1 − x̄[τ])`.
    pub(crate) fn costate(&self, x0: &[T], x1: &[T], tau: T) -> DVector<T> {
        match &self.kernel {
            Kernel::Graded(g) => g.costate(x0, x1, tau),
            Kernel::General(g) => {
                let delta = DVector::from_column_slice(x1) - self.drift(x0, tau);
                g.costate(&delta, tau)
            }
        }
    }

    pub(crate) fn optimal_cost(
        &self,
        x0: &[T],
        x1: &[T],
        opts: &SteerOptions,
        scratch: &mut ClosedScratch<T>,
    ) -> Result<OptimalCost<T>, SteerError> {
        match &self.kernel {
            Kernel::Graded(g) => {
                let s = &mut scratch.graded;
                g.expand(x0, x1, s);
                let f = &s.f;
                select_root(&s.p, opts, &mut scratch.roots, |tau| g.cost_at(f, tau))
            }
            Kernel::General(g) => {
                let s = &mut scratch.general;
                g.expand(x0, x1, s);
                let numer = &s.numer;
                select_root(&s.p, opts, &mut scratch.roots, |tau| g.cost_at(numer, tau))
            }
        }
    }

    /// Time-polynomial coefficients of `[x; y](τ + s)` in `s`.
    fn trajectory_coefficients(&self, sys: &LtiSystem<T>, x1: &[T], d: &[T]) -> Vec<DVector<T>> {
        let n = self.n;
        let mut start = DVector::zeros(2 * n);
        start.rows_mut(0, n).copy_from_slice(x1);
        start.rows_mut(n, n).copy_from_slice(d);
        let mut forcing = DVector::zeros(2 * n);
        forcing.rows_mut(0, n).copy_from(sys.c());
        let len = self.composite.len() + 1;
        let mut out = vec![DVector::zeros(2 * n); len];
        for (k, f) in self.composite.iter().enumerate() {
            out[k] += f * &start;
            out[k + 1] += f * &forcing / T::from_usize_lossy(k + 1);
        }
        out
    }

    pub(crate) fn walk<F>(
        &self,
        sys: &LtiSystem<T>,
        conn: &OptimalConnection<T>,
        intervals: usize,
        visit: &mut F,
    ) -> bool
    where
        F: FnMut(T, &[T], &[T]) -> bool,
    {
        self.visit_samples(sys, conn, intervals, 0..=intervals, visit)
    }

    /// Same samples as [`Self::walk`], visited coarse to fine so that a
    /// failing predicate is usually met after a few evaluations.
    pub(crate) fn all_samples<F>(
        &self,
        sys: &LtiSystem<T>,
        conn: &OptimalConnection<T>,
        intervals: usize,
        visit: &mut F,
    ) -> bool
    where
        F: FnMut(T, &[T], &[T]) -> bool,
    {
        self.visit_samples(sys, conn, intervals, coarse_to_fine(intervals), visit)
    }

    fn visit_samples<I, F>(
        &self,
        sys: &LtiSystem<T>,
        conn: &OptimalConnection<T>,
        intervals: usize,
        order: I,
        visit: &mut F,
    ) -> bool
    where
        I: IntoIterator<Item = usize>,
        F: FnMut(T, &[T], &[T]) -> bool,
    {
        let n = self.n;
        let coeffs = self.trajectory_coefficients(sys, conn.x1.as_slice(), conn.d_star.as_slice());
        let tau = conn.tau_star;
        let mut state = vec![T::zero(); 2 * n];
        let mut u = vec![T::zero(); sys.control_dim()];
        for k in order {
            let t = if k == intervals {
                tau
            } else {
                tau * T::from_usize_lossy(k) / T::from_usize_lossy(intervals)
            };
            let s = t - tau;
            state.iter_mut().for_each(|v| *v = T::zero());
            for c in coeffs.iter().rev() {
                for (v, ci) in state.iter_mut().zip(c.iter()) {
                    *v = *v * s + *ci;
                }
            }
            control_from_costate(sys, &state[n..], &mut u);
            if !visit(t, &state[..n], &u) {
                return false;
            }
        }
        true
    }
}

/// `0..=k` with both ends first, then midpoints of ever finer strides.
fn coarse_to_fine(k: usize) -> impl Iterator<Item = usize> {
    let top = k.next_power_of_two().max(1);
    let ends = std::iter::once(k).chain((k > 0).then_some(0));
    let strides = std::iter::successors(Some(top), |s| (*s > 1).then_some(*s / 2));
    let inner = strides.flat_map(move |s| {
        (s / 2..k)
            .step_by(s.max(1))
            .filter(move |&i| s > 1 && i > 0)
    });
    ends.chain(inner)
}

/// Least-cost local minimum of `c` among the roots of `p`; ties go to the
/// earlier time.
///
/// `p` has the sign of `ċ` on `τ > 0`, so minima are the roots where `p`
/// crosses from negative to positive. When isolation finds none above
/// `tau_min` (all crossings below it, or a tangency blurred by rounding),
/// every near-real companion eigenvalue is tried instead.
fn select_root<T: Real, F>(
    p: &[T],
    opts: &SteerOptions,
    roots: &mut IsolationScratch<T>,
    cost: F,
) -> Result<OptimalCost<T>, SteerError>
where
    F: Fn(T) -> Option<T>,
{
    let lo = p.iter().position(|c| *c != T::zero());
    let hi = p.iter().rposition(|c| *c != T::zero());
    let (Some(lo), Some(hi)) = (lo, hi) else {
        return Err(SteerError::NoOptimum);
    };
    let reduced = &p[lo..=hi];
    let tau_min = T::lit(opts.tau_min);
    let mut best: Option<OptimalCost<T>> = None;
    let consider = |tau: T, best: &mut Option<OptimalCost<T>>| {
        if !(tau > tau_min) {
            return;
        }
        if let Some(c) = cost(tau) {
            let better = match best {
                None => true,
                Some(b) => c < b.cost || (c == b.cost && tau < b.tau),
            };
            if better {
                *best = Some(OptimalCost { tau, cost: c });
            }
        }
    };
    sign_change_roots(reduced, tau_min, roots)?;
    for tau in roots.rising_roots() {
        consider(tau, &mut best);
    }
    if best.is_some() {
        return best.ok_or(SteerError::NoOptimum);
    }

    let eig = companion_eigenvalues(reduced)?;
    let imag_tol = T::lit(opts.root_imag_tol);
    for z in &eig {
        if z.re > tau_min && z.im.abs() < imag_tol * (T::one() + z.re.abs()) {
            consider(newton_polish(reduced, z.re), &mut best);
        }
    }
    if best.is_none() {
        // a double root can split into a complex pair with a visible
        // imaginary part; fall back to real parts of all candidates
        for z in &eig {
            if z.re > tau_min {
                consider(newton_polish(reduced, z.re), &mut best);
            }
        }
    }
    best.ok_or(SteerError::NoOptimum)
}

/// A few Newton steps on `p`, kept only while the residual shrinks.
fn newton_polish<T: Real>(p: &[T], mut tau: T) -> T {
    let (mut f, _) = crate::poly::horner_with_derivative(p, tau);
    for _ in 0..3 {
        let (_, df) = crate::poly::horner_with_derivative(p, tau);
        if df == T::zero() || f == T::zero() {
            break;
        }
        let next = tau - f / df;
        if !next.is_finite_value() {
            break;
        }
        let f_next = horner(p, next);
        if f_next.abs() < f.abs() {
            tau = next;
            f = f_next;
        } else {
            break;
        }
    }
    tau
}

#[cfg(test)]
mod tests {
    use super::coarse_to_fine;

    #[test]
    fn coarse_to_fine_visits_every_index_once() {
        for k in 0..70 {
            let mut seen: Vec<usize> = coarse_to_fine(k).collect();
            assert_eq!(seen[0], k);
            seen.sort_unstable();
            assert_eq!(seen, (0..=k).collect::<Vec<_>>(), "k = {k}");
        }
        assert_eq!(
            coarse_to_fine(8).collect::<Vec<_>>(),
            vec![8, 0, 4, 2, 6, 1, 3, 5, 7]
        );
    }
}

//! Exact kernel for graded systems.
//!
//! A system is graded when its states split into levels `1..=L` such that
//! `B` only drives level 1 and `A` only maps level `k` into level `k+1`.
//! Every nilpotent system whose Krylov spaces `span(A^k B)` are independent
//! is graded in the basis built from them. In graded coordinates
//!
//! ```text
//! G[τ] = τ⁻¹ S G̃ S,   S = diag(τ^{l_i}),   G̃ = G[1],
//! ```
//!
//! so `G⁻¹ = τ S⁻¹ G̃⁻¹ S⁻¹` holds exactly and the cost is the Laurent
//! polynomial `c[τ] = τ + τ yᵀ G̃⁻¹ y` with `y = S⁻¹(x1 − x̄[τ])`. Powers of
//! `y` run from `τ^{−L}` to `τ⁰`, so `τ^{2L}·ċ` is a polynomial of degree
//! `2L` whose coefficients carry no cancellation between degrees.

use nalgebra::{DMatrix, DVector};

use crate::dynamics::{exp_coefficients, DynamicsError, LtiSystem};
use crate::scalar::Real;

use super::SteerError;

type Sparse<T> = Vec<(u32, u32, T)>;

fn sparse<T: Real>(m: &DMatrix<T>) -> Sparse<T> {
    let mut out = Vec::new();
    for j in 0..m.ncols() {
        for i in 0..m.nrows() {
            if m[(i, j)] != T::zero() {
                out.push((i as u32, j as u32, m[(i, j)]));
            }
        }
    }
    out
}

#[inline]
fn sparse_apply<T: Real>(m: &Sparse<T>, x: &[T], out: &mut [T]) {
    out.iter_mut().for_each(|v| *v = T::zero());
    for &(i, j, v) in m {
        out[i as usize] += v * x[j as usize];
    }
}

/// Level assignment of the given coordinates, if they are already graded.
fn coordinate_levels<T: Real>(a: &DMatrix<T>, b: &DMatrix<T>) -> Option<Vec<usize>> {
    let n = a.nrows();
    let mut level = vec![0usize; n];
    for i in 0..n {
        if b.row(i).iter().any(|v| *v != T::zero()) {
            level[i] = 1;
        }
    }
    loop {
        let mut changed = false;
        for i in 0..n {
            for j in 0..n {
                if a[(i, j)] == T::zero() {
                    continue;
                }
                if level[j] > 0 && level[i] == 0 {
                    level[i] = level[j] + 1;
                    changed = true;
                } else if level[i] > 1 && level[j] == 0 {
                    level[j] = level[i] - 1;
                    changed = true;
                }
            }
        }
        if !changed {
            break;
        }
    }
    if level.contains(&0) {
        return None;
    }
    let consistent = (0..n).all(|i| {
        (0..n).all(|j| a[(i, j)] == T::zero() || level[i] == level[j] + 1)
            && (level[i] == 1 || b.row(i).iter().all(|v| *v == T::zero()))
    });
    consistent.then_some(level)
}

/// Basis `V = [A^{l−1} B α]` built level by level from the Krylov blocks.
/// Directions are chosen by SVD of the part of each block not yet spanned.
fn krylov_basis<T: Real>(a: &DMatrix<T>, b: &DMatrix<T>) -> Option<(DMatrix<T>, Vec<usize>)> {
    let n = a.nrows();
    let tol = T::eps().sqrt();
    let mut basis: Vec<DVector<T>> = Vec::new();
    let mut ortho: Vec<DVector<T>> = Vec::new();
    let mut levels = Vec::new();
    let mut block = b.clone();
    for level in 1..=n {
        if basis.len() == n {
            break;
        }
        let scale = block.norm();
        if !(scale > T::zero()) {
            break;
        }
        let mut resid = block.clone();
        for _ in 0..2 {
            for q in &ortho {
                let proj = q.transpose() * &resid;
                resid -= q * proj;
            }
        }
        let svd = resid.clone().svd(false, true);
        let v_t = svd.v_t?;
        let mut order: Vec<usize> = (0..svd.singular_values.len()).collect();
        order.sort_by(|&i, &j| {
            svd.singular_values[j]
                .partial_cmp(&svd.singular_values[i])
                .unwrap_or(std::cmp::Ordering::Equal)
        });
        for idx in order {
            if basis.len() == n || !(svd.singular_values[idx] > tol * scale) {
                break;
            }
            let alpha = v_t.row(idx).transpose();
            let mut r = &resid * &alpha;
            for q in &ortho {
                let proj = q.dot(&r);
                r -= q * proj;
            }
            let norm = r.norm();
            if !(norm > tol * scale) {
                continue;
            }
            basis.push(&block * &alpha);
            ortho.push(r / norm);
            levels.push(level);
        }
        block = a * block;
    }
    (basis.len() == n).then(|| (DMatrix::from_columns(&basis), levels))
}

/// Zeroes entries that break the grading, or rejects the basis if any of
/// them is more than rounding noise.
fn enforce_grading<T: Real>(a: &mut DMatrix<T>, b: &mut DMatrix<T>, levels: &[usize]) -> bool {
    let tol = T::eps().sqrt();
    let a_max = a.amax();
    let b_max = b.amax();
    let n = levels.len();
    for i in 0..n {
        for j in 0..n {
            if levels[i] != levels[j] + 1 {
                if a[(i, j)].abs() > tol * a_max {
                    return false;
                }
                a[(i, j)] = T::zero();
            }
        }
        if levels[i] != 1 {
            for k in 0..b.ncols() {
                if b[(i, k)].abs() > tol * b_max {
                    return false;
                }
                b[(i, k)] = T::zero();
            }
        }
    }
    true
}

#[derive(Debug, Clone)]
pub(crate) struct Graded<T: Real> {
    n: usize,
    levels: Vec<usize>,
    top: usize,
    /// `V⁻¹` when the graded basis is not the given one.
    to_graded: Option<Sparse<T>>,
    /// `V⁻ᵀ`, paired with `to_graded`.
    costate_back: Option<DMatrix<T>>,
    /// `E'_k`, `k ≥ 1`, in graded coordinates.
    shifts: Vec<Sparse<T>>,
    /// Contribution of the drift offset to `y`, laid out `[q·n + i]`.
    y_offset: Vec<T>,
    /// `G̃⁻¹`
    h: Sparse<T>,
}

#[derive(Debug, Clone)]
pub(crate) struct GradedScratch<T> {
    x0: Vec<T>,
    dx: Vec<T>,
    tmp: Vec<T>,
    y: Vec<T>,
    hy: Vec<T>,
    /// Coefficients of `F(τ) = τ^{2L−1}(c[τ] − τ)`.
    pub(crate) f: Vec<T>,
    /// Coefficients of `τ^{2L}·ċ[τ]`.
    pub(crate) p: Vec<T>,
}

impl<T> GradedScratch<T> {
    pub(crate) fn shape(&self) -> [usize; 2] {
        [self.y.len(), self.p.len()]
    }
}

impl<T> Default for GradedScratch<T> {
    fn default() -> Self {
        Self {
            x0: Vec::new(),
            dx: Vec::new(),
            tmp: Vec::new(),
            y: Vec::new(),
            hy: Vec::new(),
            f: Vec::new(),
            p: Vec::new(),
        }
    }
}

impl<T: Real> Graded<T> {
    /// `None` when the system admits no grading.
    pub(crate) fn new(sys: &LtiSystem<T>) -> Option<Result<Self, SteerError>> {
        let n = sys.state_dim();
        let (mut a, mut b, c, levels, basis) = match coordinate_levels(sys.a(), sys.b()) {
            Some(levels) => (
                sys.a().clone(),
                sys.b().clone(),
                sys.c().clone(),
                levels,
                None,
            ),
            None => {
                let (v, levels) = krylov_basis(sys.a(), sys.b())?;
                let v_inv = v.clone().try_inverse()?;
                let a = &v_inv * sys.a() * &v;
                let b = &v_inv * sys.b();
                let c = &v_inv * sys.c();
                (a, b, c, levels, Some((v, v_inv)))
            }
        };
        if !enforce_grading(&mut a, &mut b, &levels) {
            return None;
        }
        Some(Self::build(sys, n, a, b, c, levels, basis))
    }

    fn build(
        sys: &LtiSystem<T>,
        n: usize,
        a: DMatrix<T>,
        b: DMatrix<T>,
        c: DVector<T>,
        levels: Vec<usize>,
        basis: Option<(DMatrix<T>, DMatrix<T>)>,
    ) -> Result<Self, SteerError> {
        let top = levels.iter().copied().max().unwrap_or(1);
        let exp = exp_coefficients(&a)?;
        let q = &b * sys.r_inv() * b.transpose();
        let mut g = DMatrix::zeros(n, n);
        for (k, ek) in exp.iter().enumerate() {
            let eq = ek * &q;
            for (l, el) in exp.iter().enumerate() {
                g += &eq * el.transpose() / T::from_usize_lossy(k + l + 1);
            }
        }
        let g = (&g + g.transpose()) * T::lit(0.5);
        let not_controllable = || DynamicsError::NotControllable {
            rank: sys.controllability_rank(),
            n,
        };
        let h = g.cholesky().ok_or_else(not_controllable)?.inverse();

        let width = top + 1;
        let mut y_offset = vec![T::zero(); width * n];
        for p in 1..=exp.len() {
            let psi = &exp[p - 1] * &c / T::from_usize_lossy(p);
            for i in 0..n {
                if psi[i] != T::zero() && p <= levels[i] {
                    y_offset[(top + p - levels[i]) * n + i] -= psi[i];
                }
            }
        }

        let (to_graded, costate_back) = match basis {
            Some((_, v_inv)) => {
                let back = v_inv.transpose();
                (Some(sparse(&v_inv)), Some(back))
            }
            None => (None, None),
        };
        Ok(Self {
            n,
            top,
            to_graded,
            costate_back,
            shifts: exp.iter().skip(1).map(sparse).collect(),
            y_offset,
            h: sparse(&h),
            levels,
        })
    }

    pub(crate) fn scratch(&self) -> GradedScratch<T> {
        let n = self.n;
        let width = self.top + 1;
        GradedScratch {
            x0: vec![T::zero(); n],
            dx: vec![T::zero(); n],
            tmp: vec![T::zero(); n],
            y: vec![T::zero(); width * n],
            hy: vec![T::zero(); width * n],
            f: vec![T::zero(); 2 * self.top + 1],
            p: vec![T::zero(); 2 * self.top + 1],
        }
    }

    /// Coefficients of `y` in `[q·n + i]` layout, power `q − L`.
    fn fill_y(&self, x0: &[T], x1: &[T], s: &mut GradedScratch<T>) {
        let n = self.n;
        let top = self.top;
        for i in 0..n {
            s.tmp[i] = x1[i] - x0[i];
        }
        match &self.to_graded {
            Some(v_inv) => {
                sparse_apply(v_inv, x0, &mut s.x0);
                sparse_apply(v_inv, &s.tmp, &mut s.dx);
            }
            None => {
                s.x0.copy_from_slice(x0);
                s.dx.copy_from_slice(&s.tmp);
            }
        }
        s.y.copy_from_slice(&self.y_offset);
        for i in 0..n {
            s.y[(top - self.levels[i]) * n + i] += s.dx[i];
        }
        for (k, shift) in self.shifts.iter().enumerate() {
            let k = k + 1;
            for &(i, j, v) in shift {
                let i = i as usize;
                s.y[(top + k - self.levels[i]) * n + i] -= v * s.x0[j as usize];
            }
        }
    }

    /// Fills `s.f` and `s.p`.
    pub(crate) fn expand(&self, x0: &[T], x1: &[T], s: &mut GradedScratch<T>) {
        let n = self.n;
        let width = self.top + 1;
        self.fill_y(x0, x1, s);
        s.hy.iter_mut().for_each(|v| *v = T::zero());
        for q in 0..width {
            let y = &s.y[q * n..(q + 1) * n];
            let hy = &mut s.hy[q * n..(q + 1) * n];
            for &(i, j, v) in &self.h {
                hy[i as usize] += v * y[j as usize];
            }
        }
        s.f.iter_mut().for_each(|v| *v = T::zero());
        for q1 in 0..width {
            let y = &s.y[q1 * n..(q1 + 1) * n];
            if y.iter().all(|v| *v == T::zero()) {
                continue;
            }
            for q2 in 0..width {
                let hy = &s.hy[q2 * n..(q2 + 1) * n];
                s.f[q1 + q2] += y
                    .iter()
                    .zip(hy)
                    .fold(T::zero(), |acc, (a, b)| acc + *a * *b);
            }
        }
        let shift = 2 * self.top;
        for (k, (p, f)) in s.p.iter_mut().zip(&s.f).enumerate() {
            // τ^{k−2L+1} term of c differentiates to (k−2L+1)·τ^{k−2L}
            *p = *f * (T::from_usize_lossy(k + 1) - T::from_usize_lossy(shift));
        }
        s.p[shift] += T::one();
    }

    /// `c[τ]` from the coefficients left in `f` by [`Self::expand`].
    #[inline]
    pub(crate) fn cost_at(&self, f: &[T], tau: T) -> Option<T> {
        if !(tau > T::zero()) {
            return None;
        }
        let quad = crate::poly::horner(f, tau).max(T::zero());
        let cost = tau + quad / tau.powi(2 * self.top as i32 - 1);
        cost.is_finite_value().then_some(cost)
    }

    /// `d[τ] = G⁻¹(x1 − x̄[τ])` through the exact inverse.
    pub(crate) fn costate(&self, x0: &[T], x1: &[T], tau: T) -> DVector<T> {
        let n = self.n;
        let mut s = self.scratch();
        self.fill_y(x0, x1, &mut s);
        let mut y = vec![T::zero(); n];
        for q in (0..=self.top).rev() {
            for i in 0..n {
                y[i] = y[i] * tau + s.y[q * n + i];
            }
        }
        let inv = tau.powi(-(self.top as i32));
        let mut hy = vec![T::zero(); n];
        for &(i, j, v) in &self.h {
            hy[i as usize] += v * y[j as usize] * inv;
        }
        let d = DVector::from_fn(n, |i, _| hy[i] * tau.powi(1 - self.levels[i] as i32));
        match &self.costate_back {
            Some(back) => back * d,
            None => d,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn chain_levels_follow_the_integrators() {
        let a =
            DMatrix::<f64>::from_row_slice(3, 3, &[0.0, 1.0, 0.0, 0.0, 0.0, 1.0, 0.0, 0.0, 0.0]);
        let b = DMatrix::from_column_slice(3, 1, &[0.0, 0.0, 1.0]);
        assert_eq!(coordinate_levels(&a, &b), Some(vec![3, 2, 1]));
    }

    #[test]
    fn fully_actuated_double_integrator_is_not_graded() {
        let a = DMatrix::<f64>::from_row_slice(2, 2, &[0.0, 1.0, 0.0, 0.0]);
        let b = DMatrix::identity(2, 2);
        assert_eq!(coordinate_levels(&a, &b), None);
        let (v, levels) = krylov_basis(&a, &b).unwrap();
        let mut ap = v.clone().try_inverse().unwrap() * &a * &v;
        let mut bp = v.try_inverse().unwrap() * &b;
        assert_eq!(levels, vec![1, 1]);
        assert!(!enforce_grading(&mut ap, &mut bp, &levels));
    }

    #[test]
    fn rotated_chain_is_recovered() {
        let a = DMatrix::<f64>::from_row_slice(2, 2, &[0.0, 1.0, 0.0, 0.0]);
        let b = DMatrix::from_column_slice(2, 1, &[0.0, 1.0]);
        let (s, c) = 0.7f64.sin_cos();
        let t = DMatrix::from_row_slice(2, 2, &[c, -s, s, c]);
        let t_inv = t.transpose();
        let ar = &t * &a * &t_inv;
        let br = &t * &b;
        assert_eq!(coordinate_levels(&ar, &br), None);
        let (v, levels) = krylov_basis(&ar, &br).unwrap();
        let v_inv = v.clone().try_inverse().unwrap();
        let mut ap = &v_inv * &ar * &v;
        let mut bp = &v_inv * &br;
        assert_eq!(levels, vec![1, 2]);
        assert!(enforce_grading(&mut ap, &mut bp, &levels));
        assert!((ap[(1, 0)] - 1.0).abs() < 1e-12);
    }
}

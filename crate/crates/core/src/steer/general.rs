//! Fallback kernel for nilpotent systems that admit no grading.
//!
//! Writing `z = [x1 − x0; x0; 1]`, the miss vector `x1 − x̄[τ] = L(τ) z` is
//! linear in `z`, hence
//!
//! ```text
//! c[τ] = τ + zᵀ W(τ) z / D(τ),          W = Lᵀ adj(G) L,  D = det G,
//! ċ[τ]·D² = D² + zᵀ (W′D − W D′) z.
//! ```
//!
//! `W` and `K = W′D − WD′` depend only on the system, so they are expanded
//! once into sparse lists of polynomial coefficients. Expansion runs on
//! [`Tracked`] polynomials so that coefficients which are pure cancellation
//! noise can be zeroed. Accuracy degrades with the spread of the expansion,
//! which limits this path to small systems.

use nalgebra::{DMatrix, DVector};

use super::SteerError;
use crate::dynamics::{DynamicsError, LtiSystem};
use crate::poly::{faddeev_leverrier, horner, Poly, RingElem, Tracked};
use crate::scalar::Real;

/// Coefficients within this factor of their magnitude bound are noise.
fn clean_tolerance<T: Real>() -> T {
    T::eps().powf(T::lit(2.0 / 3.0))
}

/// `Σ_{i≤j} z_i z_j P_ij(τ)` with the off-diagonal factor two folded in.
#[derive(Debug, Clone, Default)]
struct QuadForm<T> {
    /// `(i, j, start, end)` into `terms`.
    pairs: Vec<(u32, u32, u32, u32)>,
    /// `(power, coefficient)`
    terms: Vec<(u32, T)>,
    len: usize,
}

impl<T: Real> QuadForm<T> {
    fn from_upper(entries: &[(usize, usize, Poly<T>)]) -> Self {
        let mut form = Self {
            pairs: Vec::new(),
            terms: Vec::new(),
            len: 0,
        };
        for (i, j, p) in entries {
            if p.is_zero() {
                continue;
            }
            let factor = if i == j { T::one() } else { T::lit(2.0) };
            let start = form.terms.len() as u32;
            for (k, c) in p.coeffs().iter().enumerate() {
                if *c != T::zero() {
                    form.terms.push((k as u32, *c * factor));
                }
            }
            form.pairs
                .push((*i as u32, *j as u32, start, form.terms.len() as u32));
            form.len = form.len.max(p.coeffs().len());
        }
        form
    }

    #[inline]
    fn accumulate(&self, z: &[T], out: &mut [T]) {
        for &(i, j, s, e) in &self.pairs {
            let w = z[i as usize] * z[j as usize];
            if w == T::zero() {
                continue;
            }
            for &(p, c) in &self.terms[s as usize..e as usize] {
                out[p as usize] += w * c;
            }
        }
    }
}

#[derive(Debug, Clone)]
pub(crate) struct General<T: Real> {
    n: usize,
    /// `adj G` entries (row-major), scaled with `det`.
    adj: Vec<Poly<T>>,
    /// `det G` divided by its largest coefficient.
    det: Vec<T>,
    det_sq: Vec<T>,
    numer: QuadForm<T>,
    slope: QuadForm<T>,
}

#[derive(Debug, Clone)]
pub(crate) struct GeneralScratch<T> {
    z: Vec<T>,
    pub(crate) p: Vec<T>,
    pub(crate) numer: Vec<T>,
}

impl<T> GeneralScratch<T> {
    pub(crate) fn shape(&self) -> [usize; 3] {
        [self.z.len(), self.p.len(), self.numer.len()]
    }
}

impl<T> Default for GeneralScratch<T> {
    fn default() -> Self {
        Self {
            z: Vec::new(),
            p: Vec::new(),
            numer: Vec::new(),
        }
    }
}

fn tracked_from<T: Real>(values: &[T], bounds: &[T]) -> Tracked<T> {
    Tracked {
        value: Poly::new(values.to_vec()),
        bound: Poly::new(bounds.to_vec()),
    }
}

impl<T: Real> General<T> {
    pub(crate) fn new(
        sys: &LtiSystem<T>,
        exp: &[DMatrix<T>],
        gram: &[DMatrix<T>],
        psi: &[DVector<T>],
    ) -> Result<Self, SteerError> {
        let n = sys.state_dim();
        let index = exp.len();
        let exp_abs: Vec<DMatrix<T>> = exp.iter().map(|e| e.abs()).collect();
        let q_abs = sys.input_weight().abs();
        let c_abs = sys.c().abs();
        let tol = clean_tolerance::<T>();

        let mut gram_bound = vec![DMatrix::zeros(n, n); gram.len()];
        for k in 0..index {
            let eq_abs = &exp_abs[k] * &q_abs;
            for l in 0..index {
                let p = k + l + 1;
                gram_bound[p] += &eq_abs * exp_abs[l].transpose() / T::from_usize_lossy(p);
            }
        }
        let mut psi_bound = vec![DVector::zeros(n); psi.len()];
        for p in 1..psi.len() {
            psi_bound[p] = &exp_abs[p - 1] * &c_abs / T::from_usize_lossy(p);
        }

        let g_entries: Vec<Tracked<T>> = (0..n * n)
            .map(|idx| {
                let (i, j) = (idx / n, idx % n);
                let v: Vec<T> = gram.iter().map(|m| m[(i, j)]).collect();
                let b: Vec<T> = gram_bound.iter().map(|m| m[(i, j)]).collect();
                tracked_from(&v, &b)
            })
            .collect();
        let (adj, det) = faddeev_leverrier(&g_entries, n);
        let det = det.clean(tol);
        let scale = det.value.max_abs_coeff();
        if !(scale > T::zero()) || !scale.is_finite_value() {
            return Err(DynamicsError::NotControllable {
                rank: sys.controllability_rank(),
                n,
            }
            .into());
        }
        let inv_scale = T::one() / scale;
        let det = det.scale(inv_scale);
        let adj: Vec<Tracked<T>> = adj.iter().map(|e| e.clean(tol).scale(inv_scale)).collect();

        // L = [I | I − Φ | −ψ], n × (2n+1)
        let cols = 2 * n + 1;
        let mut l = vec![<Tracked<T> as RingElem<T>>::zero(); n * cols];
        for a in 0..n {
            l[a * cols + a] = <Tracked<T> as RingElem<T>>::one();
            for b in 0..n {
                let mut v = vec![T::zero(); index];
                let mut bd = vec![T::zero(); index];
                for k in 1..index {
                    v[k] = -exp[k][(a, b)];
                    bd[k] = exp_abs[k][(a, b)];
                }
                l[a * cols + n + b] = tracked_from(&v, &bd);
            }
            let v: Vec<T> = psi.iter().map(|p| -p[a]).collect();
            let bd: Vec<T> = psi_bound.iter().map(|p| p[a]).collect();
            l[a * cols + 2 * n] = tracked_from(&v, &bd);
        }

        // adj·L, then W = Lᵀ (adj·L) on the upper triangle
        let mut adj_l = vec![<Tracked<T> as RingElem<T>>::zero(); n * cols];
        for a in 0..n {
            for j in 0..cols {
                let mut acc = <Tracked<T> as RingElem<T>>::zero();
                for b in 0..n {
                    let (x, y) = (&adj[a * n + b], &l[b * cols + j]);
                    if !x.is_zero() && !y.is_zero() {
                        acc = acc.add(&x.mul(y));
                    }
                }
                adj_l[a * cols + j] = acc;
            }
        }
        let det_d = det.derivative();
        let mut w_upper = Vec::new();
        let mut k_upper = Vec::new();
        for i in 0..cols {
            for j in i..cols {
                let mut acc = <Tracked<T> as RingElem<T>>::zero();
                for a in 0..n {
                    let (x, y) = (&l[a * cols + i], &adj_l[a * cols + j]);
                    if !x.is_zero() && !y.is_zero() {
                        acc = acc.add(&x.mul(y));
                    }
                }
                let w = acc.clean(tol);
                if w.value.is_zero() {
                    continue;
                }
                let k = w.derivative().mul(&det).sub(&w.mul(&det_d)).clean(tol);
                k_upper.push((i, j, k.value));
                w_upper.push((i, j, w.value));
            }
        }
        let det_sq = det.mul(&det).clean(tol).value.coeffs().to_vec();

        Ok(Self {
            n,
            adj: adj.into_iter().map(|e| e.value).collect(),
            det: det.value.coeffs().to_vec(),
            det_sq,
            numer: QuadForm::from_upper(&w_upper),
            slope: QuadForm::from_upper(&k_upper),
        })
    }

    pub(crate) fn scratch(&self) -> GeneralScratch<T> {
        GeneralScratch {
            z: vec![T::zero(); 2 * self.n + 1],
            p: vec![T::zero(); self.det_sq.len().max(self.slope.len)],
            numer: vec![T::zero(); self.numer.len],
        }
    }

    /// Fills `s.p` with `ċ·D²` and `s.numer` with `zᵀWz`.
    pub(crate) fn expand(&self, x0: &[T], x1: &[T], s: &mut GeneralScratch<T>) {
        let n = self.n;
        for i in 0..n {
            s.z[i] = x1[i] - x0[i];
            s.z[n + i] = x0[i];
        }
        s.z[2 * n] = T::one();
        s.p.iter_mut().for_each(|c| *c = T::zero());
        s.p[..self.det_sq.len()].copy_from_slice(&self.det_sq);
        self.slope.accumulate(&s.z, &mut s.p);
        s.numer.iter_mut().for_each(|c| *c = T::zero());
        self.numer.accumulate(&s.z, &mut s.numer);
    }

    pub(crate) fn cost_at(&self, numer: &[T], tau: T) -> Option<T> {
        let det = horner(&self.det, tau);
        if !(det > T::zero()) {
            return None;
        }
        let quad = horner(numer, tau).max(T::zero());
        let cost = tau + quad / det;
        cost.is_finite_value().then_some(cost)
    }

    /// `d[τ] = adj(G)·δ / det G` for the miss vector `δ`.
    pub(crate) fn costate(&self, delta: &DVector<T>, tau: T) -> DVector<T> {
        let n = self.n;
        let det = horner(&self.det, tau);
        DVector::from_fn(n, |a, _| {
            let mut s = T::zero();
            for b in 0..n {
                s += self.adj[a * n + b].eval(tau) * delta[b];
            }
            s / det
        })
    }
}

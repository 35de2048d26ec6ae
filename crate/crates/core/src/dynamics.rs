//! Linear time-invariant systems `ẋ = Ax + Bu + c` with a quadratic control
//! weight `R`, plus the structural queries the steering solver depends on:
//! controllability, nilpotency and the finite matrix exponential of a
//! nilpotent dynamics matrix.

use nalgebra::{DMatrix, DVector};
use thiserror::Error;

use crate::scalar::Real;

/// Relative singular value threshold used by [`LtiSystem::controllability_rank`].
pub const DEFAULT_RANK_TOLERANCE: f64 = 1e-12;

/// Absolute tolerance (scaled by `max|A|^k`) for deciding `A^k = 0`.
pub const NILPOTENCY_TOLERANCE: f64 = 1e-12;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum DynamicsError {
    #[error("dimension mismatch: {0}")]
    Dimension(String),
    #[error("control weight R must be symmetric positive-definite")]
    WeightNotPositiveDefinite,
    #[error("system is not controllable (rank {rank} < {n})")]
    NotControllable { rank: usize, n: usize },
    #[error("dynamics matrix is not nilpotent")]
    NotNilpotent,
    #[error("non-finite entry in system matrices")]
    NonFinite,
}

/// Result of testing `A` for nilpotency.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct NilpotencyInfo {
    pub is_nilpotent: bool,
    /// Smallest `k` with `A^k = 0`; `None` when `A` is not nilpotent.
    pub index: Option<usize>,
}

/// The tuple `(A, B, c, R)`.
#[derive(Debug, Clone, PartialEq)]
pub struct LtiSystem<T: Real> {
    a: DMatrix<T>,
    b: DMatrix<T>,
    c: DVector<T>,
    r: DMatrix<T>,
    r_inv: DMatrix<T>,
    /// `B R⁻¹ Bᵀ`
    input_weight: DMatrix<T>,
    /// `R⁻¹ Bᵀ`, maps the costate to the optimal control.
    control_gain: DMatrix<T>,
}

impl<T: Real> LtiSystem<T> {
    /// Validates dimensions and that `R` is symmetric positive-definite.
    ///
    /// Controllability is *not* required here: linearizations of nonlinear
    /// models can legitimately lose it, and callers query
    /// [`LtiSystem::is_controllable`] before steering.
    pub fn new(
        a: DMatrix<T>,
        b: DMatrix<T>,
        c: DVector<T>,
        r: DMatrix<T>,
    ) -> Result<Self, DynamicsError> {
        let n = a.nrows();
        if a.ncols() != n {
            return Err(DynamicsError::Dimension(format!(
                "A must be square, got {}x{}",
                a.nrows(),
                a.ncols()
            )));
        }
        if b.nrows() != n {
            return Err(DynamicsError::Dimension(format!(
                "B must have {n} rows, got {}",
                b.nrows()
            )));
        }
        let m = b.ncols();
        if c.len() != n {
            return Err(DynamicsError::Dimension(format!(
                "c must have length {n}, got {}",
                c.len()
            )));
        }
        if r.nrows() != m || r.ncols() != m {
            return Err(DynamicsError::Dimension(format!(
                "R must be {m}x{m}, got {}x{}",
                r.nrows(),
                r.ncols()
            )));
        }
        let finite = a
            .iter()
            .chain(b.iter())
            .chain(c.iter())
            .chain(r.iter())
            .all(|v| v.is_finite_value());
        if !finite {
            return Err(DynamicsError::NonFinite);
        }
        let scale = r.iter().fold(T::zero(), |acc, v| acc.max(v.abs()));
        let sym_tol = T::lit(1e-12) * scale.max(T::one());
        for i in 0..m {
            for j in 0..i {
                if (r[(i, j)] - r[(j, i)]).abs() > sym_tol {
                    return Err(DynamicsError::WeightNotPositiveDefinite);
                }
            }
        }
        let chol = r
            .clone()
            .cholesky()
            .ok_or(DynamicsError::WeightNotPositiveDefinite)?;
        let r_inv = chol.inverse();
        let control_gain = &r_inv * b.transpose();
        let mut input_weight = &b * &control_gain;
        // exact symmetry keeps the Gramian symmetric
        input_weight = (&input_weight + input_weight.transpose()) * T::lit(0.5);
        Ok(Self {
            a,
            b,
            c,
            r,
            r_inv,
            input_weight,
            control_gain,
        })
    }

    pub fn state_dim(&self) -> usize {
        self.a.nrows()
    }

    pub fn control_dim(&self) -> usize {
        self.b.ncols()
    }

    pub fn a(&self) -> &DMatrix<T> {
        &self.a
    }

    pub fn b(&self) -> &DMatrix<T> {
        &self.b
    }

    pub fn c(&self) -> &DVector<T> {
        &self.c
    }

    pub fn r(&self) -> &DMatrix<T> {
        &self.r
    }

    pub fn r_inv(&self) -> &DMatrix<T> {
        &self.r_inv
    }

    /// `B R⁻¹ Bᵀ`
    pub fn input_weight(&self) -> &DMatrix<T> {
        &self.input_weight
    }

    /// `R⁻¹ Bᵀ`
    pub fn control_gain(&self) -> &DMatrix<T> {
        &self.control_gain
    }

    /// `Ax + Bu + c`
    pub fn derivative(&self, x: &DVector<T>, u: &DVector<T>) -> DVector<T> {
        &self.a * x + &self.b * u + &self.c
    }

    /// `[B, AB, …, A^{n−1}B]`
    pub fn controllability_matrix(&self) -> DMatrix<T> {
        let n = self.state_dim();
        let m = self.control_dim();
        let mut out = DMatrix::zeros(n, n * m);
        let mut block = self.b.clone();
        for k in 0..n {
            out.view_mut((0, k * m), (n, m)).copy_from(&block);
            block = &self.a * block;
        }
        out
    }

    /// Rank of the controllability matrix with the default threshold.
    pub fn controllability_rank(&self) -> usize {
        self.controllability_rank_with(T::lit(DEFAULT_RANK_TOLERANCE))
    }

    /// Numerical rank: singular values above `max(rows, cols)·σ_max·rel_tol`.
    pub fn controllability_rank_with(&self, rel_tol: T) -> usize {
        let ctrb = self.controllability_matrix();
        if ctrb.is_empty() {
            return 0;
        }
        let dim = T::from_usize_lossy(ctrb.nrows().max(ctrb.ncols()));
        let sv = ctrb.svd(false, false).singular_values;
        let sigma_max = sv.iter().fold(T::zero(), |acc, s| acc.max(*s));
        if sigma_max == T::zero() {
            return 0;
        }
        let threshold = dim * sigma_max * rel_tol;
        sv.iter().filter(|s| **s > threshold).count()
    }

    pub fn is_controllable(&self) -> bool {
        self.controllability_rank() == self.state_dim()
    }

    /// Errors with [`DynamicsError::NotControllable`] unless full rank.
    pub fn ensure_controllable(&self) -> Result<(), DynamicsError> {
        let rank = self.controllability_rank();
        let n = self.state_dim();
        if rank == n {
            Ok(())
        } else {
            Err(DynamicsError::NotControllable { rank, n })
        }
    }

    pub fn nilpotency(&self) -> NilpotencyInfo {
        nilpotency_of(&self.a)
    }
}

/// Tests `A^k = 0` for `k = 1..=n` by explicit powering.
///
/// `A^k` counts as zero when its entries are below the tolerance relative
/// to `|A|^k` (entrywise absolute values), the scale of the rounding error
/// in the product. A bound like `max|A_ij|^k` is far too loose when entry
/// magnitudes differ widely and declares nonzero powers zero.
pub fn nilpotency_of<T: Real>(a: &DMatrix<T>) -> NilpotencyInfo {
    let n = a.nrows();
    let abs = a.abs();
    let tol = T::lit(NILPOTENCY_TOLERANCE);
    let mut power = a.clone();
    let mut bound = abs.clone();
    for k in 1..=n {
        let max_entry = power.iter().fold(T::zero(), |acc, v| acc.max(v.abs()));
        let scale = bound.iter().fold(T::zero(), |acc, v| acc.max(*v));
        if max_entry <= tol * scale || scale == T::zero() {
            return NilpotencyInfo {
                is_nilpotent: true,
                index: Some(k),
            };
        }
        power = &power * a;
        bound = &bound * &abs;
    }
    NilpotencyInfo {
        is_nilpotent: false,
        index: None,
    }
}

/// `[A⁰/0!, A¹/1!, …, A^{k−1}/(k−1)!]` for nilpotent `A` of index `k`.
pub fn exp_coefficients<T: Real>(a: &DMatrix<T>) -> Result<Vec<DMatrix<T>>, DynamicsError> {
    let index = nilpotency_of(a).index.ok_or(DynamicsError::NotNilpotent)?;
    let n = a.nrows();
    let mut out = Vec::with_capacity(index);
    let mut term = DMatrix::identity(n, n);
    for k in 0..index {
        out.push(term.clone());
        term = &term * a / T::from_usize_lossy(k + 1);
    }
    Ok(out)
}

/// `exp[At]` as the finite series `Σ_{k<index} (At)^k / k!`.
pub fn matexp_poly<T: Real>(sys: &LtiSystem<T>, t: T) -> Result<DMatrix<T>, DynamicsError> {
    let coeffs = exp_coefficients(sys.a())?;
    Ok(eval_matrix_poly(&coeffs, t))
}

/// Horner evaluation of `Σ_k C_k t^k`.
pub(crate) fn eval_matrix_poly<T: Real>(coeffs: &[DMatrix<T>], t: T) -> DMatrix<T> {
    let mut iter = coeffs.iter().rev();
    let mut acc = iter.next().cloned().unwrap_or_else(|| DMatrix::zeros(0, 0));
    for c in iter {
        acc *= t;
        acc += c;
    }
    acc
}

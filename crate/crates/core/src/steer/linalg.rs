//! Allocation-free dense kernels on row-major slices for the hot paths.

use crate::scalar::Real;

/// Lower Cholesky factor of a symmetric row-major matrix, in place (the
/// strict upper triangle is left untouched). Returns the condition estimate
/// `(max Lᵢᵢ / min Lᵢᵢ)²`, or `None` when the matrix is not numerically
/// positive-definite.
pub(crate) fn cholesky_in_place<T: Real>(a: &mut [T], n: usize) -> Option<T> {
    let mut dmax = T::zero();
    let mut dmin = T::infinity();
    for j in 0..n {
        let mut diag = a[j * n + j];
        for k in 0..j {
            diag -= a[j * n + k] * a[j * n + k];
        }
        if !(diag > T::zero()) || !diag.is_finite_value() {
            return None;
        }
        let ljj = diag.sqrt();
        a[j * n + j] = ljj;
        dmax = dmax.max(ljj);
        dmin = dmin.min(ljj);
        for i in (j + 1)..n {
            let mut s = a[i * n + j];
            for k in 0..j {
                s -= a[i * n + k] * a[j * n + k];
            }
            a[i * n + j] = s / ljj;
        }
    }
    let ratio = dmax / dmin;
    Some(ratio * ratio)
}

/// Solves `L Lᵀ v = b` in place given the factor from [`cholesky_in_place`].
pub(crate) fn cholesky_solve<T: Real>(l: &[T], n: usize, b: &mut [T]) {
    for i in 0..n {
        let mut s = b[i];
        for k in 0..i {
            s -= l[i * n + k] * b[k];
        }
        b[i] = s / l[i * n + i];
    }
    for i in (0..n).rev() {
        let mut s = b[i];
        for k in (i + 1)..n {
            s -= l[k * n + i] * b[k];
        }
        b[i] = s / l[i * n + i];
    }
}

#[inline]
pub(crate) fn dot<T: Real>(a: &[T], b: &[T]) -> T {
    a.iter().zip(b).fold(T::zero(), |acc, (x, y)| acc + *x * *y)
}

//! Dense univariate polynomials and polynomial matrices.

mod matrix;
mod roots;
mod tracked;

pub use matrix::{faddeev_leverrier, PolyMatrix, RingElem};
pub use roots::{companion_eigenvalues, sign_change_roots, IsolationScratch, RootError};
pub use tracked::Tracked;

use std::ops::{Add, Mul, Neg, Sub};

use num_complex::Complex;

use crate::scalar::Real;

/// Polynomial with coefficients in ascending order of degree.
///
/// Trailing (highest-degree) zero coefficients are trimmed, so the zero
/// polynomial has an empty coefficient vector.
#[derive(Debug, Clone, PartialEq)]
pub struct Poly<T: Real> {
    coeffs: Vec<T>,
}

impl<T: Real> Poly<T> {
    pub fn new(mut coeffs: Vec<T>) -> Self {
        while coeffs.last().is_some_and(|c| *c == T::zero()) {
            coeffs.pop();
        }
        Self { coeffs }
    }

    pub fn zero() -> Self {
        Self { coeffs: Vec::new() }
    }

    pub fn constant(c: T) -> Self {
        Self::new(vec![c])
    }

    /// `c·t^k`
    pub fn monomial(c: T, k: usize) -> Self {
        let mut coeffs = vec![T::zero(); k + 1];
        coeffs[k] = c;
        Self::new(coeffs)
    }

    pub fn coeffs(&self) -> &[T] {
        &self.coeffs
    }

    pub fn is_zero(&self) -> bool {
        self.coeffs.is_empty()
    }

    /// Degree, `None` for the zero polynomial.
    pub fn degree(&self) -> Option<usize> {
        self.coeffs.len().checked_sub(1)
    }

    pub fn coeff(&self, k: usize) -> T {
        self.coeffs.get(k).copied().unwrap_or_else(T::zero)
    }

    pub fn eval(&self, t: T) -> T {
        horner(&self.coeffs, t)
    }

    pub fn derivative(&self) -> Self {
        if self.coeffs.len() <= 1 {
            return Self::zero();
        }
        Self::new(
            self.coeffs
                .iter()
                .enumerate()
                .skip(1)
                .map(|(k, c)| *c * T::from_usize_lossy(k))
                .collect(),
        )
    }

    /// Antiderivative vanishing at zero.
    pub fn integral(&self) -> Self {
        let mut coeffs = Vec::with_capacity(self.coeffs.len() + 1);
        coeffs.push(T::zero());
        for (k, c) in self.coeffs.iter().enumerate() {
            coeffs.push(*c / T::from_usize_lossy(k + 1));
        }
        Self::new(coeffs)
    }

    pub fn scale(&self, s: T) -> Self {
        Self::new(self.coeffs.iter().map(|c| *c * s).collect())
    }

    pub fn max_abs_coeff(&self) -> T {
        self.coeffs
            .iter()
            .fold(T::zero(), |acc, c| acc.max(c.abs()))
    }

    /// All complex roots. Roots at the origin are reported exactly from the
    /// low-order zero coefficients; the rest come from the companion matrix.
    pub fn roots(&self) -> Result<Vec<Complex<T>>, RootError> {
        if self.is_zero() {
            return Err(RootError::ZeroPolynomial);
        }
        let zeros_at_origin = self.coeffs.iter().take_while(|c| **c == T::zero()).count();
        let reduced = &self.coeffs[zeros_at_origin..];
        let mut roots = companion_eigenvalues(reduced)?;
        roots.extend(std::iter::repeat_n(
            Complex::new(T::zero(), T::zero()),
            zeros_at_origin,
        ));
        Ok(roots)
    }

    /// Real roots strictly greater than `lower`, keeping eigenvalues with
    /// `|im| < imag_tol·(1 + |re|)`. Sorted ascending.
    pub fn positive_real_roots(&self, lower: T, imag_tol: T) -> Result<Vec<T>, RootError> {
        let mut out: Vec<T> = self
            .roots()?
            .into_iter()
            .filter(|z| z.im.abs() < imag_tol * (T::one() + z.re.abs()) && z.re > lower)
            .map(|z| z.re)
            .collect();
        out.sort_by(|a, b| a.partial_cmp(b).unwrap_or(std::cmp::Ordering::Equal));
        Ok(out)
    }
}

#[inline]
pub(crate) fn horner<T: Real>(coeffs: &[T], t: T) -> T {
    coeffs.iter().rev().fold(T::zero(), |acc, c| acc * t + *c)
}

/// Horner evaluation of the value and first derivative.
#[inline]
pub(crate) fn horner_with_derivative<T: Real>(coeffs: &[T], t: T) -> (T, T) {
    let mut p = T::zero();
    let mut dp = T::zero();
    for c in coeffs.iter().rev() {
        dp = dp * t + p;
        p = p * t + *c;
    }
    (p, dp)
}

impl<T: Real> Add for &Poly<T> {
    type Output = Poly<T>;
    fn add(self, rhs: &Poly<T>) -> Poly<T> {
        let len = self.coeffs.len().max(rhs.coeffs.len());
        Poly::new((0..len).map(|k| self.coeff(k) + rhs.coeff(k)).collect())
    }
}

impl<T: Real> Sub for &Poly<T> {
    type Output = Poly<T>;
    fn sub(self, rhs: &Poly<T>) -> Poly<T> {
        let len = self.coeffs.len().max(rhs.coeffs.len());
        Poly::new((0..len).map(|k| self.coeff(k) - rhs.coeff(k)).collect())
    }
}

impl<T: Real> Mul for &Poly<T> {
    type Output = Poly<T>;
    fn mul(self, rhs: &Poly<T>) -> Poly<T> {
        if self.is_zero() || rhs.is_zero() {
            return Poly::zero();
        }
        let mut out = vec![T::zero(); self.coeffs.len() + rhs.coeffs.len() - 1];
        for (i, a) in self.coeffs.iter().enumerate() {
            if *a == T::zero() {
                continue;
            }
            for (j, b) in rhs.coeffs.iter().enumerate() {
                out[i + j] += *a * *b;
            }
        }
        Poly::new(out)
    }
}

impl<T: Real> Neg for &Poly<T> {
    type Output = Poly<T>;
    fn neg(self) -> Poly<T> {
        Poly::new(self.coeffs.iter().map(|c| -*c).collect())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn from_roots(roots: &[f64]) -> Poly<f64> {
        roots.iter().fold(Poly::constant(1.0), |acc, r| {
            &acc * &Poly::new(vec![-r, 1.0])
        })
    }

    #[test]
    fn arithmetic_and_calculus() {
        let p = Poly::<f64>::new(vec![1.0, 2.0, 3.0]);
        let q = Poly::new(vec![0.0, 1.0]);
        assert_eq!((&p * &q).coeffs(), &[0.0, 1.0, 2.0, 3.0]);
        assert_eq!((&p - &p).degree(), None);
        assert_eq!(p.derivative().coeffs(), &[2.0, 6.0]);
        assert_eq!(p.integral().coeffs(), &[0.0, 1.0, 1.0, 1.0]);
        assert_eq!(p.eval(2.0), 17.0);
        assert_eq!(horner_with_derivative(p.coeffs(), 2.0), (17.0, 14.0));
    }

    #[test]
    fn cost_derivative_numerator_has_known_root() {
        // τ⁴ − 4τ² + 24τ − 36 has the positive root √7 − 1
        let p = Poly::<f64>::new(vec![-36.0, 24.0, -4.0, 0.0, 1.0]);
        let roots = p.positive_real_roots(1e-6, 1e-8).unwrap();
        assert_eq!(roots.len(), 1);
        assert!((roots[0] - (7f64.sqrt() - 1.0)).abs() < 1e-12);
    }

    #[test]
    fn roots_at_origin_are_exact() {
        let p = Poly::<f64>::new(vec![0.0, 0.0, -2.0, 1.0]);
        let mut roots: Vec<f64> = p.roots().unwrap().iter().map(|z| z.re).collect();
        roots.sort_by(|a, b| a.partial_cmp(b).unwrap());
        assert_eq!(roots[0], 0.0);
        assert_eq!(roots[1], 0.0);
        assert!((roots[2] - 2.0).abs() < 1e-14);
    }

    #[test]
    fn complex_pair_is_not_real() {
        // t² + 1
        let p = Poly::<f64>::new(vec![1.0, 0.0, 1.0]);
        assert!(p.positive_real_roots(0.0, 1e-8).unwrap().is_empty());
        let roots = p.roots().unwrap();
        assert!(roots.iter().all(|z| (z.im.abs() - 1.0).abs() < 1e-14));
    }

    #[test]
    fn wide_range_of_root_magnitudes() {
        let expected = [1e-3, 0.5, 7.0, 300.0];
        let p = from_roots(&expected);
        let roots = p.positive_real_roots(0.0, 1e-8).unwrap();
        assert_eq!(roots.len(), 4);
        for (r, e) in roots.iter().zip(expected) {
            assert!((r - e).abs() < 1e-9 * e, "{r} vs {e}");
        }
    }

    proptest! {
        // Agreement with nalgebra's Schur-based eigenvalues on the same
        // companion matrix (independent implementation).
        #[test]
        fn matches_nalgebra_eigenvalues(coeffs in prop::collection::vec(-5.0f64..5.0, 2..9)) {
            let mut coeffs = coeffs;
            *coeffs.last_mut().unwrap() = 1.0 + coeffs.last().unwrap().abs();
            coeffs[0] = coeffs[0].signum() * (0.1 + coeffs[0].abs());
            let p = Poly::new(coeffs.clone());
            let deg = p.degree().unwrap();
            let lead = coeffs[deg];
            let comp = nalgebra::DMatrix::from_fn(deg, deg, |i, j| {
                if i == 0 { -coeffs[deg - 1 - j] / lead } else if i == j + 1 { 1.0 } else { 0.0 }
            });
            let mut theirs: Vec<Complex<f64>> = comp.complex_eigenvalues().iter().copied().collect();
            let ours = p.roots().unwrap();
            prop_assert_eq!(ours.len(), theirs.len());
            for z in &ours {
                // residual check plus nearest-neighbour match
                let (idx, dist) = theirs.iter().enumerate()
                    .map(|(k, w)| (k, (z - w).norm()))
                    .min_by(|a, b| a.1.partial_cmp(&b.1).unwrap()).unwrap();
                prop_assert!(dist < 1e-5 * (1.0 + z.norm()), "{:?} unmatched ({})", z, dist);
                theirs.remove(idx);
            }
        }

        #[test]
        fn recovers_planted_real_roots(roots in prop::collection::vec(0.05f64..20.0, 1..6)) {
            let mut sorted = roots.clone();
            sorted.sort_by(|a, b| a.partial_cmp(b).unwrap());
            let separated = sorted.windows(2).all(|w| w[1] - w[0] > 1e-2 * w[1]);
            prop_assume!(separated);
            let p = from_roots(&sorted);
            let found = p.positive_real_roots(0.0, 1e-6).unwrap();
            prop_assert_eq!(found.len(), sorted.len());
            for (f, e) in found.iter().zip(&sorted) {
                prop_assert!((f - e).abs() < 1e-6 * e.max(1.0));
            }
        }
    }
}

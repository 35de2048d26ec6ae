//! Polynomials that carry a running bound on the magnitudes summed into each
//! coefficient. A coefficient that is small compared to its bound is
//! rounding noise left behind by cancellation and can be zeroed, which keeps
//! spurious high-degree terms out of the root finder.

use super::matrix::RingElem;
use super::Poly;
use crate::scalar::Real;

/// `value` together with a coefficientwise bound `bound[k] ≥ Σ|terms of value[k]|`.
#[derive(Debug, Clone, PartialEq)]
pub struct Tracked<T: Real> {
    pub value: Poly<T>,
    pub bound: Poly<T>,
}

impl<T: Real> Tracked<T> {
    /// Exact input: the bound is the coefficientwise absolute value.
    pub fn exact(value: Poly<T>) -> Self {
        let bound = Poly::new(value.coeffs().iter().map(|c| c.abs()).collect());
        Self { value, bound }
    }

    pub fn sub(&self, rhs: &Self) -> Self {
        Self {
            value: &self.value - &rhs.value,
            bound: &self.bound + &rhs.bound,
        }
    }

    pub fn derivative(&self) -> Self {
        Self {
            value: self.value.derivative(),
            bound: self.bound.derivative(),
        }
    }

    /// Zeroes every coefficient with `|value| ≤ rel_tol·bound`.
    pub fn clean(&self, rel_tol: T) -> Self {
        let coeffs = self
            .value
            .coeffs()
            .iter()
            .enumerate()
            .map(|(k, c)| {
                if c.abs() <= rel_tol * self.bound.coeff(k) {
                    T::zero()
                } else {
                    *c
                }
            })
            .collect();
        Self {
            value: Poly::new(coeffs),
            bound: self.bound.clone(),
        }
    }
}

impl<T: Real> RingElem<T> for Tracked<T> {
    fn zero() -> Self {
        Self {
            value: Poly::zero(),
            bound: Poly::zero(),
        }
    }
    fn one() -> Self {
        Self::exact(Poly::constant(T::one()))
    }
    fn is_zero(&self) -> bool {
        self.value.is_zero() && self.bound.is_zero()
    }
    fn add(&self, rhs: &Self) -> Self {
        Self {
            value: &self.value + &rhs.value,
            bound: &self.bound + &rhs.bound,
        }
    }
    fn mul(&self, rhs: &Self) -> Self {
        Self {
            value: &self.value * &rhs.value,
            bound: &self.bound * &rhs.bound,
        }
    }
    fn scale(&self, s: T) -> Self {
        Self {
            value: self.value.scale(s),
            bound: self.bound.scale(s.abs()),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn cancellation_noise_is_removed() {
        // (0.1 + 0.2 − 0.3) is not exactly zero in binary floating point
        let a = Tracked::exact(Poly::<f64>::new(vec![0.1, 1.0]));
        let b = Tracked::exact(Poly::new(vec![0.2]));
        let c = Tracked::exact(Poly::new(vec![0.3, 1.0]));
        let diff = a.add(&b).sub(&c);
        assert!(diff.value.coeff(0) != 0.0);
        assert!(diff.clean(1e-12).value.is_zero());
    }

    #[test]
    fn genuine_small_coefficients_survive() {
        let a = Tracked::exact(Poly::<f64>::new(vec![1e-30, 1.0]));
        assert_eq!(a.clean(1e-10).value.coeff(0), 1e-30);
    }
}

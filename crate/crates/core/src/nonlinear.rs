//! Nonlinear dynamics `ẋ = f(x, u)` handled through first-order Taylor
//! expansion about a state and control.

use nalgebra::{DMatrix, DVector};

use crate::dynamics::{DynamicsError, LtiSystem};
use crate::scalar::Real;

/// Dynamics with analytic Jacobians and a quadratic control weight.
pub trait NonlinearSystem<T: Real> {
    fn state_dim(&self) -> usize;

    fn control_dim(&self) -> usize;

    fn dynamics(&self, x: &DVector<T>, u: &DVector<T>) -> DVector<T>;

    /// `∂f/∂x`, `n × n`.
    fn jacobian_x(&self, x: &DVector<T>, u: &DVector<T>) -> DMatrix<T>;

    /// `∂f/∂u`, `n × m`.
    fn jacobian_u(&self, x: &DVector<T>, u: &DVector<T>) -> DMatrix<T>;

    /// Control weight `R` of the cost `∫(1 + uᵀRu)dt`.
    fn control_weight(&self) -> &DMatrix<T>;

    /// `ẋ ≈ A x + B u + c` with `A = ∂f/∂x`, `B = ∂f/∂u` and
    /// `c = f(x̂, û) − A x̂ − B û`. The result may be uncontrollable.
    fn linearize_at(
        &self,
        x_hat: &DVector<T>,
        u_hat: &DVector<T>,
    ) -> Result<LtiSystem<T>, DynamicsError> {
        let a = self.jacobian_x(x_hat, u_hat);
        let b = self.jacobian_u(x_hat, u_hat);
        let c = self.dynamics(x_hat, u_hat) - &a * x_hat - &b * u_hat;
        LtiSystem::new(a, b, c, self.control_weight().clone())
    }
}

/// An LTI system seen through the nonlinear interface.
#[derive(Debug, Clone)]
pub struct AffineSystem<T: Real>(pub LtiSystem<T>);

impl<T: Real> NonlinearSystem<T> for AffineSystem<T> {
    fn state_dim(&self) -> usize {
        self.0.state_dim()
    }

    fn control_dim(&self) -> usize {
        self.0.control_dim()
    }

    fn dynamics(&self, x: &DVector<T>, u: &DVector<T>) -> DVector<T> {
        self.0.derivative(x, u)
    }

    fn jacobian_x(&self, _x: &DVector<T>, _u: &DVector<T>) -> DMatrix<T> {
        self.0.a().clone()
    }

    fn jacobian_u(&self, _x: &DVector<T>, _u: &DVector<T>) -> DMatrix<T> {
        self.0.b().clone()
    }

    fn control_weight(&self) -> &DMatrix<T> {
        self.0.r()
    }
}

/// `(v cos θ, v sin θ, vκ, u_v, u_κ)` for the state `(x, y, θ, v, κ)`.
pub fn car_dynamics<T: Real>(x: &[T], u: &[T]) -> [T; 5] {
    let (theta, v, kappa) = (x[2], x[3], x[4]);
    let (s, c) = theta.sin_cos();
    [v * c, v * s, v * kappa, u[0], u[1]]
}

/// Car-like robot with state `(x, y, θ, v, κ)` and control `(u_v, u_κ)`,
/// the derivatives of speed and curvature.
#[derive(Debug, Clone, PartialEq)]
pub struct CarModel<T: Real> {
    r: DMatrix<T>,
}

impl<T: Real> CarModel<T> {
    pub const STATE_DIM: usize = 5;
    pub const CONTROL_DIM: usize = 2;

    pub fn new(r: DMatrix<T>) -> Result<Self, DynamicsError> {
        if r.nrows() != 2 || r.ncols() != 2 {
            return Err(DynamicsError::Dimension(format!(
                "car R must be 2x2, got {}x{}",
                r.nrows(),
                r.ncols()
            )));
        }
        if r.clone().cholesky().is_none() || (r[(0, 1)] - r[(1, 0)]).abs() > T::lit(1e-12) {
            return Err(DynamicsError::WeightNotPositiveDefinite);
        }
        Ok(Self { r })
    }

    pub fn r(&self) -> &DMatrix<T> {
        &self.r
    }

    /// Linearization at `x̂` with `û = 0`, built directly from the closed-form
    /// Jacobian.
    pub fn linearize(&self, x_hat: &[T]) -> Result<LtiSystem<T>, DynamicsError> {
        let x = DVector::from_column_slice(x_hat);
        self.linearize_at(&x, &DVector::zeros(2))
    }
}

impl<T: Real> Default for CarModel<T> {
    fn default() -> Self {
        Self {
            r: DMatrix::identity(2, 2),
        }
    }
}

impl<T: Real> NonlinearSystem<T> for CarModel<T> {
    fn state_dim(&self) -> usize {
        Self::STATE_DIM
    }

    fn control_dim(&self) -> usize {
        Self::CONTROL_DIM
    }

    fn dynamics(&self, x: &DVector<T>, u: &DVector<T>) -> DVector<T> {
        DVector::from_column_slice(&car_dynamics(x.as_slice(), u.as_slice()))
    }

    fn jacobian_x(&self, x: &DVector<T>, _u: &DVector<T>) -> DMatrix<T> {
        let (theta, v, kappa) = (x[2], x[3], x[4]);
        let (s, c) = theta.sin_cos();
        let z = T::zero();
        #[rustfmt::skip]
        let a = DMatrix::from_row_slice(5, 5, &[
            z, z, -v * s, c,     z,
            z, z,  v * c, s,     z,
            z, z,  z,     kappa, v,
            z, z,  z,     z,     z,
            z, z,  z,     z,     z,
        ]);
        a
    }

    fn jacobian_u(&self, _x: &DVector<T>, _u: &DVector<T>) -> DMatrix<T> {
        let mut b = DMatrix::zeros(5, 2);
        b[(3, 0)] = T::one();
        b[(4, 1)] = T::one();
        b
    }

    fn control_weight(&self) -> &DMatrix<T> {
        &self.r
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use std::f64::consts::FRAC_PI_2;

    fn v(xs: &[f64]) -> DVector<f64> {
        DVector::from_column_slice(xs)
    }

    /// Central differences of `f` in `x` and `u`.
    fn numeric_jacobians<S: NonlinearSystem<f64>>(
        sys: &S,
        x: &DVector<f64>,
        u: &DVector<f64>,
    ) -> (DMatrix<f64>, DMatrix<f64>) {
        let h = 1e-6;
        let n = x.len();
        let m = u.len();
        let mut jx = DMatrix::zeros(n, n);
        for k in 0..n {
            let mut xp = x.clone();
            let mut xm = x.clone();
            xp[k] += h;
            xm[k] -= h;
            jx.set_column(
                k,
                &((sys.dynamics(&xp, u) - sys.dynamics(&xm, u)) / (2.0 * h)),
            );
        }
        let mut ju = DMatrix::zeros(n, m);
        for k in 0..m {
            let mut up = u.clone();
            let mut um = u.clone();
            up[k] += h;
            um[k] -= h;
            ju.set_column(
                k,
                &((sys.dynamics(x, &up) - sys.dynamics(x, &um)) / (2.0 * h)),
            );
        }
        (jx, ju)
    }

    fn rk4<F: Fn(&DVector<f64>) -> DVector<f64>>(
        f: F,
        x0: &DVector<f64>,
        t: f64,
        steps: usize,
    ) -> DVector<f64> {
        let h = t / steps as f64;
        let mut x = x0.clone();
        for _ in 0..steps {
            let k1 = f(&x);
            let k2 = f(&(&x + &k1 * (h / 2.0)));
            let k3 = f(&(&x + &k2 * (h / 2.0)));
            let k4 = f(&(&x + &k3 * h));
            x += (k1 + k2 * 2.0 + k3 * 2.0 + k4) * (h / 6.0);
        }
        x
    }

    #[test]
    fn car_dynamics_by_substitution() {
        let f = car_dynamics(&[0.0, 0.0, 0.0, 1.0, 0.0], &[0.0, 0.0]);
        assert_eq!(f, [1.0, 0.0, 0.0, 0.0, 0.0]);
        let f = car_dynamics(&[0.0, 0.0, FRAC_PI_2, 2.0, 0.5], &[1.0, -1.0]);
        let expected = [0.0, 2.0, 1.0, 1.0, -1.0];
        for (a, b) in f.iter().zip(expected) {
            assert!((a - b).abs() < 1e-15);
        }
    }

    #[test]
    fn car_linearization_at_unit_speed() {
        let car = CarModel::<f64>::default();
        let sys = car.linearize(&[0.0, 0.0, 0.0, 1.0, 0.0]).unwrap();
        #[rustfmt::skip]
        let a = DMatrix::from_row_slice(5, 5, &[
            0.0, 0.0, 0.0, 1.0, 0.0,
            0.0, 0.0, 1.0, 0.0, 0.0,
            0.0, 0.0, 0.0, 0.0, 1.0,
            0.0, 0.0, 0.0, 0.0, 0.0,
            0.0, 0.0, 0.0, 0.0, 0.0,
        ]);
        assert_eq!(sys.a(), &a);
        assert_eq!(sys.c(), &DVector::zeros(5));
        assert_eq!(sys.b()[(3, 0)], 1.0);
        assert_eq!(sys.b()[(4, 1)], 1.0);
        assert!(sys.is_controllable());
        assert_eq!(sys.nilpotency().index, Some(3));
    }

    #[test]
    fn car_at_standstill_is_not_controllable() {
        let car = CarModel::<f64>::default();
        let sys = car.linearize(&[3.0, 4.0, 0.3, 0.0, 0.1]).unwrap();
        assert!(sys.controllability_rank() < 5);
        assert!(sys.ensure_controllable().is_err());
    }

    #[test]
    fn affine_system_linearizes_to_itself() {
        let a = DMatrix::from_row_slice(2, 2, &[0.0, 1.0, 0.0, 0.0]);
        let b = DMatrix::from_column_slice(2, 1, &[0.0, 1.0]);
        let c = v(&[0.5, -0.25]);
        let sys = LtiSystem::new(a, b, c, DMatrix::identity(1, 1)).unwrap();
        let wrapped = AffineSystem(sys.clone());
        let lin = wrapped.linearize_at(&v(&[3.0, -2.0]), &v(&[0.7])).unwrap();
        assert!((lin.a() - sys.a()).norm() < 1e-15);
        assert!((lin.b() - sys.b()).norm() < 1e-15);
        assert!((lin.c() - sys.c()).norm() < 1e-14);
    }

    #[test]
    fn car_weight_must_be_positive_definite() {
        assert!(
            CarModel::new(DMatrix::<f64>::from_row_slice(2, 2, &[1.0, 0.0, 0.0, -1.0])).is_err()
        );
        assert!(CarModel::new(DMatrix::<f64>::identity(3, 3)).is_err());
        assert!(CarModel::new(DMatrix::<f64>::identity(2, 2) * 0.5).is_ok());
    }

    #[test]
    fn linearization_error_is_second_order() {
        // along the straight line of x̂ with κ̂ = 0, u = 0 the linearization
        // is exact, so the endpoint mismatch comes from the perturbation only
        let car = CarModel::<f64>::default();
        let x_hat = v(&[10.0, 20.0, 0.4, 2.0, 0.0]);
        let lin = car.linearize(x_hat.as_slice()).unwrap();
        let u = DVector::zeros(2);
        let dir = v(&[0.0, 0.0, 0.6, -0.5, 0.62]).normalize();
        let horizon = 0.5;
        let mismatch = |delta: f64| {
            let x0 = &x_hat + &dir * delta;
            let true_flow = rk4(|x| car.dynamics(x, &u), &x0, horizon, 400);
            let lin_flow = rk4(|x| lin.derivative(x, &u), &x0, horizon, 400);
            (true_flow - lin_flow).norm()
        };
        let mut prev = mismatch(0.08);
        for k in 1..5 {
            let next = mismatch(0.08 / 2f64.powi(k));
            let ratio = prev / next;
            assert!((3.6..4.4).contains(&ratio), "ratio {ratio}");
            prev = next;
        }
    }

    proptest! {
        #[test]
        fn car_jacobians_match_finite_differences(
            px in 0.0..200.0f64, py in 0.0..100.0f64, theta in -3.2..3.2f64,
            speed in 0.1..10.0f64, kappa in -0.25..0.25f64,
            uv in -2.0..2.0f64, uk in -0.5..0.5f64,
        ) {
            let car = CarModel::<f64>::default();
            let x = v(&[px, py, theta, speed, kappa]);
            let u = v(&[uv, uk]);
            let (jx, ju) = numeric_jacobians(&car, &x, &u);
            let ax = car.jacobian_x(&x, &u);
            let au = car.jacobian_u(&x, &u);
            prop_assert!((&ax - &jx).amax() < 1e-6 * (1.0 + ax.amax()));
            prop_assert!((&au - &ju).amax() < 1e-6);
            // the linearization reproduces f at the expansion point
            let lin = car.linearize_at(&x, &u).unwrap();
            prop_assert!((lin.derivative(&x, &u) - car.dynamics(&x, &u)).norm() < 1e-9 * (1.0 + speed));
            prop_assert!(lin.is_controllable());
        }
    }
}

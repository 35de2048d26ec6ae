//! Free state and control spaces: box bounds plus axis-aligned workspace
//! obstacles around a disk (or sphere) shaped robot.

use nalgebra::DVector;
use rand::Rng;
use thiserror::Error;

use crate::scalar::Real;
use crate::steer::Trajectory;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum WorldError {
    #[error("{what}: expected length {expected}, got {got}")]
    Dimension {
        what: &'static str,
        expected: usize,
        got: usize,
    },
    #[error("{what}: lower bound exceeds upper bound in dimension {dim}")]
    InvertedBounds { what: &'static str, dim: usize },
    #[error("obstacle {index} has no positive extent in workspace dimension {dim}")]
    DegenerateObstacle { index: usize, dim: usize },
    #[error("position dimension {dim} is out of range or repeated")]
    PositionDims { dim: usize },
    #[error("angle dimension {dim} is out of range")]
    AngleDims { dim: usize },
    #[error("robot radius must be finite and non-negative, got {0}")]
    RobotRadius(f64),
    #[error("sampling bounds must be finite (dimension {dim})")]
    UnboundedSampling { dim: usize },
}

/// Axis-aligned box in workspace coordinates.
#[derive(Debug, Clone, PartialEq)]
pub struct AaBox<T: Real> {
    pub min: DVector<T>,
    pub max: DVector<T>,
}

impl<T: Real> AaBox<T> {
    pub fn new(min: DVector<T>, max: DVector<T>) -> Self {
        Self { min, max }
    }

    /// Squared Euclidean distance from `p` to the closed box.
    pub fn distance_squared(&self, p: impl Iterator<Item = T>) -> T {
        p.zip(self.min.iter().zip(self.max.iter()))
            .fold(T::zero(), |acc, (x, (lo, hi))| {
                let gap = if x < *lo {
                    *lo - x
                } else if x > *hi {
                    x - *hi
                } else {
                    T::zero()
                };
                acc + gap * gap
            })
    }

    /// Whether `p` lies in the open interior.
    pub fn contains_strictly(&self, p: impl Iterator<Item = T>) -> bool {
        p.zip(self.min.iter().zip(self.max.iter()))
            .all(|(x, (lo, hi))| x > *lo && x < *hi)
    }
}

/// Wraps an angle into `[−π, π)`.
pub fn wrap_angle<T: Real>(a: T) -> T {
    let two_pi = T::two_pi();
    a - two_pi * ((a + T::pi()) / two_pi).floor()
}

/// Bounds, obstacles and robot footprint. Checks are pure.
///
/// The robot is a disk (sphere) of `robot_radius` centred at the state's
/// `position_dims` projection; it collides with an obstacle when some point
/// of the open disk lies in the box. Dimensions listed in `angle_dims` are
/// wrapped into `[−π, π)` before the bound check. Sampling draws uniformly
/// from the state bounds, or from `sample_lower`/`sample_upper` when set.
#[derive(Debug, Clone, PartialEq)]
pub struct Environment<T: Real> {
    pub state_lower: DVector<T>,
    pub state_upper: DVector<T>,
    pub control_lower: DVector<T>,
    pub control_upper: DVector<T>,
    pub obstacles: Vec<AaBox<T>>,
    pub position_dims: Vec<usize>,
    pub robot_radius: T,
    pub angle_dims: Vec<usize>,
    pub sample_lower: Option<DVector<T>>,
    pub sample_upper: Option<DVector<T>>,
}

impl<T: Real> Environment<T> {
    /// Unbounded obstacle-free environment for `n` states and `m` controls.
    pub fn unbounded(n: usize, m: usize) -> Self {
        Self {
            state_lower: DVector::from_element(n, -T::infinity()),
            state_upper: DVector::from_element(n, T::infinity()),
            control_lower: DVector::from_element(m, -T::infinity()),
            control_upper: DVector::from_element(m, T::infinity()),
            obstacles: Vec::new(),
            position_dims: Vec::new(),
            robot_radius: T::zero(),
            angle_dims: Vec::new(),
            sample_lower: None,
            sample_upper: None,
        }
    }

    pub fn state_dim(&self) -> usize {
        self.state_lower.len()
    }

    pub fn control_dim(&self) -> usize {
        self.control_lower.len()
    }

    pub fn validate(&self) -> Result<(), WorldError> {
        let n = self.state_dim();
        let m = self.control_dim();
        let dims = |what, expected, got| {
            if expected == got {
                Ok(())
            } else {
                Err(WorldError::Dimension {
                    what,
                    expected,
                    got,
                })
            }
        };
        dims("state_upper", n, self.state_upper.len())?;
        dims("control_upper", m, self.control_upper.len())?;
        let ordered = |what, lo: &DVector<T>, hi: &DVector<T>| match lo
            .iter()
            .zip(hi.iter())
            .position(|(l, h)| !(l <= h))
        {
            Some(dim) => Err(WorldError::InvertedBounds { what, dim }),
            None => Ok(()),
        };
        ordered("state bounds", &self.state_lower, &self.state_upper)?;
        ordered("control bounds", &self.control_lower, &self.control_upper)?;

        for (k, &d) in self.position_dims.iter().enumerate() {
            if d >= n || self.position_dims[..k].contains(&d) {
                return Err(WorldError::PositionDims { dim: d });
            }
        }
        if let Some(&d) = self.angle_dims.iter().find(|&&d| d >= n) {
            return Err(WorldError::AngleDims { dim: d });
        }
        let w = self.position_dims.len();
        for (index, ob) in self.obstacles.iter().enumerate() {
            dims("obstacle min corner", w, ob.min.len())?;
            dims("obstacle max corner", w, ob.max.len())?;
            if let Some(dim) = (0..w).find(|&k| !(ob.min[k] < ob.max[k])) {
                return Err(WorldError::DegenerateObstacle { index, dim });
            }
        }
        if !(self.robot_radius >= T::zero()) || !self.robot_radius.is_finite_value() {
            return Err(WorldError::RobotRadius(self.robot_radius.to_f64_lossy()));
        }
        if let Some(lo) = &self.sample_lower {
            dims("sample_lower", n, lo.len())?;
        }
        if let Some(hi) = &self.sample_upper {
            dims("sample_upper", n, hi.len())?;
        }
        let (lo, hi) = self.sample_bounds();
        ordered("sample bounds", lo, hi)?;
        Ok(())
    }

    /// Bounds used by [`Self::sample_uniform`].
    pub fn sample_bounds(&self) -> (&DVector<T>, &DVector<T>) {
        (
            self.sample_lower.as_ref().unwrap_or(&self.state_lower),
            self.sample_upper.as_ref().unwrap_or(&self.state_upper),
        )
    }

    /// Fails when a sampling bound is infinite.
    pub fn check_sampling(&self) -> Result<(), WorldError> {
        let (lo, hi) = self.sample_bounds();
        match (0..lo.len()).find(|&k| !lo[k].is_finite_value() || !hi[k].is_finite_value()) {
            Some(dim) => Err(WorldError::UnboundedSampling { dim }),
            None => Ok(()),
        }
    }

    /// Uniform draw from the sampling bounds (not rejection-filtered).
    pub fn sample_uniform<R: Rng + ?Sized>(&self, rng: &mut R) -> DVector<T> {
        let (lo, hi) = self.sample_bounds();
        DVector::from_fn(lo.len(), |k, _| {
            let u: f64 = rng.gen();
            lo[k] + (hi[k] - lo[k]) * T::lit(u)
        })
    }

    fn within_state_bounds(&self, x: &[T]) -> bool {
        x.iter().enumerate().all(|(k, v)| {
            let v = if self.angle_dims.contains(&k) {
                wrap_angle(*v)
            } else {
                *v
            };
            v >= self.state_lower[k] && v <= self.state_upper[k]
        })
    }

    /// Whether the robot at the projected position of `x` touches an
    /// obstacle.
    pub fn in_collision(&self, x: &[T]) -> bool {
        let r2 = self.robot_radius * self.robot_radius;
        let pos = || self.position_dims.iter().map(|&d| x[d]);
        self.obstacles
            .iter()
            .any(|ob| ob.contains_strictly(pos()) || ob.distance_squared(pos()) < r2)
    }

    pub fn state_free(&self, x: &[T]) -> bool {
        debug_assert_eq!(x.len(), self.state_dim());
        self.within_state_bounds(x) && !self.in_collision(x)
    }

    /// Closed-interval bound check.
    pub fn control_free(&self, u: &[T]) -> bool {
        debug_assert_eq!(u.len(), self.control_dim());
        u.iter()
            .enumerate()
            .all(|(k, v)| *v >= self.control_lower[k] && *v <= self.control_upper[k])
    }

    /// One trajectory sample.
    pub fn sample_free(&self, x: &[T], u: &[T]) -> bool {
        self.state_free(x) && self.control_free(u)
    }

    /// Every sample is state- and control-free. Checking is discrete at the
    /// trajectory's sample resolution.
    pub fn trajectory_free(&self, traj: &Trajectory<T>) -> bool {
        traj.samples
            .iter()
            .all(|s| self.sample_free(s.x.as_slice(), s.u.as_slice()))
    }
}

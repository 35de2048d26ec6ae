use nalgebra::DMatrix;

use super::Poly;
use crate::scalar::Real;

/// Dense matrix whose entries are polynomials in one variable.
#[derive(Debug, Clone, PartialEq)]
pub struct PolyMatrix<T: Real> {
    rows: usize,
    cols: usize,
    entries: Vec<Poly<T>>,
}

impl<T: Real> PolyMatrix<T> {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self {
            rows,
            cols,
            entries: vec![Poly::zero(); rows * cols],
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut out = Self::zeros(n, n);
        for i in 0..n {
            out.entries[i * n + i] = Poly::constant(T::one());
        }
        out
    }

    /// `Σ_k C_k t^k` from constant matrix coefficients.
    pub fn from_coefficients(coeffs: &[DMatrix<T>]) -> Self {
        let (rows, cols) = coeffs.first().map(|c| c.shape()).unwrap_or((0, 0));
        let entries = (0..rows * cols)
            .map(|idx| {
                let (i, j) = (idx / cols, idx % cols);
                Poly::new(coeffs.iter().map(|c| c[(i, j)]).collect())
            })
            .collect();
        Self {
            rows,
            cols,
            entries,
        }
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn get(&self, i: usize, j: usize) -> &Poly<T> {
        &self.entries[i * self.cols + j]
    }

    pub fn set(&mut self, i: usize, j: usize, p: Poly<T>) {
        self.entries[i * self.cols + j] = p;
    }

    pub fn transpose(&self) -> Self {
        let mut out = Self::zeros(self.cols, self.rows);
        for i in 0..self.rows {
            for j in 0..self.cols {
                out.set(j, i, self.get(i, j).clone());
            }
        }
        out
    }

    pub fn mul(&self, rhs: &Self) -> Self {
        assert_eq!(self.cols, rhs.rows, "polynomial matrix shape mismatch");
        let mut out = Self::zeros(self.rows, rhs.cols);
        for i in 0..self.rows {
            for j in 0..rhs.cols {
                let mut acc = Poly::zero();
                for k in 0..self.cols {
                    let a = self.get(i, k);
                    let b = rhs.get(k, j);
                    if a.is_zero() || b.is_zero() {
                        continue;
                    }
                    acc = &acc + &(a * b);
                }
                out.set(i, j, acc);
            }
        }
        out
    }

    pub fn add_scaled_identity(&mut self, p: &Poly<T>) {
        assert_eq!(self.rows, self.cols);
        for i in 0..self.rows {
            let e = &self.entries[i * self.cols + i] + p;
            self.entries[i * self.cols + i] = e;
        }
    }

    pub fn trace(&self) -> Poly<T> {
        (0..self.rows.min(self.cols)).fold(Poly::zero(), |acc, i| &acc + self.get(i, i))
    }

    pub fn scale(&self, s: T) -> Self {
        Self {
            rows: self.rows,
            cols: self.cols,
            entries: self.entries.iter().map(|p| p.scale(s)).collect(),
        }
    }

    pub fn eval(&self, t: T) -> DMatrix<T> {
        DMatrix::from_fn(self.rows, self.cols, |i, j| self.get(i, j).eval(t))
    }

    pub fn max_degree(&self) -> Option<usize> {
        self.entries.iter().filter_map(|p| p.degree()).max()
    }

    /// Determinant and adjugate by the Faddeev–LeVerrier recursion, which
    /// needs only ring operations and division by small integers, so it
    /// works over polynomial entries.
    pub fn adjugate_and_determinant(&self) -> (PolyMatrix<T>, Poly<T>) {
        assert_eq!(self.rows, self.cols, "adjugate of a non-square matrix");
        let (adj, det) = faddeev_leverrier(&self.entries, self.rows);
        (
            Self {
                rows: self.rows,
                cols: self.cols,
                entries: adj,
            },
            det,
        )
    }
}

/// Commutative ring operations needed by [`faddeev_leverrier`].
pub trait RingElem<T: Real>: Clone {
    fn zero() -> Self;
    fn one() -> Self;
    fn is_zero(&self) -> bool;
    fn add(&self, rhs: &Self) -> Self;
    fn mul(&self, rhs: &Self) -> Self;
    fn scale(&self, s: T) -> Self;
}

impl<T: Real> RingElem<T> for Poly<T> {
    fn zero() -> Self {
        Poly::zero()
    }
    fn one() -> Self {
        Poly::constant(T::one())
    }
    fn is_zero(&self) -> bool {
        Poly::is_zero(self)
    }
    fn add(&self, rhs: &Self) -> Self {
        self + rhs
    }
    fn mul(&self, rhs: &Self) -> Self {
        self * rhs
    }
    fn scale(&self, s: T) -> Self {
        Poly::scale(self, s)
    }
}

/// Row-major `n×n` product over a ring.
fn ring_matmul<T: Real, E: RingElem<T>>(a: &[E], b: &[E], n: usize) -> Vec<E> {
    let mut out = vec![E::zero(); n * n];
    for i in 0..n {
        for k in 0..n {
            let aik = &a[i * n + k];
            if aik.is_zero() {
                continue;
            }
            for j in 0..n {
                let bkj = &b[k * n + j];
                if bkj.is_zero() {
                    continue;
                }
                out[i * n + j] = out[i * n + j].add(&aik.mul(bkj));
            }
        }
    }
    out
}

/// Adjugate and determinant of a row-major `n×n` matrix over a ring:
/// `M_k = G·M_{k−1} + a_{k−1}·I`, `a_k = −tr(G·M_k)/k`, ending with
/// `det G = (−1)ⁿ a_n` and `adj G = (−1)^{n+1} M_n`.
pub fn faddeev_leverrier<T: Real, E: RingElem<T>>(g: &[E], n: usize) -> (Vec<E>, E) {
    assert_eq!(g.len(), n * n);
    if n == 0 {
        return (Vec::new(), E::one());
    }
    let mut m = vec![E::zero(); n * n];
    let mut coeff = E::one();
    for k in 1..=n {
        let mut next = ring_matmul(g, &m, n);
        for i in 0..n {
            next[i * n + i] = next[i * n + i].add(&coeff);
        }
        m = next;
        let gm = ring_matmul(g, &m, n);
        let trace = (0..n).fold(E::zero(), |acc, i| acc.add(&gm[i * n + i]));
        coeff = trace.scale(-T::one() / T::from_usize_lossy(k));
    }
    let sign = if n.is_multiple_of(2) {
        T::one()
    } else {
        -T::one()
    };
    let det = coeff.scale(sign);
    let adj = m.iter().map(|e| e.scale(-sign)).collect();
    (adj, det)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn adjugate_of_constant_matrix() {
        let g =
            DMatrix::<f64>::from_row_slice(3, 3, &[4.0, 1.0, 0.5, 1.0, 3.0, 0.2, 0.5, 0.2, 2.0]);
        let pm = PolyMatrix::from_coefficients(std::slice::from_ref(&g));
        let (adj, det) = pm.adjugate_and_determinant();
        let det_v = det.eval(0.0);
        assert!((det_v - g.determinant()).abs() < 1e-12);
        let prod = adj.eval(0.0) * &g;
        assert!((prod - DMatrix::identity(3, 3) * det_v).norm() < 1e-11);
    }

    #[test]
    fn adjugate_of_gramian_polynomial() {
        // G[t] for the 1-D double integrator
        let g = PolyMatrix::<f64>::from_coefficients(&[
            DMatrix::zeros(2, 2),
            DMatrix::from_row_slice(2, 2, &[0.0, 0.0, 0.0, 1.0]),
            DMatrix::from_row_slice(2, 2, &[0.0, 0.5, 0.5, 0.0]),
            DMatrix::from_row_slice(2, 2, &[1.0 / 3.0, 0.0, 0.0, 0.0]),
        ]);
        let (adj, det) = g.adjugate_and_determinant();
        // det = t⁴/12
        assert_eq!(det.degree(), Some(4));
        assert!((det.coeff(4) - 1.0 / 12.0).abs() < 1e-15);
        assert!(det.coeffs()[..4].iter().all(|c| *c == 0.0));
        for t in [0.3, 1.0, 2.7] {
            let lhs = adj.eval(t) * g.eval(t);
            let rhs = DMatrix::identity(2, 2) * det.eval(t);
            assert!((lhs - rhs).norm() < 1e-12 * (1.0 + det.eval(t).abs()));
        }
    }
}

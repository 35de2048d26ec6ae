//! Polynomial roots as eigenvalues of a balanced companion matrix, computed
//! with the Francis double-shift QR iteration. The companion matrix is
//! already upper Hessenberg, so no reduction step is needed.

use num_complex::Complex;
use thiserror::Error;

use crate::scalar::Real;

const MAX_ITERATIONS_PER_ROOT: usize = 60;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum RootError {
    #[error("the zero polynomial has no isolated roots")]
    ZeroPolynomial,
    #[error("QR iteration did not converge")]
    NoConvergence,
    #[error("non-finite polynomial coefficient")]
    NonFinite,
}

/// Eigenvalues of the companion matrix of `coeffs` (ascending order, nonzero
/// leading coefficient).
pub fn companion_eigenvalues<T: Real>(coeffs: &[T]) -> Result<Vec<Complex<T>>, RootError> {
    let Some(&lead) = coeffs.last() else {
        return Err(RootError::ZeroPolynomial);
    };
    if lead == T::zero() {
        return Err(RootError::ZeroPolynomial);
    }
    if coeffs.iter().any(|c| !c.is_finite_value()) {
        return Err(RootError::NonFinite);
    }
    let deg = coeffs.len() - 1;
    match deg {
        0 => return Ok(Vec::new()),
        1 => return Ok(vec![Complex::new(-coeffs[0] / lead, T::zero())]),
        _ => {}
    }

    // substitute t = s·σ with s a power of two near the geometric mean of the
    // root magnitudes; exact in binary floating point
    let scale = if coeffs[0] != T::zero() {
        let ratio = (coeffs[0] / lead).abs();
        let log2 = ratio.ln() / (T::from_usize_lossy(deg) * T::ln_2());
        T::lit(2.0).powf(log2.round())
    } else {
        T::one()
    };

    let mut scaled = Vec::with_capacity(deg + 1);
    let mut s_k = T::one();
    for c in coeffs {
        scaled.push(*c * s_k);
        s_k *= scale;
    }
    let lead_scaled = scaled[deg];

    let n = deg;
    let mut a = vec![T::zero(); n * n];
    for j in 0..n {
        a[j] = -scaled[n - 1 - j] / lead_scaled;
    }
    for i in 1..n {
        a[i * n + i - 1] = T::one();
    }
    balance(&mut a, n);
    let eig = hessenberg_eigenvalues(&mut a, n)?;
    Ok(eig.into_iter().map(|z| z * scale).collect())
}

/// Parlett–Reinsch balancing by powers of two (in place).
fn balance<T: Real>(a: &mut [T], n: usize) {
    let radix = T::lit(2.0);
    let sqrdx = radix * radix;
    let mut done = false;
    let mut sweeps = 0;
    while !done && sweeps < 100 {
        done = true;
        sweeps += 1;
        for i in 0..n {
            let mut r = T::zero();
            let mut c = T::zero();
            for j in 0..n {
                if j != i {
                    c += a[j * n + i].abs();
                    r += a[i * n + j].abs();
                }
            }
            if c != T::zero() && r != T::zero() {
                let mut g = r / radix;
                let mut f = T::one();
                let s = c + r;
                while c < g {
                    f *= radix;
                    c *= sqrdx;
                }
                g = r * radix;
                while c > g {
                    f /= radix;
                    c /= sqrdx;
                }
                if (c + r) / f < T::lit(0.95) * s {
                    done = false;
                    let g = T::one() / f;
                    for j in 0..n {
                        a[i * n + j] *= g;
                    }
                    for j in 0..n {
                        a[j * n + i] *= f;
                    }
                }
            }
        }
    }
}

#[inline]
fn sign<T: Real>(a: T, b: T) -> T {
    if b >= T::zero() {
        a.abs()
    } else {
        -a.abs()
    }
}

/// Eigenvalues of an upper Hessenberg matrix (row-major, destroyed).
fn hessenberg_eigenvalues<T: Real>(a: &mut [T], n: usize) -> Result<Vec<Complex<T>>, RootError> {
    let idx = |i: isize, j: isize| (i as usize) * n + j as usize;
    let eps = T::eps();
    let zero = T::zero();
    let mut wr = vec![Complex::new(zero, zero); n];

    let mut anorm = zero;
    for i in 0..n {
        for j in i.saturating_sub(1)..n {
            anorm += a[i * n + j].abs();
        }
    }

    let mut nn = n as isize - 1;
    let mut t = zero;
    let (mut p, mut q, mut r);
    let (mut x, mut y, mut z, mut w);
    while nn >= 0 {
        let mut its = 0usize;
        loop {
            // look for a single small subdiagonal element
            let mut l = nn;
            while l > 0 {
                let mut s = a[idx(l - 1, l - 1)].abs() + a[idx(l, l)].abs();
                if s == zero {
                    s = anorm;
                }
                if a[idx(l, l - 1)].abs() <= eps * s {
                    a[idx(l, l - 1)] = zero;
                    break;
                }
                l -= 1;
            }
            x = a[idx(nn, nn)];
            if l == nn {
                wr[nn as usize] = Complex::new(x + t, zero);
                nn -= 1;
            } else {
                y = a[idx(nn - 1, nn - 1)];
                w = a[idx(nn, nn - 1)] * a[idx(nn - 1, nn)];
                if l == nn - 1 {
                    p = T::lit(0.5) * (y - x);
                    q = p * p + w;
                    z = q.abs().sqrt();
                    x += t;
                    if q >= zero {
                        z = p + sign(z, p);
                        let hi = x + z;
                        let lo = if z != zero { x - w / z } else { hi };
                        wr[(nn - 1) as usize] = Complex::new(hi, zero);
                        wr[nn as usize] = Complex::new(lo, zero);
                    } else {
                        wr[nn as usize] = Complex::new(x + p, -z);
                        wr[(nn - 1) as usize] = Complex::new(x + p, z);
                    }
                    nn -= 2;
                } else {
                    if its == MAX_ITERATIONS_PER_ROOT {
                        return Err(RootError::NoConvergence);
                    }
                    if its.is_multiple_of(10) && its > 0 {
                        // exceptional shift
                        t += x;
                        for i in 0..=nn {
                            a[idx(i, i)] -= x;
                        }
                        let s = a[idx(nn, nn - 1)].abs() + a[idx(nn - 1, nn - 2)].abs();
                        x = T::lit(0.75) * s;
                        y = x;
                        w = T::lit(-0.4375) * s * s;
                    }
                    its += 1;
                    let mut m = nn - 2;
                    loop {
                        z = a[idx(m, m)];
                        r = x - z;
                        let s0 = y - z;
                        p = (r * s0 - w) / a[idx(m + 1, m)] + a[idx(m, m + 1)];
                        q = a[idx(m + 1, m + 1)] - z - r - s0;
                        r = a[idx(m + 2, m + 1)];
                        let s = p.abs() + q.abs() + r.abs();
                        p /= s;
                        q /= s;
                        r /= s;
                        if m == l {
                            break;
                        }
                        let u = a[idx(m, m - 1)].abs() * (q.abs() + r.abs());
                        let v = p.abs()
                            * (a[idx(m - 1, m - 1)].abs() + z.abs() + a[idx(m + 1, m + 1)].abs());
                        if u <= eps * v {
                            break;
                        }
                        m -= 1;
                    }
                    for i in m..(nn - 1) {
                        a[idx(i + 2, i)] = zero;
                        if i != m {
                            a[idx(i + 2, i - 1)] = zero;
                        }
                    }
                    let mut k = m;
                    while k < nn {
                        if k != m {
                            p = a[idx(k, k - 1)];
                            q = a[idx(k + 1, k - 1)];
                            r = zero;
                            if k + 1 != nn {
                                r = a[idx(k + 2, k - 1)];
                            }
                            x = p.abs() + q.abs() + r.abs();
                            if x != zero {
                                p /= x;
                                q /= x;
                                r /= x;
                            }
                        }
                        let s = sign((p * p + q * q + r * r).sqrt(), p);
                        if s != zero {
                            if k == m {
                                if l != m {
                                    a[idx(k, k - 1)] = -a[idx(k, k - 1)];
                                }
                            } else {
                                a[idx(k, k - 1)] = -s * x;
                            }
                            p += s;
                            x = p / s;
                            y = q / s;
                            z = r / s;
                            q /= p;
                            r /= p;
                            for j in k..=nn {
                                p = a[idx(k, j)] + q * a[idx(k + 1, j)];
                                if k + 1 != nn {
                                    p += r * a[idx(k + 2, j)];
                                    a[idx(k + 2, j)] -= p * z;
                                }
                                a[idx(k + 1, j)] -= p * y;
                                a[idx(k, j)] -= p * x;
                            }
                            let mmin = if nn < k + 3 { nn } else { k + 3 };
                            for i in l..=mmin {
                                p = x * a[idx(i, k)] + y * a[idx(i, k + 1)];
                                if k + 1 != nn {
                                    p += z * a[idx(i, k + 2)];
                                    a[idx(i, k + 2)] -= p * r;
                                }
                                a[idx(i, k + 1)] -= p * q;
                                a[idx(i, k)] -= p;
                            }
                        }
                        k += 1;
                    }
                }
            }
            if l >= nn - 1 {
                break;
            }
        }
    }
    Ok(wr)
}

/// Buffers for [`sign_change_roots`].
#[derive(Debug, Clone)]
pub struct IsolationScratch<T> {
    /// Successive derivatives, each ascending; `derivs[k]` is the `k`-th.
    derivs: Vec<Vec<T>>,
    breaks: Vec<T>,
    roots: Vec<T>,
    /// Whether each entry of `roots` is a crossing from negative to
    /// positive.
    rising: Vec<bool>,
}

impl<T> Default for IsolationScratch<T> {
    fn default() -> Self {
        Self {
            derivs: Vec::new(),
            breaks: Vec::new(),
            roots: Vec::new(),
            rising: Vec::new(),
        }
    }
}

impl<T: Real> IsolationScratch<T> {
    pub fn roots(&self) -> &[T] {
        &self.roots
    }

    /// Roots where the polynomial crosses from negative to positive.
    pub fn rising_roots(&self) -> impl Iterator<Item = T> + '_ {
        self.roots
            .iter()
            .zip(&self.rising)
            .filter(|(_, r)| **r)
            .map(|(t, _)| *t)
    }
}

/// Fujiwara's bound on the magnitude of every root.
fn root_bound<T: Real>(p: &[T]) -> T {
    let d = p.len() - 1;
    let lead = p[d].abs();
    let mut bound = T::zero();
    for k in 1..=d {
        let c = (p[d - k] / lead).abs();
        let c = if k == d { c / T::lit(2.0) } else { c };
        if c > T::zero() {
            bound = bound.max(c.powf(T::one() / T::from_usize_lossy(k)));
        }
    }
    bound * T::lit(2.0)
}

/// The roots of `p` (ascending coefficients, nonzero leading coefficient)
/// in `(lo, ∞)` at which `p` changes sign, ascending, left in `s`.
///
/// Roots of `p′` split `(lo, ∞)` into intervals on which `p` is monotone, so
/// each holds at most one root; the derivatives are processed from the
/// linear one upward. Roots of even multiplicity are not reported.
pub fn sign_change_roots<T: Real>(
    p: &[T],
    lo: T,
    s: &mut IsolationScratch<T>,
) -> Result<(), RootError> {
    s.roots.clear();
    s.rising.clear();
    let Some(&lead) = p.last() else {
        return Err(RootError::ZeroPolynomial);
    };
    if lead == T::zero() {
        return Err(RootError::ZeroPolynomial);
    }
    if p.iter().any(|c| !c.is_finite_value()) {
        return Err(RootError::NonFinite);
    }
    let d = p.len() - 1;
    if d == 0 {
        return Ok(());
    }
    let hi = root_bound(p).max(lo) * T::lit(1.5) + T::one();
    if s.derivs.len() < d {
        s.derivs.resize(d, Vec::new());
    }
    s.derivs[0].clear();
    s.derivs[0].extend_from_slice(p);
    for k in 1..d {
        let (done, rest) = s.derivs.split_at_mut(k);
        let prev = &done[k - 1];
        let next = &mut rest[0];
        next.clear();
        next.extend(
            prev.iter()
                .enumerate()
                .skip(1)
                .map(|(i, c)| *c * T::from_usize_lossy(i)),
        );
    }
    s.breaks.clear();
    for k in (0..d).rev() {
        let q = &s.derivs[k];
        let dq = if k + 1 < d {
            Some(&s.derivs[k + 1][..])
        } else {
            None
        };
        s.roots.clear();
        s.rising.clear();
        let mut a = lo;
        let mut fa = super::horner(q, a);
        for idx in 0..=s.breaks.len() {
            let b = if idx < s.breaks.len() {
                s.breaks[idx]
            } else {
                hi
            };
            let fb = super::horner(q, b);
            if (fa < T::zero() && fb > T::zero()) || (fa > T::zero() && fb < T::zero()) {
                let slope = match dq {
                    Some(dq) => Slope::Poly(dq),
                    None => Slope::Constant(q[1]),
                };
                s.roots.push(bracketed_root(q, slope, a, b, fa));
                s.rising.push(fa < T::zero());
            } else if fb == T::zero() && b < hi {
                // exact zero on a breakpoint: a crossing only if the sign
                // on the far side differs
                let c = if idx + 1 < s.breaks.len() {
                    s.breaks[idx + 1]
                } else {
                    hi
                };
                let fc = super::horner(q, (b + c) / T::lit(2.0));
                if (fa < T::zero()) != (fc < T::zero()) && fa != T::zero() && fc != T::zero() {
                    s.roots.push(b);
                    s.rising.push(fa < T::zero());
                }
            }
            a = b;
            fa = fb;
        }
        std::mem::swap(&mut s.breaks, &mut s.roots);
    }
    std::mem::swap(&mut s.breaks, &mut s.roots);
    Ok(())
}

enum Slope<'a, T> {
    Poly(&'a [T]),
    Constant(T),
}

/// Root of `q` in `[a, b]` where `q(a)` and `q(b)` have opposite signs:
/// Newton steps, replaced by bisection whenever a step would leave the
/// bracket or shrink more slowly than bisection.
fn bracketed_root<T: Real>(q: &[T], slope: Slope<'_, T>, mut a: T, mut b: T, fa: T) -> T {
    let neg_at_a = fa < T::zero();
    let eval = |x: T| {
        let dfx = match slope {
            Slope::Poly(dq) => super::horner(dq, x),
            Slope::Constant(c) => c,
        };
        (super::horner(q, x), dfx)
    };
    let two = T::lit(2.0);
    let mut x = (a + b) / two;
    let mut dx_old = b - a;
    let mut dx = dx_old;
    let (mut f, mut df) = eval(x);
    for _ in 0..200 {
        if f == T::zero() {
            return x;
        }
        if (f < T::zero()) == neg_at_a {
            a = x;
        } else {
            b = x;
        }
        let leaves = ((x - b) * df - f) * ((x - a) * df - f) > T::zero();
        if leaves || (two * f).abs() > (dx_old * df).abs() {
            dx_old = dx;
            dx = (b - a) / two;
            x = a + dx;
        } else {
            dx_old = dx;
            dx = f / df;
            x -= dx;
        }
        if dx.abs() <= T::eps() * two * x.abs() || a == b {
            return x;
        }
        (f, df) = eval(x);
    }
    x
}

//! Small dense linear algebra over [`Real`], row-major `n × n` matrices.
//!
//! Lattice generators and weighting matrices are tiny, so plain Gaussian
//! elimination is adequate here.

use crate::scalar::Real;

pub(crate) fn mat_vec<T: Real>(a: &[T], n: usize, x: &[T]) -> Vec<T> {
    (0..n).map(|i| (0..n).map(|j| a[i * n + j] * x[j]).sum()).collect()
}

/// LU factorization with partial pivoting. Returns `None` when singular.
fn lu<T: Real>(a: &[T], n: usize) -> Option<(Vec<T>, Vec<usize>, bool)> {
    let mut m = a.to_vec();
    let mut perm: Vec<usize> = (0..n).collect();
    let mut odd = false;
    for k in 0..n {
        let (piv, best) =
            (k..n)
                .map(|i| (i, m[i * n + k].abs()))
                .fold((k, T::zero()), |acc, cur| if cur.1 > acc.1 { cur } else { acc });
        if best == T::zero() {
            return None;
        }
        if piv != k {
            for j in 0..n {
                m.swap(k * n + j, piv * n + j);
            }
            perm.swap(k, piv);
            odd = !odd;
        }
        let d = m[k * n + k];
        for i in (k + 1)..n {
            let f = m[i * n + k] / d;
            m[i * n + k] = f;
            for j in (k + 1)..n {
                let v = m[k * n + j];
                m[i * n + j] = m[i * n + j] - f * v;
            }
        }
    }
    Some((m, perm, odd))
}

/// `log |det A|`, or `None` for a singular matrix.
pub(crate) fn log_abs_det<T: Real>(a: &[T], n: usize) -> Option<T> {
    let (m, _, _) = lu(a, n)?;
    Some((0..n).map(|i| m[i * n + i].abs().ln()).sum())
}

/// Inverse of `A`, or `None` for a singular matrix.
pub(crate) fn inverse<T: Real>(a: &[T], n: usize) -> Option<Vec<T>> {
    let (m, perm, _) = lu(a, n)?;
    let mut inv = vec![T::zero(); n * n];
    for col in 0..n {
        // solve A x = e_col
        let mut y = vec![T::zero(); n];
        for i in 0..n {
            let mut s = if perm[i] == col { T::one() } else { T::zero() };
            for j in 0..i {
                s = s - m[i * n + j] * y[j];
            }
            y[i] = s;
        }
        for i in (0..n).rev() {
            let mut s = y[i];
            for j in (i + 1)..n {
                s = s - m[i * n + j] * y[j];
            }
            y[i] = s / m[i * n + i];
        }
        for i in 0..n {
            inv[i * n + col] = y[i];
        }
    }
    Some(inv)
}

/// Upper-triangular `R` with `RᵀR = AᵀA` (QR of `A` without forming `Q`),
/// computed by Cholesky of the Gram matrix.
pub(crate) fn gram_cholesky_upper<T: Real>(a: &[T], n: usize) -> Option<Vec<T>> {
    let mut gram = vec![T::zero(); n * n];
    for i in 0..n {
        for j in 0..n {
            gram[i * n + j] = (0..n).map(|k| a[k * n + i] * a[k * n + j]).sum();
        }
    }
    let mut r = vec![T::zero(); n * n];
    for i in 0..n {
        for j in i..n {
            let mut s = gram[i * n + j];
            for k in 0..i {
                s = s - r[k * n + i] * r[k * n + j];
            }
            if i == j {
                if s <= T::zero() {
                    return None;
                }
                r[i * n + i] = s.sqrt();
            } else {
                r[i * n + j] = s / r[i * n + i];
            }
        }
    }
    Some(r)
}

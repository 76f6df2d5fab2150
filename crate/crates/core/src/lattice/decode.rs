//! Nearest-point algorithms for unit-scale lattices.
//!
//! Each decoder writes the lattice point into `point` and its index vector
//! (coordinates in the family's generator basis) into `index`.

use crate::scalar::Real;

/// Round half down, so ties go to the smaller integer.
#[inline]
pub(crate) fn round_half_down<T: Real>(v: T) -> T {
    (v - T::of(0.5)).ceil()
}

#[inline]
fn to_i64<T: Real>(v: T) -> i64 {
    v.to_i64().expect("lattice index fits in i64")
}

pub(crate) fn zn<T: Real>(x: &[T], point: &mut [T], index: &mut [i64]) {
    for ((p, i), &v) in point.iter_mut().zip(index.iter_mut()).zip(x) {
        *p = round_half_down(v);
        *i = to_i64(*p);
    }
}

/// `Dₙ = {z ∈ ℤⁿ : Σz even}`: round, and if the parity is odd re-round the
/// coordinate with the largest rounding error the other way.
///
/// Index basis: `b₁ = 2e₁`, `b_k = e_k + e₁`.
pub(crate) fn dn<T: Real>(x: &[T], point: &mut [T], index: &mut [i64]) {
    let mut parity = 0i64;
    let mut worst = 0;
    let mut worst_err = -T::one();
    for (k, (&v, p)) in x.iter().zip(point.iter_mut()).enumerate() {
        *p = round_half_down(v);
        parity += to_i64(*p);
        let err = (v - *p).abs();
        if err > worst_err {
            worst_err = err;
            worst = k;
        }
    }
    if parity.rem_euclid(2) == 1 {
        let v = x[worst];
        let p = point[worst];
        point[worst] = if v >= p { p + T::one() } else { p - T::one() };
    }
    let z: Vec<i64> = point.iter().map(|&p| to_i64(p)).collect();
    let rest: i64 = z[1..].iter().sum();
    index[0] = (z[0] - rest) / 2;
    index[1..].copy_from_slice(&z[1..]);
}

/// Orthonormal (Helmert) basis of the zero-sum hyperplane of `ℝⁿ⁺¹`:
/// `u_j = (1,…,1, −j, 0,…,0)/√(j(j+1))` with `j` leading ones.
pub(crate) fn helmert_embed<T: Real>(x: &[T], y: &mut [T]) {
    let n = x.len();
    debug_assert_eq!(y.len(), n + 1);
    // y_k = Σ_{j ≥ k} x_j/√(j(j+1)) − (k−1) x_{k−1}/√((k−1)k), 1-based
    let mut suffix = T::zero();
    for k in (1..=n + 1).rev() {
        if k <= n {
            let j = T::of_usize(k);
            suffix = suffix + x[k - 1] / (j * (j + T::one())).sqrt();
        }
        let mut v = suffix;
        if k >= 2 {
            let j = T::of_usize(k - 1);
            v = v - j * x[k - 2] / (j * (j + T::one())).sqrt();
        }
        y[k - 1] = v;
    }
}

/// Coordinates of `y ∈ ℝⁿ⁺¹` in the Helmert basis (the component along
/// `(1,…,1)` is discarded).
pub(crate) fn helmert_project<T: Real>(y: &[T], x: &mut [T]) {
    let n = x.len();
    let mut prefix = T::zero();
    for j in 1..=n {
        prefix = prefix + y[j - 1];
        let jf = T::of_usize(j);
        x[j - 1] = (prefix - jf * y[j]) / (jf * (jf + T::one())).sqrt();
    }
}

/// `Aₙ*` as the projection of `ℤⁿ⁺¹` onto the zero-sum hyperplane.
///
/// Round in `ℝⁿ⁺¹`, then among the `n+1` candidates obtained by bumping the
/// coordinates with the largest residuals pick the one whose projected
/// residual `‖a‖² − (Σa)²/(n+1)` is smallest. Index: `i_k = z_k − z_{n+1}`.
pub(crate) fn an_star<T: Real>(x: &[T], point: &mut [T], index: &mut [i64], scratch: &mut AnStarScratch<T>) {
    let n = x.len();
    let m = T::of_usize(n + 1);
    let y = &mut scratch.y;
    y.resize(n + 1, T::zero());
    helmert_embed(x, y);
    let z = &mut scratch.z;
    z.resize(n + 1, T::zero());
    let a = &mut scratch.a;
    a.resize(n + 1, T::zero());
    let mut s1 = T::zero();
    let mut s2 = T::zero();
    for k in 0..=n {
        z[k] = round_half_down(y[k]);
        a[k] = y[k] - z[k];
        s1 = s1 + a[k];
        s2 = s2 + a[k] * a[k];
    }
    let order = &mut scratch.order;
    order.clear();
    order.extend(0..=n);
    order.sort_by(|&i, &j| a[j].partial_cmp(&a[i]).unwrap().then(i.cmp(&j)));
    let mut best = s2 - s1 * s1 / m;
    let mut best_k = 0;
    for (k, &i) in order.iter().enumerate().take(n) {
        s2 = s2 + T::one() - T::of(2.0) * a[i];
        s1 = s1 - T::one();
        let dist = s2 - s1 * s1 / m;
        if dist < best {
            best = dist;
            best_k = k + 1;
        }
    }
    for &i in order.iter().take(best_k) {
        z[i] = z[i] + T::one();
    }
    helmert_project(z, point);
    let last = to_i64(z[n]);
    for k in 0..n {
        index[k] = to_i64(z[k]) - last;
    }
}

#[derive(Debug, Clone, Default)]
pub(crate) struct AnStarScratch<T> {
    y: Vec<T>,
    z: Vec<T>,
    a: Vec<T>,
    order: Vec<usize>,
}

/// Data for exact decoding of an arbitrary generator by Schnorr–Euchner
/// enumeration.
#[derive(Debug, Clone, PartialEq)]
pub(crate) struct SphereDecoder<T> {
    n: usize,
    /// Generator, row-major, columns are basis vectors.
    g: Vec<T>,
    g_inv: Vec<T>,
    /// Upper-triangular `R` with `RᵀR = GᵀG`.
    r: Vec<T>,
}

impl<T: Real> SphereDecoder<T> {
    pub(crate) fn new(g: Vec<T>, n: usize) -> Option<Self> {
        let g_inv = crate::linalg::inverse(&g, n)?;
        let r = crate::linalg::gram_cholesky_upper(&g, n)?;
        Some(Self { n, g, g_inv, r })
    }

    pub(crate) fn decode(&self, x: &[T], point: &mut [T], index: &mut [i64]) {
        let n = self.n;
        let a = crate::linalg::mat_vec(&self.g_inv, n, x);
        // Babai point by successive rounding gives the initial radius
        let mut cur = vec![T::zero(); n];
        let mut partial = T::zero();
        for k in (0..n).rev() {
            let c = self.center(k, &a, &cur);
            cur[k] = round_half_down(c);
            let rkk = self.r[k * n + k];
            partial = partial + rkk * rkk * (cur[k] - c) * (cur[k] - c);
        }
        let mut best = cur.clone();
        let mut best_dist = partial * (T::one() + T::of(1e-12)) + T::of(1e-300).max(T::min_positive_value());
        self.search(n, &a, &mut cur, T::zero(), &mut best, &mut best_dist);
        for k in 0..n {
            index[k] = to_i64(best[k]);
        }
        let p = crate::linalg::mat_vec(&self.g, n, &best);
        point.copy_from_slice(&p);
    }

    fn center(&self, k: usize, a: &[T], cur: &[T]) -> T {
        let n = self.n;
        let rkk = self.r[k * n + k];
        let mut s = T::zero();
        for j in (k + 1)..n {
            s = s + self.r[k * n + j] * (cur[j] - a[j]);
        }
        a[k] - s / rkk
    }

    /// Depth-first enumeration over levels `level-1, …, 0`, zig-zagging outward
    /// from each level's center.
    fn search(&self, level: usize, a: &[T], cur: &mut [T], partial: T, best: &mut Vec<T>, best_dist: &mut T) {
        if level == 0 {
            if partial < *best_dist {
                *best_dist = partial;
                best.copy_from_slice(cur);
            }
            return;
        }
        let k = level - 1;
        let n = self.n;
        let rkk2 = self.r[k * n + k] * self.r[k * n + k];
        let c = self.center(k, a, cur);
        let start = round_half_down(c);
        // candidates start, start±1, … in order of distance from c
        let mut up = start;
        let mut down = start - T::one();
        loop {
            let du = (up - c) * (up - c) * rkk2;
            let dd = (down - c) * (down - c) * rkk2;
            let (v, d) = if du <= dd { (up, du) } else { (down, dd) };
            if partial + d >= *best_dist {
                break;
            }
            cur[k] = v;
            self.search(k, a, cur, partial + d, best, best_dist);
            if du <= dd {
                up = up + T::one();
            } else {
                down = down - T::one();
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn helmert_is_an_isometry() {
        let x = [0.3, -1.2, 2.5, 0.7];
        let mut y = [0.0; 5];
        helmert_embed(&x, &mut y);
        assert!(y.iter().sum::<f64>().abs() < 1e-12);
        let nx: f64 = x.iter().map(|v| v * v).sum();
        let ny: f64 = y.iter().map(|v| v * v).sum();
        assert!((nx - ny).abs() < 1e-12);
        let mut back = [0.0; 4];
        helmert_project(&y, &mut back);
        for (a, b) in x.iter().zip(&back) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn zn_and_dn_examples() {
        let mut p = [0.0; 2];
        let mut i = [0; 2];
        zn(&[0.4, -1.6], &mut p, &mut i);
        assert_eq!(i, [0, -2]);
        dn(&[0.9, 0.9], &mut p, &mut i);
        assert_eq!(p, [1.0, 1.0]);
        dn(&[0.9, 0.2], &mut p, &mut i);
        assert_eq!(p, [1.0, 1.0]);
        // index reproduces the point in the basis 2e₁, e₂+e₁
        assert_eq!(2 * i[0] + i[1], 1);
        assert_eq!(i[1], 1);
        // ties go down
        zn(&[0.5, -0.5], &mut p, &mut i);
        assert_eq!(i, [0, -1]);
    }

    #[test]
    fn sphere_decoder_on_integer_lattice() {
        let g = vec![1.0, 0.0, 0.0, 1.0];
        let dec = SphereDecoder::new(g, 2).unwrap();
        let mut p = [0.0f64; 2];
        let mut i = [0; 2];
        dec.decode(&[0.4, -1.6], &mut p, &mut i);
        assert_eq!(i, [0, -2]);
        // skewed basis of the same lattice
        let dec = SphereDecoder::new(vec![1.0, 5.0, 0.0, 1.0], 2).unwrap();
        dec.decode(&[0.4, -1.6], &mut p, &mut i);
        assert!((p[0] - 0.0).abs() < 1e-12 && (p[1] + 2.0).abs() < 1e-12);
    }
}

//! Distortion measures: evaluation, radius-of-distortion inversion and the
//! log-volume of distortion balls.
//!
//! Difference measures on `ℝⁿ` all have the form `𝖽(n^{-1/p} ‖W(x − y)‖_p)` with
//! a scalar profile `𝖽(r)`. The scaled power kinds use `𝖽(r) = r^s`; mean-square
//! error is the `p = s = 2` member. Finite-alphabet kinds carry an explicit
//! letter distortion matrix over symbols `0..m`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg;
use crate::scalar::Real;

#[derive(Debug, Clone, PartialEq)]
pub enum DistortionKind<T> {
    /// `(1/n) ‖x − y‖²`.
    Mse,
    /// Binary Hamming distortion on `{0, 1}`.
    Hamming,
    /// `1{x ≠ y}` on an alphabet of size `m`.
    SymbolError { m: usize },
    /// `n^{-s/p} ‖x − y‖_p^s`; `p` may be `+∞`.
    LpPow { p: T, s: T },
    /// `(1/n) ‖W(x − y)‖²` with `W` row-major `n × n`.
    WeightedMse { w: Vec<T>, log_abs_det: T },
    /// Arbitrary letter distortion matrix (rows: source symbols, columns: reproductions).
    Matrix { rows: Vec<Vec<T>> },
}

/// A per-letter normalized distortion measure on blocks of `dimension` letters.
#[derive(Debug, Clone, PartialEq)]
pub struct DistortionMeasure<T> {
    kind: DistortionKind<T>,
    dimension: usize,
}

fn check_dim(n: usize) -> Result<()> {
    if n == 0 {
        return Err(Error::param("dimension", "must be positive"));
    }
    Ok(())
}

impl<T: Real> DistortionMeasure<T> {
    pub fn mse(n: usize) -> Result<Self> {
        check_dim(n)?;
        Ok(Self { kind: DistortionKind::Mse, dimension: n })
    }

    pub fn hamming(n: usize) -> Result<Self> {
        check_dim(n)?;
        Ok(Self { kind: DistortionKind::Hamming, dimension: n })
    }

    pub fn symbol_error(m: usize, n: usize) -> Result<Self> {
        check_dim(n)?;
        if m < 2 {
            return Err(Error::param("m", "alphabet size must be at least 2"));
        }
        Ok(Self { kind: DistortionKind::SymbolError { m }, dimension: n })
    }

    /// Scaled `L^p` power distortion; pass `T::infinity()` for the max norm.
    pub fn lp_pow(p: T, s: T, n: usize) -> Result<Self> {
        check_dim(n)?;
        if !(p >= T::one()) {
            return Err(Error::param("p", "norm order must be at least 1"));
        }
        if !(s > T::zero()) || !s.is_finite() {
            return Err(Error::param("s", "exponent must be positive"));
        }
        Ok(Self { kind: DistortionKind::LpPow { p, s }, dimension: n })
    }

    /// Weighted MSE with invertible weighting matrix `w` (rows).
    pub fn weighted_mse(w: Vec<Vec<T>>) -> Result<Self> {
        let n = w.len();
        check_dim(n)?;
        if w.iter().any(|row| row.len() != n) {
            return Err(Error::param("w", "weighting matrix must be square"));
        }
        let flat: Vec<T> = w.into_iter().flatten().collect();
        let log_abs_det =
            linalg::log_abs_det(&flat, n).ok_or_else(|| Error::param("w", "weighting matrix is singular"))?;
        Ok(Self { kind: DistortionKind::WeightedMse { w: flat, log_abs_det }, dimension: n })
    }

    /// Letter distortion matrix; entries nonnegative, every row has a zero.
    pub fn matrix(rows: Vec<Vec<T>>) -> Result<Self> {
        if rows.is_empty() || rows[0].is_empty() {
            return Err(Error::param("rows", "matrix must be nonempty"));
        }
        let cols = rows[0].len();
        if rows.iter().any(|r| r.len() != cols) {
            return Err(Error::param("rows", "ragged distortion matrix"));
        }
        if rows.iter().flatten().any(|&v| !(v >= T::zero()) || !v.is_finite()) {
            return Err(Error::param("rows", "entries must be finite and nonnegative"));
        }
        if rows.iter().any(|r| !r.iter().any(|&v| v == T::zero())) {
            return Err(Error::param("rows", "every row needs a zero entry"));
        }
        Ok(Self { kind: DistortionKind::Matrix { rows }, dimension: 1 })
    }

    pub fn kind(&self) -> &DistortionKind<T> {
        &self.kind
    }

    pub fn dimension(&self) -> usize {
        self.dimension
    }

    /// Same measure applied to blocks of `n` letters.
    pub fn with_dimension(&self, n: usize) -> Result<Self> {
        check_dim(n)?;
        if let DistortionKind::WeightedMse { .. } = self.kind {
            if n != self.dimension {
                return Err(Error::DimensionMismatch { expected: self.dimension, got: n });
            }
        }
        Ok(Self { kind: self.kind.clone(), dimension: n })
    }

    pub fn is_finite_alphabet(&self) -> bool {
        matches!(
            self.kind,
            DistortionKind::Hamming | DistortionKind::SymbolError { .. } | DistortionKind::Matrix { .. }
        )
    }

    /// `(p, s)` of the norm-power profile for the continuous difference kinds.
    pub fn norm_power(&self) -> Option<(T, T)> {
        let two = T::of(2.0);
        match &self.kind {
            DistortionKind::Mse | DistortionKind::WeightedMse { .. } => Some((two, two)),
            DistortionKind::LpPow { p, s } => Some((*p, *s)),
            _ => None,
        }
    }

    /// `log |det W|`, zero for unweighted kinds.
    pub fn log_abs_det_weight(&self) -> T {
        match &self.kind {
            DistortionKind::WeightedMse { log_abs_det, .. } => *log_abs_det,
            _ => T::zero(),
        }
    }

    /// Per-letter normalized distortion between two real blocks.
    pub fn evaluate(&self, x: &[T], y: &[T]) -> Result<T> {
        let n = self.dimension;
        for v in [x, y] {
            if v.len() != n {
                return Err(Error::DimensionMismatch { expected: n, got: v.len() });
            }
        }
        let nf = T::of_usize(n);
        match &self.kind {
            DistortionKind::Mse => Ok(x.iter().zip(y).map(|(a, b)| (*a - *b) * (*a - *b)).sum::<T>() / nf),
            DistortionKind::LpPow { p, s } => {
                let norm = lp_norm(x.iter().zip(y).map(|(a, b)| *a - *b), *p);
                let scale = if p.is_infinite() { T::one() } else { nf.powf(-*s / *p) };
                Ok(scale * norm.powf(*s))
            }
            DistortionKind::WeightedMse { w, .. } => {
                let diff: Vec<T> = x.iter().zip(y).map(|(a, b)| *a - *b).collect();
                let wd = linalg::mat_vec(w, n, &diff);
                Ok(wd.iter().map(|v| *v * *v).sum::<T>() / nf)
            }
            _ => Err(Error::Unsupported("finite-alphabet measure evaluated on real vectors".into())),
        }
    }

    /// Number of source and reproduction letters for finite kinds.
    pub fn alphabet_sizes(&self) -> Option<(usize, usize)> {
        match &self.kind {
            DistortionKind::Hamming => Some((2, 2)),
            DistortionKind::SymbolError { m } => Some((*m, *m)),
            DistortionKind::Matrix { rows } => Some((rows.len(), rows[0].len())),
            _ => None,
        }
    }

    /// Single-letter distortion between symbols.
    pub fn letter(&self, x: usize, y: usize) -> Result<T> {
        let (mx, my) = self
            .alphabet_sizes()
            .ok_or_else(|| Error::Unsupported("continuous measure evaluated on symbols".into()))?;
        if x >= mx {
            return Err(Error::SymbolOutOfAlphabet { symbol: x, size: mx });
        }
        if y >= my {
            return Err(Error::SymbolOutOfAlphabet { symbol: y, size: my });
        }
        Ok(match &self.kind {
            DistortionKind::Matrix { rows } => rows[x][y],
            _ => {
                if x == y {
                    T::zero()
                } else {
                    T::one()
                }
            }
        })
    }

    /// Per-letter normalized distortion between two symbol blocks.
    pub fn evaluate_symbols(&self, x: &[usize], y: &[usize]) -> Result<T> {
        let n = self.dimension;
        for v in [x, y] {
            if v.len() != n {
                return Err(Error::DimensionMismatch { expected: n, got: v.len() });
            }
        }
        let mut total = T::zero();
        for (&a, &b) in x.iter().zip(y) {
            total = total + self.letter(a, b)?;
        }
        Ok(total / T::of_usize(n))
    }

    /// Full letter distortion matrix for finite kinds.
    pub fn letter_matrix(&self) -> Option<Vec<Vec<T>>> {
        let (mx, my) = self.alphabet_sizes()?;
        Some((0..mx).map(|x| (0..my).map(|y| self.letter(x, y).unwrap()).collect()).collect())
    }

    /// `r(d)`: the largest profile radius whose distortion does not exceed `threshold`.
    pub fn radius_of_distortion(&self, threshold: T) -> Result<T> {
        if !(threshold > T::zero()) {
            return Err(Error::param("threshold", "must be positive"));
        }
        Ok(self.radius_map()?.radius(threshold))
    }

    pub fn radius_map(&self) -> Result<RadiusMap<T>> {
        let (_, s) = self.norm_power().ok_or(Error::NoRadius)?;
        Ok(RadiusMap { exponent: s, coefficient: T::one() })
    }

    /// Log-volume (nats) of `{z ∈ ℝⁿ : 𝖽(z, 0) ≤ threshold}`.
    pub fn ball_log_volume(&self, n: usize, threshold: T) -> Result<T> {
        check_dim(n)?;
        if !(threshold > T::zero()) {
            return Err(Error::param("threshold", "must be positive"));
        }
        let (p, _) = self.norm_power().ok_or(Error::NoRadius)?;
        if let DistortionKind::WeightedMse { .. } = self.kind {
            if n != self.dimension {
                return Err(Error::DimensionMismatch { expected: self.dimension, got: n });
            }
        }
        let r = self.radius_of_distortion(threshold)?;
        let nf = T::of_usize(n);
        let radius_log = if p.is_infinite() { r.ln() } else { nf.ln() / p + r.ln() };
        Ok(ln_unit_ball_volume(n, p) + nf * radius_log - self.log_abs_det_weight())
    }

    /// Balancedness of the letter matrix (finite kinds only).
    pub fn is_balanced(&self) -> bool {
        self.letter_matrix().is_some_and(|m| is_balanced(&m))
    }
}

fn lp_norm<T: Real>(v: impl Iterator<Item = T>, p: T) -> T {
    if p.is_infinite() {
        v.map(|a| a.abs()).fold(T::zero(), T::max)
    } else if p == T::of(2.0) {
        v.map(|a| a * a).sum::<T>().sqrt()
    } else {
        v.map(|a| a.abs().powf(p)).sum::<T>().powf(T::one() / p)
    }
}

/// `log b_{n,p}`, the log-volume of the unit `L^p` ball in `ℝⁿ`.
pub fn ln_unit_ball_volume<T: Real>(n: usize, p: T) -> T {
    let nf = T::of_usize(n);
    let ln2 = T::LN_2();
    if p.is_infinite() {
        return nf * ln2;
    }
    let one = T::one();
    nf * (ln2 + (one / p + one).ln_gamma()) - (nf / p + one).ln_gamma()
}

/// Map from a distortion threshold to the profile radius, for profiles of the
/// form `𝖽(r) = c·r^s` (exact) or with that leading Taylor term.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RadiusMap<T> {
    /// Leading exponent `s`.
    pub exponent: T,
    /// `𝖽^{(s)}(0) / s!`.
    pub coefficient: T,
}

impl<T: Real> RadiusMap<T> {
    pub fn radius(&self, d: T) -> T {
        if d <= T::zero() {
            return T::zero();
        }
        (d / self.coefficient).powf(T::one() / self.exponent)
    }

    pub fn distortion(&self, r: T) -> T {
        self.coefficient * r.powf(self.exponent)
    }
}

/// `r(d) = sup{r ∈ [0, r_max] : 𝖽(r) ≤ d}` for a nondecreasing profile, by
/// bisection to absolute tolerance `1e-12`.
pub fn radius_by_bisection<T: Real>(profile: impl Fn(T) -> T, d: T, r_max: T) -> T {
    if profile(r_max) <= d {
        return r_max;
    }
    let tol = T::of(1e-12);
    let (mut lo, mut hi) = (T::zero(), r_max);
    for _ in 0..400 {
        if hi - lo <= tol {
            break;
        }
        let mid = (lo + hi) / T::of(2.0);
        if profile(mid) <= d {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    lo
}

/// Columns share one multiset of entries, the diagonal is zero and the
/// off-diagonal entries are positive.
pub fn is_balanced<T: Real>(rows: &[Vec<T>]) -> bool {
    let m = rows.len();
    if m == 0 || rows.iter().any(|r| r.len() != m) {
        return false;
    }
    for (i, row) in rows.iter().enumerate() {
        for (j, &v) in row.iter().enumerate() {
            if (i == j && v != T::zero()) || (i != j && !(v > T::zero())) {
                return false;
            }
        }
    }
    let sorted_col = |j: usize| {
        let mut c: Vec<T> = rows.iter().map(|r| r[j]).collect();
        c.sort_by(|a, b| a.partial_cmp(b).unwrap());
        c
    };
    let first = sorted_col(0);
    (1..m).all(|j| sorted_col(j) == first)
}

/// If `rows[x][y] = δ((x − y) mod m)`, returns `δ`.
pub fn difference_profile<T: Real>(rows: &[Vec<T>]) -> Option<Vec<T>> {
    let m = rows.len();
    if m == 0 || rows.iter().any(|r| r.len() != m) {
        return None;
    }
    let delta: Vec<T> = (0..m).map(|z| rows[z][0]).collect();
    for (x, row) in rows.iter().enumerate() {
        for (y, &v) in row.iter().enumerate() {
            if v != delta[(x + m - y) % m] {
                return None;
            }
        }
    }
    Some(delta)
}

/// `p` in a JSON descriptor: a number or the string `"inf"`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum NormOrder {
    Finite(f64),
    Named(InfinityTag),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum InfinityTag {
    #[serde(rename = "inf")]
    Inf,
}

impl NormOrder {
    pub fn value(self) -> f64 {
        match self {
            NormOrder::Finite(p) => p,
            NormOrder::Named(InfinityTag::Inf) => f64::INFINITY,
        }
    }
}

/// JSON descriptor of a distortion measure.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum DistortionSpec {
    Mse,
    Hamming,
    SymbolError { m: usize },
    LpPow { p: NormOrder, s: f64 },
    WeightedMse { w: Vec<Vec<f64>> },
    Matrix { rows: Vec<Vec<f64>> },
}

impl DistortionSpec {
    /// Build the measure for blocks of `n` letters (ignored for matrix kinds).
    pub fn build(&self, n: usize) -> Result<DistortionMeasure<f64>> {
        match self {
            DistortionSpec::Mse => DistortionMeasure::mse(n),
            DistortionSpec::Hamming => DistortionMeasure::hamming(n),
            DistortionSpec::SymbolError { m } => DistortionMeasure::symbol_error(*m, n),
            DistortionSpec::LpPow { p, s } => DistortionMeasure::lp_pow(p.value(), *s, n),
            DistortionSpec::WeightedMse { w } => DistortionMeasure::weighted_mse(w.clone()),
            DistortionSpec::Matrix { rows } => DistortionMeasure::matrix(rows.clone()),
        }
    }
}

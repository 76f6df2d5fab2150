//! Exact laws of block information `Σ ı(X_i)` and the converse bounds that
//! are evaluated from them.

use crate::error::{Error, Result};
use crate::sources::{ContinuousSource, ScalarFamily, Source};
use crate::special;

/// Largest number of atoms enumerated for a discrete i.i.d. sum.
pub const MAX_ATOMS: usize = 1_000_000;

/// Finite law of a real random variable, atoms sorted by value.
#[derive(Debug, Clone, PartialEq)]
pub struct DiscreteSpectrum {
    atoms: Vec<(f64, f64)>,
}

fn ln_binomial_count(n: usize, m: usize) -> f64 {
    // number of compositions of n into m parts
    special::ln_gamma_f64((n + m) as f64) - special::ln_gamma_f64(m as f64) - special::ln_gamma_f64(n as f64 + 1.0)
}

impl DiscreteSpectrum {
    /// From `(value, probability)` pairs; equal values are merged.
    pub fn new(mut atoms: Vec<(f64, f64)>) -> Self {
        atoms.retain(|a| a.1 > 0.0);
        atoms.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap());
        let mut merged: Vec<(f64, f64)> = Vec::with_capacity(atoms.len());
        for (v, p) in atoms {
            match merged.last_mut() {
                Some(last) if (v - last.0).abs() <= 1e-12 * (1.0 + v.abs()) => last.1 += p,
                _ => merged.push((v, p)),
            }
        }
        Self { atoms: merged }
    }

    /// Law of `Σ_{i=1}^n V_i` for i.i.d. `V_i` taking `values[k]` w.p. `probs[k]`,
    /// by enumerating letter counts.
    pub fn iid_sum(values: &[f64], probs: &[f64], n: usize) -> Result<Self> {
        if values.len() != probs.len() {
            return Err(Error::DimensionMismatch { expected: values.len(), got: probs.len() });
        }
        let letter = Self::new(values.iter().copied().zip(probs.iter().copied()).collect());
        let m = letter.atoms.len();
        if m == 0 {
            return Err(Error::param("probs", "no atom with positive probability"));
        }
        if ln_binomial_count(n, m) > (MAX_ATOMS as f64).ln() {
            return Err(Error::Unsupported(format!(
                "exact spectrum of {n} letters over {m} values exceeds {MAX_ATOMS} atoms"
            )));
        }
        let ln_p: Vec<f64> = letter.atoms.iter().map(|a| a.1.ln()).collect();
        let ln_fact: Vec<f64> = (0..=n).map(|k| special::ln_gamma_f64(k as f64 + 1.0)).collect();
        let mut out = Vec::new();
        let mut counts = vec![0usize; m];
        enumerate_compositions(n, 0, &mut counts, &mut |c: &[usize]| {
            let mut lp = ln_fact[n];
            let mut v = 0.0;
            for (k, &ck) in c.iter().enumerate() {
                lp += ck as f64 * ln_p[k] - ln_fact[ck];
                v += ck as f64 * letter.atoms[k].0;
            }
            out.push((v, lp.exp()));
        });
        Ok(Self::new(out))
    }

    pub fn atoms(&self) -> &[(f64, f64)] {
        &self.atoms
    }

    /// Same law shifted by `c`.
    pub fn shifted(&self, c: f64) -> Self {
        Self { atoms: self.atoms.iter().map(|&(v, p)| (v + c, p)).collect() }
    }

    pub fn mean(&self) -> f64 {
        self.atoms.iter().map(|(v, p)| v * p).sum()
    }

    pub fn variance(&self) -> f64 {
        let m = self.mean();
        self.atoms.iter().map(|(v, p)| p * (v - m).powi(2)).sum()
    }

    /// `P[S ≥ s]`.
    pub fn ccdf(&self, s: f64) -> f64 {
        let start = self.atoms.partition_point(|a| a.0 < s);
        self.atoms[start..].iter().map(|a| a.1).sum::<f64>().min(1.0)
    }

    /// Suffix sums `T_k = P[S ≥ s_k]`.
    fn tails(&self) -> Vec<f64> {
        let mut t = vec![0.0; self.atoms.len()];
        let mut acc = 0.0;
        for k in (0..self.atoms.len()).rev() {
            acc += self.atoms[k].1;
            t[k] = acc.min(1.0);
        }
        t
    }

    /// `sup_{γ>0} P[S ≥ t + γ] − e^{−γ}` with its maximizing `γ`
    /// (`None` when no atom lies above `t`).
    pub fn excess_bound(&self, t: f64) -> (f64, Option<f64>) {
        let tails = self.tails();
        let mut best = (f64::NEG_INFINITY, None);
        for (k, &(s, _)) in self.atoms.iter().enumerate() {
            if s > t {
                let g = s - t;
                let val = tails[k] - (-g).exp();
                if val > best.0 {
                    best = (val, Some(g));
                }
            }
        }
        best
    }

    /// Smallest `t` with `sup_{γ>0} P[S ≥ t + γ] − e^{−γ} ≤ ε`.
    pub fn min_threshold(&self, eps: f64) -> f64 {
        let tails = self.tails();
        self.atoms
            .iter()
            .zip(&tails)
            .filter(|(_, &t)| t > eps)
            .map(|(&(s, _), &t)| s + (t - eps).ln())
            .fold(f64::NEG_INFINITY, f64::max)
    }
}

fn enumerate_compositions(left: usize, k: usize, counts: &mut Vec<usize>, f: &mut impl FnMut(&[usize])) {
    let m = counts.len();
    if k == m - 1 {
        counts[k] = left;
        f(counts);
        return;
    }
    for c in 0..=left {
        counts[k] = c;
        enumerate_compositions(left - c, k + 1, counts, f);
    }
}

/// Law of `−log f(Xⁿ)` for a product source.
#[derive(Debug, Clone, PartialEq)]
pub enum InformationLaw {
    /// `offset + G` with `G ~ Gamma(shape, 1)`.
    Gamma {
        offset: f64,
        shape: f64,
    },
    /// Deterministic value.
    Point(f64),
    Discrete(DiscreteSpectrum),
}

impl InformationLaw {
    pub fn of_continuous(src: &ContinuousSource) -> Self {
        let n = src.dimension() as f64;
        match src.letter() {
            ScalarFamily::Gaussian { var } => {
                InformationLaw::Gamma { offset: 0.5 * n * (2.0 * std::f64::consts::PI * var).ln(), shape: 0.5 * n }
            }
            ScalarFamily::Laplace { b } => InformationLaw::Gamma { offset: n * (2.0 * b).ln(), shape: n },
            ScalarFamily::Uniform { .. } => InformationLaw::Point(src.entropy()),
        }
    }

    pub fn shifted(&self, c: f64) -> Self {
        match self {
            InformationLaw::Gamma { offset, shape } => InformationLaw::Gamma { offset: offset + c, shape: *shape },
            InformationLaw::Point(v) => InformationLaw::Point(v + c),
            InformationLaw::Discrete(s) => InformationLaw::Discrete(s.shifted(c)),
        }
    }

    pub fn mean(&self) -> f64 {
        match self {
            InformationLaw::Gamma { offset, shape } => offset + shape,
            InformationLaw::Point(v) => *v,
            InformationLaw::Discrete(s) => s.mean(),
        }
    }

    pub fn variance(&self) -> f64 {
        match self {
            InformationLaw::Gamma { shape, .. } => *shape,
            InformationLaw::Point(_) => 0.0,
            InformationLaw::Discrete(s) => s.variance(),
        }
    }

    /// `P[S ≥ s]`.
    pub fn ccdf(&self, s: f64) -> f64 {
        match self {
            InformationLaw::Gamma { offset, shape } => special::gamma_upper_tail(*shape, s - offset),
            InformationLaw::Point(v) => {
                if s <= *v {
                    1.0
                } else {
                    0.0
                }
            }
            InformationLaw::Discrete(d) => d.ccdf(s),
        }
    }

    /// `inf{s : P[S ≥ s] ≤ u}` for `u ∈ (0, 1)`.
    pub fn upper_quantile(&self, u: f64) -> f64 {
        match self {
            InformationLaw::Gamma { offset, shape } => offset + special::gamma_upper_quantile(*shape, u),
            InformationLaw::Point(v) => *v,
            InformationLaw::Discrete(d) => {
                let mut acc = 0.0;
                for &(v, p) in d.atoms.iter().rev() {
                    acc += p;
                    if acc > u {
                        return v;
                    }
                }
                d.atoms.first().map(|a| a.0).unwrap_or(f64::NEG_INFINITY)
            }
        }
    }

    /// Smallest `t` such that `P[S ≥ t + γ] − e^{−γ} ≤ ε` for all `γ > 0`,
    /// with the binding `γ`.
    ///
    /// Exact for discrete and point laws; for continuous laws `γ` is searched
    /// on 200 log-spaced points in `[1e-6, γ_max]` and refined locally.
    pub fn min_threshold(&self, eps: f64, gamma_max: f64) -> (f64, f64) {
        match self {
            InformationLaw::Discrete(d) => {
                let t = d.min_threshold(eps);
                let g = d.excess_bound(t).1.unwrap_or(0.0);
                (t, g)
            }
            // only γ > −ln(1−ε) constrain t; the supremum sits at that edge
            InformationLaw::Point(v) => (v + (1.0 - eps).ln(), -(1.0 - eps).ln()),
            InformationLaw::Gamma { .. } => {
                let objective = |g: f64| {
                    let u = eps + (-g).exp();
                    if u >= 1.0 {
                        f64::NEG_INFINITY
                    } else {
                        self.upper_quantile(u) - g
                    }
                };
                let hi = gamma_max.max(1.0);
                let lo_log = 1e-6f64.ln();
                let hi_log = hi.ln();
                let grid: Vec<f64> = (0..200).map(|k| (lo_log + (hi_log - lo_log) * k as f64 / 199.0).exp()).collect();
                let (mut best_k, mut best) = (0, f64::NEG_INFINITY);
                for (k, &g) in grid.iter().enumerate() {
                    let v = objective(g);
                    if v > best {
                        best = v;
                        best_k = k;
                    }
                }
                // golden-section refinement between neighbouring grid points
                let (mut a, mut b) = (grid[best_k.saturating_sub(1)], grid[(best_k + 1).min(199)]);
                let r = 0.5 * (5f64.sqrt() - 1.0);
                let mut best_g = grid[best_k];
                for _ in 0..100 {
                    let c = b - r * (b - a);
                    let d = a + r * (b - a);
                    let (fc, fd) = (objective(c), objective(d));
                    if fc > best {
                        best = fc;
                        best_g = c;
                    }
                    if fd > best {
                        best = fd;
                        best_g = d;
                    }
                    if fc >= fd {
                        b = d;
                    } else {
                        a = c;
                    }
                    if b - a <= 1e-12 * b {
                        break;
                    }
                }
                (best, best_g)
            }
        }
    }
}

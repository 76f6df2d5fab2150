//! Source models: scalar families, their i.i.d. products and finite pmfs.

use rand::Rng as _;
use rand_distr::{Distribution, Exp1, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::distortion::{DistortionMeasure, DistortionSpec};
use crate::error::{Error, Result};
use crate::rng::{self, Rng};
use crate::special;

/// Common interface for anything with a density (or pmf) and entropy.
pub trait Source {
    type Point: ?Sized;

    fn dimension(&self) -> usize;
    /// Differential entropy `h(X)` or entropy `H(X)` of a whole block, nats.
    fn entropy(&self) -> f64;
    /// `Var[log f(X)]` of a whole block, nats².
    fn varentropy(&self) -> f64;
    /// `log f(x)`; `-∞` off the support.
    fn log_density(&self, x: &Self::Point) -> Result<f64>;
}

/// One-dimensional continuous families.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ScalarFamily {
    Gaussian { var: f64 },
    Uniform { a: f64, b: f64 },
    Laplace { b: f64 },
}

impl ScalarFamily {
    pub fn validate(&self) -> Result<()> {
        match *self {
            ScalarFamily::Gaussian { var } if !(var > 0.0 && var.is_finite()) => {
                Err(Error::param("var", "variance must be positive"))
            }
            ScalarFamily::Uniform { a, b } if !(b > a && a.is_finite() && b.is_finite()) => {
                Err(Error::param("b", "need a < b"))
            }
            ScalarFamily::Laplace { b } if !(b > 0.0 && b.is_finite()) => {
                Err(Error::param("b", "scale must be positive"))
            }
            _ => Ok(()),
        }
    }

    pub fn log_density(&self, x: f64) -> f64 {
        match *self {
            ScalarFamily::Gaussian { var } => -0.5 * (2.0 * std::f64::consts::PI * var).ln() - x * x / (2.0 * var),
            ScalarFamily::Uniform { a, b } => {
                if x >= a && x <= b {
                    -(b - a).ln()
                } else {
                    f64::NEG_INFINITY
                }
            }
            ScalarFamily::Laplace { b } => -(2.0 * b).ln() - x.abs() / b,
        }
    }

    /// `d/dx log f(x)`; zero inside the uniform support, and `-sign(x)/b` for
    /// Laplace (taking 0 at the kink).
    pub fn grad_log_density(&self, x: f64) -> f64 {
        match *self {
            ScalarFamily::Gaussian { var } => -x / var,
            ScalarFamily::Uniform { .. } => 0.0,
            ScalarFamily::Laplace { b } => {
                if x == 0.0 {
                    0.0
                } else {
                    -x.signum() / b
                }
            }
        }
    }

    pub fn cdf(&self, x: f64) -> f64 {
        match *self {
            ScalarFamily::Gaussian { var } => special::q_function(-x / var.sqrt()),
            ScalarFamily::Uniform { a, b } => ((x - a) / (b - a)).clamp(0.0, 1.0),
            ScalarFamily::Laplace { b } => {
                if x < 0.0 {
                    0.5 * (x / b).exp()
                } else {
                    1.0 - 0.5 * (-x / b).exp()
                }
            }
        }
    }

    pub fn sample(&self, rng: &mut Rng) -> f64 {
        match *self {
            ScalarFamily::Gaussian { var } => {
                let z: f64 = StandardNormal.sample(rng);
                var.sqrt() * z
            }
            ScalarFamily::Uniform { a, b } => a + (b - a) * rng.random::<f64>(),
            ScalarFamily::Laplace { b } => {
                let e: f64 = Exp1.sample(rng);
                if rng.random::<bool>() {
                    b * e
                } else {
                    -b * e
                }
            }
        }
    }

    pub fn entropy(&self) -> f64 {
        match *self {
            ScalarFamily::Gaussian { var } => 0.5 * (2.0 * std::f64::consts::PI * std::f64::consts::E * var).ln(),
            ScalarFamily::Uniform { a, b } => (b - a).ln(),
            ScalarFamily::Laplace { b } => 1.0 + (2.0 * b).ln(),
        }
    }

    pub fn varentropy(&self) -> f64 {
        match *self {
            ScalarFamily::Gaussian { .. } => 0.5,
            ScalarFamily::Uniform { .. } => 0.0,
            ScalarFamily::Laplace { .. } => 1.0,
        }
    }

    /// `E|log f(X) + h(X)|³`.
    pub fn third_abs_central_moment(&self) -> f64 {
        match *self {
            // log f + h = (1 − Y)/2 with Y ~ χ²₁; substitute Y = t².
            ScalarFamily::Gaussian { .. } => {
                let g = |t: f64| {
                    (1.0 - t * t).abs().powi(3) * 2.0 * (-0.5 * t * t).exp() / (2.0 * std::f64::consts::PI).sqrt()
                };
                (special::integrate(g, 0.0, 1.0, 1e-13) + special::integrate_to_infinity(g, 1.0, 1e-13)) / 8.0
            }
            ScalarFamily::Uniform { .. } => 0.0,
            // log f + h = 1 − E with E ~ Exp(1)
            ScalarFamily::Laplace { .. } => 12.0 / std::f64::consts::E - 2.0,
        }
    }

    pub fn mean(&self) -> f64 {
        match *self {
            ScalarFamily::Uniform { a, b } => 0.5 * (a + b),
            _ => 0.0,
        }
    }

    /// `E[X²]`.
    pub fn second_moment(&self) -> f64 {
        match *self {
            ScalarFamily::Gaussian { var } => var,
            ScalarFamily::Uniform { a, b } => (a * a + a * b + b * b) / 3.0,
            ScalarFamily::Laplace { b } => 2.0 * b * b,
        }
    }

    /// `E[X⁴]`.
    pub fn fourth_moment(&self) -> f64 {
        match *self {
            ScalarFamily::Gaussian { var } => 3.0 * var * var,
            ScalarFamily::Uniform { a, b } => (b.powi(5) - a.powi(5)) / (5.0 * (b - a)),
            ScalarFamily::Laplace { b } => 24.0 * b.powi(4),
        }
    }

    /// `E|X|`.
    pub fn mean_abs(&self) -> f64 {
        match *self {
            ScalarFamily::Gaussian { var } => (2.0 * var / std::f64::consts::PI).sqrt(),
            ScalarFamily::Uniform { a, b } => {
                if a >= 0.0 {
                    0.5 * (a + b)
                } else if b <= 0.0 {
                    -0.5 * (a + b)
                } else {
                    (a * a + b * b) / (2.0 * (b - a))
                }
            }
            ScalarFamily::Laplace { b } => b,
        }
    }

    /// Regularity certificate `v(x) = c1|x| + c0`.
    pub fn certificate(&self) -> RegularityCertificate {
        match *self {
            ScalarFamily::Gaussian { var } => RegularityCertificate { c1: 2.0 / var, c0: 0.0 },
            ScalarFamily::Uniform { .. } => RegularityCertificate { c1: 0.0, c0: 0.0 },
            ScalarFamily::Laplace { b } => RegularityCertificate { c1: 0.0, c0: 1.0 / b },
        }
    }

    pub fn is_log_concave(&self) -> bool {
        true
    }
}

/// Constants of a `v`-regularity certificate, `v(x) = c1‖x‖ + c0·√n`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RegularityCertificate {
    pub c1: f64,
    pub c0: f64,
}

impl RegularityCertificate {
    pub fn v(&self, x: &[f64]) -> f64 {
        let norm = x.iter().map(|a| a * a).sum::<f64>().sqrt();
        self.c1 * norm + self.c0 * (x.len() as f64).sqrt()
    }
}

/// Certificate for a product density from per-letter certificates.
pub fn product_regularity(parts: &[RegularityCertificate]) -> RegularityCertificate {
    parts.iter().fold(RegularityCertificate { c1: 0.0, c0: 0.0 }, |acc, p| RegularityCertificate {
        c1: acc.c1.max(p.c1),
        c0: acc.c0.max(p.c0),
    })
}

/// `n` i.i.d. copies of a scalar family (`n = 1` for the scalar source).
#[derive(Debug, Clone, PartialEq)]
pub struct ContinuousSource {
    letter: ScalarFamily,
    n: usize,
    second_moment: f64,
    fourth_moment: f64,
}

impl ContinuousSource {
    pub fn new(letter: ScalarFamily, n: usize) -> Result<Self> {
        letter.validate()?;
        if n == 0 {
            return Err(Error::param("n", "must be positive"));
        }
        Ok(Self { letter, n, second_moment: letter.second_moment(), fourth_moment: letter.fourth_moment() })
    }

    pub fn scalar(letter: ScalarFamily) -> Result<Self> {
        Self::new(letter, 1)
    }

    pub fn gaussian(var: f64) -> Result<Self> {
        Self::scalar(ScalarFamily::Gaussian { var })
    }

    pub fn uniform(a: f64, b: f64) -> Result<Self> {
        Self::scalar(ScalarFamily::Uniform { a, b })
    }

    pub fn laplace(b: f64) -> Result<Self> {
        Self::scalar(ScalarFamily::Laplace { b })
    }

    pub fn letter(&self) -> ScalarFamily {
        self.letter
    }

    /// The same letter distribution at blocklength `n`.
    pub fn with_dimension(&self, n: usize) -> Result<Self> {
        Self::new(self.letter, n)
    }

    /// Per-letter `E[X²]`.
    pub fn second_moment(&self) -> f64 {
        self.second_moment
    }

    /// Per-letter `E[X⁴]`.
    pub fn fourth_moment(&self) -> f64 {
        self.fourth_moment
    }

    /// `E‖X‖`: exact for Gaussian products and scalars, else `√(E‖X‖²)`.
    pub fn expected_norm(&self) -> f64 {
        let n = self.n as f64;
        match self.letter {
            _ if self.n == 1 => self.letter.mean_abs(),
            ScalarFamily::Gaussian { var } => {
                (2.0 * var).sqrt() * (special::ln_gamma_f64((n + 1.0) / 2.0) - special::ln_gamma_f64(n / 2.0)).exp()
            }
            _ => (n * self.second_moment).sqrt(),
        }
    }

    pub fn certificate(&self) -> RegularityCertificate {
        self.letter.certificate()
    }

    pub fn is_log_concave(&self) -> bool {
        self.letter.is_log_concave()
    }

    pub fn grad_log_density(&self, x: &[f64]) -> Result<Vec<f64>> {
        self.check(x)?;
        Ok(x.iter().map(|&a| self.letter.grad_log_density(a)).collect())
    }

    pub fn sample_into(&self, rng: &mut Rng, out: &mut [f64]) {
        for v in out.iter_mut() {
            *v = self.letter.sample(rng);
        }
    }

    pub fn sample(&self, rng: &mut Rng) -> Vec<f64> {
        let mut v = vec![0.0; self.n];
        self.sample_into(rng, &mut v);
        v
    }

    fn check(&self, x: &[f64]) -> Result<()> {
        if x.len() != self.n {
            return Err(Error::DimensionMismatch { expected: self.n, got: x.len() });
        }
        Ok(())
    }

    /// Monte-Carlo moments of `−log f(X)` over `samples` blocks.
    pub fn information_moments(&self, samples: usize, seed: u64) -> InformationMoments {
        let parts: Vec<[f64; 4]> = rng::chunks(samples, 1 << 16)
            .into_par_iter()
            .map(|(stream, len)| {
                let mut r = rng::substream(seed, stream);
                let mut buf = vec![0.0; self.n];
                let h = self.entropy();
                let mut acc = [0.0; 4];
                for _ in 0..len {
                    self.sample_into(&mut r, &mut buf);
                    // centred at h to keep the power sums well conditioned
                    let c = -buf.iter().map(|&a| self.letter.log_density(a)).sum::<f64>() - h;
                    acc[0] += c;
                    acc[1] += c * c;
                    acc[2] += c * c * c;
                    acc[3] += c * c * c * c;
                }
                acc
            })
            .collect();
        let mut s = [0.0; 4];
        for p in parts {
            for k in 0..4 {
                s[k] += p[k];
            }
        }
        let n = samples as f64;
        let m1 = s[0] / n;
        let m2 = s[1] / n;
        let m3 = s[2] / n;
        let m4 = s[3] / n;
        let var = (m2 - m1 * m1).max(0.0);
        let mu4 = m4 - 4.0 * m1 * m3 + 6.0 * m1 * m1 * m2 - 3.0 * m1.powi(4);
        InformationMoments {
            mean: self.entropy() + m1,
            mean_se: (var / n).sqrt(),
            variance: var,
            variance_se: ((mu4 - var * var).max(0.0) / n).sqrt(),
            samples,
        }
    }
}

/// Sample mean and variance of `−log f(X)` with standard errors.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct InformationMoments {
    pub mean: f64,
    pub mean_se: f64,
    pub variance: f64,
    pub variance_se: f64,
    pub samples: usize,
}

impl Source for ContinuousSource {
    type Point = [f64];

    fn dimension(&self) -> usize {
        self.n
    }

    fn entropy(&self) -> f64 {
        self.n as f64 * self.letter.entropy()
    }

    fn varentropy(&self) -> f64 {
        self.n as f64 * self.letter.varentropy()
    }

    fn log_density(&self, x: &[f64]) -> Result<f64> {
        self.check(x)?;
        Ok(x.iter().map(|&a| self.letter.log_density(a)).sum())
    }
}

/// A pmf over symbols `0..m` with its letter distortion.
#[derive(Debug, Clone, PartialEq)]
pub struct FiniteSource {
    pmf: Vec<f64>,
    distortion: DistortionMeasure<f64>,
}

impl FiniteSource {
    pub fn new(pmf: Vec<f64>, distortion: DistortionMeasure<f64>) -> Result<Self> {
        let (mx, _) = distortion
            .alphabet_sizes()
            .ok_or_else(|| Error::param("distortion", "finite sources need a finite-alphabet measure"))?;
        if pmf.len() != mx {
            return Err(Error::DimensionMismatch { expected: mx, got: pmf.len() });
        }
        if pmf.iter().any(|&p| !(p >= 0.0)) || (pmf.iter().sum::<f64>() - 1.0).abs() > 1e-12 {
            return Err(Error::param("pmf", "entries must be nonnegative and sum to 1"));
        }
        let distortion = distortion.with_dimension(1)?;
        Ok(Self { pmf, distortion })
    }

    /// Binary source with `P[X = 1] = p` under Hamming distortion.
    pub fn binary(p: f64) -> Result<Self> {
        Self::new(vec![1.0 - p, p], DistortionMeasure::hamming(1)?)
    }

    /// Symbol-error distortion on `pmf.len()` symbols.
    pub fn symbol_error(pmf: Vec<f64>) -> Result<Self> {
        let m = pmf.len();
        Self::new(pmf, DistortionMeasure::symbol_error(m, 1)?)
    }

    pub fn pmf(&self) -> &[f64] {
        &self.pmf
    }

    pub fn distortion(&self) -> &DistortionMeasure<f64> {
        &self.distortion
    }

    pub fn alphabet_size(&self) -> usize {
        self.pmf.len()
    }

    /// Letter distortion matrix.
    pub fn matrix(&self) -> Vec<Vec<f64>> {
        self.distortion.letter_matrix().expect("finite measure")
    }
}

impl Source for FiniteSource {
    type Point = usize;

    fn dimension(&self) -> usize {
        1
    }

    fn entropy(&self) -> f64 {
        special::entropy(&self.pmf)
    }

    fn varentropy(&self) -> f64 {
        let h = self.entropy();
        self.pmf.iter().filter(|&&p| p > 0.0).map(|&p| p * (-p.ln() - h).powi(2)).sum()
    }

    fn log_density(&self, x: &usize) -> Result<f64> {
        self.pmf.get(*x).map(|p| p.ln()).ok_or(Error::SymbolOutOfAlphabet { symbol: *x, size: self.pmf.len() })
    }
}

/// JSON descriptor of a continuous source.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case")]
pub enum ContinuousSpec {
    Gaussian { var: f64 },
    Uniform { a: f64, b: f64 },
    Laplace { b: f64 },
    Product { n: usize, letter: Box<ContinuousSpec> },
}

impl ContinuousSpec {
    pub fn build(&self) -> Result<ContinuousSource> {
        match self {
            ContinuousSpec::Gaussian { var } => ContinuousSource::gaussian(*var),
            ContinuousSpec::Uniform { a, b } => ContinuousSource::uniform(*a, *b),
            ContinuousSpec::Laplace { b } => ContinuousSource::laplace(*b),
            ContinuousSpec::Product { n, letter } => {
                if matches!(**letter, ContinuousSpec::Product { .. }) {
                    return Err(Error::param("letter", "nested products are not supported"));
                }
                letter.build()?.with_dimension(*n)
            }
        }
    }
}

/// JSON descriptor of a finite source.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FiniteSpec {
    pub pmf: Vec<f64>,
    pub distortion: DistortionSpec,
}

impl FiniteSpec {
    pub fn build(&self) -> Result<FiniteSource> {
        FiniteSource::new(self.pmf.clone(), self.distortion.build(1)?)
    }
}

/// Either kind of source descriptor.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum SourceSpec {
    Finite(FiniteSpec),
    Continuous(ContinuousSpec),
}

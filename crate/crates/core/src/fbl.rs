//! Finite-blocklength bounds on the minimum rate `R(n, d, ε)` and the
//! Gaussian approximation.
//!
//! Sources are i.i.d.; the blocklength argument overrides the source's own
//! dimension. All rates are nats per letter.

use rand_distr::{Distribution, Gamma};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::distortion::{ln_unit_ball_volume, DistortionMeasure};
use crate::error::{Error, Result};
use crate::lattice::{LatticeFamily, LatticeSpec};
use crate::rd_finite;
use crate::rng;
use crate::sources::{ContinuousSource, FiniteSource, RegularityCertificate, ScalarFamily, Source};
use crate::special::{self, ln_gamma_f64, q_inverse};
use crate::spectrum::{DiscreteSpectrum, InformationLaw};
use crate::tilted::{self, classical_slb};

/// Default Monte-Carlo budget for the achievability bound.
pub const DEFAULT_MC_SAMPLES: usize = 1_000_000;

const MC_BATCHES: usize = 10;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BoundLabel {
    ConverseCa,
    ConverseC,
    ConverseCExpansion,
    AchievabilityLattice,
    AchievabilityLatticeMc,
    GaussianCont,
    GaussianDisc,
    Slb,
    MemoryConverse,
    MemoryAchievability,
}

impl BoundLabel {
    pub fn as_str(self) -> &'static str {
        match self {
            BoundLabel::ConverseCa => "converse_ca",
            BoundLabel::ConverseC => "converse_c",
            BoundLabel::ConverseCExpansion => "converse_c_expansion",
            BoundLabel::AchievabilityLattice => "achievability_lattice",
            BoundLabel::AchievabilityLatticeMc => "achievability_lattice_mc",
            BoundLabel::GaussianCont => "gaussian_cont",
            BoundLabel::GaussianDisc => "gaussian_disc",
            BoundLabel::Slb => "slb",
            BoundLabel::MemoryConverse => "memory_converse",
            BoundLabel::MemoryAchievability => "memory_achievability",
        }
    }
}

/// One bound evaluated at `(n, d, ε)`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BoundPoint {
    pub n: usize,
    pub d: f64,
    pub eps: f64,
    pub label: BoundLabel,
    /// `max(raw_rate_nats, 0)`.
    pub rate_nats: f64,
    pub raw_rate_nats: f64,
    pub gamma: Option<f64>,
    pub mc_se: Option<f64>,
    pub lattice: Option<LatticeFamily>,
    /// Set when the raw rate is not positive.
    pub vacuous: bool,
    /// Set when a covering radius was estimated rather than known.
    pub estimated: bool,
}

impl BoundPoint {
    fn new(n: usize, d: f64, eps: f64, label: BoundLabel, raw: f64) -> Self {
        Self {
            n,
            d,
            eps,
            label,
            rate_nats: raw.max(0.0),
            raw_rate_nats: raw,
            gamma: None,
            mc_se: None,
            lattice: None,
            vacuous: !(raw > 0.0),
            estimated: false,
        }
    }

    pub fn rate_bits(&self) -> f64 {
        self.rate_nats / std::f64::consts::LN_2
    }
}

fn check_args(n: usize, d: f64, eps: f64) -> Result<()> {
    if n == 0 {
        return Err(Error::param("n", "must be positive"));
    }
    if !(d > 0.0 && d.is_finite()) {
        return Err(Error::param("d", "must be positive and finite"));
    }
    if !(eps > 0.0 && eps < 1.0) {
        return Err(Error::param("eps", "must lie in (0, 1)"));
    }
    Ok(())
}

fn block(
    src: &ContinuousSource,
    dist: &DistortionMeasure<f64>,
    n: usize,
) -> Result<(ContinuousSource, DistortionMeasure<f64>)> {
    if dist.is_finite_alphabet() {
        return Err(Error::Unsupported("finite-alphabet distortion on a continuous source".into()));
    }
    Ok((src.with_dimension(n)?, dist.with_dimension(n)?))
}

/// Converse from the tilted-information spectrum with Lebesgue base measure:
/// the least `log M` with `sup_γ P[ı(Xⁿ) − φ(d) ≥ log M + γ] − e^{−γ} ≤ ε`.
pub fn converse_ca(
    src: &ContinuousSource,
    dist: &DistortionMeasure<f64>,
    n: usize,
    d: f64,
    eps: f64,
) -> Result<BoundPoint> {
    check_args(n, d, eps)?;
    let (src_n, dist_n) = block(src, dist, n)?;
    let slb = classical_slb(&src_n, &dist_n, d)?;
    let law = InformationLaw::of_continuous(&src_n).shifted(-slb.phi_d);
    let (t, gamma) = law.min_threshold(eps, n as f64);
    let mut p = BoundPoint::new(n, d, eps, BoundLabel::ConverseCa, t / n as f64);
    p.gamma = Some(gamma);
    Ok(p)
}

/// The same converse for a finite source with counting base measure.
pub fn converse_ca_finite(src: &FiniteSource, n: usize, d: f64, eps: f64) -> Result<BoundPoint> {
    check_args(n, d, eps)?;
    let z = tilted::solve_lambda(src.distortion(), d)?;
    let phi = z.phi(d);
    let values: Vec<f64> = src.pmf().iter().map(|&p| if p > 0.0 { -p.ln() - phi } else { 0.0 }).collect();
    let spec = DiscreteSpectrum::iid_sum(&values, src.pmf(), n)?;
    let t = spec.min_threshold(eps);
    let mut p = BoundPoint::new(n, d, eps, BoundLabel::ConverseCa, t / n as f64);
    p.gamma = spec.excess_bound(t).1;
    Ok(p)
}

/// `log β_{1−ε}(P_{Xⁿ}, Lebesgue)`: volume of the smallest set of probability
/// `1 − ε`, the superlevel set of the density.
pub fn log_beta(src: &ContinuousSource, n: usize, eps: f64) -> Result<f64> {
    if !(eps > 0.0 && eps < 1.0) {
        return Err(Error::param("eps", "must lie in (0, 1)"));
    }
    let nf = n as f64;
    Ok(match src.letter() {
        // {‖x‖² ≤ 2σ² g}, g the (1−ε)-quantile of Gamma(n/2)
        ScalarFamily::Gaussian { var } => {
            let g = special::gamma_upper_quantile(0.5 * nf, eps);
            ln_unit_ball_volume(n, 2.0) + 0.5 * nf * (2.0 * var * g).ln()
        }
        // {‖x‖₁ ≤ b g}, g the (1−ε)-quantile of Gamma(n)
        ScalarFamily::Laplace { b } => {
            let g = special::gamma_upper_quantile(nf, eps);
            nf * std::f64::consts::LN_2 + nf * (b * g).ln() - ln_gamma_f64(nf + 1.0)
        }
        // constant density: a randomized test on the support
        ScalarFamily::Uniform { a, b } => (1.0 - eps).ln() + nf * (b - a).ln(),
    })
}

/// Converse `M ≥ β_{1−ε}(P_X, μ) / sup_y μ[𝖽(X, y) ≤ d]` with `μ` Lebesgue.
pub fn converse_c_beta(
    src: &ContinuousSource,
    dist: &DistortionMeasure<f64>,
    n: usize,
    d: f64,
    eps: f64,
) -> Result<BoundPoint> {
    check_args(n, d, eps)?;
    let (_, dist_n) = block(src, dist, n)?;
    let ball = dist_n.ball_log_volume(n, d)?;
    let raw = (log_beta(src, n, eps)? - ball) / n as f64;
    Ok(BoundPoint::new(n, d, eps, BoundLabel::ConverseC, raw))
}

/// Two-term expansion of the previous bound:
/// `log β ≈ n h + √(nV) Q⁻¹(ε) − ½ log n`.
pub fn converse_c_expansion(
    src: &ContinuousSource,
    dist: &DistortionMeasure<f64>,
    n: usize,
    d: f64,
    eps: f64,
) -> Result<BoundPoint> {
    check_args(n, d, eps)?;
    let (src_n, dist_n) = block(src, dist, n)?;
    let nf = n as f64;
    let log_beta = src_n.entropy() + (src_n.varentropy()).sqrt() * q_inverse(eps) - 0.5 * nf.ln();
    let raw = (log_beta - dist_n.ball_log_volume(n, d)?) / nf;
    Ok(BoundPoint::new(n, d, eps, BoundLabel::ConverseCExpansion, raw))
}

/// Monte-Carlo settings.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct McOptions {
    pub samples: usize,
    pub seed: u64,
}

impl Default for McOptions {
    fn default() -> Self {
        Self { samples: DEFAULT_MC_SAMPLES, seed: 0 }
    }
}

/// Both evaluations of the lattice achievability bound.
#[derive(Debug, Clone, PartialEq)]
pub struct Achievability {
    /// Berry–Esseen and Chebyshev pipeline; `None` when `ε` is below its slack.
    pub analytic: Option<BoundPoint>,
    /// Why the analytic path was unavailable.
    pub analytic_infeasible: Option<String>,
    pub mc: Option<BoundPoint>,
}

/// Berry–Esseen constant `B = 6 E|log f + h|³ / V^{3/2}` for one letter.
pub fn berry_esseen_constant(letter: ScalarFamily) -> Option<f64> {
    let v = letter.varentropy();
    (v > 0.0).then(|| 6.0 * letter.third_abs_central_moment() / v.powf(1.5))
}

/// Lattice quantizer followed by keeping the `M` likeliest cells. With MSE
/// distortion and the lattice scaled to `d`,
/// `ε ≤ P[−log f(X) − log V + γ > log M] + P[2 r_𝒞 v_𝒞(X) > γ]`.
pub fn achievability_lattice(
    src: &ContinuousSource,
    lattice: &LatticeSpec,
    n: usize,
    d: f64,
    eps: f64,
    mc: Option<McOptions>,
) -> Result<Achievability> {
    check_args(n, d, eps)?;
    let spec = lattice.with_dimension(n);
    let geo = spec.mse_geometry(n, d)?;
    let src_n = src.with_dimension(n)?;
    let letter = src.letter();
    let cert = letter.certificate();
    let nf = n as f64;

    let tag = |mut p: BoundPoint| {
        p.lattice = Some(spec.family());
        p.estimated = geo.estimated;
        p
    };

    let (analytic, analytic_infeasible) = match analytic_path(letter, cert, n, d, eps, geo.log_cell_volume) {
        Ok((log_m, gamma)) => {
            let mut p = BoundPoint::new(n, d, eps, BoundLabel::AchievabilityLattice, log_m / nf);
            p.gamma = Some(gamma);
            (Some(tag(p)), None)
        }
        Err(e) => (None, Some(e.to_string())),
    };

    let mc = match mc {
        Some(opts) => {
            let (rate, se, gamma) = mc_path(&src_n, cert, n, eps, geo.log_cell_volume, geo.covering_radius, opts)?;
            let mut p = BoundPoint::new(n, d, eps, BoundLabel::AchievabilityLatticeMc, rate);
            p.gamma = Some(gamma);
            p.mc_se = Some(se);
            Some(tag(p))
        }
        None => None,
    };
    Ok(Achievability { analytic, analytic_infeasible, mc })
}

/// `log M = n h + √(nV) Q⁻¹(ε') − log V + γ` with
/// `γ = 2n√d(c₁√α + c₁√d + c₀)`, `α = E𝖷² + √Var𝖷²` so that Chebyshev gives
/// `P[‖X‖²/n > α] ≤ 1/n`, and `ε' = ε − B/√n − 1/n`.
fn analytic_path(
    letter: ScalarFamily,
    cert: RegularityCertificate,
    n: usize,
    d: f64,
    eps: f64,
    log_v: f64,
) -> Result<(f64, f64)> {
    let nf = n as f64;
    let h = letter.entropy();
    let v = letter.varentropy();
    if v == 0.0 && cert.c1 == 0.0 && cert.c0 == 0.0 {
        // deterministic information and v ≡ 0: ε = 0 is reached
        return Ok((nf * h - log_v, 0.0));
    }
    let m2 = letter.second_moment();
    let var2 = (letter.fourth_moment() - m2 * m2).max(0.0);
    let alpha = m2 + var2.sqrt();
    let gamma = 2.0 * nf * d.sqrt() * (cert.c1 * alpha.sqrt() + cert.c1 * d.sqrt() + cert.c0);
    let be = berry_esseen_constant(letter).unwrap_or(0.0);
    let chebyshev = if cert.c1 > 0.0 { 1.0 / nf } else { 0.0 };
    let eps_p = eps - be / nf.sqrt() - chebyshev;
    if !(eps_p > 0.0 && eps_p < 1.0) {
        return Err(Error::Infeasible(format!(
            "eps = {eps} is below the Berry-Esseen and Chebyshev slack {:.4}",
            be / nf.sqrt() + chebyshev
        )));
    }
    let log_m = nf * h + (nf * v).sqrt() * q_inverse(eps_p) - log_v + gamma;
    Ok((log_m, gamma))
}

/// Samples of `(−log f(X), 2 r v_𝒞(X))`.
fn draw_pairs(src: &ContinuousSource, cert: RegularityCertificate, r: f64, opts: McOptions) -> Vec<(f64, f64)> {
    let n = src.dimension();
    let nf = n as f64;
    let letter = src.letter();
    rng::chunks(opts.samples, 1 << 14)
        .into_par_iter()
        .flat_map_iter(|(stream, len)| {
            let mut rg = rng::substream(opts.seed, stream);
            let mut x = vec![0.0; n];
            let mut out = Vec::with_capacity(len);
            for _ in 0..len {
                let (info, norm) = match letter {
                    // ‖X‖²/(2σ²) ~ Gamma(n/2) determines both quantities
                    ScalarFamily::Gaussian { var } => {
                        let g: f64 = Gamma::new(0.5 * nf, 1.0).unwrap().sample(&mut rg);
                        (0.5 * nf * (2.0 * std::f64::consts::PI * var).ln() + g, (2.0 * var * g).sqrt())
                    }
                    _ => {
                        src.sample_into(&mut rg, &mut x);
                        let info = -x.iter().map(|&a| letter.log_density(a)).sum::<f64>();
                        (info, x.iter().map(|a| a * a).sum::<f64>().sqrt())
                    }
                };
                out.push((info, 2.0 * r * (cert.c1 * norm + cert.c1 * r + cert.c0 * nf.sqrt())));
            }
            out
        })
        .collect()
}

/// `inf{q : #{x > q} ≤ ⌊u N⌋}` over sorted samples.
fn upper_quantile_sorted(sorted: &[f64], u: f64) -> f64 {
    let n = sorted.len();
    let k = (u * n as f64).floor() as usize;
    if k >= n {
        f64::NEG_INFINITY
    } else {
        sorted[n - 1 - k]
    }
}

/// Best `log M` over a grid of splits `ε = ε₁ + ε₂`, where `γ` is the
/// empirical `ε₂` upper quantile of `2 r v` and `log M` the `ε₁` quantile of
/// `−log f` minus `log V` plus `γ`.
fn best_split(pairs: &[(f64, f64)], eps: f64, log_v: f64) -> (f64, f64) {
    let mut a: Vec<f64> = pairs.iter().map(|p| p.0).collect();
    let mut b: Vec<f64> = pairs.iter().map(|p| p.1).collect();
    a.sort_by(|x, y| x.partial_cmp(y).unwrap());
    b.sort_by(|x, y| x.partial_cmp(y).unwrap());
    let mut fracs = vec![0.0];
    fracs.extend((0..40).map(|k| (1e-4f64.ln() + (0.99f64.ln() - 1e-4f64.ln()) * k as f64 / 39.0).exp()));
    let mut best = (f64::INFINITY, 0.0);
    for t in fracs {
        let e2 = eps * t;
        let gamma = if e2 == 0.0 { *b.last().unwrap() } else { upper_quantile_sorted(&b, e2) };
        let log_m = upper_quantile_sorted(&a, eps - e2) - log_v + gamma;
        if log_m < best.0 {
            best = (log_m, gamma);
        }
    }
    best
}

/// Rate, batch-means standard error and `γ`.
fn mc_path(
    src: &ContinuousSource,
    cert: RegularityCertificate,
    n: usize,
    eps: f64,
    log_v: f64,
    r: f64,
    opts: McOptions,
) -> Result<(f64, f64, f64)> {
    if opts.samples < 100 * MC_BATCHES {
        return Err(Error::param("samples", "need at least 1000 Monte-Carlo samples"));
    }
    let nf = n as f64;
    let pairs = draw_pairs(src, cert, r, opts);
    let (log_m, gamma) = best_split(&pairs, eps, log_v);
    let size = pairs.len() / MC_BATCHES;
    let batch: Vec<f64> = pairs.chunks_exact(size).map(|c| best_split(c, eps, log_v).0 / nf).collect();
    let mean = batch.iter().sum::<f64>() / batch.len() as f64;
    let var = batch.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (batch.len() - 1) as f64;
    Ok((log_m / nf, (var / batch.len() as f64).sqrt(), gamma))
}

/// Gaussian approximation `R̲(d) + √(V/n) Q⁻¹(ε)` with a band for the
/// unknown lower-order terms.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GaussianApprox {
    pub point: BoundPoint,
    pub slb_rate: f64,
    pub varentropy: f64,
    pub qinv_eps: f64,
    pub low: f64,
    pub high: f64,
    /// Coefficient of the `√d` term in the band.
    pub kappa: f64,
    /// Set when `V = 0`, so only the first-order term remains.
    pub zero_dispersion: bool,
}

/// `log₂(2√(πe))`, the coefficient of `log n / n` in the upper band.
pub fn upper_log_coefficient() -> f64 {
    (2.0 * (std::f64::consts::PI * std::f64::consts::E).sqrt()).log2()
}

/// Continuous mode. The band is `[rate, rate + κ√d + log₂(2√(πe)) log n / n]`
/// with `κ = 2(c₁√E𝖷² + c₀)` unless given.
pub fn gaussian_approx(
    src: &ContinuousSource,
    dist: &DistortionMeasure<f64>,
    n: usize,
    d: f64,
    eps: f64,
    kappa: Option<f64>,
) -> Result<GaussianApprox> {
    check_args(n, d, eps)?;
    let letter_dist = dist.with_dimension(1)?;
    let slb = classical_slb(&src.with_dimension(1)?, &letter_dist, d)?;
    let cert = src.certificate();
    let kappa = kappa.unwrap_or(2.0 * (cert.c1 * src.second_moment().sqrt() + cert.c0));
    let nf = n as f64;
    let q = q_inverse(eps);
    let v = slb.slb_varentropy;
    let rate = slb.slb_rate + (v / nf).sqrt() * q;
    Ok(GaussianApprox {
        point: BoundPoint::new(n, d, eps, BoundLabel::GaussianCont, rate),
        slb_rate: slb.slb_rate,
        varentropy: v,
        qinv_eps: q,
        low: rate,
        high: rate + kappa * d.sqrt() + upper_log_coefficient() * nf.ln() / nf,
        kappa,
        zero_dispersion: v == 0.0,
    })
}

/// Discrete mode, valid for `d ≤ d_c` where `R(d) = H(X) − φ(d)` and the
/// dispersion is `Var[log P(X)]`. The band is `rate ± log n / n`.
pub fn gaussian_approx_discrete(src: &FiniteSource, n: usize, d: f64, eps: f64) -> Result<GaussianApprox> {
    check_args(n, d, eps)?;
    let dc = rd_finite::critical_distortion(src)?.d_c;
    if d > dc {
        return Err(Error::OutOfRange { d, max: dc });
    }
    let slb = classical_slb(src, src.distortion(), d)?;
    let nf = n as f64;
    let q = q_inverse(eps);
    let v = slb.slb_varentropy;
    let rate = slb.slb_rate + (v / nf).sqrt() * q;
    let slack = nf.ln() / nf;
    Ok(GaussianApprox {
        point: BoundPoint::new(n, d, eps, BoundLabel::GaussianDisc, rate),
        slb_rate: slb.slb_rate,
        varentropy: v,
        qinv_eps: q,
        low: rate - slack,
        high: rate + slack,
        kappa: 0.0,
        zero_dispersion: v == 0.0,
    })
}

/// A stationary source with memory, described by what the bounds use.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MemoryProcess {
    /// `h(Xⁿ)/n`, nats.
    pub entropy_rate: f64,
    /// Log-concave joint density, which gives `Var[log f(Xⁿ)] ≤ n`.
    pub log_concave: bool,
    pub c1: f64,
    pub c0: f64,
    /// `E‖Xⁿ‖²/n`.
    pub alpha: f64,
}

impl MemoryProcess {
    /// An i.i.d. product viewed as a process.
    pub fn from_iid(src: &ContinuousSource) -> Self {
        let c = src.certificate();
        Self {
            entropy_rate: src.letter().entropy(),
            log_concave: src.is_log_concave(),
            c1: c.c1,
            c0: c.c0,
            alpha: src.second_moment(),
        }
    }
}

/// `[−√(1/(1−ε)), √(1/ε)]`.
pub fn q_band(eps: f64) -> (f64, f64) {
    (-(1.0 / (1.0 - eps)).sqrt(), (1.0 / eps).sqrt())
}

#[derive(Debug, Clone, PartialEq)]
pub struct MemoryBounds {
    pub converse: BoundPoint,
    pub achievability: BoundPoint,
}

/// MSE bounds for a log-concave process from Chebyshev's inequality.
///
/// Converse: `R̲(d) − √(1/((1−ε')n)) − log n/(2n)` with `ε' = ε + 1/√n`.
/// Achievability: `h + √(2/(εn)) − log V/n + γ/n`, splitting `ε` evenly and
/// bounding `‖X‖` by Markov's inequality.
pub fn memory_bounds(
    process: &MemoryProcess,
    lattice: &LatticeSpec,
    n: usize,
    d: f64,
    eps: f64,
) -> Result<MemoryBounds> {
    check_args(n, d, eps)?;
    if !process.log_concave {
        return Err(Error::Unsupported("memory converse needs a log-concave density".into()));
    }
    let nf = n as f64;
    let phi = 0.5 * (2.0 * std::f64::consts::PI * std::f64::consts::E * d).ln();
    let slb = process.entropy_rate - phi;
    let eps_c = eps + 1.0 / nf.sqrt();
    let converse_raw = if eps_c < 1.0 { slb - (1.0 / ((1.0 - eps_c) * nf)).sqrt() - nf.ln() / (2.0 * nf) } else { 0.0 };
    let mut converse = BoundPoint::new(n, d, eps, BoundLabel::MemoryConverse, converse_raw);
    converse.gamma = Some(0.5 * nf.ln());

    let spec = lattice.with_dimension(n);
    let geo = spec.mse_geometry(n, d)?;
    let half = eps / 2.0;
    let gamma = 2.0 * nf * d.sqrt() * (process.c1 * (process.alpha / half).sqrt() + process.c1 * d.sqrt() + process.c0);
    let log_m = nf * process.entropy_rate + (nf / half).sqrt() - geo.log_cell_volume + gamma;
    let mut achievability = BoundPoint::new(n, d, eps, BoundLabel::MemoryAchievability, log_m / nf);
    achievability.gamma = Some(gamma);
    achievability.lattice = Some(spec.family());
    achievability.estimated = geo.estimated;
    Ok(MemoryBounds { converse, achievability })
}

//! Tilted distributions `Z_λ ∝ exp(−λ𝖽(z))`, the tilt equation and the
//! classical Shannon lower bound built from them.

use crate::distortion::{self, DistortionKind, DistortionMeasure};
use crate::error::{Error, Result};
use crate::sources::Source;
use crate::special;

const LOG_LAMBDA_MIN: f64 = -40.0;
const LOG_LAMBDA_MAX: f64 = 40.0;
const MAX_BISECTIONS: usize = 200;
const MEAN_TOL: f64 = 1e-12;

/// Shape of a tilted distribution.
#[derive(Debug, Clone, PartialEq)]
pub enum TiltedKind {
    /// pmf over the group elements `z`, with letter distortions `δ(z)`.
    Discrete { pmf: Vec<f64>, values: Vec<f64> },
    /// Density `∝ exp(−λ n^{-s/p}‖Wz‖_p^s)` on `ℝⁿ`.
    Continuous { n: usize, p: f64, s: f64 },
}

#[derive(Debug, Clone, PartialEq)]
pub struct TiltedDistribution {
    pub lambda: f64,
    pub kind: TiltedKind,
    pub mean_distortion: f64,
    /// `log Σ_z exp(−λ𝖽(z))` (or the integral).
    pub log_partition: f64,
    /// `H(Z_λ)` or `h(Z_λ)`, nats.
    pub entropy: f64,
}

impl TiltedDistribution {
    /// `φ(d) = log Σ + λd`.
    pub fn phi(&self, d: f64) -> f64 {
        self.log_partition + self.lambda * d
    }
}

/// `φ(d)` for a distribution that solves the tilt equation at `d`.
pub fn phi_of_d(z: &TiltedDistribution, d: f64) -> f64 {
    z.phi(d)
}

/// Distortion values of the tilt variable: the common column multiset of a
/// balanced letter matrix.
fn discrete_values(dist: &DistortionMeasure<f64>) -> Result<Vec<f64>> {
    let m = dist.letter_matrix().ok_or(Error::NoRadius)?;
    if !distortion::is_balanced(&m) {
        return Err(Error::Unbalanced);
    }
    Ok(m.iter().map(|row| row[0]).collect())
}

fn discrete_at(values: &[f64], lambda: f64) -> TiltedDistribution {
    let logw: Vec<f64> = values.iter().map(|&v| -lambda * v).collect();
    let log_partition = special::log_sum_exp(logw.iter().copied());
    let pmf: Vec<f64> = logw.iter().map(|&l| (l - log_partition).exp()).collect();
    let mean: f64 = pmf.iter().zip(values).map(|(p, v)| p * v).sum();
    TiltedDistribution {
        lambda,
        entropy: log_partition + lambda * mean,
        kind: TiltedKind::Discrete { pmf, values: values.to_vec() },
        mean_distortion: mean,
        log_partition,
    }
}

/// Tilt by bisection on `log λ` so that the mean distortion equals `d`.
fn solve_discrete(values: &[f64], d: f64) -> Result<TiltedDistribution> {
    let max = values.iter().sum::<f64>() / values.len() as f64;
    if !(d > 0.0) || d > max * (1.0 + 1e-15) {
        return Err(Error::OutOfRange { d, max });
    }
    if (d - max).abs() <= MEAN_TOL {
        return Ok(discrete_at(values, 0.0));
    }
    let (mut lo, mut hi) = (LOG_LAMBDA_MIN, LOG_LAMBDA_MAX);
    let (mut m_lo, m_hi) =
        (discrete_at(values, lo.exp()).mean_distortion, discrete_at(values, hi.exp()).mean_distortion);
    if m_hi > d {
        return Err(Error::OutOfRange { d, max });
    }
    for _ in 0..MAX_BISECTIONS {
        let mid = 0.5 * (lo + hi);
        let z = discrete_at(values, mid.exp());
        if z.mean_distortion > m_lo + 1e-15 {
            return Err(Error::Infeasible("mean distortion not monotone in the tilt".into()));
        }
        if (z.mean_distortion - d).abs() <= MEAN_TOL {
            return Ok(z);
        }
        if z.mean_distortion > d {
            lo = mid;
            m_lo = z.mean_distortion;
        } else {
            hi = mid;
        }
    }
    Err(Error::NonConvergence { what: "tilt bisection", iterations: MAX_BISECTIONS })
}

/// Closed-form tilt for `1{z ≠ 0}` on an alphabet of size `m`.
fn symbol_error_closed_form(m: usize, d: f64) -> Result<TiltedDistribution> {
    let max = (m as f64 - 1.0) / m as f64;
    if !(d > 0.0) || d > max {
        return Err(Error::OutOfRange { d, max });
    }
    let lambda = ((m as f64 - 1.0) * (1.0 - d) / d).ln().max(0.0);
    let mut values = vec![1.0; m];
    values[0] = 0.0;
    let mut pmf = vec![d / (m as f64 - 1.0); m];
    pmf[0] = 1.0 - d;
    let entropy = special::binary_entropy(d) + d * (m as f64 - 1.0).ln();
    Ok(TiltedDistribution {
        lambda,
        kind: TiltedKind::Discrete { pmf, values },
        mean_distortion: d,
        log_partition: entropy - lambda * d,
        entropy,
    })
}

/// Solve `E[𝖽(Z_λ)] = d`.
///
/// Difference measures on `ℝⁿ` with `𝖽 = c‖·‖^s` have `λ = n/(s d)`; finite
/// balanced measures use the symbol-error closed form or bisection.
pub fn solve_lambda(dist: &DistortionMeasure<f64>, d: f64) -> Result<TiltedDistribution> {
    if !(d > 0.0) || !d.is_finite() {
        return Err(Error::param("d", "must be positive"));
    }
    match dist.kind() {
        DistortionKind::Hamming => symbol_error_closed_form(2, d),
        DistortionKind::SymbolError { m } => symbol_error_closed_form(*m, d),
        DistortionKind::Matrix { .. } => solve_discrete(&discrete_values(dist)?, d),
        _ => {
            let (p, s) = dist.norm_power().expect("continuous kind");
            let n = dist.dimension();
            let nf = n as f64;
            let lambda = nf / (s * d);
            let ln_n_over_p = if p.is_infinite() { 0.0 } else { nf * nf.ln() / p };
            let log_partition = distortion::ln_unit_ball_volume(n, p) + ln_n_over_p - dist.log_abs_det_weight()
                + special::ln_gamma_f64(nf / s + 1.0)
                - nf / s * lambda.ln();
            Ok(TiltedDistribution {
                lambda,
                kind: TiltedKind::Continuous { n, p, s },
                mean_distortion: d,
                log_partition,
                entropy: log_partition + lambda * d,
            })
        }
    }
}

/// Tilted distribution at a given `λ` for finite balanced measures.
pub fn tilted_at(dist: &DistortionMeasure<f64>, lambda: f64) -> Result<TiltedDistribution> {
    Ok(discrete_at(&discrete_values(dist)?, lambda))
}

/// Scalar radial profile `𝖽(r)` of a difference distortion
/// `𝖽(n^{-1/p}‖z‖_p)`, handled by one-dimensional quadrature.
pub struct RadialProfile<'a> {
    pub profile: &'a (dyn Fn(f64) -> f64 + Sync),
    pub n: usize,
    pub p: f64,
}

impl RadialProfile<'_> {
    /// `log ∫_{ℝⁿ} exp(−λ𝖽(z)) dz` and `E[𝖽(Z_λ)]`.
    pub fn log_partition_and_mean(&self, lambda: f64) -> (f64, f64) {
        let n = self.n as f64;
        let f = self.profile;
        // the weight r^{n-1} e^{-λ𝖽(r)} is integrated relative to its peak value
        let log_w = |r: f64| (n - 1.0) * r.ln() - lambda * f(r);
        let grid: Vec<f64> = (0..=400).map(|k| 10f64.powf(-8.0 + 16.0 * k as f64 / 400.0)).collect();
        let peak = grid.iter().map(|&r| log_w(r)).fold(f64::NEG_INFINITY, f64::max);
        let w = |r: f64| {
            if r <= 0.0 {
                if self.n == 1 {
                    (-lambda * f(0.0) - peak).exp()
                } else {
                    0.0
                }
            } else {
                (log_w(r) - peak).exp()
            }
        };
        let z0 = special::integrate_to_infinity(w, 0.0, 1e-12);
        let z1 = special::integrate_to_infinity(|r| w(r) * f(r), 0.0, 1e-12);
        let ln_surface = n.ln()
            + distortion::ln_unit_ball_volume(self.n, self.p)
            + if self.p.is_infinite() { 0.0 } else { n * n.ln() / self.p };
        (ln_surface + peak + z0.ln(), z1 / z0)
    }

    /// Solve the tilt equation by bisection on `log λ`.
    pub fn solve(&self, d: f64) -> Result<TiltedDistribution> {
        let (mut lo, mut hi) = (LOG_LAMBDA_MIN / 4.0, LOG_LAMBDA_MAX / 2.0);
        let mean = |l: f64| self.log_partition_and_mean(l.exp()).1;
        if mean(hi) > d || mean(lo) < d {
            return Err(Error::OutOfRange { d, max: mean(lo) });
        }
        for _ in 0..MAX_BISECTIONS {
            let mid = 0.5 * (lo + hi);
            let m = mean(mid);
            if (m - d).abs() <= 1e-9 * d {
                lo = mid;
                hi = mid;
                break;
            }
            if m > d {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        let lambda = (0.5 * (lo + hi)).exp();
        let (log_partition, mean_distortion) = self.log_partition_and_mean(lambda);
        Ok(TiltedDistribution {
            lambda,
            kind: TiltedKind::Continuous { n: self.n, p: self.p, s: f64::NAN },
            mean_distortion,
            log_partition,
            entropy: log_partition + lambda * mean_distortion,
        })
    }
}

/// Classical Shannon lower bound at one distortion level.
#[derive(Debug, Clone, PartialEq)]
pub struct SlbResult {
    pub d: f64,
    pub lambda_star: f64,
    /// `φ(d)` for the whole block, nats.
    pub phi_d: f64,
    /// `(h(X) − φ(d))/n` per letter; may be negative (see `vacuous`).
    pub slb_rate: f64,
    /// Per-letter `Var[log f(X)]`.
    pub slb_varentropy: f64,
    pub dimension: usize,
    /// Set when `slb_rate < 0`.
    pub vacuous: bool,
}

impl SlbResult {
    pub fn clamped_rate(&self) -> f64 {
        self.slb_rate.max(0.0)
    }
}

/// `R̲(d) = h(X) − φ(d)` (or `H(X) − φ(d)`), per letter.
///
/// The distortion is applied at the source's blocklength.
pub fn classical_slb<S: Source + ?Sized>(source: &S, dist: &DistortionMeasure<f64>, d: f64) -> Result<SlbResult> {
    let n = source.dimension();
    let dist = if dist.is_finite_alphabet() { dist.clone() } else { dist.with_dimension(n)? };
    let z = solve_lambda(&dist, d)?;
    let phi_d = z.phi(d);
    let rate = (source.entropy() - phi_d) / n as f64;
    Ok(SlbResult {
        d,
        lambda_star: z.lambda,
        phi_d,
        slb_rate: rate,
        slb_varentropy: source.varentropy() / n as f64,
        dimension: n,
        vacuous: rate < 0.0,
    })
}

/// `j̲(x, d) = −log f(x) − φ(d)` for the whole block; `+∞` off the support.
pub fn tilted_information<S: Source + ?Sized>(source: &S, slb: &SlbResult, x: &S::Point) -> Result<f64> {
    Ok(-source.log_density(x)? - slb.phi_d)
}

/// Outcome of the regularity checks on a radial profile.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LinkovReport {
    /// `𝖽(0) = 0`, `𝖽(r) > 0` for `r > 0`, nondecreasing on the probe grid.
    pub positive_nondecreasing: bool,
    /// Some `ν > 0` keeps `r^{-ν}𝖽(r)` bounded near zero; the estimate is returned.
    pub power_bounded_near_zero: bool,
    pub nu: Option<f64>,
    /// `∫ 𝖽²(r) e^{−𝖽(r)} dr < ∞` (quadrature plus tail heuristic).
    pub finite_moment_integral: bool,
}

impl LinkovReport {
    pub fn all_hold(&self) -> bool {
        self.positive_nondecreasing && self.power_bounded_near_zero && self.finite_moment_integral
    }
}

pub fn check_linkov_conditions(profile: &dyn Fn(f64) -> f64) -> LinkovReport {
    let grid: Vec<f64> = (0..=2000).map(|k| 10f64.powf(-10.0 + 16.0 * k as f64 / 2000.0)).collect();
    let values: Vec<f64> = grid.iter().map(|&r| profile(r)).collect();
    let positive_nondecreasing =
        profile(0.0) == 0.0 && values.iter().all(|&v| v > 0.0) && values.windows(2).all(|w| w[1] >= w[0]);

    // local power law between r = 1e-10 and r = 1e-4
    let (r1, r2) = (1e-10, 1e-4);
    let (d1, d2) = (profile(r1), profile(r2));
    let nu = if d1 > 0.0 && d2 > 0.0 { Some((d2.ln() - d1.ln()) / (r2.ln() - r1.ln())) } else { None };
    let power_bounded_near_zero = match nu {
        Some(nu) if nu > 1e-6 => {
            let ratio = |r: f64| profile(r) / r.powf(nu);
            let small = [1e-12, 1e-11, 1e-10, 1e-8].map(ratio);
            small.iter().all(|&q| q.is_finite() && q <= 10.0 * ratio(r2))
        }
        _ => false,
    };

    let g = |r: f64| {
        let v = profile(r);
        v * v * (-v).exp()
    };
    let body = special::integrate(g, 0.0, 100.0, 1e-10);
    // the tail converges when r²·g(r) is small and falling at the far end of the probe range
    let far = [1e5, 1e6].map(|r| r * r * g(r));
    let finite_moment_integral = body.is_finite() && far[1] < 1.0 && far[1] <= far[0];

    LinkovReport { positive_nondecreasing, power_bounded_near_zero, nu, finite_moment_integral }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sources::{ContinuousSource, FiniteSource, ScalarFamily};
    use std::f64::consts::{E, PI};

    #[test]
    fn lambda_examples() {
        let mse = DistortionMeasure::mse(1).unwrap();
        assert!((solve_lambda(&mse, 0.1).unwrap().lambda - 5.0).abs() < 1e-12);
        let mse8 = DistortionMeasure::mse(8).unwrap();
        assert!((solve_lambda(&mse8, 0.1).unwrap().lambda - 40.0).abs() < 1e-12);
        let ham = DistortionMeasure::hamming(1).unwrap();
        let z = solve_lambda(&ham, 0.25).unwrap();
        assert!((z.lambda - 3f64.ln()).abs() < 1e-12);
        let TiltedKind::Discrete { pmf, .. } = &z.kind else { panic!() };
        assert!((pmf[1] - 0.25).abs() < 1e-12);
        let se = DistortionMeasure::symbol_error(3, 1).unwrap();
        assert!((solve_lambda(&se, 0.4).unwrap().lambda - 3f64.ln()).abs() < 1e-12);
    }

    #[test]
    fn closed_forms_match_bisection() {
        for m in 2..=5 {
            let rows: Vec<Vec<f64>> =
                (0..m).map(|i| (0..m).map(|j| if i == j { 0.0 } else { 1.0 }).collect()).collect();
            let mat = DistortionMeasure::matrix(rows).unwrap();
            let closed = DistortionMeasure::symbol_error(m, 1).unwrap();
            for &d in &[0.01, 0.1, 0.3, 0.45] {
                let a = solve_lambda(&mat, d).unwrap();
                let b = solve_lambda(&closed, d).unwrap();
                assert!((a.mean_distortion - d).abs() <= 1e-10);
                assert!((a.lambda - b.lambda).abs() < 1e-8, "m={m} d={d}");
                assert!((a.phi(d) - b.phi(d)).abs() < 1e-10);
            }
        }
    }

    #[test]
    fn out_of_range_reports_max() {
        let ham = DistortionMeasure::hamming(1).unwrap();
        assert_eq!(solve_lambda(&ham, 0.7).unwrap_err(), Error::OutOfRange { d: 0.7, max: 0.5 });
        let m = DistortionMeasure::matrix(vec![vec![0.0, 2.0, 1.0], vec![1.0, 0.0, 2.0], vec![2.0, 1.0, 0.0]]).unwrap();
        assert!(matches!(solve_lambda(&m, 1.5), Err(Error::OutOfRange { .. })));
        let z = solve_lambda(&m, 1.0).unwrap();
        assert_eq!(z.lambda, 0.0);
        let unbalanced = DistortionMeasure::matrix(vec![vec![0.0, 1.0], vec![2.0, 0.0]]).unwrap();
        assert_eq!(solve_lambda(&unbalanced, 0.1), Err(Error::Unbalanced));
    }

    #[test]
    fn phi_examples() {
        let mse = DistortionMeasure::mse(1).unwrap();
        let d = 1.0 / (2.0 * PI * E);
        assert!(solve_lambda(&mse, d).unwrap().phi(d).abs() < 1e-14);
        let ham = DistortionMeasure::hamming(1).unwrap();
        let z = solve_lambda(&ham, 0.25).unwrap();
        assert!((phi_of_d(&z, 0.25) - special::binary_entropy(0.25)).abs() < 1e-14);
        assert!(
            (special::entropy(match &z.kind {
                TiltedKind::Discrete { pmf, .. } => pmf,
                _ => unreachable!(),
            }) - z.phi(0.25))
            .abs()
                < 1e-14
        );
        let se = DistortionMeasure::symbol_error(3, 1).unwrap();
        let z = solve_lambda(&se, 0.4).unwrap();
        assert!((z.phi(0.4) - (special::binary_entropy(0.4) + 0.4 * 2f64.ln())).abs() < 1e-14);
    }

    #[test]
    fn mse_phi_matches_closed_form_all_dimensions() {
        for n in 1..=64 {
            let mse = DistortionMeasure::mse(n).unwrap();
            for k in 0..=4 {
                let d = 10f64.powi(-k);
                let phi = solve_lambda(&mse, d).unwrap().phi(d);
                let want = n as f64 * (2.0 * PI * E * d).sqrt().ln();
                assert!((phi - want).abs() < 1e-12 * (1.0 + want.abs()), "n={n} d={d}: {phi} vs {want}");
            }
        }
    }

    #[test]
    fn radial_quadrature_matches_closed_forms() {
        for &(p, s) in &[(2.0, 2.0), (2.0, 1.0), (1.0, 1.0), (f64::INFINITY, 1.0), (3.0, 1.5)] {
            for n in 1..=3 {
                let prof = move |r: f64| r.powf(s);
                let radial = RadialProfile { profile: &prof, n, p };
                let dist = DistortionMeasure::lp_pow(p, s, n).unwrap();
                for &d in &[0.05, 0.5, 2.0] {
                    let a = solve_lambda(&dist, d).unwrap();
                    let b = radial.solve(d).unwrap();
                    assert!((a.lambda - b.lambda).abs() < 1e-6 * a.lambda, "p={p} s={s} n={n} d={d}");
                    assert!(
                        (a.phi(d) - b.phi(d)).abs() < 1e-6,
                        "p={p} s={s} n={n} d={d}: {} vs {}",
                        a.phi(d),
                        b.phi(d)
                    );
                }
            }
        }
    }

    #[test]
    fn mean_distortion_decreases_in_lambda() {
        let m = DistortionMeasure::matrix(vec![vec![0.0, 2.0, 1.0], vec![1.0, 0.0, 2.0], vec![2.0, 1.0, 0.0]]).unwrap();
        let means: Vec<f64> = (0..50).map(|k| tilted_at(&m, 0.1 * k as f64 + 0.01).unwrap().mean_distortion).collect();
        assert!(means.windows(2).all(|w| w[1] < w[0]));
        for k in 0..50 {
            let z = tilted_at(&m, 0.2 * k as f64).unwrap();
            let TiltedKind::Discrete { pmf, .. } = &z.kind else { panic!() };
            assert!((pmf.iter().sum::<f64>() - 1.0).abs() < 1e-10);
        }
    }

    #[test]
    fn slb_examples() {
        let g = ContinuousSource::gaussian(1.0).unwrap();
        let mse = DistortionMeasure::mse(1).unwrap();
        let r = classical_slb(&g, &mse, 0.25).unwrap();
        assert!((r.slb_rate - 2f64.ln()).abs() < 1e-14);
        assert!((r.slb_varentropy - 0.5).abs() < 1e-15);

        let u = ContinuousSource::uniform(0.0, 1.0).unwrap();
        let r = classical_slb(&u, &mse, 1.0 / (2.0 * PI * E)).unwrap();
        assert!(r.slb_rate.abs() < 1e-14);
        let r = classical_slb(&u, &mse, 0.1).unwrap();
        assert!(r.vacuous && r.clamped_rate() == 0.0);

        let b = FiniteSource::binary(0.11).unwrap();
        let r = classical_slb(&b, b.distortion(), 0.05).unwrap();
        let want = special::binary_entropy(0.11) - special::binary_entropy(0.05);
        assert!((r.slb_rate - want).abs() < 1e-14);

        // product source applies the measure blockwise
        let g16 = ContinuousSource::new(ScalarFamily::Gaussian { var: 2.0 }, 16).unwrap();
        let r = classical_slb(&g16, &mse, 0.5).unwrap();
        assert!((r.slb_rate - 0.5 * 4f64.ln()).abs() < 1e-12);
    }

    #[test]
    fn tilted_information_examples() {
        let g = ContinuousSource::gaussian(1.0).unwrap();
        let mse = DistortionMeasure::mse(1).unwrap();
        let slb = classical_slb(&g, &mse, 1.0 / (2.0 * PI * E)).unwrap();
        assert!((tilted_information(&g, &slb, &[0.0]).unwrap() - 0.5 * (2.0 * PI).ln()).abs() < 1e-14);

        let b = FiniteSource::binary(0.5).unwrap();
        let slb = classical_slb(&b, b.distortion(), 0.1).unwrap();
        let want = 2f64.ln() - special::binary_entropy(0.1);
        for x in 0..2 {
            assert!((tilted_information(&b, &slb, &x).unwrap() - want).abs() < 1e-14);
        }
        assert!((want - 0.3680).abs() < 1e-4);

        let u = ContinuousSource::uniform(0.0, 1.0).unwrap();
        let slb = classical_slb(&u, &mse, 0.01).unwrap();
        assert_eq!(tilted_information(&u, &slb, &[0.3]).unwrap(), -slb.phi_d);
        assert_eq!(tilted_information(&u, &slb, &[1.3]).unwrap(), f64::INFINITY);
    }

    #[test]
    fn tilted_information_mean_is_slb() {
        let src = ContinuousSource::new(ScalarFamily::Laplace { b: 1.0 }, 4).unwrap();
        let mse = DistortionMeasure::mse(4).unwrap();
        let slb = classical_slb(&src, &mse, 0.05).unwrap();
        let m = src.information_moments(1_000_000, 5);
        // E[j̲]/n = (E[−log f] − φ)/n
        let mc = (m.mean - slb.phi_d) / 4.0;
        assert!((mc - slb.slb_rate).abs() <= 4.0 * m.mean_se / 4.0, "{mc} vs {}", slb.slb_rate);
    }

    #[test]
    fn linkov_checks() {
        let sq = |r: f64| r * r;
        let rep = check_linkov_conditions(&sq);
        assert!(rep.all_hold());
        assert!((rep.nu.unwrap() - 2.0).abs() < 1e-9);
        for &s in &[0.3, 1.0, 2.5, 4.0] {
            let f = move |r: f64| r.powf(s);
            assert!(check_linkov_conditions(&f).all_hold(), "s={s}");
        }
        let ind = |r: f64| if r > 0.0 { 1.0 } else { 0.0 };
        let rep = check_linkov_conditions(&ind);
        assert!(rep.positive_nondecreasing);
        assert!(!rep.power_bounded_near_zero);
        assert!(!rep.finite_moment_integral);
        let slow = |r: f64| (1.0 + r).ln();
        assert!(!check_linkov_conditions(&slow).finite_moment_integral);
    }
}

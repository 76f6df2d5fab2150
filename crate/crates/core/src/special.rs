//! Special functions and small numerical helpers shared across modules.
//!
//! Everything here works in nats.

use statrs::function::erf::erfc_inv;
use statrs::function::gamma::{gamma_lr, gamma_ur, ln_gamma};

const FRAC_1_SQRT_2PI: f64 = 0.398_942_280_401_432_7;

/// Complementary standard Gaussian cdf.
pub fn q_function(x: f64) -> f64 {
    0.5 * libm::erfc(x / std::f64::consts::SQRT_2)
}

fn gaussian_pdf(x: f64) -> f64 {
    FRAC_1_SQRT_2PI * (-0.5 * x * x).exp()
}

/// Inverse of [`q_function`], polished with Newton steps.
///
/// Returns `+inf` at 0 and `-inf` at 1.
pub fn q_inverse(eps: f64) -> f64 {
    if eps <= 0.0 {
        return f64::INFINITY;
    }
    if eps >= 1.0 {
        return f64::NEG_INFINITY;
    }
    if eps > 0.5 {
        return -q_inverse(1.0 - eps);
    }
    let mut x = std::f64::consts::SQRT_2 * erfc_inv(2.0 * eps);
    for _ in 0..20 {
        let pdf = gaussian_pdf(x);
        if pdf == 0.0 {
            break;
        }
        let step = (q_function(x) - eps) / pdf;
        x += step;
        if step.abs() <= 1e-14 * x.abs().max(1.0) {
            break;
        }
    }
    x
}

/// Binary entropy in nats.
pub fn binary_entropy(p: f64) -> f64 {
    if p <= 0.0 || p >= 1.0 {
        return 0.0;
    }
    -p * p.ln() - (1.0 - p) * (1.0 - p).ln()
}

/// Shannon entropy of a pmf in nats; zero entries contribute nothing.
pub fn entropy(pmf: &[f64]) -> f64 {
    pmf.iter().filter(|&&p| p > 0.0).map(|&p| -p * p.ln()).sum()
}

/// `log Σ exp(v)` computed stably.
pub fn log_sum_exp(values: impl IntoIterator<Item = f64>) -> f64 {
    let v: Vec<f64> = values.into_iter().collect();
    let m = v.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if !m.is_finite() {
        return m;
    }
    m + v.iter().map(|x| (x - m).exp()).sum::<f64>().ln()
}

/// `log Γ(x)`.
pub fn ln_gamma_f64(x: f64) -> f64 {
    ln_gamma(x)
}

/// Upper tail `P[G ≥ x]` of a unit-scale Gamma(shape) variable.
pub fn gamma_upper_tail(shape: f64, x: f64) -> f64 {
    if x <= 0.0 {
        return 1.0;
    }
    if !x.is_finite() {
        return 0.0;
    }
    if x < shape {
        1.0 - gamma_lr(shape, x)
    } else {
        gamma_ur(shape, x)
    }
}

/// Lower tail `P[G ≤ x]` of a unit-scale Gamma(shape) variable.
pub fn gamma_lower_tail(shape: f64, x: f64) -> f64 {
    if x <= 0.0 {
        return 0.0;
    }
    if !x.is_finite() {
        return 1.0;
    }
    if x < shape {
        gamma_lr(shape, x)
    } else {
        1.0 - gamma_ur(shape, x)
    }
}

/// `x` such that `P[G ≥ x] = tail` for G ~ Gamma(shape, 1).
pub fn gamma_upper_quantile(shape: f64, tail: f64) -> f64 {
    if tail >= 1.0 {
        return 0.0;
    }
    if tail <= 0.0 {
        return f64::INFINITY;
    }
    // Work with whichever tail is smaller so the target keeps relative precision.
    let use_upper = tail <= 0.5;
    let target = if use_upper { tail } else { 1.0 - tail };
    let f = |x: f64| {
        if use_upper {
            gamma_upper_tail(shape, x) - target
        } else {
            gamma_lower_tail(shape, x) - target
        }
    };
    // Bracket on a log scale.
    let sd = shape.sqrt();
    let mut lo = (shape - 50.0 * sd).max(shape * 1e-6).max(1e-300);
    let mut hi = shape + 50.0 * sd + 50.0;
    // f is decreasing for the upper tail and increasing for the lower tail
    let sign = if use_upper { 1.0 } else { -1.0 };
    while sign * f(lo) < 0.0 && lo > 1e-300 {
        lo *= 1e-3;
    }
    while sign * f(hi) > 0.0 {
        hi *= 2.0;
    }
    for _ in 0..300 {
        let mid = if lo > 0.0 && hi / lo > 4.0 { (lo * hi).sqrt() } else { 0.5 * (lo + hi) };
        if sign * f(mid) > 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
        if hi - lo <= 1e-15 * hi {
            break;
        }
    }
    0.5 * (lo + hi)
}

/// Definite integral over a finite interval by double-exponential quadrature.
pub fn integrate(f: impl Fn(f64) -> f64, a: f64, b: f64, abs_tol: f64) -> f64 {
    if a == b {
        return 0.0;
    }
    quadrature::integrate(f, a, b, abs_tol).integral
}

/// Integral over `[a, ∞)` via the substitution `x = a + t/(1-t)`.
pub fn integrate_to_infinity(f: impl Fn(f64) -> f64, a: f64, abs_tol: f64) -> f64 {
    integrate(
        |t| {
            if t >= 1.0 {
                return 0.0;
            }
            let u = 1.0 - t;
            let v = f(a + t / u) / (u * u);
            if v.is_finite() {
                v
            } else {
                0.0
            }
        },
        0.0,
        1.0,
        abs_tol,
    )
}

/// Wilson score interval for a binomial proportion at normal quantile `z`.
pub fn wilson_interval(successes: u64, trials: u64, z: f64) -> (f64, f64) {
    if trials == 0 {
        return (0.0, 1.0);
    }
    let n = trials as f64;
    let p = successes as f64 / n;
    let z2 = z * z;
    let denom = 1.0 + z2 / n;
    let centre = (p + z2 / (2.0 * n)) / denom;
    let half = z * (p * (1.0 - p) / n + z2 / (4.0 * n * n)).sqrt() / denom;
    ((centre - half).max(0.0), (centre + half).min(1.0))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn q_inverse_roundtrip() {
        for &eps in &[1e-12, 1e-6, 0.01, 0.1, 0.3, 0.5, 0.7, 0.99] {
            let x = q_inverse(eps);
            assert!((q_function(x) - eps).abs() <= 1e-12 * eps.max(1e-3), "eps={eps}");
        }
        assert!((q_inverse(0.1) - 1.281_551_565_544_6).abs() < 1e-12);
        assert_eq!(q_inverse(0.5), 0.0);
    }

    #[test]
    fn gamma_quantile_inverts_tail() {
        for &shape in &[0.5, 1.0, 5.0, 50.0, 500.0] {
            for &tail in &[1e-6, 0.01, 0.1, 0.5, 0.9, 0.999] {
                let x = gamma_upper_quantile(shape, tail);
                let back = gamma_upper_tail(shape, x);
                assert!((back - tail).abs() < 1e-9 * tail.max(1e-3), "shape={shape} tail={tail} back={back}");
            }
        }
        // exponential: P[G ≥ x] = e^{-x}
        assert!((gamma_upper_quantile(1.0, 0.25) - 4.0_f64.ln()).abs() < 1e-12);
    }

    #[test]
    fn integrals() {
        assert!((integrate(|x| x * x, 0.0, 1.0, 1e-12) - 1.0 / 3.0).abs() < 1e-12);
        let g = integrate_to_infinity(|x| (-x).exp(), 0.0, 1e-12);
        assert!((g - 1.0).abs() < 1e-10);
    }

    #[test]
    fn entropies_and_lse() {
        assert!((binary_entropy(0.5) - std::f64::consts::LN_2).abs() < 1e-15);
        assert!((entropy(&[0.25; 4]) - 4.0_f64.ln()).abs() < 1e-15);
        assert!((log_sum_exp([0.0, 0.0]) - std::f64::consts::LN_2).abs() < 1e-15);
        assert_eq!(log_sum_exp([f64::NEG_INFINITY]), f64::NEG_INFINITY);
    }

    #[test]
    fn wilson_contains_point_estimate() {
        let (lo, hi) = wilson_interval(10, 100, 1.96);
        assert!(lo < 0.1 && hi > 0.1);
        let (lo, hi) = wilson_interval(0, 1000, 1.96);
        assert_eq!(lo, 0.0);
        assert!(hi > 0.0 && hi < 0.01);
    }
}

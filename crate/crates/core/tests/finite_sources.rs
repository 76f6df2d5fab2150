use proptest::prelude::*;
use rdlattice::fbl::{converse_ca_finite, gaussian_approx_discrete};
use rdlattice::rd_finite::{blahut_arimoto, converse_cj_rate, critical_distortion, zero_rate_distortion, DEFAULT_TOL};
use rdlattice::special::entropy;
use rdlattice::tilted::classical_slb;
use rdlattice::{Error, FiniteSource};

fn rd_curve(src: &FiniteSource, ds: &[f64]) -> Vec<f64> {
    ds.iter().map(|&d| blahut_arimoto(src, d, DEFAULT_TOL).unwrap().rate_nats).collect()
}

#[test]
fn rate_distortion_is_nonincreasing_and_convex() {
    let src = FiniteSource::symbol_error(vec![0.45, 0.3, 0.15, 0.1]).unwrap();
    let (dmax, _) = zero_rate_distortion(&src);
    let ds: Vec<f64> = (1..40).map(|k| dmax * k as f64 / 40.0).collect();
    let r = rd_curve(&src, &ds);
    assert!(r[0] <= entropy(src.pmf()) + 1e-9);
    for w in r.windows(2) {
        assert!(w[1] <= w[0] + 1e-9, "{w:?}");
    }
    for w in r.windows(3) {
        assert!(w[0] + w[2] >= 2.0 * w[1] - 1e-7, "{w:?}");
    }
}

#[test]
fn shannon_lower_bound_is_tight_up_to_critical_distortion() {
    let src = FiniteSource::symbol_error(vec![0.5, 0.3, 0.2]).unwrap();
    let dc = critical_distortion(&src).unwrap().d_c;
    for k in 1..=8 {
        let d = dc * k as f64 / 8.0;
        let ba = blahut_arimoto(&src, d, DEFAULT_TOL).unwrap().rate_nats;
        let slb = classical_slb(&src, src.distortion(), d).unwrap().slb_rate;
        assert!((ba - slb).abs() < 1e-6, "d={d}: {ba} vs {slb}");
    }
    // strictly above the bound past d_c
    let d = dc + 0.05;
    let ba = blahut_arimoto(&src, d, DEFAULT_TOL).unwrap().rate_nats;
    let slb = classical_slb(&src, src.distortion(), d).unwrap().slb_rate;
    assert!(ba > slb + 1e-4, "{ba} vs {slb}");
}

#[test]
fn two_converses_agree_under_slb_equality() {
    let src = FiniteSource::binary(0.2).unwrap();
    let d = 0.05;
    let sol = blahut_arimoto(&src, d, DEFAULT_TOL).unwrap();
    for &n in &[10, 50, 200] {
        for &eps in &[0.01, 0.1, 0.5] {
            let cj = converse_cj_rate(&src, &sol, n, eps).unwrap();
            let ca = converse_ca_finite(&src, n, d, eps).unwrap().raw_rate_nats;
            assert!((cj - ca).abs() < 1e-9, "n={n} eps={eps}: {cj} vs {ca}");
        }
    }
}

#[test]
fn converse_approaches_rate_distortion_function() {
    let src = FiniteSource::binary(0.11).unwrap();
    let d = 0.05;
    let r = blahut_arimoto(&src, d, DEFAULT_TOL).unwrap().rate_nats;
    let gap =
        |n: usize| (converse_cj_rate(&src, &blahut_arimoto(&src, d, DEFAULT_TOL).unwrap(), n, 0.1).unwrap() - r).abs();
    assert!(gap(2000) < gap(200));
    assert!(gap(2000) < 0.02);
}

#[test]
fn discrete_normal_approximation_is_gated_by_critical_distortion() {
    let src = FiniteSource::symbol_error(vec![0.5, 0.3, 0.2]).unwrap();
    assert!(gaussian_approx_discrete(&src, 100, 0.2, 0.1).is_ok());
    assert!(matches!(gaussian_approx_discrete(&src, 100, 0.45, 0.1), Err(Error::OutOfRange { .. })));
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn binary_rate_matches_closed_form(p in 0.05f64..0.5, frac in 0.05f64..0.95) {
        let src = FiniteSource::binary(p).unwrap();
        let d = p * frac;
        let h = |q: f64| -q * q.ln() - (1.0 - q) * (1.0 - q).ln();
        let sol = blahut_arimoto(&src, d, DEFAULT_TOL).unwrap();
        prop_assert!((sol.rate_nats - (h(p) - h(d))).abs() < 1e-6);
    }
}

use rdlattice::fbl::{
    achievability_lattice, converse_c_beta, converse_c_expansion, converse_ca, gaussian_approx, memory_bounds,
    McOptions, MemoryProcess,
};
use rdlattice::{ContinuousSource, DistortionMeasure64, Error, LatticeSpec};

fn gaussian() -> (ContinuousSource, DistortionMeasure64) {
    (ContinuousSource::gaussian(1.0).unwrap(), DistortionMeasure64::mse(1).unwrap())
}

#[test]
fn converses_decrease_in_epsilon() {
    let (src, mse) = gaussian();
    for n in [20, 200] {
        let mut prev = (f64::INFINITY, f64::INFINITY);
        for eps in [0.01, 0.05, 0.2, 0.5, 0.9] {
            let ca = converse_ca(&src, &mse, n, 0.05, eps).unwrap().raw_rate_nats;
            let cb = converse_c_beta(&src, &mse, n, 0.05, eps).unwrap().raw_rate_nats;
            assert!(ca <= prev.0 + 1e-12 && cb <= prev.1 + 1e-12);
            prev = (ca, cb);
        }
    }
}

#[test]
fn converses_approach_rate_distortion_function() {
    let (src, mse) = gaussian();
    let d = 0.1;
    let r = 0.5 * (1.0f64 / d).ln();
    for eps in [0.1, 0.5] {
        let ca = converse_ca(&src, &mse, 100_000, d, eps).unwrap().raw_rate_nats;
        let cb = converse_c_beta(&src, &mse, 100_000, d, eps).unwrap().raw_rate_nats;
        assert!((ca - r).abs() < 0.01 && (cb - r).abs() < 0.01, "{ca} {cb} {r}");
    }
}

#[test]
fn expansion_tracks_exact_beta_converse_at_large_n() {
    let (src, mse) = gaussian();
    let exact = converse_c_beta(&src, &mse, 5000, 0.05, 0.1).unwrap().raw_rate_nats;
    let expanded = converse_c_expansion(&src, &mse, 5000, 0.05, 0.1).unwrap().raw_rate_nats;
    assert!((exact - expanded).abs() < 5e-3, "{exact} vs {expanded}");
}

#[test]
fn analytic_achievability_dominates_monte_carlo_path() {
    let (src, mse) = gaussian();
    let (n, d, eps) = (2000, 0.05, 0.3);
    let a = achievability_lattice(
        &src,
        &LatticeSpec::AnStar { n },
        n,
        d,
        eps,
        Some(McOptions { samples: 200_000, seed: 9 }),
    )
    .unwrap();
    let mc = a.mc.unwrap();
    let cb = converse_c_beta(&src, &mse, n, d, eps).unwrap().raw_rate_nats;
    assert!(cb <= mc.raw_rate_nats);
    if let Some(an) = a.analytic {
        assert!(mc.raw_rate_nats <= an.raw_rate_nats + 3.0 * mc.mc_se.unwrap());
    }
}

#[test]
fn normal_approximation_sits_between_converse_and_its_band() {
    let (src, mse) = gaussian();
    for n in [100, 1000] {
        let g = gaussian_approx(&src, &mse, n, 0.05, 0.1, None).unwrap();
        assert!(g.low <= g.point.raw_rate_nats + 1e-12 && g.point.raw_rate_nats <= g.high);
        assert!(converse_ca(&src, &mse, n, 0.05, 0.1).unwrap().raw_rate_nats <= g.high);
    }
}

#[test]
fn memory_bounds_order_and_need_log_concavity() {
    let src = ContinuousSource::gaussian(1.0).unwrap();
    let process = MemoryProcess::from_iid(&src);
    let b = memory_bounds(&process, &LatticeSpec::AnStar { n: 1 }, 10_000, 0.05, 0.2).unwrap();
    assert!(b.converse.raw_rate_nats <= b.achievability.raw_rate_nats);
    let heavy = MemoryProcess { log_concave: false, ..process };
    assert!(matches!(memory_bounds(&heavy, &LatticeSpec::AnStar { n: 1 }, 100, 0.05, 0.2), Err(Error::Unsupported(_))));
}

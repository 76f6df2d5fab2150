use rand::Rng as _;
use rdlattice::lattice::entropy::{
    entropy_upper_bound_thm8, lattice_d_entropy_bounds, output_info_spectrum, DEFAULT_ROGERS_C,
};
use rdlattice::rng::substream;
use rdlattice::{ContinuousSource, DistortionMeasure64, Lattice64};

fn families(n: usize) -> Vec<Lattice64> {
    vec![Lattice64::zn(n).unwrap(), Lattice64::dn(n).unwrap(), Lattice64::an_star(n).unwrap()]
}

#[test]
fn scaled_lattices_meet_mse_guarantee_on_every_sample() {
    let d = 0.03;
    for n in 2..=8 {
        let mse = DistortionMeasure64::mse(n).unwrap();
        let src = ContinuousSource::gaussian(1.0).unwrap().with_dimension(n).unwrap();
        for lat in families(n) {
            let lat = lat.scale_to_distortion(&mse, d).unwrap();
            let mut q = lat.quantizer();
            let mut rng = substream(7, n as u64);
            for _ in 0..20_000 {
                let x = src.sample(&mut rng);
                let (y, _) = q.quantize(&x).unwrap();
                let dist = mse.evaluate(&x, y).unwrap();
                assert!(dist <= d * (1.0 + 1e-12), "{:?} n={n}: {dist}", lat.family());
            }
        }
    }
}

#[test]
fn integer_lattice_meets_lp_guarantees() {
    let d = 0.2;
    for p in [1.0, 3.0, f64::INFINITY] {
        let n = 4;
        let dist = DistortionMeasure64::lp_pow(p, 1.0, n).unwrap();
        let lat = Lattice64::zn(n).unwrap().scale_to_distortion(&dist, d).unwrap();
        let mut q = lat.quantizer();
        let mut rng = substream(11, 0);
        for _ in 0..20_000 {
            let x: Vec<f64> = (0..n).map(|_| rng.random_range(-5.0..5.0)).collect();
            let (y, _) = q.quantize(&x).unwrap();
            assert!(dist.evaluate(&x, y).unwrap() <= d * (1.0 + 1e-12));
        }
    }
}

#[test]
fn custom_generator_decodes_like_named_family() {
    let named = Lattice64::dn(5).unwrap();
    let custom = Lattice64::custom(named.generator(), Some(named.covering_radius())).unwrap();
    let mut rng = substream(3, 0);
    let (mut qa, mut qb) = (named.quantizer(), custom.quantizer());
    for _ in 0..5_000 {
        let x: Vec<f64> = (0..5).map(|_| rng.random_range(-20.0..20.0)).collect();
        let ea = qa.error(&x);
        let eb = qb.error(&x);
        assert!((ea - eb).abs() < 1e-9, "{ea} vs {eb}");
    }
}

#[test]
fn entropy_bound_dominates_simulated_entropy_in_several_dimensions() {
    let d = 0.01;
    for n in [2, 4] {
        let mse = DistortionMeasure64::mse(n).unwrap();
        let src = ContinuousSource::laplace(1.0).unwrap().with_dimension(n).unwrap();
        for lat in families(n) {
            let lat = lat.scale_to_distortion(&mse, d).unwrap();
            let bound = entropy_upper_bound_thm8(&lat, &src).unwrap();
            let spec = output_info_spectrum(&lat, &src, 200_000, 5).unwrap();
            assert!(bound.gap >= 0.0);
            // the Miller–Madow estimate is biased low when cells are sparse, which only helps here
            assert!(spec.entropy <= bound.entropy_bound + 3.0 * spec.entropy_se, "{:?} n={n}", lat.family());
        }
    }
}

#[test]
fn d_entropy_lower_bound_per_letter_tends_to_rate_distortion() {
    let d = 0.01;
    let src = ContinuousSource::gaussian(1.0).unwrap();
    let target = 0.5 * (1.0f64 / d).ln();
    let mut prev = f64::INFINITY;
    for n in [4, 16, 64, 256] {
        let b = lattice_d_entropy_bounds(&src.with_dimension(n).unwrap(), d, DEFAULT_ROGERS_C).unwrap();
        assert!(b.lower <= b.upper && b.kl_term >= 0.0);
        let gap = (b.lower / n as f64 - target).abs();
        assert!(gap < prev, "n={n}: {gap}");
        prev = gap;
    }
    assert!(prev < 0.02);
}

//! Output entropy of lattice quantizers: Monte-Carlo estimates and bounds.

use std::collections::HashMap;

use rayon::prelude::*;

use super::{Lattice, LatticeFamily};
use crate::distortion::{ln_unit_ball_volume, DistortionMeasure};
use crate::error::{Error, Result};
use crate::rng;
use crate::sources::{ContinuousSource, Source};

/// Default constant in the Rogers covering bound.
pub const DEFAULT_ROGERS_C: f64 = 2.0;

/// Below this many samples the entropy estimate is flagged as unreliable.
pub const MIN_SPECTRUM_SAMPLES: usize = 10_000;

const CHUNK: usize = 1 << 16;

/// Cell occupancy counts keyed by lattice index.
pub type Occupancy = HashMap<Vec<i64>, u64>;

/// Count how many of `samples` source blocks fall in each cell.
pub fn cell_counts(lat: &Lattice<f64>, src: &ContinuousSource, samples: usize, seed: u64) -> Result<Occupancy> {
    check_dims(lat, src)?;
    let parts: Vec<Occupancy> = rng::chunks(samples, CHUNK)
        .into_par_iter()
        .map(|(stream, len)| {
            let mut r = rng::substream(seed, stream);
            let mut q = lat.quantizer();
            let mut x = vec![0.0; src.dimension()];
            let mut map = Occupancy::new();
            for _ in 0..len {
                src.sample_into(&mut r, &mut x);
                let idx = q.index(&x).expect("dimension checked");
                if let Some(c) = map.get_mut(idx) {
                    *c += 1;
                } else {
                    map.insert(idx.to_vec(), 1);
                }
            }
            map
        })
        .collect();
    Ok(merge(parts))
}

fn merge(parts: Vec<Occupancy>) -> Occupancy {
    let mut it = parts.into_iter();
    let mut acc = it.next().unwrap_or_default();
    for part in it {
        for (k, v) in part {
            *acc.entry(k).or_insert(0) += v;
        }
    }
    acc
}

fn check_dims(lat: &Lattice<f64>, src: &ContinuousSource) -> Result<()> {
    if lat.dimension() != src.dimension() {
        return Err(Error::DimensionMismatch { expected: lat.dimension(), got: src.dimension() });
    }
    Ok(())
}

/// Empirical law of the output information `−log P[q(X) = c]`.
#[derive(Debug, Clone, PartialEq)]
pub struct OutputSpectrum {
    pub samples: usize,
    pub cells: usize,
    /// Plug-in entropy estimate (nats).
    pub entropy_plugin: f64,
    /// Plug-in plus the Miller–Madow correction `(K−1)/(2N)`.
    pub entropy: f64,
    /// Standard error of the entropy estimate.
    pub entropy_se: f64,
    /// `(information, probability)` atoms sorted by information.
    pub atoms: Vec<(f64, f64)>,
    /// Set when `samples` is below [`MIN_SPECTRUM_SAMPLES`].
    pub low_samples: bool,
}

impl OutputSpectrum {
    pub fn from_counts(counts: &Occupancy) -> Self {
        let total: u64 = counts.values().sum();
        let n = total as f64;
        let mut by_count: HashMap<u64, u64> = HashMap::new();
        for &c in counts.values() {
            *by_count.entry(c).or_insert(0) += 1;
        }
        let mut atoms: Vec<(f64, f64)> =
            by_count.into_iter().map(|(c, cells)| (-(c as f64 / n).ln(), (c * cells) as f64 / n)).collect();
        atoms.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap());
        let h: f64 = atoms.iter().map(|(i, p)| p * i).sum();
        let m2: f64 = atoms.iter().map(|(i, p)| p * i * i).sum();
        let k = counts.len() as f64;
        Self {
            samples: total as usize,
            cells: counts.len(),
            entropy_plugin: h,
            entropy: h + (k - 1.0) / (2.0 * n),
            entropy_se: ((m2 - h * h).max(0.0) / n).sqrt(),
            atoms,
            low_samples: (total as usize) < MIN_SPECTRUM_SAMPLES,
        }
    }

    /// Empirical `P[ı ≥ t]`.
    pub fn ccdf(&self, t: f64) -> f64 {
        self.atoms.iter().filter(|a| a.0 >= t).map(|a| a.1).sum()
    }

    /// `(information, P[ı ≥ information])` at each atom.
    pub fn ccdf_points(&self) -> Vec<(f64, f64)> {
        let mut acc = 0.0;
        let mut out: Vec<(f64, f64)> = self
            .atoms
            .iter()
            .rev()
            .map(|&(i, p)| {
                acc += p;
                (i, acc.min(1.0))
            })
            .collect();
        out.reverse();
        out
    }
}

/// Monte-Carlo output spectrum and entropy of `lat` applied to `src`.
pub fn output_info_spectrum(
    lat: &Lattice<f64>,
    src: &ContinuousSource,
    samples: usize,
    seed: u64,
) -> Result<OutputSpectrum> {
    if samples == 0 {
        return Err(Error::param("samples", "must be positive"));
    }
    Ok(OutputSpectrum::from_counts(&cell_counts(lat, src, samples, seed)?))
}

/// Upper bound on the output entropy from a regularity certificate.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EntropyBound {
    /// `h(X) − log V`.
    pub base: f64,
    /// `2 r E[v_𝒞(X)]`.
    pub gap: f64,
    pub entropy_bound: f64,
    pub covering_radius: f64,
    pub radius_estimated: bool,
}

impl EntropyBound {
    /// Per-point bound on `ı(q(x))`: `−log f(x) − log V + 2 r v_𝒞(x)`.
    pub fn info_bound(&self, lat: &Lattice<f64>, src: &ContinuousSource, x: &[f64]) -> Result<f64> {
        let v = v_lattice(src, self.covering_radius, x.iter().map(|a| a * a).sum::<f64>().sqrt());
        Ok(-src.log_density(x)? - lat.log_cell_volume() + 2.0 * self.covering_radius * v)
    }
}

/// `v_𝒞(x) = c₁‖x‖ + c₁ r + c₀√n`.
fn v_lattice(src: &ContinuousSource, r: f64, norm: f64) -> f64 {
    let c = src.certificate();
    c.c1 * norm + c.c1 * r + c.c0 * (src.dimension() as f64).sqrt()
}

/// `H(q(X)) ≤ h(X) − log V + 2 r E[v_𝒞(X)]`, using the exact `E‖X‖` when
/// available and its Jensen bound otherwise.
pub fn entropy_upper_bound_thm8(lat: &Lattice<f64>, src: &ContinuousSource) -> Result<EntropyBound> {
    check_dims(lat, src)?;
    let r = lat.covering_radius();
    let base = src.entropy() - lat.log_cell_volume();
    let gap = 2.0 * r * v_lattice(src, r, src.expected_norm());
    Ok(EntropyBound {
        base,
        gap,
        entropy_bound: base + gap,
        covering_radius: r,
        radius_estimated: lat.radius_estimated(),
    })
}

/// `log₂√(2πe)·(ln n + ln ln n + c)`, the Rogers bound on `n log ρ` for the
/// thinnest covering (`n ≥ 3`).
pub fn rogers_log_efficiency(n: usize, c: f64) -> Option<f64> {
    if n < 3 {
        return None;
    }
    let nf = n as f64;
    Some((2.0 * std::f64::consts::PI * std::f64::consts::E).sqrt().log2() * (nf.ln() + nf.ln().ln() + c))
}

/// Which covering enters the upper lattice d-entropy bound.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CoveringTerm {
    AnStar,
    Rogers,
}

/// Bracket on the lattice d-entropy of an `n`-block.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DEntropyBounds {
    pub lower: f64,
    pub upper: f64,
    /// `n log ρ` used in the upper bound.
    pub covering_log: f64,
    pub covering_term: CoveringTerm,
    /// Divergence term `2 r E[v_𝒞(X)]`.
    pub kl_term: f64,
    pub rogers_c: f64,
}

/// `lower = h(X) − n log √(nd) − log b_n`,
/// `upper = lower + n log ρ + 2 r E[v_𝒞(X)]` with `ρ` the smaller of the
/// `Aₙ*` efficiency and the Rogers bound.
pub fn lattice_d_entropy_bounds(src: &ContinuousSource, d: f64, rogers_c: f64) -> Result<DEntropyBounds> {
    if !(d > 0.0 && d.is_finite()) {
        return Err(Error::param("d", "must be positive and finite"));
    }
    let n = src.dimension();
    let nf = n as f64;
    let r = (nf * d).sqrt();
    let lower = src.entropy() - nf * r.ln() - ln_unit_ball_volume(n, 2.0);
    let an = Lattice::<f64>::an_star(n)?;
    debug_assert_eq!(an.family(), LatticeFamily::AnStar);
    let exact = nf * an.log_covering_efficiency();
    let (covering_log, covering_term) = match rogers_log_efficiency(n, rogers_c) {
        Some(rg) if rg < exact => (rg, CoveringTerm::Rogers),
        _ => (exact, CoveringTerm::AnStar),
    };
    let kl_term = 2.0 * r * v_lattice(src, r, src.expected_norm());
    Ok(DEntropyBounds { lower, upper: lower + covering_log + kl_term, covering_log, covering_term, kl_term, rogers_c })
}

/// Scale `lat` to MSE distortion `d` at its own dimension.
pub fn scaled_for_mse(lat: &Lattice<f64>, d: f64) -> Result<Lattice<f64>> {
    lat.scale_to_distortion(&DistortionMeasure::mse(lat.dimension())?, d)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn uniform_cells_are_equiprobable() {
        let k = 16.0;
        let lat = Lattice::<f64>::zn(1).unwrap().with_scale(1.0 / k).unwrap().with_offset(vec![0.5 / k]).unwrap();
        let src = ContinuousSource::uniform(0.0, 1.0).unwrap();
        let s = output_info_spectrum(&lat, &src, 200_000, 3).unwrap();
        assert_eq!(s.cells, 16);
        assert!((s.entropy - k.ln()).abs() < 3.0 * s.entropy_se.max(1e-4));
        assert!(!s.low_samples);
    }

    #[test]
    fn single_cell_has_zero_entropy() {
        let lat = Lattice::<f64>::zn(1).unwrap().with_scale(1e6).unwrap();
        let src = ContinuousSource::gaussian(1.0).unwrap();
        let s = output_info_spectrum(&lat, &src, 1000, 1).unwrap();
        assert_eq!(s.cells, 1);
        assert_eq!(s.entropy, 0.0);
        assert!(s.low_samples);
        assert_eq!(s.ccdf(0.0), 1.0);
    }

    #[test]
    fn deterministic_for_seed() {
        let lat = Lattice::<f64>::an_star(2).unwrap().with_scale(0.3).unwrap();
        let src = ContinuousSource::gaussian(1.0).unwrap().with_dimension(2).unwrap();
        let a = output_info_spectrum(&lat, &src, 50_000, 11).unwrap();
        let b = output_info_spectrum(&lat, &src, 50_000, 11).unwrap();
        assert_eq!(a, b);
        let pts = a.ccdf_points();
        assert_relative_eq!(pts[0].1, 1.0, epsilon = 1e-12);
        assert!(pts.windows(2).all(|w| w[0].1 >= w[1].1));
    }

    #[test]
    fn thm8_gap_example() {
        let src = ContinuousSource::gaussian(1.0).unwrap();
        let lat = scaled_for_mse(&Lattice::zn(1).unwrap(), 1e-4).unwrap();
        let b = entropy_upper_bound_thm8(&lat, &src).unwrap();
        let r = 0.01;
        let expect = 2.0 * r * (2.0 * (2.0 / std::f64::consts::PI).sqrt() + 2.0 * r);
        assert_relative_eq!(b.gap, expect, epsilon = 1e-12);
        assert!((b.gap - 0.0323).abs() < 1e-4);
        let u = ContinuousSource::uniform(0.0, 1.0).unwrap();
        assert_eq!(entropy_upper_bound_thm8(&lat, &u).unwrap().gap, 0.0);
    }

    #[test]
    fn d_entropy_bracket() {
        let u = ContinuousSource::uniform(0.0, 1.0).unwrap().with_dimension(2).unwrap();
        let b = lattice_d_entropy_bounds(&u, 0.01, DEFAULT_ROGERS_C).unwrap();
        assert_eq!(b.kl_term, 0.0);
        assert_eq!(b.covering_term, CoveringTerm::AnStar);
        let rho = Lattice::<f64>::an_star(2).unwrap().geometry().covering_efficiency;
        assert_relative_eq!(b.upper - b.lower, 2.0 * rho.ln(), epsilon = 1e-12);
        // large n: Rogers beats Aₙ*
        let g = ContinuousSource::gaussian(1.0).unwrap().with_dimension(400).unwrap();
        let b = lattice_d_entropy_bounds(&g, 1e-4, DEFAULT_ROGERS_C).unwrap();
        assert_eq!(b.covering_term, CoveringTerm::Rogers);
        assert!(b.upper > b.lower);
        assert!(rogers_log_efficiency(2, 2.0).is_none());
    }
}

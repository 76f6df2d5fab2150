//! Lattice quantizer followed by a lossless coder, simulated end to end.
//!
//! Each run has a training pass, which estimates the cell pmf, and an
//! evaluation pass on an independent stream, which measures code length,
//! excess probability and distortion.

pub mod huffman;

use std::collections::HashMap;
use std::hash::{DefaultHasher, Hash, Hasher};

use rayon::prelude::*;
use serde::Serialize;

use crate::distortion::DistortionMeasure;
use crate::error::{Error, Result};
use crate::lattice::entropy::{cell_counts, Occupancy, OutputSpectrum};
use crate::lattice::Lattice;
use crate::rng;
use crate::sources::{ContinuousSource, Source};
use crate::special::wilson_interval;
use huffman::Codebook;

/// Raw payload carried after the escape codeword.
pub const ESCAPE_PAYLOAD_BITS: u32 = 64;

/// Escape rates above this are flagged.
pub const ESCAPE_FLAG_RATE: f64 = 0.01;

const Z_95: f64 = 1.959_963_984_540_054;

const TRAIN_TAG: u64 = 1;
const EVAL_TAG: u64 = 2;

/// Quantizer, source and the distortion guarantee it should meet.
#[derive(Debug, Clone, Copy)]
pub struct Simulation<'a> {
    pub source: &'a ContinuousSource,
    pub lattice: &'a Lattice<f64>,
    pub distortion: &'a DistortionMeasure<f64>,
    pub d: f64,
}

/// Empirical performance of one run. Lengths are bits per letter.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CodecStats {
    pub avg_length_bits: f64,
    /// Miller–Madow entropy of the training cells, bits per letter.
    pub entropy_bits: f64,
    pub entropy_se_bits: f64,
    pub eps_hat: f64,
    pub eps_wilson: (f64, f64),
    /// `P̂[ı(q(X)) > log M]` from the training spectrum.
    pub eps_spectrum_bound: Option<f64>,
    pub m_used: Option<u64>,
    pub cells_observed: usize,
    pub escape_rate: f64,
    /// Evaluation blocks in unseen cells when no escape codeword exists.
    pub unencodable: u64,
    pub max_distortion: f64,
    pub distortion_violations: u64,
    pub samples: usize,
    pub seed: u64,
    pub flags: Vec<String>,
}

/// One training cell and its codeword length.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CellEntry {
    pub index_hash: u64,
    pub count: u64,
    pub code_length: Option<u32>,
}

/// Deterministic hash of a cell index, for tables.
pub fn index_hash(index: &[i64]) -> u64 {
    let mut h = DefaultHasher::new();
    index.hash(&mut h);
    h.finish()
}

/// Cells sorted by decreasing count, then by index.
fn ranked(counts: &Occupancy) -> Vec<(&Vec<i64>, u64)> {
    let mut cells: Vec<(&Vec<i64>, u64)> = counts.iter().map(|(k, &v)| (k, v)).collect();
    cells.sort_by(|a, b| b.1.cmp(&a.1).then_with(|| a.0.cmp(b.0)));
    cells
}

/// Statistics gathered over the evaluation stream.
#[derive(Debug, Clone, Copy, Default)]
struct EvalAcc {
    bits: u128,
    escapes: u64,
    misses: u64,
    max_distortion: f64,
    violations: u64,
}

impl EvalAcc {
    fn merge(self, o: Self) -> Self {
        Self {
            bits: self.bits + o.bits,
            escapes: self.escapes + o.escapes,
            misses: self.misses + o.misses,
            max_distortion: self.max_distortion.max(o.max_distortion),
            violations: self.violations + o.violations,
        }
    }
}

impl Simulation<'_> {
    fn check(&self) -> Result<()> {
        let n = self.lattice.dimension();
        if self.source.dimension() != n {
            return Err(Error::DimensionMismatch { expected: n, got: self.source.dimension() });
        }
        if self.distortion.dimension() != n {
            return Err(Error::DimensionMismatch { expected: n, got: self.distortion.dimension() });
        }
        if !(self.d > 0.0) {
            return Err(Error::param("d", "must be positive"));
        }
        Ok(())
    }

    /// Pass over a fresh stream; `cost` maps a cell index to its bit cost and
    /// whether it was escaped, or `None` for a miss.
    fn evaluate(&self, samples: usize, seed: u64, cost: impl Fn(&[i64]) -> Option<(u64, bool)> + Sync) -> EvalAcc {
        let n = self.source.dimension();
        rng::chunks(samples, 1 << 14)
            .into_par_iter()
            .map(|(stream, len)| {
                let mut r = rng::substream(seed, stream);
                let mut q = self.lattice.quantizer();
                let mut x = vec![0.0; n];
                let mut acc = EvalAcc::default();
                for _ in 0..len {
                    self.source.sample_into(&mut r, &mut x);
                    let (point, index) = q.quantize(&x).expect("dimension checked");
                    let dist = self.distortion.evaluate(&x, point).expect("dimension checked");
                    acc.max_distortion = acc.max_distortion.max(dist);
                    if dist > self.d {
                        acc.violations += 1;
                    }
                    match cost(index) {
                        Some((b, esc)) => {
                            acc.bits += b as u128;
                            acc.escapes += esc as u64;
                        }
                        None => acc.misses += 1,
                    }
                }
                acc
            })
            .reduce(EvalAcc::default, EvalAcc::merge)
    }

    fn train(&self, samples: usize, seed: u64) -> Result<(Occupancy, OutputSpectrum)> {
        let counts = cell_counts(self.lattice, self.source, samples, rng::derive_seed(seed, TRAIN_TAG))?;
        let spec = OutputSpectrum::from_counts(&counts);
        Ok((counts, spec))
    }

    /// Huffman code over the training cells plus an escape symbol, measured
    /// on `samples` held-out blocks.
    ///
    /// The escape symbol gets the Good–Turing weight (number of training
    /// singletons); with no singletons it is omitted and unseen cells are
    /// counted as unencodable.
    pub fn variable_length(&self, samples: usize, seed: u64) -> Result<(CodecStats, Vec<CellEntry>)> {
        self.check()?;
        if samples == 0 {
            return Err(Error::param("samples", "must be positive"));
        }
        let (counts, spec) = self.train(samples, seed)?;
        let cells = ranked(&counts);
        let singletons = cells.iter().filter(|c| c.1 == 1).count() as u64;
        let mut weights: Vec<u64> = cells.iter().map(|c| c.1).collect();
        let has_escape = singletons > 0;
        if has_escape {
            weights.push(singletons);
        }
        let book = Codebook::from_weights(&weights)?;
        let table: HashMap<&[i64], u64> =
            cells.iter().enumerate().map(|(i, c)| (c.0.as_slice(), book.length(i) as u64)).collect();
        let escape_cost = has_escape.then(|| book.length(cells.len()) as u64 + ESCAPE_PAYLOAD_BITS as u64);
        let acc = self.evaluate(samples, rng::derive_seed(seed, EVAL_TAG), |idx| {
            table.get(idx).map(|&b| (b, false)).or(escape_cost.map(|b| (b, true)))
        });
        let n = self.source.dimension() as f64;
        let total = samples as f64;
        let escape_rate = acc.escapes as f64 / total;
        let mut flags = Vec::new();
        if escape_rate > ESCAPE_FLAG_RATE {
            flags.push("escape_rate_above_1pct".to_string());
        }
        if acc.misses > 0 {
            flags.push("unencodable_blocks".to_string());
        }
        if spec.low_samples {
            flags.push("low_samples".to_string());
        }
        let entries = cells
            .iter()
            .enumerate()
            .map(|(i, c)| CellEntry { index_hash: index_hash(c.0), count: c.1, code_length: Some(book.length(i)) })
            .collect();
        let stats = CodecStats {
            avg_length_bits: acc.bits as f64 / total / n,
            entropy_bits: spec.entropy / std::f64::consts::LN_2 / n,
            entropy_se_bits: spec.entropy_se / std::f64::consts::LN_2 / n,
            eps_hat: 0.0,
            eps_wilson: (0.0, 0.0),
            eps_spectrum_bound: None,
            m_used: None,
            cells_observed: cells.len(),
            escape_rate,
            unencodable: acc.misses,
            max_distortion: acc.max_distortion,
            distortion_violations: acc.violations,
            samples,
            seed,
            flags,
        };
        Ok((stats, entries))
    }

    /// Keep the `m` likeliest training cells; `ε̂` is the fraction of held-out
    /// blocks outside them.
    pub fn fixed_length(&self, m: u64, samples: usize, seed: u64) -> Result<CodecStats> {
        self.check()?;
        if m == 0 {
            return Err(Error::param("m", "must be at least 1"));
        }
        if samples == 0 {
            return Err(Error::param("samples", "must be positive"));
        }
        let (counts, spec) = self.train(samples, seed)?;
        let cells = ranked(&counts);
        let kept: HashMap<&[i64], u64> =
            cells.iter().take(m.min(usize::MAX as u64) as usize).map(|c| (c.0.as_slice(), 0)).collect();
        let acc = self.evaluate(samples, rng::derive_seed(seed, EVAL_TAG), |idx| kept.get(idx).map(|&b| (b, false)));
        let total = samples as f64;
        let mut flags = Vec::new();
        if m as usize > cells.len() {
            flags.push("m_exceeds_observed_cells".to_string());
        }
        let log_m = (m as f64).ln();
        let n = self.source.dimension() as f64;
        Ok(CodecStats {
            avg_length_bits: (m as f64).log2().ceil() / n,
            entropy_bits: spec.entropy / std::f64::consts::LN_2 / n,
            entropy_se_bits: spec.entropy_se / std::f64::consts::LN_2 / n,
            eps_hat: acc.misses as f64 / total,
            eps_wilson: wilson_interval(acc.misses, samples as u64, Z_95),
            eps_spectrum_bound: Some(spec.atoms.iter().filter(|a| a.0 > log_m).map(|a| a.1).sum()),
            m_used: Some(m),
            cells_observed: cells.len(),
            escape_rate: 0.0,
            unencodable: 0,
            max_distortion: acc.max_distortion,
            distortion_violations: acc.violations,
            samples,
            seed,
            flags,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn uniform_k(k: f64) -> (ContinuousSource, Lattice<f64>, DistortionMeasure<f64>) {
        let src = ContinuousSource::uniform(0.0, 1.0).unwrap();
        let lat = Lattice::zn(1).unwrap().with_scale(1.0 / k).unwrap().with_offset(vec![0.5 / k]).unwrap();
        (src, lat, DistortionMeasure::mse(1).unwrap())
    }

    #[test]
    fn dyadic_uniform_costs_three_bits() {
        let (src, lat, mse) = uniform_k(8.0);
        let sim = Simulation { source: &src, lattice: &lat, distortion: &mse, d: 1.0 / 256.0 };
        let (s, cells) = sim.variable_length(100_000, 9).unwrap();
        assert_eq!(s.avg_length_bits, 3.0);
        assert_eq!(cells.len(), 8);
        assert_eq!(s.distortion_violations, 0);
        let f = sim.fixed_length(8, 100_000, 9).unwrap();
        assert_eq!(f.eps_hat, 0.0);
    }

    #[test]
    fn single_cell_costs_nothing() {
        let src = ContinuousSource::gaussian(1.0).unwrap();
        let lat = Lattice::zn(1).unwrap().with_scale(1e6).unwrap();
        let mse = DistortionMeasure::mse(1).unwrap();
        let sim = Simulation { source: &src, lattice: &lat, distortion: &mse, d: 1e12 };
        let (s, _) = sim.variable_length(10_000, 1).unwrap();
        assert_eq!(s.avg_length_bits, 0.0);
        assert_eq!(s.escape_rate, 0.0);
        assert_eq!(s.unencodable, 0);
    }

    #[test]
    fn symmetric_two_cells_with_one_kept() {
        // cells (−1, 0] and (0, 1] for a symmetric source
        let src = ContinuousSource::uniform(-1.0, 1.0).unwrap();
        let lat = Lattice::zn(1).unwrap().with_offset(vec![0.5]).unwrap();
        let mse = DistortionMeasure::mse(1).unwrap();
        let sim = Simulation { source: &src, lattice: &lat, distortion: &mse, d: 0.25 };
        let f = sim.fixed_length(1, 100_000, 4).unwrap();
        assert!(f.eps_wilson.0 < 0.5 && f.eps_wilson.1 > 0.5, "{:?}", f.eps_wilson);
        assert!((f.eps_hat - 0.5).abs() < 0.01);
    }

    #[test]
    fn deterministic_and_bracketed() {
        let src = ContinuousSource::gaussian(1.0).unwrap();
        let mse = DistortionMeasure::mse(1).unwrap();
        let lat = Lattice::zn(1).unwrap().scale_to_distortion(&mse, 1e-3).unwrap();
        let sim = Simulation { source: &src, lattice: &lat, distortion: &mse, d: 1e-3 };
        let (a, _) = sim.variable_length(50_000, 5).unwrap();
        let (b, _) = sim.variable_length(50_000, 5).unwrap();
        assert_eq!(a, b);
        assert!(a.avg_length_bits >= a.entropy_bits - 3.0 * a.entropy_se_bits);
        assert!(a.avg_length_bits <= a.entropy_bits + 1.0 + 3.0 * a.entropy_se_bits);
        assert_eq!(a.distortion_violations, 0);
        assert!(a.max_distortion <= 1e-3);
    }

    #[test]
    fn rejects_mismatched_dimensions() {
        let src = ContinuousSource::gaussian(1.0).unwrap();
        let lat = Lattice::zn(2).unwrap();
        let mse = DistortionMeasure::mse(2).unwrap();
        let sim = Simulation { source: &src, lattice: &lat, distortion: &mse, d: 0.1 };
        assert!(sim.variable_length(10, 0).is_err());
    }
}

//! Lattices `𝒞 = {s·G i + o : i ∈ ℤⁿ}` with exact nearest-point maps,
//! covering geometry and scaling to a distortion target.
//!
//! Geometry and decoding are generic over [`Real`]; the Monte-Carlo entropy
//! estimators in [`entropy`] work in `f64`.

mod decode;
pub mod entropy;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::distortion::{ln_unit_ball_volume, DistortionMeasure};
use crate::error::{Error, Result};
use crate::rng;
use crate::scalar::Real;
use decode::{AnStarScratch, SphereDecoder};

pub use entropy::{
    entropy_upper_bound_thm8, lattice_d_entropy_bounds, output_info_spectrum, rogers_log_efficiency, DEntropyBounds,
    EntropyBound, OutputSpectrum, DEFAULT_ROGERS_C,
};

/// Probe count used when a custom lattice's covering radius is estimated.
pub const DEFAULT_RADIUS_PROBES: usize = 1_000_000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LatticeFamily {
    Zn,
    Dn,
    AnStar,
    Custom,
}

/// A scaled, optionally translated lattice.
#[derive(Debug, Clone, PartialEq)]
pub struct Lattice<T> {
    family: LatticeFamily,
    n: usize,
    /// Unit-scale generator, row-major, basis vectors in columns.
    generator: Vec<T>,
    log_abs_det: T,
    /// Euclidean covering radius at unit scale.
    unit_radius: T,
    radius_estimated: bool,
    scale: T,
    offset: Option<Vec<T>>,
    sphere: Option<SphereDecoder<T>>,
}

/// Cell volume, covering radius and covering efficiency of a lattice.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LatticeGeometry<T> {
    pub log_cell_volume: T,
    pub covering_radius: T,
    /// `ρ = r_𝒞 / (V_𝒞/b_n)^{1/n}`.
    pub covering_efficiency: T,
    /// Set when the covering radius came from probing rather than a formula.
    pub estimated: bool,
}

/// Closest lattice point and its integer coordinates.
#[derive(Debug, Clone, PartialEq)]
pub struct NearestPoint<T> {
    pub point: Vec<T>,
    pub index: Vec<i64>,
}

impl<T: Real> Lattice<T> {
    /// The integer lattice `ℤⁿ`.
    pub fn zn(n: usize) -> Result<Self> {
        check_n(n)?;
        let mut g = vec![T::zero(); n * n];
        for k in 0..n {
            g[k * n + k] = T::one();
        }
        let r = T::of_usize(n).sqrt() / T::of(2.0);
        Ok(Self::named(LatticeFamily::Zn, n, g, T::zero(), r))
    }

    /// The checkerboard lattice `Dₙ = {z ∈ ℤⁿ : Σz even}`.
    pub fn dn(n: usize) -> Result<Self> {
        check_n(n)?;
        let mut g = vec![T::zero(); n * n];
        g[0] = T::of(2.0);
        for k in 1..n {
            g[k] = T::one();
            g[k * n + k] = T::one();
        }
        // deep holes (1,0,…,0) and (½,…,½)
        let r = T::one().max(T::of_usize(n).sqrt() / T::of(2.0));
        Ok(Self::named(LatticeFamily::Dn, n, g, T::LN_2(), r))
    }

    /// The dual root lattice `Aₙ*`, realized in `ℝⁿ` as the projection of
    /// `ℤⁿ⁺¹` onto the zero-sum hyperplane.
    pub fn an_star(n: usize) -> Result<Self> {
        check_n(n)?;
        let mut g = vec![T::zero(); n * n];
        let mut e = vec![T::zero(); n + 1];
        let mut col = vec![T::zero(); n];
        for k in 0..n {
            e.iter_mut().for_each(|v| *v = T::zero());
            e[k] = T::one();
            decode::helmert_project(&e, &mut col);
            for i in 0..n {
                g[i * n + k] = col[i];
            }
        }
        let nf = T::of_usize(n);
        let r = (nf * (nf + T::of(2.0)) / (T::of(12.0) * (nf + T::one()))).sqrt();
        let log_det = -(nf + T::one()).ln() / T::of(2.0);
        Ok(Self::named(LatticeFamily::AnStar, n, g, log_det, r))
    }

    /// Lattice with generator rows `generator` (basis vectors in columns).
    ///
    /// Without `covering_radius`, the radius is estimated by probing
    /// [`DEFAULT_RADIUS_PROBES`] points and the geometry is flagged as
    /// estimated.
    pub fn custom(generator: Vec<Vec<T>>, covering_radius: Option<T>) -> Result<Self> {
        let n = generator.len();
        check_n(n)?;
        if generator.iter().any(|r| r.len() != n) {
            return Err(Error::param("generator", "must be square"));
        }
        if generator.iter().flatten().any(|v| !v.is_finite()) {
            return Err(Error::param("generator", "entries must be finite"));
        }
        let g: Vec<T> = generator.into_iter().flatten().collect();
        let log_abs_det = crate::linalg::log_abs_det(&g, n)
            .filter(|v| v.is_finite())
            .ok_or_else(|| Error::param("generator", "singular"))?;
        let sphere = SphereDecoder::new(g.clone(), n).ok_or_else(|| Error::param("generator", "singular"))?;
        let mut lat = Self {
            family: LatticeFamily::Custom,
            n,
            generator: g,
            log_abs_det,
            unit_radius: T::zero(),
            radius_estimated: false,
            scale: T::one(),
            offset: None,
            sphere: Some(sphere),
        };
        match covering_radius {
            Some(r) if r > T::zero() && r.is_finite() => lat.unit_radius = r,
            Some(_) => return Err(Error::param("covering_radius", "must be positive")),
            None => {
                lat.unit_radius = lat.estimate_covering_radius(DEFAULT_RADIUS_PROBES, 0x5eed);
                lat.radius_estimated = true;
            }
        }
        Ok(lat)
    }

    fn named(family: LatticeFamily, n: usize, generator: Vec<T>, log_abs_det: T, unit_radius: T) -> Self {
        Self {
            family,
            n,
            generator,
            log_abs_det,
            unit_radius,
            radius_estimated: false,
            scale: T::one(),
            offset: None,
            sphere: None,
        }
    }

    pub fn family(&self) -> LatticeFamily {
        self.family
    }

    pub fn dimension(&self) -> usize {
        self.n
    }

    pub fn scale(&self) -> T {
        self.scale
    }

    pub fn offset(&self) -> Option<&[T]> {
        self.offset.as_deref()
    }

    /// Unit-scale generator rows.
    pub fn generator(&self) -> Vec<Vec<T>> {
        self.generator.chunks(self.n).map(|r| r.to_vec()).collect()
    }

    /// Copy with the scale multiplied by `t`.
    pub fn scaled(&self, t: T) -> Result<Self> {
        if !(t > T::zero() && t.is_finite()) {
            return Err(Error::param("scale", "must be positive and finite"));
        }
        let mut out = self.clone();
        out.scale = self.scale * t;
        Ok(out)
    }

    /// Copy with absolute scale `s`.
    pub fn with_scale(&self, s: T) -> Result<Self> {
        if !(s > T::zero() && s.is_finite()) {
            return Err(Error::param("scale", "must be positive and finite"));
        }
        let mut out = self.clone();
        out.scale = s;
        Ok(out)
    }

    /// Copy translated by `offset`.
    pub fn with_offset(&self, offset: Vec<T>) -> Result<Self> {
        if offset.len() != self.n {
            return Err(Error::DimensionMismatch { expected: self.n, got: offset.len() });
        }
        let mut out = self.clone();
        out.offset = Some(offset);
        Ok(out)
    }

    pub fn log_cell_volume(&self) -> T {
        T::of_usize(self.n) * self.scale.ln() + self.log_abs_det
    }

    /// Euclidean covering radius.
    pub fn covering_radius(&self) -> T {
        self.scale * self.unit_radius
    }

    pub fn radius_estimated(&self) -> bool {
        self.radius_estimated
    }

    /// Covering radius in the `Lᵖ` norm, known for `ℤⁿ` (every `p`) and for
    /// any lattice at `p = 2`.
    pub fn covering_radius_lp(&self, p: T) -> Result<T> {
        if p == T::of(2.0) {
            return Ok(self.covering_radius());
        }
        match self.family {
            LatticeFamily::Zn => {
                let half = self.scale / T::of(2.0);
                if p.is_infinite() {
                    Ok(half)
                } else {
                    Ok(half * T::of_usize(self.n).powf(T::one() / p))
                }
            }
            _ => Err(Error::Unsupported(format!("L^{p} covering radius of {:?}", self.family))),
        }
    }

    pub fn geometry(&self) -> LatticeGeometry<T> {
        LatticeGeometry {
            log_cell_volume: self.log_cell_volume(),
            covering_radius: self.covering_radius(),
            covering_efficiency: self.log_covering_efficiency().exp(),
            estimated: self.radius_estimated,
        }
    }

    /// `log ρ = (log b_n + n log r − log V)/n`, scale invariant.
    pub fn log_covering_efficiency(&self) -> T {
        let nf = T::of_usize(self.n);
        (ln_unit_ball_volume(self.n, T::of(2.0)) + nf * self.unit_radius.ln() - self.log_abs_det) / nf
    }

    /// Rescale so that every input is reproduced within per-letter distortion
    /// `d`: the covering radius in the measure's norm becomes `n^{1/p}·r(d)`.
    pub fn scale_to_distortion(&self, dist: &DistortionMeasure<T>, d: T) -> Result<Self> {
        if !(d > T::zero() && d.is_finite()) {
            return Err(Error::param("d", "must be positive and finite"));
        }
        if let crate::distortion::DistortionKind::WeightedMse { .. } = dist.kind() {
            return Err(Error::Unsupported("lattice scaling under weighted MSE".into()));
        }
        let (p, _) = dist.norm_power().ok_or(Error::NoRadius)?;
        let r = dist.radius_of_distortion(d)?;
        let target = if p.is_infinite() { r } else { T::of_usize(self.n).powf(T::one() / p) * r };
        let unit = self.with_scale(T::one())?.covering_radius_lp(p)?;
        self.with_scale(target / unit)
    }

    /// Closest lattice point to `x` in Euclidean norm.
    pub fn nearest_point(&self, x: &[T]) -> Result<NearestPoint<T>> {
        let mut q = self.quantizer();
        let (p, i) = q.quantize(x)?;
        Ok(NearestPoint { point: p.to_vec(), index: i.to_vec() })
    }

    /// Reusable nearest-point workspace.
    pub fn quantizer(&self) -> Quantizer<'_, T> {
        Quantizer {
            lat: self,
            unit: vec![T::zero(); self.n],
            point: vec![T::zero(); self.n],
            index: vec![0; self.n],
            scratch: AnStarScratch::default(),
        }
    }

    /// Unit-scale, untranslated lattice point with index `i`.
    pub fn point_of_index(&self, index: &[i64]) -> Result<Vec<T>> {
        if index.len() != self.n {
            return Err(Error::DimensionMismatch { expected: self.n, got: index.len() });
        }
        let iv: Vec<T> = index.iter().map(|&v| T::from_i64(v).unwrap()).collect();
        let mut p = crate::linalg::mat_vec(&self.generator, self.n, &iv);
        for (k, v) in p.iter_mut().enumerate() {
            *v = *v * self.scale + self.offset.as_ref().map_or(T::zero(), |o| o[k]);
        }
        Ok(p)
    }

    /// Largest quantization error over `probes` random points of a
    /// fundamental cell plus the half-sums of basis vectors (the latter only
    /// for `n ≤ 16`). A lower estimate of the unit-scale covering radius.
    pub fn estimate_covering_radius(&self, probes: usize, seed: u64) -> T {
        use rand::Rng as _;
        let unit = Self { scale: T::one(), offset: None, ..self.clone() };
        let n = self.n;
        let random = rng::chunks(probes, 1 << 14)
            .into_par_iter()
            .map(|(stream, len)| {
                let mut r = rng::substream(seed, stream);
                let mut q = unit.quantizer();
                let mut u = vec![T::zero(); n];
                let mut best = T::zero();
                for _ in 0..len {
                    for v in u.iter_mut() {
                        *v = T::of(r.random::<f64>());
                    }
                    let x = crate::linalg::mat_vec(&unit.generator, n, &u);
                    best = best.max(q.error(&x));
                }
                best
            })
            .reduce(T::zero, T::max);
        let corners = if n <= 16 {
            (1u32..(1 << n))
                .into_par_iter()
                .map(|mask| {
                    let u: Vec<T> = (0..n).map(|k| if mask >> k & 1 == 1 { T::of(0.5) } else { T::zero() }).collect();
                    let x = crate::linalg::mat_vec(&unit.generator, n, &u);
                    unit.quantizer().error(&x)
                })
                .reduce(T::zero, T::max)
        } else {
            T::zero()
        };
        random.max(corners)
    }
}

fn check_n(n: usize) -> Result<()> {
    if n == 0 {
        return Err(Error::param("n", "must be positive"));
    }
    Ok(())
}

/// Nearest-point workspace tied to one lattice. Not shareable across threads;
/// create one per worker.
pub struct Quantizer<'a, T: Real> {
    lat: &'a Lattice<T>,
    unit: Vec<T>,
    point: Vec<T>,
    index: Vec<i64>,
    scratch: AnStarScratch<T>,
}

impl<T: Real> Quantizer<'_, T> {
    /// Closest point and its index; the slices borrow internal buffers.
    pub fn quantize(&mut self, x: &[T]) -> Result<(&[T], &[i64])> {
        let n = self.lat.n;
        if x.len() != n {
            return Err(Error::DimensionMismatch { expected: n, got: x.len() });
        }
        self.quantize_unchecked(x);
        Ok((&self.point, &self.index))
    }

    /// Index of the cell containing `x`.
    pub fn index(&mut self, x: &[T]) -> Result<&[i64]> {
        Ok(self.quantize(x)?.1)
    }

    /// Euclidean quantization error `‖x − q(x)‖`.
    pub fn error(&mut self, x: &[T]) -> T {
        self.quantize_unchecked(x);
        x.iter().zip(&self.point).map(|(a, b)| (*a - *b) * (*a - *b)).sum::<T>().sqrt()
    }

    fn quantize_unchecked(&mut self, x: &[T]) {
        let lat = self.lat;
        let s = lat.scale;
        for (k, (u, &v)) in self.unit.iter_mut().zip(x).enumerate() {
            let o = lat.offset.as_ref().map_or(T::zero(), |o| o[k]);
            *u = (v - o) / s;
        }
        match lat.family {
            LatticeFamily::Zn => decode::zn(&self.unit, &mut self.point, &mut self.index),
            LatticeFamily::Dn => decode::dn(&self.unit, &mut self.point, &mut self.index),
            LatticeFamily::AnStar => decode::an_star(&self.unit, &mut self.point, &mut self.index, &mut self.scratch),
            LatticeFamily::Custom => lat.sphere.as_ref().expect("custom lattice has a decoder").decode(
                &self.unit,
                &mut self.point,
                &mut self.index,
            ),
        }
        for (k, p) in self.point.iter_mut().enumerate() {
            *p = *p * s + lat.offset.as_ref().map_or(T::zero(), |o| o[k]);
        }
    }
}

/// JSON descriptor of a lattice.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case")]
pub enum LatticeSpec {
    Zn {
        n: usize,
    },
    Dn {
        n: usize,
    },
    AnStar {
        n: usize,
    },
    Custom {
        generator: Vec<Vec<f64>>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        covering_radius: Option<f64>,
    },
}

impl LatticeSpec {
    pub fn build(&self) -> Result<Lattice<f64>> {
        match self {
            LatticeSpec::Zn { n } => Lattice::zn(*n),
            LatticeSpec::Dn { n } => Lattice::dn(*n),
            LatticeSpec::AnStar { n } => Lattice::an_star(*n),
            LatticeSpec::Custom { generator, covering_radius } => Lattice::custom(generator.clone(), *covering_radius),
        }
    }

    /// Geometry of the lattice scaled to MSE distortion `d` at dimension `n`,
    /// without building the generator for named families.
    pub fn mse_geometry(&self, n: usize, d: f64) -> Result<LatticeGeometry<f64>> {
        check_n(n)?;
        if !(d > 0.0 && d.is_finite()) {
            return Err(Error::param("d", "must be positive and finite"));
        }
        let nf = n as f64;
        let (log_det, unit_r, estimated) = match self {
            LatticeSpec::Zn { .. } => (0.0, nf.sqrt() / 2.0, false),
            LatticeSpec::Dn { .. } => (std::f64::consts::LN_2, (nf.sqrt() / 2.0).max(1.0), false),
            LatticeSpec::AnStar { .. } => {
                (-(nf + 1.0).ln() / 2.0, (nf * (nf + 2.0) / (12.0 * (nf + 1.0))).sqrt(), false)
            }
            LatticeSpec::Custom { .. } => {
                let lat = self.build()?;
                if lat.dimension() != n {
                    return Err(Error::DimensionMismatch { expected: lat.dimension(), got: n });
                }
                (lat.log_abs_det, lat.unit_radius, lat.radius_estimated)
            }
        };
        let r = (nf * d).sqrt();
        let log_v = nf * (r / unit_r).ln() + log_det;
        let log_rho = (ln_unit_ball_volume(n, 2.0) + nf * unit_r.ln() - log_det) / nf;
        Ok(LatticeGeometry {
            log_cell_volume: log_v,
            covering_radius: r,
            covering_efficiency: log_rho.exp(),
            estimated,
        })
    }

    pub fn family(&self) -> LatticeFamily {
        match self {
            LatticeSpec::Zn { .. } => LatticeFamily::Zn,
            LatticeSpec::Dn { .. } => LatticeFamily::Dn,
            LatticeSpec::AnStar { .. } => LatticeFamily::AnStar,
            LatticeSpec::Custom { .. } => LatticeFamily::Custom,
        }
    }

    /// Same family at dimension `n` (custom generators keep their own).
    pub fn with_dimension(&self, n: usize) -> Self {
        match self {
            LatticeSpec::Zn { .. } => LatticeSpec::Zn { n },
            LatticeSpec::Dn { .. } => LatticeSpec::Dn { n },
            LatticeSpec::AnStar { .. } => LatticeSpec::AnStar { n },
            c @ LatticeSpec::Custom { .. } => c.clone(),
        }
    }
}

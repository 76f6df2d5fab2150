//! The six subcommands. Each returns its rendered output; nothing is written
//! until the whole table is ready.

use std::path::PathBuf;

use rdlattice::codec::Simulation;
use rdlattice::fbl::{self, BoundLabel, BoundPoint, McOptions};
use rdlattice::lattice::entropy::{entropy_upper_bound_thm8, output_info_spectrum};
use rdlattice::rd_finite::{blahut_arimoto, critical_distortion, slb_equality_test, DEFAULT_TOL};
use rdlattice::rng::derive_seed;
use rdlattice::sources::Source;
use rdlattice::tilted::classical_slb;
use rdlattice::{
    ContinuousSource, DistortionKind, DistortionMeasure64, DistortionSpec, Error, FiniteSource, Lattice64, LatticeSpec,
    ScalarFamily, SourceSpec,
};
use serde::Serialize;
use serde_json::json;

use crate::config::{require, ExperimentConfig};
use crate::Failure;

/// Rendered result of one command.
pub struct Output {
    pub main: Vec<u8>,
    pub extra: Vec<(PathBuf, Vec<u8>)>,
    /// Every reported bound was vacuous.
    pub vacuous_only: bool,
}

impl Output {
    fn new(main: Vec<u8>) -> Self {
        Self { main, extra: Vec::new(), vacuous_only: false }
    }
}

enum Built {
    Finite(FiniteSource),
    Continuous(ContinuousSource),
}

fn build_source(cfg: &ExperimentConfig) -> Result<Built, Failure> {
    match &cfg.source {
        SourceSpec::Finite(f) => f.build().map(Built::Finite).map_err(|e| Failure::field("source", e)),
        SourceSpec::Continuous(c) => c.build().map(Built::Continuous).map_err(|e| Failure::field("source", e)),
    }
}

fn finite_source(cfg: &ExperimentConfig) -> Result<FiniteSource, Failure> {
    match build_source(cfg)? {
        Built::Finite(s) => Ok(s),
        Built::Continuous(_) => Err(Failure::config("field `source` must be a finite source {pmf, distortion}".into())),
    }
}

fn continuous_source(cfg: &ExperimentConfig) -> Result<ContinuousSource, Failure> {
    match build_source(cfg)? {
        Built::Continuous(s) => Ok(s),
        Built::Finite(_) => Err(Failure::config("field `source` must be a continuous source".into())),
    }
}

fn distortion(cfg: &ExperimentConfig, n: usize) -> Result<DistortionMeasure64, Failure> {
    cfg.distortion.as_ref().unwrap_or(&DistortionSpec::Mse).build(n).map_err(|e| Failure::field("distortion", e))
}

fn lattice_spec(cfg: &ExperimentConfig, default: LatticeSpec) -> LatticeSpec {
    cfg.lattice.clone().unwrap_or(default)
}

/// Scaled, optionally translated lattice for a block of `n` letters.
fn scaled_lattice(cfg: &ExperimentConfig, n: usize, dist: &DistortionMeasure64, d: f64) -> Result<Lattice64, Failure> {
    let spec = lattice_spec(cfg, LatticeSpec::Zn { n }).with_dimension(n);
    let lat = spec.build().map_err(|e| Failure::field("lattice", e))?;
    if lat.dimension() != n {
        return Err(Failure::config(format!(
            "field `lattice` has dimension {} but the source has {n}",
            lat.dimension()
        )));
    }
    let lat = lat.scale_to_distortion(dist, d).map_err(|e| Failure::field("lattice", e))?;
    match &cfg.offset {
        Some(o) => lat.with_offset(o.clone()).map_err(|e| Failure::field("offset", e)),
        None => Ok(lat),
    }
}

fn csv_writer(cfg: &ExperimentConfig, header: &[&str]) -> Result<csv::Writer<Vec<u8>>, Failure> {
    let mut buf = Vec::new();
    buf.extend_from_slice(
        format!("# rdlattice {} seed={} unit={}\n", env!("CARGO_PKG_VERSION"), cfg.seed, cfg.unit.as_str()).as_bytes(),
    );
    let mut w = csv::Writer::from_writer(buf);
    w.write_record(header).map_err(Failure::io)?;
    Ok(w)
}

fn finish(w: csv::Writer<Vec<u8>>) -> Result<Vec<u8>, Failure> {
    w.into_inner().map_err(|e| Failure::io(e.into_error()))
}

fn opt(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

fn json_bytes<T: Serialize>(value: &T) -> Result<Vec<u8>, Failure> {
    let mut out = serde_json::to_vec_pretty(value).map_err(Failure::io)?;
    out.push(b'\n');
    Ok(out)
}

/// `R(d)` of a Gaussian letter under MSE, where the lower bound is tight.
fn gaussian_mse_rate(src: &ContinuousSource, dist: &DistortionMeasure64, d: f64) -> Option<f64> {
    match (src.letter(), dist.kind()) {
        (ScalarFamily::Gaussian { var }, DistortionKind::Mse) => Some(0.5 * (var / d).ln().max(0.0)),
        _ => None,
    }
}

pub fn rd_curve(cfg: &ExperimentConfig) -> Result<Output, Failure> {
    let ds = require(&cfg.d, "d")?;
    let u = cfg.unit;
    let mut w = csv_writer(cfg, &["d", "rate", "slb", "equality"])?;
    match build_source(cfg)? {
        Built::Finite(src) => {
            for &d in ds {
                let sol = blahut_arimoto(&src, d, DEFAULT_TOL).map_err(Failure::numeric)?;
                // the bound needs a balanced matrix; leave it blank otherwise
                let slb = classical_slb(&src, src.distortion(), d).ok().map(|s| u.convert(s.slb_rate.max(0.0)));
                let eq = slb_equality_test(&src, d).ok().map(|e| e.holds);
                w.write_record([
                    d.to_string(),
                    u.convert(sol.rate_nats).to_string(),
                    opt(slb),
                    eq.map(|b| b.to_string()).unwrap_or_default(),
                ])
                .map_err(Failure::io)?;
            }
        }
        Built::Continuous(src) => {
            let dist = distortion(cfg, src.dimension())?;
            for &d in ds {
                let slb = classical_slb(&src, &dist, d).map_err(Failure::numeric)?;
                let rate = gaussian_mse_rate(&src, &dist, d);
                let eq = rate.map(|r| (r - slb.clamped_rate()).abs() < 1e-12);
                w.write_record([
                    d.to_string(),
                    opt(rate.map(|r| u.convert(r))),
                    u.convert(slb.clamped_rate()).to_string(),
                    eq.map(|b| b.to_string()).unwrap_or_default(),
                ])
                .map_err(Failure::io)?;
            }
        }
    }
    Ok(Output::new(finish(w)?))
}

#[derive(Serialize)]
struct SlbRecord {
    d: f64,
    lambda: f64,
    phi_nats: f64,
    slb_nats: f64,
    varentropy_nats2: f64,
    vacuous: bool,
}

pub fn slb(cfg: &ExperimentConfig) -> Result<Output, Failure> {
    let ds = require(&cfg.d, "d")?;
    let results: Vec<_> = match build_source(cfg)? {
        Built::Finite(src) => ds.iter().map(|&d| classical_slb(&src, src.distortion(), d)).collect(),
        Built::Continuous(src) => {
            let dist = distortion(cfg, src.dimension())?;
            ds.iter().map(|&d| classical_slb(&src, &dist, d)).collect()
        }
    };
    let mut records = Vec::new();
    for r in results {
        let s = r.map_err(Failure::numeric)?;
        records.push(SlbRecord {
            d: s.d,
            lambda: s.lambda_star,
            phi_nats: s.phi_d,
            slb_nats: s.slb_rate,
            varentropy_nats2: s.slb_varentropy,
            vacuous: s.vacuous,
        });
    }
    let vacuous_only = records.iter().all(|r| r.vacuous);
    let mut out = Output::new(json_bytes(&records)?);
    out.vacuous_only = vacuous_only;
    Ok(out)
}

const CONTINUOUS_BOUNDS: [BoundLabel; 7] = [
    BoundLabel::Slb,
    BoundLabel::ConverseCa,
    BoundLabel::ConverseC,
    BoundLabel::ConverseCExpansion,
    BoundLabel::AchievabilityLattice,
    BoundLabel::AchievabilityLatticeMc,
    BoundLabel::GaussianCont,
];

const FINITE_BOUNDS: [BoundLabel; 3] = [BoundLabel::Slb, BoundLabel::ConverseCa, BoundLabel::GaussianDisc];

fn slb_point(rate: f64, n: usize, d: f64, eps: f64) -> BoundPoint {
    BoundPoint {
        n,
        d,
        eps,
        label: BoundLabel::Slb,
        rate_nats: rate.max(0.0),
        raw_rate_nats: rate,
        gamma: None,
        mc_se: None,
        lattice: None,
        vacuous: !(rate > 0.0),
        estimated: false,
    }
}

pub fn fbl(cfg: &ExperimentConfig) -> Result<Output, Failure> {
    let ns = require(&cfg.n, "n")?;
    let ds = require(&cfg.d, "d")?;
    let epss = require(&cfg.eps, "eps")?;
    let source = build_source(cfg)?;
    let allowed: &[BoundLabel] = match source {
        Built::Finite(_) => &FINITE_BOUNDS,
        Built::Continuous(_) => &CONTINUOUS_BOUNDS,
    };
    let wanted: Vec<BoundLabel> = match &cfg.bounds {
        Some(b) => {
            if let Some(bad) = b.iter().find(|l| !allowed.contains(l)) {
                return Err(Failure::config(format!(
                    "field `bounds`: `{}` does not apply to this source",
                    bad.as_str()
                )));
            }
            b.clone()
        }
        None => allowed.to_vec(),
    };
    let explicit = cfg.bounds.is_some();
    let mut points = Vec::new();
    let mut point_index = 0u64;
    for &n in ns {
        for &d in ds {
            for &eps in epss {
                point_index += 1;
                match &source {
                    Built::Finite(src) => finite_points(src, n, d, eps, &wanted, explicit, &mut points)?,
                    Built::Continuous(src) => {
                        let seed = derive_seed(cfg.seed, point_index);
                        continuous_points(cfg, src, n, d, eps, seed, &wanted, explicit, &mut points)?
                    }
                }
            }
        }
    }
    let mut w = csv_writer(cfg, &["n", "d", "eps", "label", "rate_nats", "rate_bits", "gamma", "mc_se", "flags"])?;
    for p in &points {
        let mut flags = Vec::new();
        if p.vacuous {
            flags.push("vacuous".to_string());
        }
        if p.estimated {
            flags.push("estimated".to_string());
        }
        if let Some(l) = p.lattice {
            flags.push(format!("lattice={}", serde_json::to_value(l).unwrap().as_str().unwrap_or_default()));
        }
        w.write_record([
            p.n.to_string(),
            p.d.to_string(),
            p.eps.to_string(),
            p.label.as_str().to_string(),
            p.rate_nats.to_string(),
            p.rate_bits().to_string(),
            opt(p.gamma),
            opt(p.mc_se),
            flags.join(";"),
        ])
        .map_err(Failure::io)?;
    }
    let mut out = Output::new(finish(w)?);
    out.vacuous_only = !points.is_empty() && points.iter().all(|p| p.vacuous);
    Ok(out)
}

/// A bound that does not apply at this point is an error when it was asked
/// for by name and a note on stderr otherwise.
fn skip(explicit: bool, label: BoundLabel, why: String) -> Result<(), Failure> {
    if explicit {
        Err(Failure::numeric_msg(format!("{}: {why}", label.as_str())))
    } else {
        eprintln!("note: skipping {}: {why}", label.as_str());
        Ok(())
    }
}

fn finite_points(
    src: &FiniteSource,
    n: usize,
    d: f64,
    eps: f64,
    wanted: &[BoundLabel],
    explicit: bool,
    out: &mut Vec<BoundPoint>,
) -> Result<(), Failure> {
    for &label in wanted {
        match label {
            BoundLabel::Slb => {
                let s = classical_slb(src, src.distortion(), d).map_err(Failure::numeric)?;
                out.push(slb_point(s.slb_rate, n, d, eps));
            }
            BoundLabel::ConverseCa => out.push(fbl::converse_ca_finite(src, n, d, eps).map_err(Failure::numeric)?),
            BoundLabel::GaussianDisc => match fbl::gaussian_approx_discrete(src, n, d, eps) {
                Ok(g) => out.push(g.point),
                Err(e @ Error::OutOfRange { .. }) => skip(explicit, label, e.to_string())?,
                Err(e) => return Err(Failure::numeric(e)),
            },
            _ => unreachable!("filtered by FINITE_BOUNDS"),
        }
    }
    Ok(())
}

#[allow(clippy::too_many_arguments)]
fn continuous_points(
    cfg: &ExperimentConfig,
    src: &ContinuousSource,
    n: usize,
    d: f64,
    eps: f64,
    seed: u64,
    wanted: &[BoundLabel],
    explicit: bool,
    out: &mut Vec<BoundPoint>,
) -> Result<(), Failure> {
    let dist = distortion(cfg, 1)?;
    let letter = src.with_dimension(1).map_err(Failure::numeric)?;
    let needs_ach =
        wanted.iter().any(|l| matches!(l, BoundLabel::AchievabilityLattice | BoundLabel::AchievabilityLatticeMc));
    let ach = if needs_ach {
        let mc =
            wanted.contains(&BoundLabel::AchievabilityLatticeMc).then_some(McOptions { samples: cfg.samples, seed });
        let spec = lattice_spec(cfg, LatticeSpec::AnStar { n }).with_dimension(n);
        Some(fbl::achievability_lattice(&letter, &spec, n, d, eps, mc).map_err(Failure::numeric)?)
    } else {
        None
    };
    for &label in wanted {
        match label {
            BoundLabel::Slb => {
                let s = classical_slb(&letter, &dist, d).map_err(Failure::numeric)?;
                out.push(slb_point(s.slb_rate, n, d, eps));
            }
            BoundLabel::ConverseCa => out.push(fbl::converse_ca(&letter, &dist, n, d, eps).map_err(Failure::numeric)?),
            BoundLabel::ConverseC => {
                out.push(fbl::converse_c_beta(&letter, &dist, n, d, eps).map_err(Failure::numeric)?)
            }
            BoundLabel::ConverseCExpansion => {
                out.push(fbl::converse_c_expansion(&letter, &dist, n, d, eps).map_err(Failure::numeric)?)
            }
            BoundLabel::AchievabilityLattice => {
                let a = ach.as_ref().expect("computed above");
                match &a.analytic {
                    Some(p) => out.push(p.clone()),
                    None => skip(explicit, label, a.analytic_infeasible.clone().unwrap_or_default())?,
                }
            }
            BoundLabel::AchievabilityLatticeMc => {
                out.push(ach.as_ref().and_then(|a| a.mc.clone()).expect("MC path requested"))
            }
            BoundLabel::GaussianCont => {
                out.push(fbl::gaussian_approx(&letter, &dist, n, d, eps, None).map_err(Failure::numeric)?.point)
            }
            _ => unreachable!("filtered by CONTINUOUS_BOUNDS"),
        }
    }
    Ok(())
}

pub fn lattice_entropy(cfg: &ExperimentConfig) -> Result<Output, Failure> {
    let ds = require(&cfg.d, "d")?;
    let src = continuous_source(cfg)?;
    let n = src.dimension();
    let dist = distortion(cfg, n)?;
    let u = cfg.unit;
    let mut w = csv_writer(
        cfg,
        &["d", "h_mc", "h_mc_se", "bound_thm8", "h_minus_log_v", "kl_gap", "slb_block", "cells", "flags"],
    )?;
    for (i, &d) in ds.iter().enumerate() {
        let lat = scaled_lattice(cfg, n, &dist, d)?;
        let spec =
            output_info_spectrum(&lat, &src, cfg.samples, derive_seed(cfg.seed, i as u64)).map_err(Failure::numeric)?;
        let bound = entropy_upper_bound_thm8(&lat, &src).map_err(Failure::numeric)?;
        let slb = classical_slb(&src, &dist, d).map_err(Failure::numeric)?;
        let mut flags = Vec::new();
        if spec.low_samples {
            flags.push("low_samples");
        }
        if bound.radius_estimated {
            flags.push("radius_estimated");
        }
        w.write_record([
            d.to_string(),
            u.convert(spec.entropy).to_string(),
            u.convert(spec.entropy_se).to_string(),
            u.convert(bound.entropy_bound).to_string(),
            u.convert(bound.base).to_string(),
            u.convert(bound.gap).to_string(),
            u.convert(slb.slb_rate * n as f64).to_string(),
            spec.cells.to_string(),
            flags.join(";"),
        ])
        .map_err(Failure::io)?;
    }
    Ok(Output::new(finish(w)?))
}

pub fn simulate(cfg: &ExperimentConfig) -> Result<Output, Failure> {
    let d = match require(&cfg.d, "d")? {
        [d] => *d,
        _ => return Err(Failure::config("field `d` must hold exactly one value for simulate".into())),
    };
    let src = continuous_source(cfg)?;
    let n = src.dimension();
    let dist = distortion(cfg, n)?;
    let lat = scaled_lattice(cfg, n, &dist, d)?;
    let sim = Simulation { source: &src, lattice: &lat, distortion: &dist, d };
    let (vl, cells) = sim.variable_length(cfg.samples, cfg.seed).map_err(Failure::numeric)?;
    let fl = match cfg.m {
        Some(m) => Some(sim.fixed_length(m, cfg.samples, cfg.seed).map_err(Failure::numeric)?),
        None => None,
    };
    let report = json!({
        "d": d,
        "lattice": lattice_spec(cfg, LatticeSpec::Zn { n }).with_dimension(n),
        "variable_length": vl,
        "fixed_length": fl,
    });
    let mut out = Output::new(json_bytes(&report)?);
    if let Some(path) = &cfg.cells_output {
        let mut w = csv_writer(cfg, &["cell_index_hash", "count", "codeword_length"])?;
        for c in &cells {
            w.write_record([
                c.index_hash.to_string(),
                c.count.to_string(),
                c.code_length.map(|l| l.to_string()).unwrap_or_default(),
            ])
            .map_err(Failure::io)?;
        }
        out.extra.push((path.clone(), finish(w)?));
    }
    Ok(out)
}

pub fn dc(cfg: &ExperimentConfig) -> Result<Output, Failure> {
    let src = finite_source(cfg)?;
    let c = critical_distortion(&src).map_err(Failure::numeric)?;
    Ok(Output::new(json_bytes(&json!({ "d_c": c.d_c, "check_gap": c.check_gap, "verified": c.verified }))?))
}

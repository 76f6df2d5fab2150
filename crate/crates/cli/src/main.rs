//! `rdlattice`: rate-distortion bounds and lattice quantizer experiments.
//!
//! Exit codes: 0 success, 2 configuration error, 3 numeric failure,
//! 4 every reported bound was vacuous.

// `!(x > 0.0)` also rejects NaN, which is the point
#![allow(clippy::neg_cmp_op_on_partial_ord)]

mod commands;
mod config;

use std::io::Write as _;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use serde_json::Value;

use config::{Overrides, Unit};

#[derive(Parser)]
#[command(name = "rdlattice", version, about = "Rate-distortion bounds and lattice quantizer experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// CSV of R(d), the Shannon lower bound and whether they coincide.
    RdCurve(Common),
    /// JSON records of the Shannon lower bound over a grid of d.
    Slb(Common),
    /// CSV of finite-blocklength bounds over grids of n, d and eps.
    Fbl(Common),
    /// CSV of simulated lattice output entropy against its upper bound.
    LatticeEntropy(Common),
    /// JSON statistics of variable- and fixed-length lattice codes.
    Simulate(Common),
    /// JSON critical distortion of a finite source.
    Dc(Common),
}

#[derive(Args)]
struct Common {
    /// JSON experiment config.
    #[arg(short, long)]
    config: Option<PathBuf>,
    /// Override a config field, e.g. `source.var=2` or `lattice={"family":"dn","n":4}`.
    #[arg(long = "set", value_name = "KEY=JSON")]
    set: Vec<String>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    samples: Option<usize>,
    #[arg(long, value_enum)]
    unit: Option<UnitArg>,
    #[arg(long, value_delimiter = ',')]
    n: Option<Vec<usize>>,
    #[arg(long, value_delimiter = ',')]
    d: Option<Vec<f64>>,
    #[arg(long, value_delimiter = ',')]
    eps: Option<Vec<f64>>,
    /// Codebook size for the fixed-length simulation.
    #[arg(long)]
    m: Option<u64>,
    /// Output file; stdout when absent.
    #[arg(short, long)]
    output: Option<PathBuf>,
    #[arg(long)]
    cells_output: Option<PathBuf>,
    /// Write the effective config, which reproduces this run.
    #[arg(long)]
    echo_config: Option<PathBuf>,
}

#[derive(Clone, Copy, clap::ValueEnum)]
enum UnitArg {
    Bits,
    Nats,
}

impl Common {
    fn overrides(&self) -> Overrides {
        let mut fields: Vec<(&'static str, Value)> = Vec::new();
        let mut put = |k: &'static str, v: Option<Value>| {
            if let Some(v) = v {
                fields.push((k, v));
            }
        };
        put("seed", self.seed.map(Value::from));
        put("samples", self.samples.map(Value::from));
        put(
            "unit",
            self.unit.map(|u| {
                Value::from(match u {
                    UnitArg::Bits => Unit::Bits.as_str(),
                    UnitArg::Nats => Unit::Nats.as_str(),
                })
            }),
        );
        put("n", self.n.clone().map(Value::from));
        put("d", self.d.clone().map(Value::from));
        put("eps", self.eps.clone().map(Value::from));
        put("m", self.m.map(Value::from));
        put("output", self.output.as_ref().map(|p| Value::from(p.to_string_lossy().into_owned())));
        put("cells_output", self.cells_output.as_ref().map(|p| Value::from(p.to_string_lossy().into_owned())));
        Overrides { set: self.set.clone(), fields }
    }
}

/// An error with the exit code it maps to.
#[derive(Debug)]
pub struct Failure {
    pub code: u8,
    pub message: String,
}

impl Failure {
    pub fn config(message: String) -> Self {
        Self { code: 2, message }
    }

    pub fn numeric_msg(message: String) -> Self {
        Self { code: 3, message }
    }

    /// Library errors: bad inputs are configuration errors, the rest numeric.
    pub fn numeric(e: rdlattice::Error) -> Self {
        use rdlattice::Error as E;
        let code = match e {
            E::InvalidParameter { .. }
            | E::DimensionMismatch { .. }
            | E::SymbolOutOfAlphabet { .. }
            | E::Unsupported(_)
            | E::NoRadius
            | E::Unbalanced
            | E::NotGroupStructured => 2,
            E::OutOfRange { .. } | E::NonConvergence { .. } | E::Infeasible(_) => 3,
        };
        Self { code, message: e.to_string() }
    }

    /// A library error raised while building the named config field.
    pub fn field(name: &str, e: rdlattice::Error) -> Self {
        let inner = Self::numeric(e);
        Self { code: inner.code, message: format!("field `{name}`: {}", inner.message) }
    }

    pub fn io(e: impl std::fmt::Display) -> Self {
        Self { code: 2, message: e.to_string() }
    }
}

fn write_to(path: Option<&Path>, bytes: &[u8]) -> Result<(), Failure> {
    match path {
        Some(p) => std::fs::write(p, bytes).map_err(|e| Failure::io(format!("cannot write {}: {e}", p.display()))),
        None => std::io::stdout().write_all(bytes).map_err(Failure::io),
    }
}

type Runner = fn(&config::ExperimentConfig) -> Result<commands::Output, Failure>;

fn run(cli: Cli) -> Result<u8, Failure> {
    let (common, cmd): (&Common, Runner) = match &cli.command {
        Command::RdCurve(c) => (c, commands::rd_curve),
        Command::Slb(c) => (c, commands::slb),
        Command::Fbl(c) => (c, commands::fbl),
        Command::LatticeEntropy(c) => (c, commands::lattice_entropy),
        Command::Simulate(c) => (c, commands::simulate),
        Command::Dc(c) => (c, commands::dc),
    };
    let cfg = config::load(common.config.as_deref(), &common.overrides())?;
    if let Some(path) = &common.echo_config {
        let mut text = serde_json::to_vec_pretty(&cfg).map_err(Failure::io)?;
        text.push(b'\n');
        write_to(Some(path), &text)?;
    }
    let out = cmd(&cfg)?;
    write_to(cfg.output.as_deref(), &out.main)?;
    for (path, bytes) in &out.extra {
        write_to(Some(path), bytes)?;
    }
    Ok(if out.vacuous_only { 4 } else { 0 })
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(code) => {
            if code == 4 {
                eprintln!("warning: every reported bound is vacuous");
            }
            ExitCode::from(code)
        }
        Err(f) => {
            eprintln!("error: {}", f.message);
            ExitCode::from(f.code)
        }
    }
}

//! Experiment configuration: a JSON file merged with command-line overrides.

use std::path::{Path, PathBuf};

use rdlattice::fbl::BoundLabel;
use rdlattice::{DistortionSpec, LatticeSpec, SourceSpec};
use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};

use crate::Failure;

pub const DEFAULT_SAMPLES: usize = 1_000_000;

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Unit {
    #[default]
    Bits,
    Nats,
}

impl Unit {
    pub fn convert(self, nats: f64) -> f64 {
        match self {
            Unit::Bits => nats / std::f64::consts::LN_2,
            Unit::Nats => nats,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Unit::Bits => "bits",
            Unit::Nats => "nats",
        }
    }
}

/// Everything one run needs. Grids that a command does not use may be empty.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub source: SourceSpec,
    /// Defaults to MSE for continuous sources; finite sources carry their own.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub distortion: Option<DistortionSpec>,
    /// Family used by lattice commands; its dimension follows the blocklength.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub lattice: Option<LatticeSpec>,
    /// Translation of the scaled lattice, one entry per coordinate.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub offset: Option<Vec<f64>>,
    #[serde(default)]
    pub n: Vec<usize>,
    #[serde(default)]
    pub d: Vec<f64>,
    #[serde(default)]
    pub eps: Vec<f64>,
    /// Bounds evaluated by `fbl`; all applicable ones when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub bounds: Option<Vec<BoundLabel>>,
    pub seed: u64,
    #[serde(default = "default_samples")]
    pub samples: usize,
    /// Codebook size for the fixed-length simulation.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub m: Option<u64>,
    #[serde(default)]
    pub unit: Unit,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output: Option<PathBuf>,
    /// Per-cell CSV written by `simulate`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub cells_output: Option<PathBuf>,
}

fn default_samples() -> usize {
    DEFAULT_SAMPLES
}

/// Overrides collected from flags, applied after the file.
#[derive(Debug, Default)]
pub struct Overrides {
    pub set: Vec<String>,
    pub fields: Vec<(&'static str, Value)>,
}

/// Read the file (if any), apply overrides and deserialize.
pub fn load(path: Option<&Path>, overrides: &Overrides) -> Result<ExperimentConfig, Failure> {
    let mut root = match path {
        Some(p) => {
            let text = std::fs::read_to_string(p)
                .map_err(|e| Failure::config(format!("cannot read config {}: {e}", p.display())))?;
            serde_json::from_str::<Value>(&text)
                .map_err(|e| Failure::config(format!("config {} is not valid JSON: {e}", p.display())))?
        }
        None => Value::Object(Map::new()),
    };
    if !root.is_object() {
        return Err(Failure::config("config must be a JSON object".into()));
    }
    for item in &overrides.set {
        let (key, raw) =
            item.split_once('=').ok_or_else(|| Failure::config(format!("override `{item}` is not KEY=VALUE")))?;
        let value = serde_json::from_str(raw).unwrap_or_else(|_| Value::String(raw.to_string()));
        set_path(&mut root, key, value)?;
    }
    for (key, value) in &overrides.fields {
        set_path(&mut root, key, value.clone())?;
    }
    let cfg: ExperimentConfig =
        serde_json::from_value(root).map_err(|e| Failure::config(format!("invalid config: {e}")))?;
    validate(&cfg)?;
    Ok(cfg)
}

/// Set a dotted path such as `source.var`, creating objects on the way.
fn set_path(root: &mut Value, key: &str, value: Value) -> Result<(), Failure> {
    let mut node = root;
    let parts: Vec<&str> = key.split('.').collect();
    for (i, part) in parts.iter().enumerate() {
        if part.is_empty() {
            return Err(Failure::config(format!("override key `{key}` has an empty segment")));
        }
        let obj = node
            .as_object_mut()
            .ok_or_else(|| Failure::config(format!("override `{key}`: `{}` is not an object", parts[..i].join("."))))?;
        if i + 1 == parts.len() {
            obj.insert(part.to_string(), value);
            return Ok(());
        }
        node = obj.entry(part.to_string()).or_insert_with(|| Value::Object(Map::new()));
    }
    Ok(())
}

fn validate(cfg: &ExperimentConfig) -> Result<(), Failure> {
    if cfg.samples == 0 {
        return Err(Failure::config("field `samples` must be positive".into()));
    }
    if let Some(i) = cfg.n.iter().position(|&n| n == 0) {
        return Err(Failure::config(format!("field `n[{i}]` must be positive")));
    }
    if let Some(i) = cfg.d.iter().position(|&d| !(d > 0.0 && d.is_finite())) {
        return Err(Failure::config(format!("field `d[{i}]` must be positive and finite")));
    }
    if let Some(i) = cfg.eps.iter().position(|&e| !(e > 0.0 && e < 1.0)) {
        return Err(Failure::config(format!("field `eps[{i}]` must lie in (0, 1)")));
    }
    if cfg.m == Some(0) {
        return Err(Failure::config("field `m` must be positive".into()));
    }
    Ok(())
}

/// Fail with a message naming `field` when a grid the command needs is empty.
pub fn require<'a, T>(grid: &'a [T], field: &str) -> Result<&'a [T], Failure> {
    if grid.is_empty() {
        Err(Failure::config(format!("field `{field}` must be a nonempty list")))
    } else {
        Ok(grid)
    }
}

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::dynamics::InitialConfiguration;
use crate::equilibrium::{Model, ModelParams};
use crate::error::{Error, Result};
use crate::spectral::TailClosure;
use crate::weights::WeightFunction;

use super::output::read_init_csv;

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WeightConfig {
    /// `power` (default) or `table`.
    pub kind: Option<String>,
    pub kappa: Option<f64>,
    pub table: Option<Vec<f64>>,
    pub probe: Option<u64>,
}

/// Every knob of every subcommand. Fields left `None` take their defaults.
/// Read from TOML; command-line flags are merged on top.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub model: Option<Model>,
    pub p: Option<f64>,
    #[serde(default)]
    pub weight: WeightConfig,

    pub tol: Option<f64>,
    pub kmax: Option<usize>,
    pub rtol: Option<f64>,
    pub atol: Option<f64>,
    pub tail: Option<TailClosure>,

    /// `small` or `csv:FILE`.
    pub init: Option<String>,
    /// Initial data inlined by the manifest writer; takes precedence over `init`.
    pub init_c: Option<Vec<f64>>,
    pub t_end: Option<f64>,
    pub t_step: Option<f64>,
    /// Also integrate the time-changed system over `[0, s_end]`.
    pub s_end: Option<f64>,

    pub n: Option<u64>,
    pub replicas: Option<usize>,
    pub seed: Option<u64>,
    /// `start:stop:step`.
    pub grid: Option<String>,
    pub k_cut: Option<usize>,
    pub ns: Option<Vec<u64>>,
    pub horizon: Option<f64>,
    pub grid_step: Option<f64>,
}

macro_rules! overlay {
    ($base:ident, $over:ident; $($f:ident),*) => {
        $( if $over.$f.is_some() { $base.$f = $over.$f; } )*
    };
}

impl RunConfig {
    pub fn from_toml_str(s: &str) -> Result<Self> {
        toml::from_str(s).map_err(|e| Error::config("config", e.to_string()))
    }

    pub fn from_file(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_toml_str(&text)
    }

    /// Fields set in `over` replace those in `self`.
    pub fn merged(mut self, over: RunConfig) -> Self {
        overlay!(self, over; model, p, tol, kmax, rtol, atol, tail, init, init_c, t_end, t_step,
                 s_end, n, replicas, seed, grid, k_cut, ns, horizon, grid_step);
        let w = over.weight;
        let base = &mut self.weight;
        overlay!(base, w; kind, kappa, table, probe);
        self
    }

    pub fn params(&self) -> Result<ModelParams> {
        let model = self
            .model
            .ok_or_else(|| Error::config("model", "missing (graph or urn)"))?;
        let p = self.p.ok_or_else(|| Error::config("p", "missing"))?;
        ModelParams::new(model, p, self.weight_function()?)
    }

    pub fn weight_function(&self) -> Result<WeightFunction> {
        let w = &self.weight;
        let f = match w.kind.as_deref().unwrap_or("power") {
            "power" => {
                if w.table.is_some() {
                    return Err(Error::config("weight.table", "given with kind = power"));
                }
                WeightFunction::power(w.kappa.unwrap_or(0.0))?
            }
            "table" => {
                if w.kappa.is_some() {
                    return Err(Error::config("weight.kappa", "given with kind = table"));
                }
                let t = w
                    .table
                    .clone()
                    .ok_or_else(|| Error::config("weight.table", "missing for kind = table"))?;
                WeightFunction::table(t)?
            }
            other => {
                return Err(Error::config(
                    "weight.kind",
                    format!("unknown kind `{other}` (power or table)"),
                ))
            }
        };
        match w.probe {
            Some(probe) => f.with_probe(probe),
            None => Ok(f),
        }
    }

    pub fn tol(&self) -> Result<f64> {
        positive("tol", self.tol.unwrap_or(crate::equilibrium::DEFAULT_TOL))
    }

    pub fn rtol(&self) -> Result<f64> {
        positive("rtol", self.rtol.unwrap_or(1e-9))
    }

    pub fn atol(&self) -> Result<f64> {
        positive("atol", self.atol.unwrap_or(1e-14))
    }

    pub fn initial_configuration(&self) -> Result<InitialConfiguration> {
        if let Some(c) = &self.init_c {
            return InitialConfiguration::from_counts(c.clone());
        }
        parse_init(self.init.as_deref().unwrap_or("small"))
    }
}

fn positive(key: &str, v: f64) -> Result<f64> {
    if v.is_finite() && v > 0.0 {
        Ok(v)
    } else {
        Err(Error::config(key, format!("must be positive, got {v}")))
    }
}

pub fn parse_init(spec: &str) -> Result<InitialConfiguration> {
    if spec == "small" {
        return Ok(InitialConfiguration::small());
    }
    match spec.strip_prefix("csv:") {
        Some(path) => {
            let c = read_init_csv(&PathBuf::from(path)).map_err(|e| match e {
                Error::Io { path, source } => {
                    Error::config("init", format!("cannot read {}: {source}", path.display()))
                }
                other => other,
            })?;
            InitialConfiguration::from_counts(c)
        }
        None => Err(Error::config("init", format!("expected `small` or `csv:FILE`, got `{spec}`"))),
    }
}

/// `start:stop:step`, both ends inclusive when `stop` is on the lattice.
pub fn parse_grid(spec: &str) -> Result<Vec<f64>> {
    let parts: Vec<&str> = spec.split(':').collect();
    let bad = || Error::config("grid", format!("expected start:stop:step, got `{spec}`"));
    if parts.len() != 3 {
        return Err(bad());
    }
    let nums: Vec<f64> = parts
        .iter()
        .map(|s| s.trim().parse::<f64>().map_err(|_| bad()))
        .collect::<Result<_>>()?;
    let (a, b, h) = (nums[0], nums[1], nums[2]);
    if !(a >= 0.0 && b >= a && h > 0.0 && a.is_finite() && b.is_finite()) {
        return Err(Error::config("grid", "need 0 ≤ start ≤ stop and step > 0"));
    }
    let m = ((b - a) / h + 1e-9).floor() as usize;
    Ok((0..=m).map(|i| a + i as f64 * h).collect())
}

/// Accepts plain integers and `1e5`-style scales.
pub fn parse_scale(s: &str) -> Result<u64> {
    let s = s.trim();
    if let Ok(v) = s.parse::<u64>() {
        return Ok(v);
    }
    match s.parse::<f64>() {
        Ok(v) if v >= 1.0 && v.fract() == 0.0 && v < 1e18 => Ok(v as u64),
        _ => Err(Error::config("ns", format!("`{s}` is not a positive integer"))),
    }
}

//! Attachment weights `k ↦ w(k)` and their sublinearity certificate.
//!
//! Every weight is strictly positive on `k ≥ 1` and has `w(k)/k → 0`. The
//! supremum `sup w(k)/k` (written 𝒲 in the docs below) bounds the weight by
//! a multiple of the degree and drives the tail estimates used elsewhere.

use std::fmt;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Probe length used when a weight is built without an explicit one.
pub const DEFAULT_PROBE: u64 = 10_000;

type WeightFn = dyn Fn(u64) -> f64 + Send + Sync;

#[derive(Clone)]
pub enum WeightKind {
    /// `w(k) = k^κ`, κ < 1.
    Power { kappa: f64 },
    /// Explicit values for `k = 1..=len`; beyond the table the weight
    /// continues as `w(len)·(k/len)^κ_tail` with κ_tail read off the last
    /// two entries.
    Table { values: Vec<f64>, tail_kappa: f64 },
    Custom { name: String, f: Arc<WeightFn> },
}

impl fmt::Debug for WeightKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            WeightKind::Power { kappa } => write!(f, "Power {{ kappa: {kappa} }}"),
            WeightKind::Table { values, tail_kappa } => f
                .debug_struct("Table")
                .field("len", &values.len())
                .field("tail_kappa", tail_kappa)
                .finish(),
            WeightKind::Custom { name, .. } => write!(f, "Custom({name})"),
        }
    }
}

/// Result of probing `w(k)/k` on `1..=probe`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Certificate {
    /// max of `w(k)/k` over the probe.
    pub bound: f64,
    /// max of `w(k)/k` over the last decade of the probe.
    pub ratio_tail: f64,
    pub probe: u64,
    /// `w(k)/k` is non-increasing along the last decade.
    pub monotone_tail: bool,
}

impl Certificate {
    pub fn passed(&self) -> bool {
        self.monotone_tail && self.bound.is_finite()
    }
}

#[derive(Debug, Clone)]
pub struct WeightFunction {
    kind: WeightKind,
    certificate: Certificate,
}

impl WeightFunction {
    pub fn power(kappa: f64) -> Result<Self> {
        if !kappa.is_finite() {
            return Err(Error::config("weight.kappa", "must be finite"));
        }
        if kappa >= 1.0 {
            return Err(Error::config(
                "weight.kappa",
                format!("κ = {kappa} is not sublinear (need κ < 1)"),
            ));
        }
        Self::with_kind(WeightKind::Power { kappa }, DEFAULT_PROBE)
    }

    pub fn table(values: Vec<f64>) -> Result<Self> {
        if values.is_empty() {
            return Err(Error::config("weight.table", "table is empty"));
        }
        if let Some(bad) = values.iter().position(|v| !(v.is_finite() && *v > 0.0)) {
            return Err(Error::config(
                "weight.table",
                format!("entry for k = {} is not a positive number", bad + 1),
            ));
        }
        let len = values.len();
        let tail_kappa = if len >= 2 {
            (values[len - 1] / values[len - 2]).ln() / (len as f64 / (len - 1) as f64).ln()
        } else {
            0.0
        };
        if tail_kappa >= 1.0 {
            return Err(Error::config(
                "weight.table",
                format!("last two entries extend with exponent {tail_kappa} ≥ 1"),
            ));
        }
        Self::with_kind(WeightKind::Table { values, tail_kappa }, DEFAULT_PROBE)
    }

    /// Wraps an arbitrary closure. Positivity is checked over the probe range;
    /// beyond it the closure is trusted.
    pub fn custom<F>(name: impl Into<String>, f: F, probe: u64) -> Result<Self>
    where
        F: Fn(u64) -> f64 + Send + Sync + 'static,
    {
        let kind = WeightKind::Custom {
            name: name.into(),
            f: Arc::new(f),
        };
        Self::with_kind(kind, probe)
    }

    fn with_kind(kind: WeightKind, probe: u64) -> Result<Self> {
        let mut w = WeightFunction {
            kind,
            certificate: Certificate {
                bound: f64::NAN,
                ratio_tail: f64::NAN,
                probe: 0,
                monotone_tail: false,
            },
        };
        w.certificate = w.certify_sublinear(probe)?;
        Ok(w)
    }

    /// Re-certifies over a different probe length and caches the result.
    pub fn with_probe(mut self, probe: u64) -> Result<Self> {
        self.certificate = self.certify_sublinear(probe)?;
        Ok(self)
    }

    pub fn kind(&self) -> &WeightKind {
        &self.kind
    }

    pub fn certificate(&self) -> &Certificate {
        &self.certificate
    }

    /// Cached 𝒲.
    pub fn sup_ratio(&self) -> f64 {
        self.certificate.bound
    }

    pub fn kappa(&self) -> Option<f64> {
        match self.kind {
            WeightKind::Power { kappa } => Some(kappa),
            _ => None,
        }
    }

    /// `w(k)` for `k ≥ 1`.
    pub fn eval_weight(&self, k: u64) -> Result<f64> {
        if k == 0 {
            return Err(Error::Domain("weights are defined for k ≥ 1".into()));
        }
        let v = self.raw(k);
        if v.is_finite() && v > 0.0 {
            Ok(v)
        } else {
            Err(Error::config(
                "weight",
                format!("w({k}) = {v} is not a positive number"),
            ))
        }
    }

    /// Unchecked `w(k)`; the constructors guarantee positivity on the probe.
    #[inline]
    pub fn at(&self, k: u64) -> f64 {
        debug_assert!(k >= 1);
        self.raw(k)
    }

    #[inline]
    fn raw(&self, k: u64) -> f64 {
        match &self.kind {
            WeightKind::Power { kappa } => {
                if *kappa == 0.0 {
                    1.0
                } else {
                    (k as f64).powf(*kappa)
                }
            }
            WeightKind::Table { values, tail_kappa } => {
                let len = values.len() as u64;
                if k <= len {
                    values[(k - 1) as usize]
                } else {
                    values[values.len() - 1] * (k as f64 / len as f64).powf(*tail_kappa)
                }
            }
            WeightKind::Custom { f, .. } => f(k),
        }
    }

    /// Vector `(w(1), …, w(len))`.
    pub fn values(&self, len: usize) -> Vec<f64> {
        (1..=len as u64).map(|k| self.at(k)).collect()
    }

    pub fn certify_sublinear(&self, k_probe: u64) -> Result<Certificate> {
        if k_probe < 100 {
            return Err(Error::config("weight.probe", "probe must be at least 100"));
        }
        let tail_start = k_probe - k_probe / 10 + 1;
        let mut bound = 0.0f64;
        let mut ratio_tail = 0.0f64;
        let mut monotone_tail = true;
        let mut prev = f64::INFINITY;
        for k in 1..=k_probe {
            let w = self.eval_weight(k)?;
            let r = w / k as f64;
            bound = bound.max(r);
            if k >= tail_start {
                ratio_tail = ratio_tail.max(r);
                if r > prev {
                    monotone_tail = false;
                }
                prev = r;
            }
        }
        if !monotone_tail {
            log::warn!("w(k)/k is not monotone on the last decade of the probe (k ≤ {k_probe})");
        }
        Ok(Certificate {
            bound,
            ratio_tail,
            probe: k_probe,
            monotone_tail,
        })
    }

    /// True when `w` is known to be non-increasing on `k ≥ j`.
    pub fn nonincreasing_from(&self, j: u64) -> bool {
        match &self.kind {
            WeightKind::Power { kappa } => *kappa <= 0.0,
            WeightKind::Table { values, tail_kappa } => {
                *tail_kappa <= 0.0 && j >= values.len() as u64
            }
            WeightKind::Custom { .. } => false,
        }
    }

    /// True when `w(k)/k` is known (or, for closures, certified) to be
    /// non-increasing on `k ≥ j`.
    pub fn ratio_nonincreasing_from(&self, j: u64) -> bool {
        match &self.kind {
            WeightKind::Power { .. } => true,
            WeightKind::Table { values, .. } => j >= values.len() as u64,
            WeightKind::Custom { .. } => {
                let c = &self.certificate;
                c.monotone_tail && j > c.probe - c.probe / 10
            }
        }
    }
}

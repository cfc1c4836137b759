//! Stationary profile of the degree distribution.
//!
//! For a model with attachment parameters `(p0, q0)` the slope `s*` of the
//! total weight is the unique root of
//!
//! ```text
//! F(s) = (p0/q0) Σ_{k≥1} Π_{j=1..k} ρ_j(s),     ρ_j(s) = q0 w(j) / (s + q0 w(j)),
//! ```
//!
//! and the limiting class proportions follow the recursion
//! `a_1 = s p0 / (s + q0 w(1))`, `a_k = q0 w(k-1) a_{k-1} / (s + q0 w(k))`.
//!
//! Infinite sums are truncated with a computable majorant of the remainder
//! (see [`remainder_factor`]).

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::weights::WeightFunction;

pub const DEFAULT_TOL: f64 = 1e-10;
pub const DEFAULT_KMAX: usize = 512;
/// Hard cap on the number of series terms.
pub const MAX_TERMS: u64 = 10_000_000;
/// Below this the recursion is considered to have underflowed.
pub const TINY: f64 = 1e-300;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Model {
    Graph,
    Urn,
}

impl Model {
    pub fn as_str(&self) -> &'static str {
        match self {
            Model::Graph => "graph",
            Model::Urn => "urn",
        }
    }
}

impl std::str::FromStr for Model {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "graph" => Ok(Model::Graph),
            "urn" => Ok(Model::Urn),
            other => Err(Error::config("model", format!("unknown model `{other}`"))),
        }
    }
}

impl std::fmt::Display for Model {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Model kind, `p`, and the derived flow rates `p0`, `q0`.
#[derive(Debug, Clone)]
pub struct ModelParams {
    model: Model,
    p: f64,
    p0: f64,
    q0: f64,
    weight: WeightFunction,
}

impl ModelParams {
    /// Graph: `0 < p ≤ 1`, `p0 = p`, `q0 = 2 − p`. Urn: `0 < p < 1`,
    /// `p0 = p`, `q0 = 1 − p`.
    pub fn new(model: Model, p: f64, weight: WeightFunction) -> Result<Self> {
        if !p.is_finite() || p <= 0.0 {
            return Err(Error::config(
                "p",
                format!("p = {p}: p = 0 is a degenerate evolution, need p > 0"),
            ));
        }
        let q0 = match model {
            Model::Graph => {
                if p > 1.0 {
                    return Err(Error::config("p", format!("graph model needs p ≤ 1, got {p}")));
                }
                2.0 - p
            }
            Model::Urn => {
                if p >= 1.0 {
                    return Err(Error::config(
                        "p",
                        format!("urn model with p = {p} is a degenerate evolution, need p < 1"),
                    ));
                }
                1.0 - p
            }
        };
        Ok(ModelParams {
            model,
            p,
            p0: p,
            q0,
            weight,
        })
    }

    pub fn model(&self) -> Model {
        self.model
    }

    pub fn p(&self) -> f64 {
        self.p
    }

    pub fn p0(&self) -> f64 {
        self.p0
    }

    pub fn q0(&self) -> f64 {
        self.q0
    }

    pub fn weight(&self) -> &WeightFunction {
        &self.weight
    }

    /// Fixed-point, ODE and spectral computations need a certified weight.
    pub fn require_certified(&self) -> Result<()> {
        if self.weight.certificate().passed() {
            Ok(())
        } else {
            Err(Error::config(
                "weight",
                "w(k)/k failed the sublinearity certificate; only simulation is allowed",
            ))
        }
    }

    #[inline]
    pub fn rho(&self, s: f64, j: u64) -> f64 {
        let qw = self.q0 * self.weight.at(j);
        qw / (s + qw)
    }
}

/// Upper bound on `Σ_{m≥1} Π_{i=1..m} ρ_{j+i}(s)`, or `None` when no
/// structural majorant is available at index `j`.
///
/// Two majorants are used, whichever applies and is smaller:
/// * `w` non-increasing past `j`: every later factor is at most `ρ_j`, giving
///   the geometric bound `ρ_j / (1 − ρ_j)`.
/// * `w(k)/k` non-increasing past `j`: `ρ_{j+i} ≤ (j+i)/(j+i+β)` with
///   `β = s j / (q0 w(j))`, and the Gamma-ratio sum equals `(j+1)/(β−1)` for `β > 1`.
pub fn remainder_factor(params: &ModelParams, s: f64, j: u64) -> Option<f64> {
    let w = params.weight();
    let mut best: Option<f64> = None;
    if w.nonincreasing_from(j) {
        let r = params.rho(s, j);
        if r < 1.0 {
            best = Some(r / (1.0 - r));
        }
    }
    if w.ratio_nonincreasing_from(j) {
        let beta = s * j as f64 / (params.q0() * w.at(j));
        if beta > 1.0 {
            let g = (j as f64 + 1.0) / (beta - 1.0);
            best = Some(best.map_or(g, |b| b.min(g)));
        }
    }
    best
}

/// Running partial sum and certified remainder of `Σ_{m≥1} Π_{i=1..m} ρ_{start+i}`.
#[derive(Debug, Clone, Copy)]
pub struct SeriesValue {
    pub sum: f64,
    pub remainder: f64,
    pub terms: u64,
}

impl SeriesValue {
    pub fn upper(&self) -> f64 {
        self.sum + self.remainder
    }
}

/// Sums `Σ_{m≥1} Π_{i=1..m} ρ_{start+i}(s)` until the certified remainder
/// drops to `tol`.
pub fn product_series(params: &ModelParams, s: f64, start: u64, tol: f64) -> Result<SeriesValue> {
    let mut prod = 1.0f64;
    let mut sum = 0.0f64;
    let mut j = start;
    let mut terms = 0u64;
    loop {
        if let Some(factor) = remainder_factor(params, s, j) {
            let rem = prod * factor;
            if rem <= tol {
                return Ok(SeriesValue {
                    sum,
                    remainder: rem,
                    terms,
                });
            }
        }
        if prod == 0.0 {
            return Ok(SeriesValue {
                sum,
                remainder: 0.0,
                terms,
            });
        }
        if terms >= MAX_TERMS {
            return Err(Error::Tolerance(format!(
                "series at s = {s} did not reach tolerance {tol} within {MAX_TERMS} terms"
            )));
        }
        j += 1;
        terms += 1;
        prod *= params.rho(s, j);
        sum += prod;
    }
}

fn check_s(s: f64) -> Result<()> {
    if s.is_finite() && s > 0.0 {
        Ok(())
    } else {
        Err(Error::Domain(format!("s must be positive and finite, got {s}")))
    }
}

fn check_tol(tol: f64) -> Result<()> {
    if tol.is_finite() && tol > 0.0 {
        Ok(())
    } else {
        Err(Error::config("tol", format!("tolerance must be positive, got {tol}")))
    }
}

/// `F_{p0,q0}(s)` with absolute error at most `tol`.
pub fn eval_f(params: &ModelParams, s: f64, tol: f64) -> Result<f64> {
    check_s(s)?;
    check_tol(tol)?;
    params.require_certified()?;
    let lead = params.p0() / params.q0() * params.rho(s, 1);
    let inner = product_series(params, s, 1, tol / lead.max(f64::MIN_POSITIVE))?;
    Ok(lead * (1.0 + inner.sum))
}

/// Unique `s*` with `F(s*) = 1`, by bracketing and bisection.
pub fn solve_s_star(params: &ModelParams, tol: f64) -> Result<f64> {
    check_tol(tol)?;
    params.require_certified()?;
    let series_tol = (tol * 1e-2).max(1e-16);
    let f = |s: f64| eval_f(params, s, series_tol);

    let (mut lo, mut hi) = bracket(|s| Ok(f(s)? - 1.0))?;
    for _ in 0..2000 {
        let mid = 0.5 * (lo + hi);
        let fm = f(mid)?;
        if fm == 1.0 {
            return Ok(mid);
        }
        if fm > 1.0 {
            lo = mid;
        } else {
            hi = mid;
        }
        let width = hi - lo;
        if ((fm - 1.0).abs() <= tol && width <= tol * mid.max(1.0))
            || width <= 4.0 * f64::EPSILON * mid
        {
            return Ok(0.5 * (lo + hi));
        }
    }
    Err(Error::Tolerance("bisection for s* did not converge".into()))
}

/// Finds `lo < hi` with `g(lo) > 0 > g(hi)` for a decreasing `g`, expanding
/// from 1 by doubling/halving (at most 200 times each way).
pub(crate) fn bracket<G>(mut g: G) -> Result<(f64, f64)>
where
    G: FnMut(f64) -> Result<f64>,
{
    let g1 = g(1.0)?;
    if g1 == 0.0 {
        return Ok((1.0, 1.0));
    }
    if g1 > 0.0 {
        let mut lo = 1.0;
        let mut hi = 2.0;
        for _ in 0..200 {
            if g(hi)? < 0.0 {
                return Ok((lo, hi));
            }
            lo = hi;
            hi *= 2.0;
        }
        Err(Error::Model(
            "bracket expansion failed after 200 doublings: F never drops below 1".into(),
        ))
    } else {
        let mut hi = 1.0;
        let mut lo = 0.5;
        for _ in 0..200 {
            if g(lo)? > 0.0 {
                return Ok((lo, hi));
            }
            hi = lo;
            lo *= 0.5;
        }
        Err(Error::Model(
            "bracket expansion failed after 200 halvings: F never exceeds 1".into(),
        ))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MassResiduals {
    /// `|Σ_{k≤K} a_k − p0|`
    pub mass: f64,
    /// `|Σ_{k≤K} k a_k − (p0 + q0)|`
    pub size: f64,
    pub passed: bool,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct EquilibriumSolution {
    pub s_star: f64,
    /// `a[k-1] = a_k` for `k = 1..=K`.
    pub a: Vec<f64>,
    /// Effective truncation index (shorter than requested on underflow).
    pub k: usize,
    /// Upper bound on `Σ_{k>K} a_k`.
    pub tail_bound: f64,
    pub residuals: MassResiduals,
}

impl EquilibriumSolution {
    pub fn a_k(&self, k: usize) -> f64 {
        if k == 0 || k > self.a.len() {
            0.0
        } else {
            self.a[k - 1]
        }
    }
}

/// Limit proportions `a_1..a_K` at slope `s`.
pub fn a_sequence(params: &ModelParams, s: f64, k_max: usize) -> Result<EquilibriumSolution> {
    check_s(s)?;
    params.require_certified()?;
    if k_max == 0 {
        return Err(Error::config("kmax", "truncation index must be at least 1"));
    }
    let w = params.weight();
    let q0 = params.q0();
    let mut a = Vec::with_capacity(k_max);
    a.push(s * params.p0() / (s + q0 * w.at(1)));
    for k in 2..=k_max as u64 {
        let prev = a[a.len() - 1];
        let next = q0 * w.at(k - 1) * prev / (s + q0 * w.at(k));
        if next < TINY {
            break;
        }
        a.push(next);
    }
    let k_eff = a.len();
    let tail_bound = mass_tail_bound(params, s, k_eff as u64, a[k_eff - 1])?;
    let mut sol = EquilibriumSolution {
        s_star: s,
        a,
        k: k_eff,
        tail_bound,
        residuals: MassResiduals {
            mass: f64::NAN,
            size: f64::NAN,
            passed: false,
        },
    };
    sol.residuals = check_mass_identities(&sol, params);
    Ok(sol)
}

/// `Σ_{m≥1} a_{K+m} ≤ a_K · C · ρ_K · (1 + Σ_{m≥1} Π_{i=1..m} ρ_{K+i})`, where
/// `C` bounds `(s + q0 w(K)) / (s + q0 w(K+m))`.
fn mass_tail_bound(params: &ModelParams, s: f64, k: u64, a_k: f64) -> Result<f64> {
    let w = params.weight();
    let q0 = params.q0();
    let nondecreasing = matches!(w.kappa(), Some(kappa) if kappa >= 0.0);
    let c = if nondecreasing {
        1.0
    } else {
        (s + q0 * w.at(k)) / s
    };
    let series = product_series(params, s, k, 1e-3)?;
    Ok(a_k * c * params.rho(s, k) * (1.0 + series.upper()))
}

/// Mass and size identities `Σ a_k = p0`, `Σ k a_k = p0 + q0`.
pub fn check_mass_identities(sol: &EquilibriumSolution, params: &ModelParams) -> MassResiduals {
    let mass_sum: f64 = sol.a.iter().sum();
    let size_sum: f64 = sol
        .a
        .iter()
        .enumerate()
        .map(|(i, a)| (i + 1) as f64 * a)
        .sum();
    let mass = (mass_sum - params.p0()).abs();
    let size = (size_sum - params.p0() - params.q0()).abs();
    let allowance = (sol.tail_bound * (sol.k as f64 + 1.0)).max(1e-8);
    MassResiduals {
        mass,
        size,
        passed: mass <= allowance && size <= allowance,
    }
}

/// Default truncation: first `k ≤ DEFAULT_KMAX` with `a_k < rel · a_1`.
pub fn default_truncation(sol: &EquilibriumSolution, rel: f64) -> usize {
    let a1 = sol.a[0];
    sol.a
        .iter()
        .position(|&x| x < rel * a1)
        .map_or(sol.k, |i| i + 1)
}

//! Truncated rate equations for the scaled class sizes `φ_k(t)` and their
//! linear time-changed form `ψ(s) = φ(t(s))`, `dψ/ds = A ψ`, `dt/ds = T(ψ)`.

use serde::{Deserialize, Serialize};

use crate::equilibrium::{a_sequence, solve_s_star, ModelParams};
use crate::error::{Error, Result};
use crate::spectral::{build_operator_with, TailClosure, TruncatedOperator};

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TruncatedProfile {
    pub t: f64,
    /// `values[k-1] = φ_k`.
    pub values: Vec<f64>,
    /// Mass that left class `K` in open-tail mode.
    pub tail: f64,
    /// `Σ φ_k`
    pub v: f64,
    /// `Σ w(k) φ_k`
    pub weight: f64,
    /// `Σ k φ_k`
    pub d: f64,
}

impl TruncatedProfile {
    pub fn new(t: f64, values: Vec<f64>, tail: f64, w: &[f64]) -> Result<Self> {
        if values.len() > w.len() {
            return Err(Error::Input("profile longer than weight vector".into()));
        }
        if let Some(i) = values.iter().position(|v| !(v.is_finite() && *v >= 0.0)) {
            return Err(Error::Input(format!(
                "profile entry k = {} is not a nonnegative number",
                i + 1
            )));
        }
        let (v, weight, d) = summaries(&values, w);
        Ok(TruncatedProfile {
            t,
            values,
            tail,
            v,
            weight,
            d,
        })
    }

    pub fn k(&self) -> usize {
        self.values.len()
    }

    /// Largest relative disagreement between cached and recomputed summaries.
    pub fn summary_drift(&self, w: &[f64]) -> f64 {
        let (v, weight, d) = summaries(&self.values, w);
        let rel = |a: f64, b: f64| if b == 0.0 { a.abs() } else { ((a - b) / b).abs() };
        rel(self.v, v).max(rel(self.weight, weight)).max(rel(self.d, d))
    }
}

fn summaries(values: &[f64], w: &[f64]) -> (f64, f64, f64) {
    let mut v = 0.0;
    let mut t = 0.0;
    let mut d = 0.0;
    for (i, (x, wk)) in values.iter().zip(w).enumerate() {
        v += x;
        t += wk * x;
        d += (i + 1) as f64 * x;
    }
    (v, t, d)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum InitKind {
    Small,
    Large,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct InitialConfiguration {
    pub c: Vec<f64>,
    pub c_total: f64,
    pub c_tilde: f64,
    pub kind: InitKind,
}

impl InitialConfiguration {
    pub fn small() -> Self {
        InitialConfiguration {
            c: Vec::new(),
            c_total: 0.0,
            c_tilde: 0.0,
            kind: InitKind::Small,
        }
    }

    /// Classifies `c` as small when every entry vanishes.
    pub fn from_counts(c: Vec<f64>) -> Result<Self> {
        Self::with_size(c, None)
    }

    /// As [`from_counts`](Self::from_counts), with an explicitly stated `c̃`.
    /// A `c̃` that differs from `Σ k c_k` would put mass at infinity; such
    /// inputs are rejected.
    pub fn with_size(c: Vec<f64>, c_tilde: Option<f64>) -> Result<Self> {
        if let Some(i) = c.iter().position(|v| !(v.is_finite() && *v >= 0.0)) {
            return Err(Error::Input(format!(
                "initial entry c_{} is not a nonnegative number",
                i + 1
            )));
        }
        let c_total: f64 = c.iter().sum();
        let computed: f64 = c.iter().enumerate().map(|(i, v)| (i + 1) as f64 * v).sum();
        if let Some(ct) = c_tilde {
            if (ct - computed).abs() > 1e-12 * computed.max(1.0) {
                return Err(Error::Input(format!(
                    "stated c̃ = {ct} differs from Σ k c_k = {computed}; \
                     mass at infinity in the initial data is not supported"
                )));
            }
        }
        if c_total == 0.0 {
            return Ok(Self::small());
        }
        let mut c = c;
        while c.last() == Some(&0.0) {
            c.pop();
        }
        Ok(InitialConfiguration {
            c,
            c_total,
            c_tilde: computed,
            kind: InitKind::Large,
        })
    }
}

/// Step control for the explicit integrators.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct StepControl {
    pub rtol: f64,
    pub atol: f64,
    pub tail: TailClosure,
    pub max_steps: usize,
    pub max_consecutive_rejects: usize,
}

impl Default for StepControl {
    fn default() -> Self {
        StepControl {
            rtol: 1e-9,
            atol: 1e-14,
            tail: TailClosure::Open,
            max_steps: 10_000_000,
            max_consecutive_rejects: 60,
        }
    }
}

/// Start of integration for small configurations.
pub const SMALL_SEED_TIME: f64 = 0.01;
/// Relative size of negative components tolerated (and clamped) by the guard.
pub const GUARD: f64 = 1e-12;

/// Right side of the truncated rate equations; returns the rate into the
/// tail register as well.
pub fn rhs_phi(
    profile: &TruncatedProfile,
    params: &ModelParams,
    tail: TailClosure,
) -> Result<(Vec<f64>, f64)> {
    let w = params.weight().values(profile.k());
    let mut out = vec![0.0; profile.k()];
    let r = rhs_phi_into(&profile.values, &w, params.p0(), params.q0(), tail, &mut out)?;
    Ok((out, r))
}

fn rhs_phi_into(
    x: &[f64],
    w: &[f64],
    p0: f64,
    q0: f64,
    tail: TailClosure,
    out: &mut [f64],
) -> Result<f64> {
    let n = x.len();
    let t: f64 = x.iter().zip(w).map(|(a, b)| a * b).sum();
    if !(t > 0.0) {
        return Err(Error::Singularity(format!(
            "total weight T = {t} is not positive"
        )));
    }
    let r = q0 / t;
    out[0] = p0 - r * w[0] * x[0];
    for k in 1..n {
        out[k] = r * (w[k - 1] * x[k - 1] - w[k] * x[k]);
    }
    let lost = r * w[n - 1] * x[n - 1];
    match tail {
        TailClosure::Open => Ok(lost),
        TailClosure::Absorbing => {
            out[n - 1] += lost;
            Ok(0.0)
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PhiTrajectory {
    pub samples: Vec<TruncatedProfile>,
    pub max_tail: f64,
    pub steps: usize,
    pub rejected: usize,
}

/// Initial profile for the φ system: `c` for large configurations (`t0 = 0`),
/// the ray `a t0` for small ones (`t0 > 0`).
pub fn seed_profile(
    init: &InitialConfiguration,
    params: &ModelParams,
    t0: f64,
    k: usize,
) -> Result<Vec<f64>> {
    match init.kind {
        InitKind::Large => {
            if t0 != 0.0 {
                return Err(Error::config("t0", "large configurations start at t0 = 0"));
            }
            if init.c.len() > k {
                return Err(Error::config(
                    "kmax",
                    format!("initial data has {} classes but K = {k}", init.c.len()),
                ));
            }
            let mut x = init.c.clone();
            x.resize(k, 0.0);
            Ok(x)
        }
        InitKind::Small => {
            if !(t0 > 0.0 && t0.is_finite()) {
                return Err(Error::config(
                    "t0",
                    "small configurations must be seeded at t0 > 0 on the ray a·t0",
                ));
            }
            let mut a = equilibrium_ray(params, k)?;
            a.iter_mut().for_each(|v| *v *= t0);
            Ok(a)
        }
    }
}

fn equilibrium_ray(params: &ModelParams, k: usize) -> Result<Vec<f64>> {
    let s = solve_s_star(params, 1e-14)?;
    let mut a = a_sequence(params, s, k)?.a;
    a.resize(k, 0.0);
    Ok(a)
}

pub fn integrate_phi(
    init: &InitialConfiguration,
    params: &ModelParams,
    t0: f64,
    t_end: f64,
    k: usize,
    control: &StepControl,
    sample_times: &[f64],
) -> Result<PhiTrajectory> {
    if k < 2 {
        return Err(Error::config("kmax", "K must be at least 2"));
    }
    if !(t_end >= t0) {
        return Err(Error::config("t_end", "t_end must not precede t0"));
    }
    params.require_certified()?;
    let w = params.weight().values(k);
    let (p0, q0) = (params.p0(), params.q0());
    let mut y = seed_profile(init, params, t0, k)?;
    y.push(0.0);

    let targets = sample_grid(t0, t_end, sample_times)?;
    let mut samples = Vec::with_capacity(targets.len());
    let mut max_tail = 0.0f64;
    let tail_mode = control.tail;
    let stats = dopri5(
        |y: &[f64], dy: &mut [f64]| {
            let lost = rhs_phi_into(&y[..k], &w, p0, q0, tail_mode, &mut dy[..k])?;
            dy[k] = lost;
            Ok(())
        },
        t0,
        &mut y,
        &targets,
        k,
        control,
        |t, y| -> Result<()> {
            max_tail = max_tail.max(y[k]);
            samples.push(TruncatedProfile::new(t, y[..k].to_vec(), y[k], &w)?);
            Ok(())
        },
    )?;
    Ok(PhiTrajectory {
        samples,
        max_tail,
        steps: stats.accepted,
        rejected: stats.rejected,
    })
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PsiSample {
    pub s: f64,
    pub t: f64,
    pub psi: Vec<f64>,
    pub tail: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PsiTrajectory {
    pub samples: Vec<PsiSample>,
    /// `max |t(s) e^{−s* s} − 1|` (small configurations only).
    pub time_change_deviation: Option<f64>,
    pub s_star: f64,
    pub steps: usize,
}

/// Joint integration of `dψ/ds = A ψ` and `dt/ds = T(ψ)` over `s ∈ [0, s_end]`.
///
/// Small configurations start from `t(0) = 1`, `ψ(0) = a`. Large ones start
/// where `t = 0` and `ψ = c`; the returned `s` is measured from that point.
pub fn integrate_psi_with_time_change(
    init: &InitialConfiguration,
    params: &ModelParams,
    s_end: f64,
    k: usize,
    control: &StepControl,
    sample_s: &[f64],
) -> Result<PsiTrajectory> {
    if !(s_end >= 0.0 && s_end.is_finite()) {
        return Err(Error::config("s_end", "must be finite and nonnegative"));
    }
    let op = build_operator_with(params, k, control.tail)?;
    let w = params.weight().values(k);
    let s_star = solve_s_star(params, 1e-14)?;
    let (mut y, t_start) = match init.kind {
        InitKind::Small => (equilibrium_ray(params, k)?, 1.0),
        InitKind::Large => (seed_profile(init, params, 0.0, k)?, 0.0),
    };
    y.push(0.0);
    y.push(t_start);

    let c0 = comparison_constant(params, init);
    let (p0, q0) = (params.p0(), params.q0());
    let targets = sample_grid(0.0, s_end, sample_s)?;
    let mut samples = Vec::with_capacity(targets.len());
    let mut deviation = 0.0f64;
    let small = init.kind == InitKind::Small;
    let stats = dopri5(
        |y: &[f64], dy: &mut [f64]| {
            psi_rhs(&op, &w, y, dy);
            Ok(())
        },
        0.0,
        &mut y,
        &targets,
        k,
        control,
        |s, y| -> Result<()> {
            let t = y[k + 1];
            let (lo, hi) = if small {
                ((s_star * s).exp(), (s_star * s).exp())
            } else {
                time_change_envelope(init, c0, p0, q0, t_start, s)
            };
            if t < lo / 10.0 || t > hi * 10.0 {
                return Err(Error::Drift(format!(
                    "t({s}) = {t} outside the comparison envelope [{lo}, {hi}] by more than 10×"
                )));
            }
            if small {
                deviation = deviation.max((t / lo - 1.0).abs());
            }
            samples.push(PsiSample {
                s,
                t,
                psi: y[..k].to_vec(),
                tail: y[k],
            });
            Ok(())
        },
    )?;
    Ok(PsiTrajectory {
        samples,
        time_change_deviation: small.then_some(deviation),
        s_star,
        steps: stats.accepted,
    })
}

fn psi_rhs(op: &TruncatedOperator, w: &[f64], y: &[f64], dy: &mut [f64]) {
    let k = op.dim();
    op.matvec_into(&y[..k], &mut dy[..k]);
    dy[k] = match op.closure() {
        TailClosure::Open => -op.diagonal()[k - 1] * y[k - 1],
        TailClosure::Absorbing => 0.0,
    };
    dy[k + 1] = y[..k].iter().zip(w).map(|(a, b)| a * b).sum();
}

/// Comparison bounds on `t(s)` implied by the bounds on `T`.
fn time_change_envelope(
    init: &InitialConfiguration,
    c0: f64,
    p0: f64,
    q0: f64,
    t_start: f64,
    s: f64,
) -> (f64, f64) {
    let lo_rate = p0 / c0;
    let hi_rate = c0 * (p0 + q0);
    let lo = t_start * (lo_rate * s).exp() + init.c_total / p0 * (lo_rate * s).exp_m1();
    let hi = t_start * (hi_rate * s).exp() + init.c_tilde / (p0 + q0) * (hi_rate * s).exp_m1();
    (lo, hi)
}

/// Smallest `L̂ ≥ 1` with `c̃/(L̂+1) ≤ c/2` and `2/(L̂+1) ≤ p0/2`.
pub fn l_hat(init: &InitialConfiguration, p0: f64) -> u64 {
    let ok = |l: u64| {
        let l1 = (l + 1) as f64;
        init.c_tilde / l1 <= init.c_total / 2.0 && 2.0 / l1 <= p0 / 2.0
    };
    let mut l = {
        let a = 4.0 / p0;
        let b = if init.c_total > 0.0 {
            2.0 * init.c_tilde / init.c_total
        } else {
            0.0
        };
        (a.max(b).ceil() as u64).saturating_sub(2).max(1)
    };
    while !ok(l) {
        l += 1;
    }
    l
}

/// `C0 = max{ [(1/2) inf_{k ≤ L̂} w(k)]^{-1}, 𝒲 }`.
pub fn comparison_constant(params: &ModelParams, init: &InitialConfiguration) -> f64 {
    let l = l_hat(init, params.p0());
    let w = params.weight();
    let inf = (1..=l).map(|k| w.at(k)).fold(f64::INFINITY, f64::min);
    (2.0 / inf).max(w.sup_ratio())
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct BoundCheck {
    pub name: String,
    pub passed: bool,
    /// Largest violation (positive) or smallest slack (nonpositive).
    pub worst: f64,
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
pub struct BoundsReport {
    pub c0: f64,
    pub l_hat: u64,
    pub checks: Vec<BoundCheck>,
}

impl BoundsReport {
    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }
}

/// Checks the mass law and the bounds on `D` and `T` along a φ-trajectory.
pub fn bounds_check(
    trajectory: &[TruncatedProfile],
    params: &ModelParams,
    init: &InitialConfiguration,
) -> BoundsReport {
    if trajectory.is_empty() {
        return BoundsReport::default();
    }
    let (p0, q0) = (params.p0(), params.q0());
    let c0 = comparison_constant(params, init);
    let small = init.kind == InitKind::Small;
    let s_star = if small {
        solve_s_star(params, 1e-14).ok()
    } else {
        None
    };
    let tol = 1e-8;

    let mut mass = f64::NEG_INFINITY;
    let mut size = f64::NEG_INFINITY;
    let mut lower = f64::NEG_INFINITY;
    let mut upper = f64::NEG_INFINITY;
    for prof in trajectory {
        let t = prof.t;
        let v_exp = init.c_total + p0 * t;
        let scale = v_exp.max(1.0);
        mass = mass.max((prof.v - v_exp).abs() - tol * scale - prof.tail);
        let d_max = init.c_tilde + (p0 + q0) * t;
        size = size.max(prof.d - d_max - tol * d_max.max(1.0));
        let t_lo = match s_star {
            // the exact ray value, minus the weight lost past K
            Some(s) => s * t - prof.tail * params.weight().sup_ratio() * prof.k() as f64,
            None => v_exp / c0,
        };
        lower = lower.max(t_lo * (1.0 - 1e-6) - prof.weight);
        upper = upper.max(prof.weight - c0 * d_max * (1.0 + tol));
    }
    let check = |name: &str, worst: f64| BoundCheck {
        name: name.to_string(),
        passed: worst <= 0.0,
        worst,
    };
    BoundsReport {
        c0,
        l_hat: l_hat(init, p0),
        checks: vec![
            check("mass_law", mass),
            check("size_bound", size),
            check("weight_lower", lower),
            check("weight_upper", upper),
        ],
    }
}

fn sample_grid(t0: f64, t_end: f64, requested: &[f64]) -> Result<Vec<f64>> {
    let mut g: Vec<f64> = Vec::with_capacity(requested.len() + 2);
    g.push(t0);
    for &t in requested {
        if !(t >= t0 && t <= t_end) {
            return Err(Error::config(
                "samples",
                format!("sample time {t} outside [{t0}, {t_end}]"),
            ));
        }
        g.push(t);
    }
    g.push(t_end);
    g.sort_by(|a, b| a.total_cmp(b));
    g.dedup();
    Ok(g)
}

struct Stats {
    accepted: usize,
    rejected: usize,
}

// Dormand–Prince 5(4) tableau; the nodes are unused since the systems are autonomous.
const A21: f64 = 1.0 / 5.0;
const A31: f64 = 3.0 / 40.0;
const A32: f64 = 9.0 / 40.0;
const A41: f64 = 44.0 / 45.0;
const A42: f64 = -56.0 / 15.0;
const A43: f64 = 32.0 / 9.0;
const A51: f64 = 19372.0 / 6561.0;
const A52: f64 = -25360.0 / 2187.0;
const A53: f64 = 64448.0 / 6561.0;
const A54: f64 = -212.0 / 729.0;
const A61: f64 = 9017.0 / 3168.0;
const A62: f64 = -355.0 / 33.0;
const A63: f64 = 46732.0 / 5247.0;
const A64: f64 = 49.0 / 176.0;
const A65: f64 = -5103.0 / 18656.0;
const B1: f64 = 35.0 / 384.0;
const B3: f64 = 500.0 / 1113.0;
const B4: f64 = 125.0 / 192.0;
const B5: f64 = -2187.0 / 6784.0;
const B6: f64 = 11.0 / 84.0;
const E1: f64 = 71.0 / 57600.0;
const E3: f64 = -71.0 / 16695.0;
const E4: f64 = 71.0 / 1920.0;
const E5: f64 = -17253.0 / 339200.0;
const E6: f64 = 22.0 / 525.0;
const E7: f64 = -1.0 / 40.0;

/// Adaptive Dormand–Prince integration of an autonomous system, stepping
/// exactly onto each target. The first `guarded` components must stay
/// nonnegative.
fn dopri5<F, S>(
    f: F,
    t0: f64,
    y: &mut Vec<f64>,
    targets: &[f64],
    guarded: usize,
    ctrl: &StepControl,
    mut sample: S,
) -> Result<Stats>
where
    F: Fn(&[f64], &mut [f64]) -> Result<()>,
    S: FnMut(f64, &[f64]) -> Result<()>,
{
    let n = y.len();
    let mut k1 = vec![0.0; n];
    let mut k2 = vec![0.0; n];
    let mut k3 = vec![0.0; n];
    let mut k4 = vec![0.0; n];
    let mut k5 = vec![0.0; n];
    let mut k6 = vec![0.0; n];
    let mut k7 = vec![0.0; n];
    let mut tmp = vec![0.0; n];
    let mut y_new = vec![0.0; n];

    let mut stats = Stats {
        accepted: 0,
        rejected: 0,
    };
    let mut t = t0;
    let t_final = *targets.last().unwrap_or(&t0);
    let span = t_final - t0;
    let mut h = if span > 0.0 { span * 1e-4 } else { 0.0 };
    f(y, &mut k1)?;
    let mut consecutive = 0;

    for &target in targets {
        while t < target {
            if stats.accepted + stats.rejected >= ctrl.max_steps {
                return Err(Error::Stiffness(format!(
                    "step budget of {} exhausted at t = {t}; loosen the tolerance or reduce K",
                    ctrl.max_steps
                )));
            }
            let last = h >= target - t;
            let hs = if last { target - t } else { h };

            for i in 0..n {
                tmp[i] = y[i] + hs * A21 * k1[i];
            }
            f(&tmp, &mut k2)?;
            for i in 0..n {
                tmp[i] = y[i] + hs * (A31 * k1[i] + A32 * k2[i]);
            }
            f(&tmp, &mut k3)?;
            for i in 0..n {
                tmp[i] = y[i] + hs * (A41 * k1[i] + A42 * k2[i] + A43 * k3[i]);
            }
            f(&tmp, &mut k4)?;
            for i in 0..n {
                tmp[i] = y[i] + hs * (A51 * k1[i] + A52 * k2[i] + A53 * k3[i] + A54 * k4[i]);
            }
            f(&tmp, &mut k5)?;
            for i in 0..n {
                tmp[i] = y[i]
                    + hs * (A61 * k1[i] + A62 * k2[i] + A63 * k3[i] + A64 * k4[i] + A65 * k5[i]);
            }
            f(&tmp, &mut k6)?;
            for i in 0..n {
                y_new[i] = y[i]
                    + hs * (B1 * k1[i] + B3 * k3[i] + B4 * k4[i] + B5 * k5[i] + B6 * k6[i]);
            }
            f(&y_new, &mut k7)?;

            let mut err = 0.0f64;
            for i in 0..n {
                let e = hs
                    * (E1 * k1[i] + E3 * k3[i] + E4 * k4[i] + E5 * k5[i] + E6 * k6[i]
                        + E7 * k7[i]);
                let sc = ctrl.atol + ctrl.rtol * y[i].abs().max(y_new[i].abs());
                let r = (e / sc).abs();
                err = if r.is_nan() { f64::INFINITY } else { err.max(r) };
            }

            let norm: f64 = y_new[..guarded].iter().map(|v| v.abs()).sum();
            let floor = -GUARD * norm;
            let negative = y_new[..guarded].iter().any(|&v| v < floor);

            if err <= 1.0 && !negative {
                for v in &mut y_new[..guarded] {
                    if *v < 0.0 {
                        *v = 0.0;
                    }
                }
                std::mem::swap(y, &mut y_new);
                t = if last { target } else { t + hs };
                f(y, &mut k1)?;
                stats.accepted += 1;
                consecutive = 0;
                let fac = if err == 0.0 {
                    5.0
                } else {
                    (0.9 * err.powf(-0.2)).clamp(0.2, 5.0)
                };
                if !last {
                    h = hs * fac;
                } else {
                    h = h.max(hs * fac.min(1.0));
                }
            } else {
                stats.rejected += 1;
                consecutive += 1;
                if consecutive > ctrl.max_consecutive_rejects
                    || hs < 1e-14 * t.abs().max(1.0)
                {
                    return Err(Error::Stiffness(format!(
                        "{consecutive} consecutive step rejections at t = {t}; \
                         use a smaller tolerance or a larger K"
                    )));
                }
                let fac = if negative {
                    0.25
                } else {
                    (0.9 * err.powf(-0.2)).clamp(0.1, 0.9)
                };
                h = hs * fac;
            }
        }
        sample(t, y)?;
    }
    Ok(stats)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::equilibrium::Model;
    use crate::weights::WeightFunction;
    use proptest::prelude::*;

    fn params(model: Model, p: f64, kappa: f64) -> ModelParams {
        ModelParams::new(model, p, WeightFunction::power(kappa).unwrap()).unwrap()
    }

    #[test]
    fn rhs_on_ray_is_a() {
        let prm = params(Model::Graph, 1.0, 0.0);
        let a = equilibrium_ray(&prm, 60).unwrap();
        let w = prm.weight().values(60);
        for t in [0.1, 1.0, 7.0] {
            let prof = TruncatedProfile::new(t, a.iter().map(|v| v * t).collect(), 0.0, &w).unwrap();
            let (r, _) = rhs_phi(&prof, &prm, TailClosure::Open).unwrap();
            for k in 0..60 {
                assert!((r[k] - a[k]).abs() < 1e-15, "k={k}");
            }
        }
    }

    #[test]
    fn rhs_single_class() {
        let prm = params(Model::Graph, 1.0, 0.0);
        let w = prm.weight().values(5);
        let prof = TruncatedProfile::new(0.0, vec![3.0, 0.0, 0.0, 0.0, 0.0], 0.0, &w).unwrap();
        let (r, _) = rhs_phi(&prof, &prm, TailClosure::Open).unwrap();
        assert_eq!(r, vec![0.0, 1.0, 0.0, 0.0, 0.0]);
    }

    #[test]
    fn rhs_zero_weight_is_singular() {
        let prm = params(Model::Urn, 0.5, 0.0);
        let w = prm.weight().values(3);
        let prof = TruncatedProfile::new(0.0, vec![0.0; 3], 0.0, &w).unwrap();
        assert!(matches!(
            rhs_phi(&prof, &prm, TailClosure::Open),
            Err(Error::Singularity(_))
        ));
    }

    #[test]
    fn absorbing_tail_conserves_flow() {
        let prm = params(Model::Urn, 0.4, 0.5);
        let w = prm.weight().values(4);
        let prof = TruncatedProfile::new(1.0, vec![1.0, 0.5, 0.25, 2.0], 0.0, &w).unwrap();
        let (open, lost) = rhs_phi(&prof, &prm, TailClosure::Open).unwrap();
        let (abs, none) = rhs_phi(&prof, &prm, TailClosure::Absorbing).unwrap();
        assert_eq!(none, 0.0);
        assert!(lost > 0.0);
        let so: f64 = open.iter().sum();
        let sa: f64 = abs.iter().sum();
        assert!((so + lost - prm.p0()).abs() < 1e-15);
        assert!((sa - prm.p0()).abs() < 1e-15);
    }

    #[test]
    fn small_config_follows_ray() {
        let prm = params(Model::Graph, 1.0, 0.0);
        let init = InitialConfiguration::small();
        let tr = integrate_phi(
            &init,
            &prm,
            SMALL_SEED_TIME,
            1.0,
            60,
            &StepControl::default(),
            &[0.5],
        )
        .unwrap();
        let end = tr.samples.last().unwrap();
        assert_eq!(end.t, 1.0);
        for k in 1..=40 {
            let exact = 0.5f64.powi(k as i32);
            assert!((end.values[k - 1] - exact).abs() < 1e-6);
        }
        for p in &tr.samples {
            assert!(p.summary_drift(&prm.weight().values(60)) < 1e-12);
        }
        let report = bounds_check(&tr.samples, &prm, &init);
        assert!(report.passed(), "{report:?}");
    }

    #[test]
    fn zero_length_returns_seed() {
        let prm = params(Model::Urn, 0.3, 0.5);
        let init = InitialConfiguration::small();
        let tr = integrate_phi(&init, &prm, 0.2, 0.2, 50, &StepControl::default(), &[]).unwrap();
        assert_eq!(tr.samples.len(), 1);
        assert_eq!(tr.samples[0].values, seed_profile(&init, &prm, 0.2, 50).unwrap());
        assert_eq!(tr.steps, 0);
    }

    #[test]
    fn small_start_at_zero_rejected() {
        let prm = params(Model::Urn, 0.3, 0.5);
        let init = InitialConfiguration::small();
        let r = integrate_phi(&init, &prm, 0.0, 1.0, 50, &StepControl::default(), &[]);
        assert!(matches!(r, Err(Error::Config { .. })));
    }

    #[test]
    fn large_config_mass_law() {
        let prm = params(Model::Graph, 1.0, 0.0);
        let init = InitialConfiguration::from_counts(vec![1.0]).unwrap();
        let times: Vec<f64> = (1..20).map(|i| i as f64 * 0.25).collect();
        let tr = integrate_phi(&init, &prm, 0.0, 5.0, 200, &StepControl::default(), &times)
            .unwrap();
        for p in &tr.samples {
            assert!((p.v + p.tail - (1.0 + p.t)).abs() < 1e-10, "t={}", p.t);
        }
        assert!(tr.max_tail < 1e-12);
        let report = bounds_check(&tr.samples, &prm, &init);
        assert!(report.passed(), "{report:?}");
    }

    #[test]
    fn urn_small_size_law() {
        let prm = params(Model::Urn, 0.5, 0.0);
        let init = InitialConfiguration::small();
        let tr = integrate_phi(&init, &prm, SMALL_SEED_TIME, 4.0, 80, &StepControl::default(), &[1.0, 2.0])
            .unwrap();
        for p in &tr.samples {
            assert!((p.d - p.t).abs() < 1e-9 * p.t);
            assert!((p.weight - 0.5 * p.t).abs() < 1e-9 * p.t);
        }
    }

    #[test]
    fn init_classification() {
        assert_eq!(InitialConfiguration::from_counts(vec![0.0, 0.0]).unwrap().kind, InitKind::Small);
        let c = InitialConfiguration::from_counts(vec![1.0, 0.0, 2.0, 0.0]).unwrap();
        assert_eq!(c.kind, InitKind::Large);
        assert_eq!((c.c_total, c.c_tilde, c.c.len()), (3.0, 7.0, 3));
        assert!(InitialConfiguration::with_size(vec![0.0], Some(1.0)).is_err());
        assert!(InitialConfiguration::from_counts(vec![-1.0]).is_err());
    }

    #[test]
    fn l_hat_and_c0() {
        let init = InitialConfiguration::from_counts(vec![1.0]).unwrap();
        // 2/(L+1) ≤ 1/2 needs L ≥ 3; c̃/(L+1) ≤ 1/2 needs L ≥ 1
        assert_eq!(l_hat(&init, 1.0), 3);
        assert_eq!(l_hat(&InitialConfiguration::small(), 0.3), 13);
        let prm = params(Model::Graph, 1.0, 0.0);
        assert_eq!(comparison_constant(&prm, &init), 2.0);
    }

    #[test]
    fn psi_small_time_change() {
        let prm = params(Model::Graph, 1.0, 0.0);
        let init = InitialConfiguration::small();
        let tr = integrate_psi_with_time_change(&init, &prm, 3.0, 60, &StepControl::default(), &[1.0, 2.0])
            .unwrap();
        assert!(tr.time_change_deviation.unwrap() < 1e-6);
        for smp in &tr.samples {
            let e = smp.s.exp();
            assert!((smp.t - e).abs() < 1e-6 * e);
            for k in 1..30 {
                let exact = 0.5f64.powi(k as i32) * e;
                assert!((smp.psi[k - 1] - exact).abs() < 1e-6 * exact);
            }
        }
    }

    #[test]
    fn psi_zero_range() {
        let prm = params(Model::Urn, 0.5, 0.5);
        let init = InitialConfiguration::from_counts(vec![0.5, 0.25]).unwrap();
        let tr = integrate_psi_with_time_change(&init, &prm, 0.0, 30, &StepControl::default(), &[])
            .unwrap();
        assert_eq!(tr.samples.len(), 1);
        assert_eq!(tr.samples[0].t, 0.0);
        assert_eq!(&tr.samples[0].psi[..2], &[0.5, 0.25]);
    }

    #[test]
    fn psi_large_mass_law() {
        let prm = params(Model::Graph, 0.6, 0.5);
        let init = InitialConfiguration::from_counts(vec![1.0]).unwrap();
        let tr = integrate_psi_with_time_change(&init, &prm, 2.0, 150, &StepControl::default(), &[0.5, 1.0, 1.5])
            .unwrap();
        for smp in &tr.samples {
            let v: f64 = smp.psi.iter().sum();
            assert!((v + smp.tail - prm.p0() * smp.t - 1.0).abs() < 1e-9);
        }
    }

    #[test]
    fn integrators_agree() {
        let prm = params(Model::Graph, 0.5, 0.5);
        let init = InitialConfiguration::from_counts(vec![1.0, 0.5]).unwrap();
        let ctrl = StepControl::default();
        let psi = integrate_psi_with_time_change(&init, &prm, 1.5, 200, &ctrl, &[0.3, 0.6, 0.9, 1.2])
            .unwrap();
        let times: Vec<f64> = psi.samples.iter().map(|p| p.t).collect();
        let t_end = *times.last().unwrap();
        let phi = integrate_phi(&init, &prm, 0.0, t_end, 200, &ctrl, &times).unwrap();
        for (a, b) in psi.samples.iter().zip(&phi.samples) {
            assert!((a.t - b.t).abs() < 1e-15);
            let diff = a
                .psi
                .iter()
                .zip(&b.values)
                .map(|(x, y)| (x - y).abs())
                .fold(0.0, f64::max);
            assert!(diff < 1e-6, "t={} diff={diff}", a.t);
        }
    }

    #[test]
    fn empty_bounds_report() {
        let prm = params(Model::Urn, 0.5, 0.0);
        let r = bounds_check(&[], &prm, &InitialConfiguration::small());
        assert!(r.checks.is_empty());
    }

    proptest! {
        #[test]
        fn rhs_is_zero_homogeneous(
            x in proptest::collection::vec(0.0f64..10.0, 8),
            lambda in 0.01f64..100.0,
            kappa in -1.0f64..0.9,
        ) {
            prop_assume!(x.iter().any(|v| *v > 1e-3));
            let prm = params(Model::Graph, 0.4, kappa);
            let w = prm.weight().values(8);
            let a = TruncatedProfile::new(0.0, x.clone(), 0.0, &w).unwrap();
            let b = TruncatedProfile::new(0.0, x.iter().map(|v| v * lambda).collect(), 0.0, &w).unwrap();
            let (ra, la) = rhs_phi(&a, &prm, TailClosure::Open).unwrap();
            let (rb, lb) = rhs_phi(&b, &prm, TailClosure::Open).unwrap();
            for (u, v) in ra.iter().zip(&rb) {
                prop_assert!((u - v).abs() <= 1e-12 * u.abs().max(1.0));
            }
            prop_assert!((la - lb).abs() <= 1e-12 * la.abs().max(1.0));
        }
    }
}

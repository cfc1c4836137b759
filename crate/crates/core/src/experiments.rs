//! Simulated paths against the deterministic solutions.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use statrs::distribution::{ChiSquared, ContinuousCDF};

use crate::dynamics::{
    integrate_phi, InitKind, InitialConfiguration, PhiTrajectory, StepControl,
};
use crate::equilibrium::{a_sequence, solve_s_star, EquilibriumSolution, Model, ModelParams};
use crate::error::{Error, Result};
use crate::stochastic::vertex::VertexSimulator;
use crate::stochastic::{replica_rng, run_chain, seed_initial, RecordedPath};

pub const DEFAULT_K_CUT: usize = 10;
pub const DEFAULT_GRID_STEP: f64 = 1e-3;
/// Soft band for the fitted log-log slope of deviation against `n`.
pub const SLOPE_BAND: (f64, f64) = (-0.7, -0.3);

/// Deterministic profile `φ_k(t)` and weight `T(t)` on a time grid.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Reference {
    pub times: Vec<f64>,
    /// `phi[i][k-1] = φ_k(times[i])`.
    pub phi: Vec<Vec<f64>>,
    pub weight: Vec<f64>,
}

impl Reference {
    /// `φ_k(t) = a_k t`, `T(t) = s* t`.
    pub fn ray(params: &ModelParams, times: &[f64], k: usize) -> Result<Self> {
        let s = solve_s_star(params, 1e-14)?;
        let sol = a_sequence(params, s, k)?;
        Ok(Reference {
            times: times.to_vec(),
            phi: times
                .iter()
                .map(|&t| (1..=k).map(|j| sol.a_k(j) * t).collect())
                .collect(),
            weight: times.iter().map(|&t| s * t).collect(),
        })
    }

    pub fn from_trajectory(tr: &PhiTrajectory, k: usize) -> Result<Self> {
        if tr.samples.first().is_some_and(|p| p.k() < k) {
            return Err(Error::Input(format!("trajectory has fewer than {k} classes")));
        }
        Ok(Reference {
            times: tr.samples.iter().map(|p| p.t).collect(),
            phi: tr.samples.iter().map(|p| p.values[..k].to_vec()).collect(),
            weight: tr.samples.iter().map(|p| p.weight).collect(),
        })
    }

    /// The ray for small configurations, the integrated system otherwise.
    pub fn for_config(
        params: &ModelParams,
        init: &InitialConfiguration,
        times: &[f64],
        k: usize,
    ) -> Result<Self> {
        match init.kind {
            InitKind::Small => Self::ray(params, times, k),
            InitKind::Large => {
                let kmax = (4 * k).max(init.c.len() + 64).max(200);
                let t_end = times.iter().cloned().fold(0.0, f64::max);
                let tr = integrate_phi(init, params, 0.0, t_end, kmax, &StepControl::default(), times)?;
                let mut r = Self::from_trajectory(&tr, k)?;
                // integrate_phi adds t = 0 and t_end; keep exactly the requested times
                let keep: Vec<usize> = times
                    .iter()
                    .map(|t| r.times.iter().position(|u| u == t).expect("sampled time"))
                    .collect();
                r.phi = keep.iter().map(|&i| r.phi[i].clone()).collect();
                r.weight = keep.iter().map(|&i| r.weight[i]).collect();
                r.times = times.to_vec();
                Ok(r)
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReplicaDeviation {
    /// `sup_{t ≤ T} |X^n_k(t) − φ_k(t)|` for `k = 1..=k_cut`.
    pub per_k: Vec<f64>,
    pub max_over_k: f64,
    /// `sup_{t ≤ T} |𝒮^n(t) − T(t)|`.
    pub weight: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DeviationReport {
    pub k_cut: usize,
    pub horizon: f64,
    pub replicas: Vec<ReplicaDeviation>,
    /// Mean over replicas of `max_over_k`.
    pub mean: f64,
    pub median: f64,
    pub std: f64,
    pub max: f64,
    pub per_k_mean: Vec<f64>,
    pub weight_mean: f64,
}

pub fn lln_deviation(
    paths: &[RecordedPath],
    reference: &Reference,
    k_cut: usize,
    horizon: f64,
) -> Result<DeviationReport> {
    if k_cut == 0 {
        return Err(Error::config("k_cut", "must be at least 1"));
    }
    if reference.phi.first().is_some_and(|r| r.len() < k_cut) {
        return Err(Error::Input("reference has fewer classes than k_cut".into()));
    }
    let mut replicas = Vec::with_capacity(paths.len());
    for path in paths {
        if path.times != reference.times {
            return Err(Error::Input("path and reference grids differ".into()));
        }
        if path.x.first().is_some_and(|r| r.len() < k_cut) {
            return Err(Error::Input("path records fewer classes than k_cut".into()));
        }
        let mut per_k = vec![0.0f64; k_cut];
        let mut weight = 0.0f64;
        for (i, &t) in path.times.iter().enumerate() {
            if t > horizon {
                continue;
            }
            for k in 0..k_cut {
                per_k[k] = per_k[k].max((path.x[i][k] - reference.phi[i][k]).abs());
            }
            weight = weight.max((path.weight[i] - reference.weight[i]).abs());
        }
        let max_over_k = per_k.iter().cloned().fold(0.0, f64::max);
        replicas.push(ReplicaDeviation {
            per_k,
            max_over_k,
            weight,
        });
    }
    Ok(aggregate(replicas, k_cut, horizon))
}

fn aggregate(replicas: Vec<ReplicaDeviation>, k_cut: usize, horizon: f64) -> DeviationReport {
    let r = replicas.len().max(1) as f64;
    let maxes: Vec<f64> = replicas.iter().map(|d| d.max_over_k).collect();
    let mean = maxes.iter().sum::<f64>() / r;
    let var = maxes.iter().map(|m| (m - mean).powi(2)).sum::<f64>() / (r - 1.0).max(1.0);
    let mut sorted = maxes.clone();
    sorted.sort_by(|a, b| a.total_cmp(b));
    let median = match sorted.len() {
        0 => 0.0,
        n if n % 2 == 1 => sorted[n / 2],
        n => 0.5 * (sorted[n / 2 - 1] + sorted[n / 2]),
    };
    let per_k_mean = (0..k_cut)
        .map(|k| replicas.iter().map(|d| d.per_k[k]).sum::<f64>() / r)
        .collect();
    DeviationReport {
        k_cut,
        horizon,
        mean,
        median,
        std: var.sqrt(),
        max: sorted.last().copied().unwrap_or(0.0),
        per_k_mean,
        weight_mean: replicas.iter().map(|d| d.weight).sum::<f64>() / r,
        replicas,
    }
}

/// Uniform grid `0, h, 2h, …` up to `horizon` (inclusive when it lands on it).
pub fn uniform_grid(horizon: f64, step: f64) -> Vec<f64> {
    let m = (horizon / step + 1e-9).floor() as usize;
    (0..=m).map(|i| i as f64 * step).collect()
}

/// Stream index for replica `r` of scale `n`; keeps replicas of different
/// scales independent under one seed.
pub fn stream_id(n: u64, replica: u64) -> u64 {
    (n << 24) ^ replica
}

/// Runs `replicas` independent chains at scale `n` up to the last grid time.
/// Output order follows the replica index regardless of scheduling.
pub fn simulate_replicas(
    params: &ModelParams,
    init: &InitialConfiguration,
    n: u64,
    replicas: usize,
    seed: u64,
    grid: &[f64],
    k_record: usize,
) -> Result<Vec<RecordedPath>> {
    let horizon = grid.iter().cloned().fold(0.0, f64::max);
    let steps = (n as f64 * horizon).ceil() as u64;
    (0..replicas as u64)
        .into_par_iter()
        .map(|r| {
            let rng = replica_rng(seed, stream_id(n, r));
            let mut st = seed_initial(init, n, params, rng)?;
            run_chain(&mut st, steps, grid, k_record)
        })
        .collect()
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct StudyRow {
    pub n: u64,
    pub report: DeviationReport,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct StudyTable {
    pub rows: Vec<StudyRow>,
    /// Least-squares slope of `ln mean` against `ln n`.
    pub slope: Option<f64>,
    pub slope_in_band: Option<bool>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StudySpec {
    pub ns: Vec<u64>,
    pub replicas: usize,
    pub horizon: f64,
    pub k_cut: usize,
    pub seed: u64,
    pub grid_step: f64,
}

pub fn convergence_study(
    params: &ModelParams,
    init: &InitialConfiguration,
    spec: &StudySpec,
) -> Result<StudyTable> {
    if spec.ns.windows(2).any(|w| w[0] >= w[1]) {
        return Err(Error::config("ns", "scales must be strictly increasing"));
    }
    if spec.replicas == 0 {
        return Err(Error::config("replicas", "must be at least 1"));
    }
    let grid = uniform_grid(spec.horizon, spec.grid_step);
    let reference = Reference::for_config(params, init, &grid, spec.k_cut)?;
    let mut rows = Vec::with_capacity(spec.ns.len());
    for &n in &spec.ns {
        let paths = simulate_replicas(params, init, n, spec.replicas, spec.seed, &grid, spec.k_cut)?;
        let report = lln_deviation(&paths, &reference, spec.k_cut, spec.horizon)?;
        log::info!("n = {n}: mean max deviation {:.3e}", report.mean);
        rows.push(StudyRow { n, report });
    }
    let slope = loglog_slope(
        &rows
            .iter()
            .map(|r| (r.n as f64, r.report.mean))
            .collect::<Vec<_>>(),
    );
    Ok(StudyTable {
        rows,
        slope,
        slope_in_band: slope.map(|s| s >= SLOPE_BAND.0 && s <= SLOPE_BAND.1),
    })
}

fn loglog_slope(points: &[(f64, f64)]) -> Option<f64> {
    let pts: Vec<(f64, f64)> = points
        .iter()
        .filter(|(x, y)| *x > 0.0 && *y > 0.0)
        .map(|(x, y)| (x.ln(), y.ln()))
        .collect();
    if pts.len() < 2 {
        return None;
    }
    let m = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / m;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / m;
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    Some(sxy / sxx)
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SlopeReport {
    pub t_end: f64,
    /// `|φ_k(t_end)/t_end − a_k| / a_k` for `k = 1..=k_cut`.
    pub rel_err: Vec<f64>,
    pub max_rel_err: f64,
    pub passed: bool,
    /// Set when `t_end < 10 c̃/p0`; the 1% band is then not meaningful.
    pub short_horizon: bool,
}

pub const SLOPE_TOLERANCE: f64 = 0.01;

pub fn large_init_slope(
    trajectory: &PhiTrajectory,
    equilibrium: &EquilibriumSolution,
    init: &InitialConfiguration,
    params: &ModelParams,
    k_cut: usize,
) -> Result<SlopeReport> {
    let last = trajectory
        .samples
        .last()
        .ok_or_else(|| Error::Input("empty trajectory".into()))?;
    if k_cut == 0 || k_cut > last.k() || k_cut > equilibrium.a.len() {
        return Err(Error::Input(format!(
            "k_cut = {k_cut} exceeds the truncation (K = {})",
            last.k().min(equilibrium.a.len())
        )));
    }
    let t = last.t;
    if !(t > 0.0) {
        return Err(Error::Input("trajectory ends at t = 0".into()));
    }
    let rel_err: Vec<f64> = (0..k_cut)
        .map(|k| (last.values[k] / t - equilibrium.a[k]).abs() / equilibrium.a[k])
        .collect();
    let max_rel_err = rel_err.iter().cloned().fold(0.0, f64::max);
    let short_horizon = t < 10.0 * init.c_tilde / params.p0();
    if short_horizon {
        log::warn!(
            "t_end = {t} is below 10·c̃/p0 = {}; slope check is premature",
            10.0 * init.c_tilde / params.p0()
        );
    }
    Ok(SlopeReport {
        t_end: t,
        rel_err,
        max_rel_err,
        passed: max_rel_err <= SLOPE_TOLERANCE,
        short_horizon,
    })
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct WeightTailCheck {
    /// `sup_t |𝒮^n(t) − Σ_{k≤L} w(k) X^n_k(t)|`
    pub gap: f64,
    /// `(c̃^n + m T) sup_{k>L} w(k)/k`, `m = 2` (graph) or 1 (urn).
    pub bound: f64,
    pub passed: bool,
}

/// The part of the weight carried by classes above `L` is at most
/// `sup_{k>L} w(k)/k` times the scaled size.
pub fn weight_tail_check(
    path: &RecordedPath,
    params: &ModelParams,
    c_tilde_n: f64,
    l: usize,
) -> Result<WeightTailCheck> {
    if path.x.first().is_some_and(|r| r.len() < l) {
        return Err(Error::Input("path records fewer than L classes".into()));
    }
    let w = params.weight();
    let probe = w.certificate().probe.max(l as u64 + 1);
    let sup_ratio = ((l as u64 + 1)..=probe)
        .map(|k| w.at(k) / k as f64)
        .fold(0.0, f64::max);
    let per_step = match params.model() {
        Model::Graph => 2.0,
        Model::Urn => 1.0,
    };
    let mut gap = 0.0f64;
    let mut bound = 0.0f64;
    let mut passed = true;
    for (i, &t) in path.times.iter().enumerate() {
        let head: f64 = (0..l).map(|k| w.at(k as u64 + 1) * path.x[i][k]).sum();
        let g = (path.weight[i] - head).abs();
        // pointwise, since the bound grows with t
        let b = (c_tilde_n + per_step * t) * sup_ratio;
        passed &= g <= b * (1.0 + 1e-12) + 1e-12;
        gap = gap.max(g);
        bound = bound.max(b);
    }
    Ok(WeightTailCheck { gap, bound, passed })
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ChiSquareTest {
    pub statistic: f64,
    pub dof: usize,
    pub p_value: f64,
}

/// Smallest pooled count per bin after merging.
pub const MIN_POOLED: u64 = 10;

/// Two-sample chi-square test for equality of two discrete distributions.
/// Adjacent values are merged left to right until each bin holds at least
/// `MIN_POOLED` observations across both samples.
pub fn chi_square_two_sample(a: &[u64], b: &[u64]) -> Result<ChiSquareTest> {
    if a.is_empty() || b.is_empty() {
        return Err(Error::Input("chi-square test needs two nonempty samples".into()));
    }
    let hi = a.iter().chain(b).copied().max().unwrap_or(0) as usize;
    let mut ha = vec![0u64; hi + 1];
    let mut hb = vec![0u64; hi + 1];
    a.iter().for_each(|&v| ha[v as usize] += 1);
    b.iter().for_each(|&v| hb[v as usize] += 1);

    let mut bins: Vec<(u64, u64)> = Vec::new();
    let mut cur = (0u64, 0u64);
    for (x, y) in ha.into_iter().zip(hb) {
        cur.0 += x;
        cur.1 += y;
        if cur.0 + cur.1 >= MIN_POOLED {
            bins.push(cur);
            cur = (0, 0);
        }
    }
    match bins.last_mut() {
        Some(last) => {
            last.0 += cur.0;
            last.1 += cur.1;
        }
        None => bins.push(cur),
    }
    if bins.len() < 2 {
        return Ok(ChiSquareTest {
            statistic: 0.0,
            dof: 0,
            p_value: 1.0,
        });
    }
    let (na, nb) = (a.len() as f64, b.len() as f64);
    let (ka, kb) = ((nb / na).sqrt(), (na / nb).sqrt());
    let statistic: f64 = bins
        .iter()
        .map(|&(x, y)| {
            let d = ka * x as f64 - kb * y as f64;
            d * d / (x + y) as f64
        })
        .sum();
    let dof = bins.len() - 1;
    let chi = ChiSquared::new(dof as f64).map_err(|e| Error::Domain(e.to_string()))?;
    Ok(ChiSquareTest {
        statistic,
        dof,
        p_value: chi.sf(statistic),
    })
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct EquivalenceReport {
    pub replicas: usize,
    /// One test per class `k = 1..=classes`.
    pub tests: Vec<ChiSquareTest>,
    /// Bonferroni-corrected per-class level.
    pub level: f64,
    pub passed: bool,
}

/// Compares the laws of `(Z_1, …, Z_classes)` after `steps` steps of the
/// vertex-level and class-level simulators, both from the small seed.
/// Each marginal is tested at `alpha / classes`.
pub fn vertex_level_equivalence(
    params: &ModelParams,
    steps: u64,
    replicas: usize,
    seed: u64,
    classes: usize,
    alpha: f64,
) -> Result<EquivalenceReport> {
    if classes == 0 || replicas == 0 {
        return Err(Error::config("replicas", "need at least one replica and one class"));
    }
    let init = InitialConfiguration::small();
    let seeds: Vec<u64> = match params.model() {
        Model::Graph => vec![2],
        Model::Urn => vec![1],
    };
    let pairs: Vec<(Vec<u64>, Vec<u64>)> = (0..replicas as u64)
        .into_par_iter()
        .map(|r| {
            let mut st = seed_initial(&init, steps.max(1), params, replica_rng(seed, 2 * r))?;
            for _ in 0..steps {
                st.step();
            }
            let mut rng = replica_rng(seed, 2 * r + 1);
            let mut v = VertexSimulator::new(params, &seeds, steps as usize)?;
            for _ in 0..steps {
                v.step(&mut rng);
            }
            Ok((st.counts(classes), v.counts(classes)))
        })
        .collect::<Result<_>>()?;
    let level = alpha / classes as f64;
    let tests: Vec<ChiSquareTest> = (0..classes)
        .map(|k| {
            let a: Vec<u64> = pairs.iter().map(|p| p.0[k]).collect();
            let b: Vec<u64> = pairs.iter().map(|p| p.1[k]).collect();
            chi_square_two_sample(&a, &b)
        })
        .collect::<Result<_>>()?;
    let passed = tests.iter().all(|t| t.p_value > level);
    Ok(EquivalenceReport {
        replicas,
        tests,
        level,
        passed,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dynamics::{integrate_phi, SMALL_SEED_TIME};
    use crate::weights::WeightFunction;

    fn params(model: Model, p: f64, kappa: f64) -> ModelParams {
        ModelParams::new(model, p, WeightFunction::power(kappa).unwrap()).unwrap()
    }

    #[test]
    fn self_comparison_is_zero() {
        let prm = params(Model::Urn, 0.5, 0.0);
        let grid = uniform_grid(1.0, 0.01);
        let r = Reference::ray(&prm, &grid, 5).unwrap();
        let path = RecordedPath {
            n: 1,
            times: grid.clone(),
            x: r.phi.clone(),
            weight: r.weight.clone(),
            audit: crate::stochastic::InvariantAudit {
                steps: 0,
                count_ok: true,
                mass_ok: true,
                max_weight_drift: 0.0,
            },
        };
        let rep = lln_deviation(&[path], &r, 5, 1.0).unwrap();
        assert_eq!(rep.mean, 0.0);
        assert!(rep.per_k_mean.iter().all(|v| *v == 0.0));
        assert_eq!(rep.weight_mean, 0.0);
    }

    #[test]
    fn grid_mismatch_rejected() {
        let prm = params(Model::Urn, 0.5, 0.0);
        let r = Reference::ray(&prm, &uniform_grid(1.0, 0.1), 3).unwrap();
        let paths = simulate_replicas(
            &prm,
            &InitialConfiguration::small(),
            100,
            1,
            1,
            &uniform_grid(1.0, 0.05),
            3,
        )
        .unwrap();
        assert!(matches!(lln_deviation(&paths, &r, 3, 1.0), Err(Error::Input(_))));
    }

    #[test]
    fn replay_is_bit_identical() {
        let prm = params(Model::Graph, 0.7, 0.5);
        let spec = StudySpec {
            ns: vec![200, 800],
            replicas: 4,
            horizon: 1.0,
            k_cut: 5,
            seed: 99,
            grid_step: 0.01,
        };
        let a = convergence_study(&prm, &InitialConfiguration::small(), &spec).unwrap();
        let b = convergence_study(&prm, &InitialConfiguration::small(), &spec).unwrap();
        assert_eq!(
            serde_json::to_string(&a).unwrap(),
            serde_json::to_string(&b).unwrap()
        );
    }

    #[test]
    fn single_scale_has_no_slope() {
        let prm = params(Model::Urn, 0.5, 0.0);
        let spec = StudySpec {
            ns: vec![500],
            replicas: 2,
            horizon: 1.0,
            k_cut: 3,
            seed: 1,
            grid_step: 0.01,
        };
        let t = convergence_study(&prm, &InitialConfiguration::small(), &spec).unwrap();
        assert_eq!(t.rows.len(), 1);
        assert!(t.slope.is_none());
    }

    #[test]
    fn slope_fit() {
        let pts: Vec<(f64, f64)> = [1e3, 1e4, 1e5].iter().map(|&n: &f64| (n, 3.0 / n.sqrt())).collect();
        assert!((loglog_slope(&pts).unwrap() + 0.5).abs() < 1e-12);
    }

    #[test]
    fn small_trajectory_slope_is_exact() {
        let prm = params(Model::Urn, 0.3, 0.5);
        let init = InitialConfiguration::small();
        let tr = integrate_phi(&init, &prm, SMALL_SEED_TIME, 2.0, 600, &StepControl::default(), &[]).unwrap();
        let s = solve_s_star(&prm, 1e-14).unwrap();
        let eq = a_sequence(&prm, s, 600).unwrap();
        let rep = large_init_slope(&tr, &eq, &init, &prm, 10).unwrap();
        assert!(rep.max_rel_err < 1e-7, "{}", rep.max_rel_err);
        assert!(large_init_slope(&tr, &eq, &init, &prm, 601).is_err());
    }

    #[test]
    fn weight_tail_bound_holds() {
        let prm = params(Model::Graph, 0.5, 0.5);
        let init = InitialConfiguration::from_counts(vec![0.2, 0.1]).unwrap();
        let grid = uniform_grid(2.0, 0.01);
        let paths = simulate_replicas(&prm, &init, 2000, 3, 5, &grid, 30).unwrap();
        for path in &paths {
            for l in [1, 3, 10, 30] {
                let c = weight_tail_check(path, &prm, 0.2 + 0.2, l).unwrap();
                assert!(c.passed, "L={l}: {c:?}");
            }
        }
    }

    #[test]
    fn large_reference_times_match() {
        let prm = params(Model::Urn, 0.5, 0.0);
        let init = InitialConfiguration::from_counts(vec![0.5]).unwrap();
        let grid = uniform_grid(1.0, 0.25);
        let r = Reference::for_config(&prm, &init, &grid, 4).unwrap();
        assert_eq!(r.times, grid);
        assert_eq!(r.phi[0], vec![0.5, 0.0, 0.0, 0.0]);
        let v: f64 = r.phi[4].iter().sum();
        assert!(v <= 0.5 + 0.5 + 1e-9);
    }
    #[test]
    fn chi_square_hand_computed() {
        // 20 zeros + 30 ones against 30 zeros + 20 ones: X² = 4 on 1 dof
        let a: Vec<u64> = [vec![0; 20], vec![1; 30]].concat();
        let b: Vec<u64> = [vec![0; 30], vec![1; 20]].concat();
        let t = chi_square_two_sample(&a, &b).unwrap();
        assert!((t.statistic - 4.0).abs() < 1e-12);
        assert_eq!(t.dof, 1);
        // P(χ²₁ > 4) = erfc(√2)
        assert!((t.p_value - 0.045_500_263_896_358_4).abs() < 1e-9);
        let same = chi_square_two_sample(&a, &a).unwrap();
        assert_eq!(same.statistic, 0.0);
    }

    #[test]
    fn chi_square_merges_sparse_bins() {
        // values 0..=9 each once per sample: pooled counts force merging
        let a: Vec<u64> = (0..10).collect();
        let t = chi_square_two_sample(&a, &a).unwrap();
        assert_eq!(t.dof, 1);
        assert!(chi_square_two_sample(&[], &a).is_err());
    }

    #[test]
    fn vertex_and_class_simulators_agree_small() {
        let prm = params(Model::Urn, 0.5, 0.5);
        let rep = vertex_level_equivalence(&prm, 50, 2_000, 3, 3, 0.01).unwrap();
        assert!(rep.passed, "{rep:?}");
    }
}

use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;
use std::time::Instant;

use serde::{Deserialize, Serialize};
use serde_json::json;

use crate::dynamics::{
    bounds_check, integrate_phi, integrate_psi_with_time_change, InitKind, StepControl,
    SMALL_SEED_TIME,
};
use crate::equilibrium::{
    a_sequence, default_truncation, eval_f, solve_s_star, DEFAULT_KMAX,
};
use crate::error::{Error, Result};
use crate::experiments::{
    convergence_study, simulate_replicas, stream_id, StudySpec, DEFAULT_GRID_STEP, DEFAULT_K_CUT,
};
use crate::spectral::{
    adjoint_eigenvector, adjoint_pairing_residual, build_operator_with,
    dominant_eigenpair, lambda_from_scalar_equation, TailClosure,
};

use super::config::{parse_grid, RunConfig};
use super::output::{
    read_json, write_json, write_paths_csv, write_phi_csv, write_psi_csv, write_sequence_csv,
    write_study_csv, SCHEMA_VERSION,
};

/// Environment variable naming the default output directory.
pub const OUT_DIR_ENV: &str = "FLUIDPA_OUT_DIR";
pub const MANIFEST_FILE: &str = "manifest.json";
const DEFAULT_SPECTRAL_K: usize = 400;
/// Default truncation cutoff `a_K < REL_CUTOFF · a_1`.
const REL_CUTOFF: f64 = 1e-14;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Command {
    FixedPoint,
    Ode,
    Spectral,
    Simulate,
    Study,
}

impl Command {
    pub fn as_str(&self) -> &'static str {
        match self {
            Command::FixedPoint => "fixed-point",
            Command::Ode => "ode",
            Command::Spectral => "spectral",
            Command::Simulate => "simulate",
            Command::Study => "study",
        }
    }
}

impl fmt::Display for Command {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Command {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Ok(match s {
            "fixed-point" => Command::FixedPoint,
            "ode" => Command::Ode,
            "spectral" => Command::Spectral,
            "simulate" => Command::Simulate,
            "study" => Command::Study,
            _ => return Err(Error::config("command", format!("unknown command `{s}`"))),
        })
    }
}

/// Everything needed to rerun a command and reproduce its CSV outputs.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RunManifest {
    pub schema_version: u32,
    pub tool: String,
    pub tool_version: String,
    pub command: Command,
    /// Fully resolved; initial data is inlined.
    pub config: RunConfig,
    /// RNG stream ids in replica order, per scale.
    pub streams: Vec<u64>,
    pub wall_clock_seconds: f64,
    pub audit: serde_json::Value,
    pub outputs: Vec<String>,
}

/// Output directory: explicit flag, then `$FLUIDPA_OUT_DIR`, then `./fluid-pa-out`.
pub fn resolve_out_dir(flag: Option<PathBuf>) -> PathBuf {
    flag.or_else(|| std::env::var_os(OUT_DIR_ENV).map(PathBuf::from))
        .unwrap_or_else(|| PathBuf::from("fluid-pa-out"))
}

struct Outcome {
    streams: Vec<u64>,
    audit: serde_json::Value,
    outputs: Vec<String>,
}

/// Runs `command`, writes its outputs and `manifest.json` into `out_dir`.
pub fn run(command: Command, cfg: RunConfig, out_dir: &Path) -> Result<RunManifest> {
    std::fs::create_dir_all(out_dir).map_err(|e| Error::io(out_dir, e))?;
    let mut cfg = resolve_common(cfg)?;
    let started = Instant::now();
    let outcome = match command {
        Command::FixedPoint => fixed_point(&mut cfg, out_dir)?,
        Command::Ode => ode(&mut cfg, out_dir)?,
        Command::Spectral => spectral(&mut cfg, out_dir)?,
        Command::Simulate => simulate(&mut cfg, out_dir)?,
        Command::Study => study(&mut cfg, out_dir)?,
    };
    let manifest = RunManifest {
        schema_version: SCHEMA_VERSION,
        tool: "fluid-pa".into(),
        tool_version: env!("CARGO_PKG_VERSION").into(),
        command,
        config: cfg,
        streams: outcome.streams,
        wall_clock_seconds: started.elapsed().as_secs_f64(),
        audit: outcome.audit,
        outputs: outcome.outputs,
    };
    write_json(&out_dir.join(MANIFEST_FILE), &manifest)?;
    Ok(manifest)
}

/// Reruns the command recorded in a manifest into `out_dir`.
pub fn replay(manifest_path: &Path, out_dir: &Path) -> Result<RunManifest> {
    let m: RunManifest = read_json(manifest_path)?;
    if m.schema_version != SCHEMA_VERSION {
        return Err(Error::Input(format!(
            "manifest schema {} is not supported (expected {SCHEMA_VERSION})",
            m.schema_version
        )));
    }
    run(m.command, m.config, out_dir)
}

/// Validates the shared fields, fills defaults and inlines the initial data.
fn resolve_common(mut cfg: RunConfig) -> Result<RunConfig> {
    cfg.params()?;
    cfg.tol = Some(cfg.tol()?);
    cfg.rtol = Some(cfg.rtol()?);
    cfg.atol = Some(cfg.atol()?);
    cfg.tail.get_or_insert(TailClosure::Open);
    let init = cfg.initial_configuration()?;
    match init.kind {
        InitKind::Small => {
            cfg.init = Some("small".into());
            cfg.init_c = None;
        }
        InitKind::Large => {
            cfg.init = None;
            cfg.init_c = Some(init.c.clone());
        }
    }
    Ok(cfg)
}

fn control(cfg: &RunConfig) -> StepControl {
    StepControl {
        rtol: cfg.rtol.expect("resolved"),
        atol: cfg.atol.expect("resolved"),
        tail: cfg.tail.expect("resolved"),
        ..StepControl::default()
    }
}

fn require_kmax(k: usize) -> Result<usize> {
    if k < 2 {
        Err(Error::config("kmax", "K must be at least 2"))
    } else {
        Ok(k)
    }
}

fn fixed_point(cfg: &mut RunConfig, out: &Path) -> Result<Outcome> {
    let params = cfg.params()?;
    let tol = cfg.tol.expect("resolved");
    let s = solve_s_star(&params, tol)?;
    let k = match cfg.kmax {
        Some(k) => require_kmax(k)?,
        None => default_truncation(&a_sequence(&params, s, DEFAULT_KMAX)?, REL_CUTOFF),
    };
    cfg.kmax = Some(k);
    let sol = a_sequence(&params, s, k)?;
    let f_at = eval_f(&params, s, tol)?;
    write_sequence_csv(&out.join("fixed_point.csv"), "a", &sol.a)?;
    let summary = json!({
        "s_star": s,
        "f_at_s_star": f_at,
        "k": sol.k,
        "tail_bound": sol.tail_bound,
        "residuals": sol.residuals,
    });
    write_json(&out.join("fixed_point.json"), &summary)?;
    if !sol.residuals.passed {
        log::warn!("mass identities not met at K = {}: {:?}", sol.k, sol.residuals);
    }
    Ok(Outcome {
        streams: vec![],
        audit: summary,
        outputs: vec!["fixed_point.csv".into(), "fixed_point.json".into()],
    })
}

fn ode(cfg: &mut RunConfig, out: &Path) -> Result<Outcome> {
    let params = cfg.params()?;
    let init = cfg.initial_configuration()?;
    let k = match cfg.kmax {
        Some(k) => require_kmax(k)?,
        None => {
            let s = solve_s_star(&params, cfg.tol.expect("resolved"))?;
            let ray = default_truncation(&a_sequence(&params, s, DEFAULT_KMAX)?, REL_CUTOFF);
            // large data needs room for the initial support to spread
            match init.kind {
                InitKind::Small => ray.max(2),
                InitKind::Large => ray.max(init.c.len() + 64),
            }
        }
    };
    cfg.kmax = Some(k);
    let t_end = *cfg.t_end.get_or_insert(1.0);
    let t_step = *cfg.t_step.get_or_insert(0.1);
    if !(t_step > 0.0) {
        return Err(Error::config("t_step", "must be positive"));
    }
    let t0 = match init.kind {
        InitKind::Small => SMALL_SEED_TIME,
        InitKind::Large => 0.0,
    };
    if !(t_end > t0) {
        return Err(Error::config("t_end", format!("must exceed the start time {t0}")));
    }
    let m = ((t_end - t0) / t_step + 1e-9).floor() as usize;
    let times: Vec<f64> = (0..=m).map(|i| t0 + i as f64 * t_step).collect();
    let ctrl = control(cfg);
    let tr = integrate_phi(&init, &params, t0, t_end, k, &ctrl, &times)?;
    write_phi_csv(&out.join("ode.csv"), &tr)?;
    let bounds = bounds_check(&tr.samples, &params, &init);
    let mut outputs = vec!["ode.csv".to_string()];
    let mut psi_summary = serde_json::Value::Null;
    if let Some(s_end) = cfg.s_end {
        let n = (s_end / t_step).ceil().max(1.0) as usize;
        let grid: Vec<f64> = (0..=n).map(|i| s_end * i as f64 / n as f64).collect();
        let psi = integrate_psi_with_time_change(&init, &params, s_end, k, &ctrl, &grid)?;
        write_psi_csv(&out.join("psi.csv"), &psi)?;
        outputs.push("psi.csv".into());
        psi_summary = json!({
            "s_star": psi.s_star,
            "time_change_deviation": psi.time_change_deviation,
            "steps": psi.steps,
        });
    }
    let summary = json!({
        "k": k,
        "max_tail": tr.max_tail,
        "steps": tr.steps,
        "rejected": tr.rejected,
        "bounds": bounds,
        "bounds_passed": bounds.passed(),
        "psi": psi_summary,
    });
    write_json(&out.join("ode.json"), &summary)?;
    outputs.push("ode.json".into());
    Ok(Outcome {
        streams: vec![],
        audit: summary,
        outputs,
    })
}

fn spectral(cfg: &mut RunConfig, out: &Path) -> Result<Outcome> {
    let params = cfg.params()?;
    let tol = cfg.tol.expect("resolved");
    let k = require_kmax(*cfg.kmax.get_or_insert(DEFAULT_SPECTRAL_K))?;
    let s = solve_s_star(&params, tol)?;
    let lambda_scalar = lambda_from_scalar_equation(&params, tol)?;
    let op = build_operator_with(&params, k, cfg.tail.expect("resolved"))?;
    let pair = dominant_eigenpair(&op, tol)?;
    let adj = adjoint_eigenvector(&params, s, k + 1)?;
    let pairing = adjoint_pairing_residual(&op, s, &adj.x, &pair.x)?;
    write_sequence_csv(&out.join("eigenvector.csv"), "x", &pair.x)?;
    write_sequence_csv(&out.join("adjoint.csv"), "x_star", &adj.x[..k])?;
    let summary = json!({
        "s_star": s,
        "lambda_scalar": lambda_scalar,
        "lambda_power": pair.lambda,
        "iterations": pair.iterations,
        "residual": pair.residual,
        "boundary_residual": pair.boundary_residual,
        "closed_form_deviation": pair.closed_form_deviation,
        "resolved": pair.resolved,
        "adjoint_max_residual": adj.max_residual,
        "adjoint_growth_constant": adj.growth_constant,
        "pairing_residual": pairing,
    });
    write_json(&out.join("spectral.json"), &summary)?;
    Ok(Outcome {
        streams: vec![],
        audit: summary,
        outputs: vec![
            "eigenvector.csv".into(),
            "adjoint.csv".into(),
            "spectral.json".into(),
        ],
    })
}

fn simulate(cfg: &mut RunConfig, out: &Path) -> Result<Outcome> {
    let params = cfg.params()?;
    let init = cfg.initial_configuration()?;
    let n = *cfg.n.get_or_insert(10_000);
    let replicas = *cfg.replicas.get_or_insert(1);
    let seed = *cfg.seed.get_or_insert(0);
    let k_cut = *cfg.k_cut.get_or_insert(DEFAULT_K_CUT);
    let grid = parse_grid(cfg.grid.get_or_insert_with(|| "0:1:0.01".into()))?;
    if n == 0 {
        return Err(Error::config("n", "must be at least 1"));
    }
    if k_cut == 0 {
        return Err(Error::config("k_cut", "must be at least 1"));
    }
    let paths = simulate_replicas(&params, &init, n, replicas, seed, &grid, k_cut)?;
    write_paths_csv(&out.join("simulate.csv"), &paths)?;
    let audits: Vec<_> = paths.iter().map(|p| p.audit).collect();
    if let Some((r, a)) = audits.iter().enumerate().find(|(_, a)| !a.passed()) {
        return Err(Error::Model(format!("replica {r} failed its invariant audit: {a:?}")));
    }
    Ok(Outcome {
        streams: (0..replicas as u64).map(|r| stream_id(n, r)).collect(),
        audit: json!({ "replicas": audits }),
        outputs: vec!["simulate.csv".into()],
    })
}

fn study(cfg: &mut RunConfig, out: &Path) -> Result<Outcome> {
    let params = cfg.params()?;
    let init = cfg.initial_configuration()?;
    let spec = StudySpec {
        ns: cfg.ns.get_or_insert_with(|| vec![1_000, 10_000, 100_000]).clone(),
        replicas: *cfg.replicas.get_or_insert(20),
        horizon: *cfg.horizon.get_or_insert(1.0),
        k_cut: *cfg.k_cut.get_or_insert(DEFAULT_K_CUT),
        seed: *cfg.seed.get_or_insert(0),
        grid_step: *cfg.grid_step.get_or_insert(DEFAULT_GRID_STEP),
    };
    if spec.ns.is_empty() || spec.ns.contains(&0) {
        return Err(Error::config("ns", "need at least one positive scale"));
    }
    if !(spec.horizon > 0.0 && spec.grid_step > 0.0 && spec.grid_step <= spec.horizon) {
        return Err(Error::config("grid_step", "need 0 < grid_step ≤ horizon"));
    }
    if spec.k_cut == 0 {
        return Err(Error::config("k_cut", "must be at least 1"));
    }
    let table = convergence_study(&params, &init, &spec)?;
    write_study_csv(&out.join("study.csv"), &table)?;
    let verdict = json!({
        "slope": table.slope,
        "slope_in_band": table.slope_in_band,
        "rows": table.rows.iter().map(|r| json!({
            "n": r.n,
            "mean": r.report.mean,
            "median": r.report.median,
            "std": r.report.std,
            "max": r.report.max,
            "weight_mean": r.report.weight_mean,
        })).collect::<Vec<_>>(),
    });
    write_json(&out.join("study.json"), &verdict)?;
    if table.slope_in_band == Some(false) {
        log::warn!("fitted slope {:?} is outside the expected band", table.slope);
    }
    Ok(Outcome {
        streams: spec
            .ns
            .iter()
            .flat_map(|&n| (0..spec.replicas as u64).map(move |r| stream_id(n, r)))
            .collect(),
        audit: verdict,
        outputs: vec!["study.csv".into(), "study.json".into()],
    })
}

//! Pilot convergence study pinned as golden JSON. Set `FLUIDPA_BLESS=1` to
//! rewrite the file after an intentional change to the simulator.

use std::path::PathBuf;

use fluid_pa::dynamics::InitialConfiguration;
use fluid_pa::experiments::{convergence_study, StudySpec};
use fluid_pa::{Model, ModelParams, WeightFunction};
use serde::{Deserialize, Serialize};

#[derive(Debug, PartialEq, Serialize, Deserialize)]
struct Pilot {
    model: Model,
    p: f64,
    kappa: f64,
    spec: StudySpec,
    /// `(n, mean, max)` of the per-replica `max_{k ≤ k_cut} sup_t` deviation.
    rows: Vec<(u64, f64, f64)>,
    slope: Option<f64>,
}

fn golden_path() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("tests/golden/pilot_study.json")
}

fn run_pilot() -> Pilot {
    let (model, p, kappa) = (Model::Graph, 1.0, 0.5);
    let prm = ModelParams::new(model, p, WeightFunction::power(kappa).unwrap()).unwrap();
    let spec = StudySpec {
        ns: vec![1_000, 10_000, 100_000],
        replicas: 20,
        horizon: 1.0,
        k_cut: 5,
        seed: 0,
        grid_step: 1e-3,
    };
    let table = convergence_study(&prm, &InitialConfiguration::small(), &spec).unwrap();
    Pilot {
        model,
        p,
        kappa,
        rows: table
            .rows
            .iter()
            .map(|r| (r.n, r.report.mean, r.report.max))
            .collect(),
        slope: table.slope,
        spec,
    }
}

#[test]
fn pilot_study_matches_golden() {
    let pilot = run_pilot();
    let path = golden_path();
    if std::env::var_os("FLUIDPA_BLESS").is_some() {
        std::fs::create_dir_all(path.parent().unwrap()).unwrap();
        std::fs::write(&path, serde_json::to_string_pretty(&pilot).unwrap() + "\n").unwrap();
    }
    let golden: Pilot = serde_json::from_str(&std::fs::read_to_string(&path).unwrap()).unwrap();
    assert_eq!(pilot, golden);
    // the LLN threshold of 0.02 at n = 1e5 leaves a wide margin over the pilot
    let at_1e5 = golden.rows.last().unwrap().1;
    assert!(at_1e5 < 0.02 / 4.0, "pilot mean {at_1e5}");
}

//! Class-level simulation of the degree-count (graph) and size-count (urn)
//! chains.
//!
//! Vertices in one class carry equal weight, so the counts `Z_k` are Markov
//! on their own. The only place where vertex identity matters is a graph
//! step that picks the same class twice; that is the same vertex with
//! probability `1/Z_k`.

mod fenwick;
pub mod pmf;
pub mod vertex;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::dynamics::{InitKind, InitialConfiguration};
use crate::equilibrium::{Model, ModelParams};
use crate::error::{Error, Result};
use crate::weights::WeightFunction;

pub use fenwick::Fenwick;
pub use pmf::{conditional_drift, increment_pmf, CountView, FrozenCounts, Pmf};

/// Steps between full recomputations of `S` and the sampling tree.
pub const RESYNC_INTERVAL: u64 = 1 << 16;

/// Independent generator for replica `stream` of a run seeded with `seed`.
pub fn replica_rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// What one step does to the class counts.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Event {
    /// Urn: a new urn with one ball.
    NewUrn,
    /// Urn: a ball is added to an urn of size `k`.
    Grow(u64),
    /// Graph: a new vertex attaches to a vertex of degree `k`.
    Attach(u64),
    /// Graph: an edge between two distinct vertices of degrees `k1`, `k2`.
    Edge(u64, u64),
    /// Graph: a loop at a vertex of degree `k`.
    Loop(u64),
}

impl Event {
    fn deltas(&self) -> ([(u64, i64); 4], usize) {
        let mut d = [(0, 0); 4];
        let n = match *self {
            Event::NewUrn => {
                d[0] = (1, 1);
                1
            }
            Event::Grow(k) => {
                d[0] = (k, -1);
                d[1] = (k + 1, 1);
                2
            }
            Event::Attach(k) => {
                d[0] = (1, 1);
                d[1] = (k, -1);
                d[2] = (k + 1, 1);
                3
            }
            Event::Edge(a, b) => {
                d[0] = (a, -1);
                d[1] = (a + 1, 1);
                d[2] = (b, -1);
                d[3] = (b + 1, 1);
                4
            }
            Event::Loop(k) => {
                d[0] = (k, -1);
                d[1] = (k + 2, 1);
                2
            }
        };
        (d, n)
    }

    /// `d_k`, the change in `Z_k` this event causes.
    pub fn increment(&self, k: u64) -> i64 {
        let (d, n) = self.deltas();
        d[..n].iter().filter(|(c, _)| *c == k).map(|(_, v)| v).sum()
    }

    fn adds_unit(&self) -> bool {
        matches!(self, Event::NewUrn | Event::Attach(_))
    }
}

/// Exact-count audit of a chain.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct InvariantAudit {
    pub steps: u64,
    /// Vertex or urn count equals the initial count plus the new-unit events.
    pub count_ok: bool,
    /// Degree total grew by 2 per step (graph) or ball total by 1 (urn).
    pub mass_ok: bool,
    /// Largest relative drift of the cached `S` seen at a resync.
    pub max_weight_drift: f64,
}

impl InvariantAudit {
    pub fn passed(&self) -> bool {
        self.count_ok && self.mass_ok && self.max_weight_drift <= 1e-9
    }
}

#[derive(Debug, Clone)]
pub struct DegreeCountState {
    model: Model,
    p: f64,
    weight: WeightFunction,
    /// `z[k]` for `k ≥ 1`; `z[0]` unused.
    z: Vec<u64>,
    w: Vec<f64>,
    tree: Fenwick,
    s: f64,
    steps: u64,
    scale: u64,
    initial_units: u64,
    initial_mass: u64,
    new_units: u64,
    units: u64,
    mass: u64,
    initial_scaled: Vec<f64>,
    max_drift: f64,
    rng: ChaCha8Rng,
}

impl CountView for DegreeCountState {
    fn count(&self, k: u64) -> f64 {
        self.z.get(k as usize).copied().unwrap_or(0) as f64
    }

    fn weight(&self, k: u64) -> f64 {
        self.weight.at(k)
    }

    fn total_weight(&self) -> f64 {
        self.s
    }
}

/// Builds `Z(0)`: the two-vertex edge (graph) or a one-ball urn for small
/// configurations, `round(n c_k)` for large ones.
pub fn seed_initial(
    config: &InitialConfiguration,
    n: u64,
    params: &ModelParams,
    rng: ChaCha8Rng,
) -> Result<DegreeCountState> {
    if n == 0 {
        return Err(Error::Seeding("scale n must be positive".into()));
    }
    let counts: Vec<u64> = match config.kind {
        InitKind::Small => match params.model() {
            Model::Graph => vec![2],
            Model::Urn => vec![1],
        },
        InitKind::Large => {
            let z: Vec<u64> = config.c.iter().map(|c| (n as f64 * c).round() as u64).collect();
            if z.iter().all(|&v| v == 0) {
                return Err(Error::Seeding(format!(
                    "initial data rounds to an empty network at n = {n}"
                )));
            }
            z
        }
    };
    DegreeCountState::from_counts(params, &counts, n, rng)
}

impl DegreeCountState {
    /// `counts[k-1] = Z_k(0)`.
    pub fn from_counts(
        params: &ModelParams,
        counts: &[u64],
        scale: u64,
        rng: ChaCha8Rng,
    ) -> Result<Self> {
        let mut z = vec![0u64];
        z.extend_from_slice(counts);
        let units: u64 = counts.iter().sum();
        if units == 0 {
            return Err(Error::Seeding("initial network is empty".into()));
        }
        let mass: u64 = counts.iter().enumerate().map(|(i, c)| (i as u64 + 1) * c).sum();
        let cap = (z.len() + 3).next_power_of_two();
        z.resize(cap, 0);
        let weight = params.weight().clone();
        let w: Vec<f64> = (0..cap as u64)
            .map(|k| if k == 0 { 0.0 } else { weight.at(k) })
            .collect();
        let mut st = DegreeCountState {
            model: params.model(),
            p: params.p(),
            weight,
            z,
            w,
            tree: Fenwick::with_capacity(cap),
            s: 0.0,
            steps: 0,
            scale,
            initial_units: units,
            initial_mass: mass,
            new_units: 0,
            units,
            mass,
            initial_scaled: counts.iter().map(|&c| c as f64 / scale as f64).collect(),
            max_drift: 0.0,
            rng,
        };
        st.resync();
        st.max_drift = 0.0;
        Ok(st)
    }

    pub fn model(&self) -> Model {
        self.model
    }

    pub fn steps(&self) -> u64 {
        self.steps
    }

    /// The `n` used for scaling.
    pub fn scale(&self) -> u64 {
        self.scale
    }

    pub fn z(&self, k: u64) -> u64 {
        self.z.get(k as usize).copied().unwrap_or(0)
    }

    /// `(Z_1, …, Z_len)`.
    pub fn counts(&self, len: usize) -> Vec<u64> {
        (1..=len as u64).map(|k| self.z(k)).collect()
    }

    /// Highest occupied class.
    pub fn max_class(&self) -> u64 {
        self.z.iter().rposition(|&c| c > 0).unwrap_or(0) as u64
    }

    pub fn weight_total(&self) -> f64 {
        self.s
    }

    /// Vertex or urn count.
    pub fn units(&self) -> u64 {
        self.units
    }

    /// Degree total (graph) or ball total (urn).
    pub fn mass(&self) -> u64 {
        self.mass
    }

    /// `c^n_k = Z_k(0)/n`.
    pub fn initial_scaled(&self) -> &[f64] {
        &self.initial_scaled
    }

    pub fn rng_mut(&mut self) -> &mut ChaCha8Rng {
        &mut self.rng
    }

    fn exact_weight(&self) -> f64 {
        self.z.iter().zip(&self.w).map(|(&c, w)| c as f64 * w).sum()
    }

    fn resync(&mut self) {
        let exact = self.exact_weight();
        if self.s > 0.0 {
            self.max_drift = self.max_drift.max(((self.s - exact) / exact).abs());
        }
        let vals: Vec<f64> = self.z.iter().zip(&self.w).map(|(&c, w)| c as f64 * w).collect();
        self.tree.rebuild(&vals);
        self.s = exact;
    }

    fn grow_to(&mut self, class: usize) {
        if class + 2 < self.z.len() {
            return;
        }
        let cap = (class + 3).next_power_of_two();
        let old = self.w.len() as u64;
        self.z.resize(cap, 0);
        self.w.extend((old..cap as u64).map(|k| self.weight.at(k)));
        let vals: Vec<f64> = self.z.iter().zip(&self.w).map(|(&c, w)| c as f64 * w).collect();
        self.tree = Fenwick::from_values(&vals);
    }

    /// Draws the next event without changing the counts.
    pub fn sample_event<R: Rng + ?Sized>(&self, rng: &mut R) -> Event {
        sample_event(self.model, self.p, &self.z, &self.tree, rng)
    }

    /// Applies `event`, with every class change computed from the pre-step
    /// counts.
    pub fn apply(&mut self, event: Event) {
        let (d, n) = event.deltas();
        let top = d[..n].iter().map(|(c, _)| *c).max().unwrap_or(1);
        self.grow_to(top as usize);
        for &(c, delta) in &d[..n] {
            let c = c as usize;
            self.z[c] = (self.z[c] as i64 + delta) as u64;
            let dw = delta as f64 * self.w[c];
            self.tree.add(c, dw);
            self.s += dw;
        }
        if event.adds_unit() {
            self.units += 1;
            self.new_units += 1;
        }
        self.mass += match self.model {
            Model::Graph => 2,
            Model::Urn => 1,
        };
        self.steps += 1;
        if self.steps.is_multiple_of(RESYNC_INTERVAL) {
            self.resync();
        }
    }

    pub fn step(&mut self) -> Event {
        let e = sample_event(self.model, self.p, &self.z, &self.tree, &mut self.rng);
        self.apply(e);
        e
    }

    pub fn audit(&self) -> InvariantAudit {
        let per_step = match self.model {
            Model::Graph => 2,
            Model::Urn => 1,
        };
        let counted_units: u64 = self.z.iter().sum();
        let counted_mass: u64 = self.z.iter().enumerate().map(|(k, &c)| k as u64 * c).sum();
        let exact = self.exact_weight();
        InvariantAudit {
            steps: self.steps,
            count_ok: counted_units == self.units
                && self.units == self.initial_units + self.new_units,
            mass_ok: counted_mass == self.mass
                && self.mass == self.initial_mass + per_step * self.steps,
            max_weight_drift: self.max_drift.max(((self.s - exact) / exact).abs()),
        }
    }
}

fn pick_class<R: Rng + ?Sized>(z: &[u64], tree: &Fenwick, rng: &mut R) -> u64 {
    // rounding in the tree can land on an empty class; redraw
    loop {
        let k = tree.find(rng.random::<f64>() * tree.total());
        if z[k] > 0 {
            return k as u64;
        }
    }
}

fn sample_event<R: Rng + ?Sized>(
    model: Model,
    p: f64,
    z: &[u64],
    tree: &Fenwick,
    rng: &mut R,
) -> Event {
    match model {
        Model::Urn => {
            if rng.random_bool(p) {
                Event::NewUrn
            } else {
                Event::Grow(pick_class(z, tree, rng))
            }
        }
        Model::Graph => {
            if rng.random_bool(p) {
                Event::Attach(pick_class(z, tree, rng))
            } else {
                let k1 = pick_class(z, tree, rng);
                let k2 = pick_class(z, tree, rng);
                if k1 == k2 && rng.random_bool(1.0 / z[k1 as usize] as f64) {
                    Event::Loop(k1)
                } else {
                    Event::Edge(k1, k2)
                }
            }
        }
    }
}

/// Scaled path `X^n_k(t)` and `𝒮^n(t)` on a time grid.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RecordedPath {
    pub n: u64,
    pub times: Vec<f64>,
    /// `x[i][k-1] = X^n_k(times[i])`.
    pub x: Vec<Vec<f64>>,
    pub weight: Vec<f64>,
    pub audit: InvariantAudit,
}

struct Snapshot {
    z: Vec<u64>,
    s: f64,
}

/// Runs `steps` steps from the current state and records the linearly
/// interpolated scaled counts for classes `1..=k_record` at each grid time.
/// Grid times are measured in units of `n` steps from step 0.
pub fn run_chain(
    state: &mut DegreeCountState,
    steps: u64,
    grid: &[f64],
    k_record: usize,
) -> Result<RecordedPath> {
    let n = state.scale as f64;
    let start = state.steps;
    let end = start + steps;
    let mut needed = Vec::with_capacity(2 * grid.len());
    for &t in grid {
        let nt = n * t;
        if !(t.is_finite() && nt >= start as f64 && nt.ceil() <= end as f64) {
            return Err(Error::config(
                "grid",
                format!("time {t} is outside the simulated range"),
            ));
        }
        needed.push(nt.floor() as u64);
        needed.push(nt.ceil() as u64);
    }
    needed.sort_unstable();
    needed.dedup();

    let mut snaps = std::collections::HashMap::with_capacity(needed.len());
    let mut next = needed.iter().peekable();
    loop {
        while next.peek().is_some_and(|&&j| j == state.steps) {
            snaps.insert(
                state.steps,
                Snapshot {
                    z: state.counts(k_record),
                    s: state.s,
                },
            );
            next.next();
        }
        if state.steps >= end {
            break;
        }
        state.step();
    }

    let mut x = Vec::with_capacity(grid.len());
    let mut weight = Vec::with_capacity(grid.len());
    for &t in grid {
        let nt = n * t;
        let lo = &snaps[&(nt.floor() as u64)];
        let hi = &snaps[&(nt.ceil() as u64)];
        let frac = nt - nt.floor();
        x.push(
            lo.z.iter()
                .zip(&hi.z)
                .map(|(&a, &b)| a as f64 / n + frac / n * (b as f64 - a as f64))
                .collect(),
        );
        weight.push(lo.s / n + frac / n * (hi.s - lo.s));
    }
    Ok(RecordedPath {
        n: state.scale,
        times: grid.to_vec(),
        x,
        weight,
        audit: state.audit(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn params(model: Model, p: f64, kappa: f64) -> ModelParams {
        ModelParams::new(model, p, WeightFunction::power(kappa).unwrap()).unwrap()
    }

    #[test]
    fn seeds() {
        let g = params(Model::Graph, 0.5, 0.5);
        let st = seed_initial(&InitialConfiguration::small(), 1000, &g, replica_rng(1, 0)).unwrap();
        assert_eq!(st.counts(3), vec![2, 0, 0]);
        assert_eq!(st.weight_total(), 2.0);

        let init = InitialConfiguration::from_counts(vec![0.5, 0.25]).unwrap();
        let st = seed_initial(&init, 100, &g, replica_rng(1, 0)).unwrap();
        assert_eq!(st.counts(3), vec![50, 25, 0]);
        assert_eq!(st.mass(), 100);

        let u = params(Model::Urn, 0.5, 0.0);
        let st = seed_initial(&InitialConfiguration::small(), 10, &u, replica_rng(1, 0)).unwrap();
        assert_eq!((st.z(1), st.weight_total()), (1, 1.0));

        let tiny = InitialConfiguration::from_counts(vec![0.001]).unwrap();
        assert!(matches!(
            seed_initial(&tiny, 10, &u, replica_rng(1, 0)),
            Err(Error::Seeding(_))
        ));
    }

    #[test]
    fn graph_p_one_attaches() {
        let g = params(Model::Graph, 1.0, 0.0);
        let mut st = DegreeCountState::from_counts(&g, &[2], 10, replica_rng(3, 0)).unwrap();
        let e = st.step();
        assert_eq!(e, Event::Attach(1));
        assert_eq!(st.counts(3), vec![2, 1, 0]);
        for _ in 0..500 {
            st.step();
        }
        assert_eq!(st.units(), 2 + 501);
    }

    #[test]
    fn increments_bounded() {
        for e in [
            Event::NewUrn,
            Event::Grow(3),
            Event::Attach(1),
            Event::Attach(4),
            Event::Edge(2, 2),
            Event::Edge(1, 2),
            Event::Loop(1),
        ] {
            for k in 1..8 {
                assert!(e.increment(k).abs() <= 2);
            }
        }
        assert_eq!(Event::Edge(2, 2).increment(2), -2);
        assert_eq!(Event::Edge(1, 2).increment(2), 0);
        assert_eq!(Event::Attach(1).increment(1), 0);
    }

    #[test]
    fn exact_invariants_hold() {
        for model in [Model::Graph, Model::Urn] {
            let prm = params(model, 0.3, 0.5);
            let mut st =
                seed_initial(&InitialConfiguration::small(), 1000, &prm, replica_rng(9, 1)).unwrap();
            for i in 0..200_000 {
                st.step();
                if i % 50_000 == 0 {
                    assert!(st.audit().passed());
                }
            }
            let a = st.audit();
            assert!(a.passed(), "{a:?}");
        }
    }

    #[test]
    fn zero_steps_path() {
        let prm = params(Model::Urn, 0.4, 0.0);
        let init = InitialConfiguration::from_counts(vec![0.2, 0.1]).unwrap();
        let mut st = seed_initial(&init, 50, &prm, replica_rng(0, 0)).unwrap();
        let path = run_chain(&mut st, 0, &[0.0], 3).unwrap();
        assert_eq!(path.x[0], vec![0.2, 0.1, 0.0]);
        assert!(run_chain(&mut st, 0, &[0.1], 3).is_err());
    }

    #[test]
    fn path_is_two_lipschitz() {
        let prm = params(Model::Graph, 0.4, -0.5);
        let mut st =
            seed_initial(&InitialConfiguration::small(), 300, &prm, replica_rng(4, 2)).unwrap();
        let grid: Vec<f64> = (0..=997).map(|i| i as f64 * 0.001).collect();
        let path = run_chain(&mut st, 300, &grid, 6).unwrap();
        for i in 1..grid.len() {
            let dt = grid[i] - grid[i - 1];
            for k in 0..6 {
                assert!((path.x[i][k] - path.x[i - 1][k]).abs() <= 2.0 * dt + 1e-12);
            }
        }
    }

    #[test]
    fn replica_streams_differ_and_repeat() {
        let prm = params(Model::Urn, 0.5, 0.5);
        let run = |stream| {
            let mut st =
                seed_initial(&InitialConfiguration::small(), 100, &prm, replica_rng(42, stream))
                    .unwrap();
            run_chain(&mut st, 1000, &[10.0], 10).unwrap().x
        };
        assert_eq!(run(0), run(0));
        assert_ne!(run(0), run(1));
    }

    #[test]
    fn sampled_increments_match_table() {
        let prm = params(Model::Graph, 0.5, 0.0);
        let st = DegreeCountState::from_counts(&prm, &[3, 2], 1, replica_rng(17, 0)).unwrap();
        let mut rng = replica_rng(17, 1);
        let trials = 100_000;
        let mut hist = [[0u64; 5]; 4];
        for _ in 0..trials {
            let e = st.sample_event(&mut rng);
            for k in 1..=4u64 {
                hist[k as usize - 1][(e.increment(k) + 2) as usize] += 1;
            }
        }
        for k in 1..=4u64 {
            let pmf = increment_pmf(&st, k, Model::Graph, 0.5).unwrap();
            for (d, &count) in hist[k as usize - 1].iter().enumerate() {
                let pr = pmf.probs[d];
                let sd = (trials as f64 * pr * (1.0 - pr)).sqrt();
                let diff = (count as f64 - trials as f64 * pr).abs();
                assert!(diff <= 4.0 * sd.max(1.0), "k={k} d={} {count} vs {pr}", d as i64 - 2);
            }
        }
    }
}

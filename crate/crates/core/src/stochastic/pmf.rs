//! Exact one-step law of `d_k = Z_k(j+1) − Z_k(j)` given the counts at step `j`.

use serde::{Deserialize, Serialize};

use crate::equilibrium::Model;
use crate::error::{Error, Result};

/// Probabilities of `d ∈ {−2, −1, 0, 1, 2}`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Pmf {
    pub probs: [f64; 5],
}

impl Pmf {
    pub fn prob(&self, d: i8) -> f64 {
        self.probs[(d + 2) as usize]
    }

    pub fn mean(&self) -> f64 {
        (-2..=2).map(|d| d as f64 * self.prob(d)).sum()
    }
}

/// Snapshot of the quantities the tables depend on.
pub trait CountView {
    /// `Z_k` for `k ≥ 1`; zero for `k = 0`.
    fn count(&self, k: u64) -> f64;
    fn weight(&self, k: u64) -> f64;
    fn total_weight(&self) -> f64;
}

const SLACK: f64 = 1e-12;

/// One-step increment law of class `k`.
pub fn increment_pmf<V: CountView + ?Sized>(view: &V, k: u64, model: Model, p: f64) -> Result<Pmf> {
    if k == 0 {
        return Err(Error::Domain("classes start at k = 1".into()));
    }
    let s = view.total_weight();
    if !(s > 0.0 && s.is_finite()) {
        return Err(Error::Table(format!("total weight S = {s} is not positive")));
    }
    let q = 1.0 - p;
    // u(j) = w(j) Z_j / S, v(j) = w(j)^2 Z_j / S^2 (same-vertex mass)
    let u = |j: u64| if j == 0 { 0.0 } else { view.weight(j) * view.count(j) / s };
    let v = |j: u64| {
        if j == 0 {
            0.0
        } else {
            let w = view.weight(j);
            w * w * view.count(j) / (s * s)
        }
    };
    let mut probs = [0.0; 5];
    match model {
        Model::Urn => {
            if k == 1 {
                probs[3] = p;
                probs[1] = q * u(1);
                probs[2] = q * (1.0 - u(1));
            } else {
                probs[3] = q * u(k - 1);
                probs[1] = q * u(k);
                probs[2] = 1.0 - q * (u(k - 1) + u(k));
            }
        }
        Model::Graph => {
            if k == 1 {
                let u1 = u(1);
                probs[3] = p * (1.0 - u1);
                probs[2] = p * u1 + q * (1.0 - u1).powi(2);
                probs[1] = 2.0 * q * u1 * (1.0 - u1) + q * v(1);
                probs[0] = q * u1 * u1 - q * v(1);
            } else {
                let (ua, ub) = (u(k - 1), u(k));
                let rest = 1.0 - ua - ub;
                // k = 2 has no class k − 2; u(0) = v(0) = 0 covers it.
                probs[4] = q * ua * ua - q * v(k - 1);
                probs[3] = p * ua + q * v(k - 2) + 2.0 * q * ua * rest;
                probs[2] = p * rest + q * v(k - 1) + 2.0 * q * ua * ub + q * rest * rest
                    - q * v(k - 2);
                probs[1] = p * ub + q * v(k) + 2.0 * q * ub * rest;
                probs[0] = q * ub * ub - q * v(k);
            }
        }
    }
    let total: f64 = probs.iter().sum();
    if probs.iter().any(|x| !(*x >= -SLACK && *x <= 1.0 + SLACK)) || (total - 1.0).abs() > SLACK {
        return Err(Error::Table(format!(
            "class {k}: probabilities {probs:?} (sum {total}) are not a distribution"
        )));
    }
    for x in &mut probs {
        *x = x.clamp(0.0, 1.0);
    }
    Ok(Pmf { probs })
}

/// `E[d_k | F_j]` written with the scaled quantities `X_j = Z_j/n` and
/// `𝒮 = S/n`.
pub fn conditional_drift(x: &[f64], weights: &[f64], s_scaled: f64, n: f64, k: usize, model: Model, p: f64) -> f64 {
    let q = 1.0 - p;
    // one-based access, zero outside the stored range
    let xa = |j: usize| if j == 0 || j > x.len() { 0.0 } else { x[j - 1] };
    let w = |j: usize| weights[j - 1];
    let lin = |j: usize| if j == 0 { 0.0 } else { w(j) * xa(j) / s_scaled };
    let sq = |j: usize| {
        if j == 0 {
            0.0
        } else {
            w(j) * w(j) * xa(j) / (s_scaled * s_scaled)
        }
    };
    match (model, k) {
        (Model::Urn, 1) => p - q * lin(1),
        (Model::Urn, _) => q * lin(k - 1) - q * lin(k),
        (Model::Graph, 1) => p - (2.0 - p) * lin(1) + q / n * sq(1),
        (Model::Graph, 2) => {
            (2.0 - p) * lin(1) - (2.0 - p) * lin(2) + q / n * (-2.0 * sq(1) + sq(2))
        }
        (Model::Graph, _) => {
            (2.0 - p) * lin(k - 1) - (2.0 - p) * lin(k)
                + q / n * (sq(k - 2) - 2.0 * sq(k - 1) + sq(k))
        }
    }
}

/// Plain counts with explicit weights; handy for frozen-state tests.
#[derive(Debug, Clone)]
pub struct FrozenCounts {
    pub z: Vec<f64>,
    pub w: Vec<f64>,
}

impl FrozenCounts {
    /// `w` must cover every class that will be queried.
    pub fn new(z: Vec<f64>, w: Vec<f64>) -> Self {
        FrozenCounts { z, w }
    }
}

impl CountView for FrozenCounts {
    fn count(&self, k: u64) -> f64 {
        if k == 0 {
            0.0
        } else {
            self.z.get(k as usize - 1).copied().unwrap_or(0.0)
        }
    }

    fn weight(&self, k: u64) -> f64 {
        self.w[k as usize - 1]
    }

    fn total_weight(&self) -> f64 {
        self.z.iter().zip(&self.w).map(|(a, b)| a * b).sum()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_state(rng: &mut ChaCha8Rng, kappa: f64) -> FrozenCounts {
        let len = rng.random_range(1..12);
        let mut z: Vec<f64> = (0..len).map(|_| rng.random_range(0..6) as f64).collect();
        if z.iter().all(|v| *v == 0.0) {
            z[0] = 1.0;
        }
        let w = (1..=len + 8).map(|k| (k as f64).powf(kappa)).collect();
        FrozenCounts::new(z, w)
    }

    #[test]
    fn sums_to_one_on_random_states() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..10_000 {
            let kappa = rng.random_range(-1.0..0.9);
            let st = random_state(&mut rng, kappa);
            let p = rng.random_range(0.01..1.0);
            for model in [Model::Graph, Model::Urn] {
                for k in [1, 2, 3, 7] {
                    let pmf = increment_pmf(&st, k, model, p).unwrap();
                    let total: f64 = pmf.probs.iter().sum();
                    assert!((total - 1.0).abs() <= 1e-12);
                }
            }
        }
    }

    #[test]
    fn empty_neighbourhood_is_point_mass() {
        let st = FrozenCounts::new(vec![4.0, 0.0, 0.0, 0.0, 0.0, 3.0], vec![1.0; 9]);
        let pmf = increment_pmf(&st, 4, Model::Graph, 0.4).unwrap();
        assert_eq!(pmf.probs, [0.0, 0.0, 1.0, 0.0, 0.0]);
    }

    #[test]
    fn urn_single_urn() {
        let st = FrozenCounts::new(vec![1.0], vec![1.0; 3]);
        let d1 = increment_pmf(&st, 1, Model::Urn, 0.5).unwrap();
        assert_eq!((d1.prob(1), d1.prob(-1), d1.prob(0)), (0.5, 0.5, 0.0));
        let d2 = increment_pmf(&st, 2, Model::Urn, 0.5).unwrap();
        assert_eq!(d2.prob(1), 0.5);
    }

    #[test]
    fn graph_loop_mass() {
        // Z_1 = 3, Z_2 = 2, w ≡ 1, p = 0.5: S = 5
        let st = FrozenCounts::new(vec![3.0, 2.0], vec![1.0; 5]);
        let d1 = increment_pmf(&st, 1, Model::Graph, 0.5).unwrap();
        let u1: f64 = 0.6;
        assert!((d1.prob(-2) - 0.5 * (u1 * u1 - 3.0 / 25.0)).abs() < 1e-15);
        assert!((d1.prob(1) - 0.5 * 0.4).abs() < 1e-15);
    }

    #[test]
    fn drift_matches_table_mean() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for _ in 0..2_000 {
            let kappa = rng.random_range(-1.0..0.9);
            let st = random_state(&mut rng, kappa);
            let p = rng.random_range(0.01..1.0);
            let n = rng.random_range(1.0..1000.0);
            let x: Vec<f64> = st.z.iter().map(|z| z / n).collect();
            let s_scaled = st.total_weight() / n;
            for model in [Model::Graph, Model::Urn] {
                for k in 1..=st.z.len() + 1 {
                    let pmf = increment_pmf(&st, k as u64, model, p).unwrap();
                    let d = conditional_drift(&x, &st.w, s_scaled, n, k, model, p);
                    assert!((pmf.mean() - d).abs() <= 1e-12, "{model} k={k}");
                }
            }
        }
    }

    #[test]
    fn zero_weight_state_rejected() {
        let st = FrozenCounts::new(vec![0.0, 0.0], vec![1.0; 4]);
        assert!(matches!(increment_pmf(&st, 1, Model::Urn, 0.5), Err(Error::Table(_))));
    }
}

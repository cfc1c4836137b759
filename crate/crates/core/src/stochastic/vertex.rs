//! Reference simulator that tracks every vertex (or urn) individually.
//! Only meant for small networks, as a check on the class-level chain.

use rand::Rng;

use super::Fenwick;
use crate::equilibrium::{Model, ModelParams};
use crate::error::{Error, Result};
use crate::weights::WeightFunction;

#[derive(Debug, Clone)]
pub struct VertexSimulator {
    model: Model,
    p: f64,
    weight: WeightFunction,
    degrees: Vec<u64>,
    tree: Fenwick,
}

impl VertexSimulator {
    /// `counts[k-1]` vertices of degree `k`. Capacity is sized for `steps`.
    pub fn new(params: &ModelParams, counts: &[u64], steps: usize) -> Result<Self> {
        let mut degrees = Vec::new();
        for (i, &c) in counts.iter().enumerate() {
            degrees.extend(std::iter::repeat_n(i as u64 + 1, c as usize));
        }
        if degrees.is_empty() {
            return Err(Error::Seeding("initial network is empty".into()));
        }
        let weight = params.weight().clone();
        let mut tree = Fenwick::with_capacity(degrees.len() + steps);
        for (i, &d) in degrees.iter().enumerate() {
            tree.add(i, weight.at(d));
        }
        Ok(VertexSimulator {
            model: params.model(),
            p: params.p(),
            weight,
            degrees,
            tree,
        })
    }

    fn pick<R: Rng + ?Sized>(&self, rng: &mut R) -> usize {
        loop {
            let i = self.tree.find(rng.random::<f64>() * self.tree.total());
            if i < self.degrees.len() {
                return i;
            }
        }
    }

    fn bump(&mut self, i: usize, by: u64) {
        let d = self.degrees[i];
        self.tree.add(i, self.weight.at(d + by) - self.weight.at(d));
        self.degrees[i] = d + by;
    }

    fn push(&mut self) {
        let i = self.degrees.len();
        if i >= self.tree.capacity() {
            let vals: Vec<f64> = self.degrees.iter().map(|&d| self.weight.at(d)).collect();
            self.tree = Fenwick::with_capacity(2 * i);
            self.tree.rebuild(&vals);
        }
        self.degrees.push(1);
        self.tree.add(i, self.weight.at(1));
    }

    pub fn step<R: Rng + ?Sized>(&mut self, rng: &mut R) {
        match self.model {
            Model::Urn => {
                if rng.random_bool(self.p) {
                    self.push();
                } else {
                    let x = self.pick(rng);
                    self.bump(x, 1);
                }
            }
            Model::Graph => {
                if rng.random_bool(self.p) {
                    let x = self.pick(rng);
                    self.bump(x, 1);
                    self.push();
                } else {
                    let x = self.pick(rng);
                    let y = self.pick(rng);
                    if x == y {
                        self.bump(x, 2);
                    } else {
                        self.bump(x, 1);
                        self.bump(y, 1);
                    }
                }
            }
        }
    }

    /// `(Z_1, …, Z_len)`.
    pub fn counts(&self, len: usize) -> Vec<u64> {
        let mut z = vec![0; len];
        for &d in &self.degrees {
            if (d as usize) <= len {
                z[d as usize - 1] += 1;
            }
        }
        z
    }

    pub fn degree_total(&self) -> u64 {
        self.degrees.iter().sum()
    }
}

//! Fluid limits of sublinear preferential attachment.
//!
//! The crate covers the deterministic side (fixed point `s*`, limit
//! proportions `a_k`, the nonlinear rate equations and their linear
//! time-changed form, the dominant eigenpair of the generator) and the
//! stochastic side (exact class-level simulation of the graph and urn
//! chains) together with the experiments that confront the two.

pub mod equilibrium;
pub mod dynamics;
pub mod error;
pub mod experiments;
pub mod io;
pub mod spectral;
pub mod stochastic;
pub mod weights;

pub use equilibrium::{Model, ModelParams};
pub use error::{Error, Result};
pub use weights::WeightFunction;

//! Cluster-size tails of heavy-tailed multi-type branching processes.
//!
//! The crate covers the model calculus (expected clusters, tail indices and
//! rate functions), cone geometry over the expected-cluster vectors, an exact
//! and deterministic branching engine with pruning and recursive
//! decomposition, Monte Carlo estimation of the limiting measures, and an
//! experiment harness that checks the tail asymptotics empirically.

pub mod dims;
pub mod error;
pub mod exec;
pub mod geometry;
pub mod law;
pub mod lp;
pub mod measures;
pub mod model;
pub mod numeric;
pub mod simulate;
pub mod stats;
pub mod stream;
pub mod verify;

pub use dims::DimSet;
pub use error::{Error, Result};
pub use geometry::RareEventSet;
pub use law::OffspringLaw;
pub use model::{Model, ModelConfig, ValidationReport};
pub use stream::{Seed, StreamKey};

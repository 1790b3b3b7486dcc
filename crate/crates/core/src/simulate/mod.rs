//! Exact cluster sampling, pruned sampling and the recursive decomposition.
//!
//! Every sample is a pure function of the model and its [`StreamKey`].

mod decompose;
mod engine;
mod source;

pub use decompose::{hat_s, sample_decomposition, sample_decomposition_with, Decomposition};
pub use engine::Forest;
pub use source::{DrawSource, ScriptedSource, StreamSource, TapeSource};

use serde::Serialize;

use crate::error::{Error, Result};
use crate::model::Model;
use crate::stream::StreamKey;

/// Default bound on the number of individuals in one cluster.
pub const DEFAULT_NODE_CAP: u64 = 10_000_000;
/// Default bound on the decomposition depth.
pub const DEFAULT_DEPTH_CAP: usize = 64;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Caps {
    pub nodes: u64,
    pub depth: usize,
}

impl Default for Caps {
    fn default() -> Self {
        Caps {
            nodes: DEFAULT_NODE_CAP,
            depth: DEFAULT_DEPTH_CAP,
        }
    }
}

/// Total progeny of one type-`root` ancestor.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct ClusterSample {
    pub root: usize,
    pub totals: Vec<u64>,
    /// The node cap fired; `totals` is then a lower bound.
    pub censored: bool,
}

impl ClusterSample {
    pub fn into_result(self, cap: u64) -> Result<Self> {
        if self.censored {
            Err(Error::CapExceeded { cap })
        } else {
            Ok(self)
        }
    }
}

/// A cluster grown with every offspring count above `threshold` suppressed.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PrunedSample {
    pub root: usize,
    pub threshold: f64,
    pub totals: Vec<u64>,
    /// Suppressed mass per child type.
    pub w: Vec<u64>,
    /// Suppression events per child type.
    pub n: Vec<u64>,
    /// `pair_n[i][l]`: suppression events along child type `i` by type-`l`
    /// parents.
    pub pair_n: Vec<Vec<u64>>,
    pub censored: bool,
}

impl PrunedSample {
    /// `W_i > 0 <=> W_i > M <=> N_i >= 1`, and `N_i = sum_l pair_n[i][l]`.
    pub fn counters_consistent(&self) -> bool {
        (0..self.w.len()).all(|i| {
            let w = self.w[i];
            let a = w > 0;
            let b = w as f64 > self.threshold;
            let c = self.n[i] >= 1;
            a == b && b == c && self.n[i] == self.pair_n[i].iter().sum::<u64>()
        })
    }
}

/// Integer threshold equivalent to `M` for integer draws: `B > M <=> B > floor(M)`.
pub fn integer_threshold(m: f64) -> u64 {
    if m >= u64::MAX as f64 {
        u64::MAX
    } else {
        m.max(0.0).floor() as u64
    }
}

/// Grows one cluster from `source` into `forest` (reset first).
pub fn grow_cluster<S: DrawSource>(
    model: &Model,
    root: usize,
    threshold: Option<f64>,
    source: &mut S,
    cap: u64,
    forest: &mut Forest,
) {
    let mut r = [0u64; crate::dims::MAX_DIM];
    r[root] = 1;
    forest.reset();
    forest.grow(model, &r[..model.dim()], threshold.map(integer_threshold), source, cap);
}

pub fn sample_cluster(model: &Model, root: usize, key: StreamKey, cap: u64) -> ClusterSample {
    sample_cluster_with(model, root, &mut StreamSource::new(key), cap)
}

pub fn sample_cluster_with<S: DrawSource>(model: &Model, root: usize, source: &mut S, cap: u64) -> ClusterSample {
    let mut forest = Forest::new(model.dim());
    grow_cluster(model, root, None, source, cap, &mut forest);
    ClusterSample {
        root,
        totals: forest.totals,
        censored: forest.censored,
    }
}

pub fn sample_pruned(model: &Model, root: usize, m: f64, key: StreamKey, cap: u64) -> PrunedSample {
    sample_pruned_with(model, root, m, &mut StreamSource::new(key), cap)
}

pub fn sample_pruned_with<S: DrawSource>(
    model: &Model,
    root: usize,
    m: f64,
    source: &mut S,
    cap: u64,
) -> PrunedSample {
    let d = model.dim();
    let mut forest = Forest::new(d);
    grow_cluster(model, root, Some(m), source, cap, &mut forest);
    PrunedSample {
        root,
        threshold: m,
        totals: forest.totals,
        w: forest.w,
        n: forest.n,
        pair_n: forest.pair_n.chunks(d).map(<[u64]>::to_vec).collect(),
        censored: forest.censored,
    }
}

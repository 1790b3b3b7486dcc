//! Experiment harness: probability sweeps, identity and concentration
//! checks, type frequencies, tail-index estimation and the tube
//! counterexample.
//!
//! Every experiment is a pure function of its inputs and a [`Seed`]; inner
//! loops run through [`crate::exec`], so results do not depend on the number
//! of worker threads.

mod concentration;
mod identities;
mod output;
mod sweep;
mod types;

pub use concentration::{check_concentration, ConcentrationReport, ConcentrationRow, CONCENTRATION_EPSILON};
pub use identities::check_identities;
pub use output::{sweep_csv, sweep_svg, SWEEP_CSV_HEADER};
pub use sweep::{
    counterexample_experiment, sweep_probability, sweep_with, RatioCheck, SweepResult, SweepRow, TubeSet,
};
pub use types::{check_type_frequencies, TypeFrequency, TypeFrequencyReport};

pub use crate::stats::hill_estimate;

use rand::Rng;
use serde::Serialize;

use crate::error::Result;
use crate::exec;
use crate::model::Model;
use crate::simulate::{grow_cluster, Forest, StreamSource, DEFAULT_NODE_CAP};
use crate::stats::z_score;
use crate::stream::{Seed, LANE_JITTER, LANE_TREE};

/// Identity checks pass within this many standard errors.
pub const Z_PASS: f64 = 4.0;
/// Fewer hits than this at some `n` flags a sweep.
pub const MIN_HITS: u64 = 20;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct IdentityCheck {
    pub name: String,
    pub lhs: f64,
    pub rhs: f64,
    pub se: f64,
    pub z: f64,
    pub pass: bool,
}

impl IdentityCheck {
    /// A zero standard error with unequal sides gives a large but finite `z`.
    pub fn new(name: impl Into<String>, lhs: f64, rhs: f64, se: f64) -> Self {
        let floor = f64::EPSILON * lhs.abs().max(rhs.abs()).max(1.0);
        let z = z_score(lhs, rhs, se.max(floor));
        IdentityCheck {
            name: name.into(),
            lhs,
            rhs,
            se,
            z,
            pass: z.abs() <= Z_PASS,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct IdentityReport {
    pub suite: String,
    pub checks: Vec<IdentityCheck>,
    /// Samples that hit the node cap and were left out.
    pub censored: u64,
    pub passed: bool,
}

impl IdentityReport {
    pub fn new(suite: impl Into<String>, checks: Vec<IdentityCheck>, censored: u64) -> Self {
        let passed = checks.iter().all(|c| c.pass);
        IdentityReport {
            suite: suite.into(),
            checks,
            censored,
            passed,
        }
    }

    pub fn failures(&self) -> impl Iterator<Item = &IdentityCheck> {
        self.checks.iter().filter(|c| !c.pass)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TailIndexReport {
    pub root: usize,
    pub samples: u64,
    pub k: usize,
    pub estimate: f64,
    pub censored: u64,
}

/// Hill estimate of the tail index of `||S_root||_1` from `samples` direct
/// clusters and the top `k` order statistics.
///
/// The norms are integers with heavy ties around any moderate quantile,
/// which makes the plain Hill estimator jump with the position of the
/// threshold on the integer grid. Each norm is therefore jittered to
/// `||S|| - U` with an independent uniform `U` in `[0, 1)`, which leaves the
/// tail index unchanged.
pub fn cluster_tail_index(model: &Model, root: usize, samples: u64, k: usize, seed: Seed) -> Result<TailIndexReport> {
    let seed = seed.derive_str("hill").derive(root as u64);
    let parts = exec::map_blocks(samples, |range| {
        let mut forest = Forest::new(model.dim());
        let mut norms = Vec::with_capacity((range.end - range.start) as usize);
        let mut censored = 0u64;
        for idx in range {
            let mut src = StreamSource::new(seed.key(idx, LANE_TREE));
            grow_cluster(model, root, None, &mut src, DEFAULT_NODE_CAP, &mut forest);
            censored += forest.censored as u64;
            let u: f64 = seed.key(idx, LANE_JITTER).rng().random();
            norms.push(forest.totals.iter().sum::<u64>() as f64 - u);
        }
        (norms, censored)
    });
    let censored = parts.iter().map(|p| p.1).sum();
    let norms: Vec<f64> = parts.into_iter().flat_map(|p| p.0).collect();
    Ok(TailIndexReport {
        root,
        samples,
        k,
        estimate: hill_estimate(&norms, k)?,
        censored,
    })
}

//! Concentration of averages of pruned clusters around the mean cluster.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::exec;
use crate::model::Model;
use crate::simulate::{grow_cluster, Forest, StreamSource, DEFAULT_NODE_CAP};
use crate::stats::binomial;
use crate::stream::{Seed, LANE_TREE};

pub const CONCENTRATION_EPSILON: f64 = 0.25;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ConcentrationRow {
    pub n: u64,
    pub delta: f64,
    pub repetitions: u64,
    /// Repetitions whose average missed `s_i` by more than epsilon in L1.
    pub exceed: u64,
    pub p_hat: f64,
    pub se: f64,
    pub censored: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ConcentrationReport {
    pub root: usize,
    pub epsilon: f64,
    pub rows: Vec<ConcentrationRow>,
    /// Per `delta` (in input order): the deviation probability does not
    /// increase along the `n` list.
    pub decreasing: Vec<bool>,
}

impl ConcentrationReport {
    pub fn row(&self, n: u64, delta: f64) -> Option<&ConcentrationRow> {
        self.rows.iter().find(|r| r.n == n && r.delta == delta)
    }
}

/// For each `(n, delta)`, the fraction of `repetitions` in which
/// `|| n^-1 sum_{m <= n} S^<=(m)_root(n delta) - s_root ||_1 > epsilon`.
pub fn check_concentration(
    model: &Model,
    root: usize,
    deltas: &[f64],
    n_list: &[u64],
    repetitions: u64,
    seed: Seed,
) -> Result<ConcentrationReport> {
    if root >= model.dim() {
        return Err(Error::InvalidArgument(format!("root {} out of range", root + 1)));
    }
    if deltas.iter().any(|&x| !(x > 0.0 && x.is_finite())) {
        return Err(Error::ZeroDelta);
    }
    if n_list.contains(&0) {
        return Err(Error::InvalidArgument("n must be positive".into()));
    }
    let d = model.dim();
    let target = model.expected_cluster(root);
    let seed = seed.derive_str("concentration").derive(root as u64);
    let mut rows = Vec::new();
    for (di, &delta) in deltas.iter().enumerate() {
        for &n in n_list {
            let m = n as f64 * delta;
            let sub = seed.derive(di as u64).derive(n);
            let parts = exec::map_blocks_sized(repetitions, 16, |range| {
                let mut forest = Forest::new(d);
                let mut sum = vec![0u64; d];
                let (mut exceed, mut censored) = (0u64, 0u64);
                for rep in range {
                    sum.fill(0);
                    for k in 0..n {
                        let mut src = StreamSource::new(sub.key(rep * n + k, LANE_TREE));
                        grow_cluster(model, root, Some(m), &mut src, DEFAULT_NODE_CAP, &mut forest);
                        censored += forest.censored as u64;
                        sum.iter_mut().zip(&forest.totals).for_each(|(a, b)| *a += b);
                    }
                    let dev: f64 = sum
                        .iter()
                        .zip(&target)
                        .map(|(&s, t)| (s as f64 / n as f64 - t).abs())
                        .sum();
                    exceed += (dev > CONCENTRATION_EPSILON) as u64;
                }
                (exceed, censored)
            });
            let exceed = parts.iter().map(|p| p.0).sum();
            let censored = parts.iter().map(|p| p.1).sum();
            let (p_hat, se) = binomial(exceed, repetitions);
            rows.push(ConcentrationRow {
                n,
                delta,
                repetitions,
                exceed,
                p_hat,
                se,
                censored,
            });
        }
    }
    let k = n_list.len();
    let decreasing = rows
        .chunks(k.max(1))
        .map(|c| c.windows(2).all(|w| w[1].p_hat <= w[0].p_hat))
        .collect();
    Ok(ConcentrationReport {
        root,
        epsilon: CONCENTRATION_EPSILON,
        rows,
        decreasing,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::reference;

    #[test]
    fn barren_average_is_exact() {
        let rep = check_concentration(&reference::barren(2), 1, &[0.05], &[10, 100], 50, Seed(0)).unwrap();
        assert!(rep.rows.iter().all(|r| r.exceed == 0));
    }

    #[test]
    fn r2_deviation_shrinks_with_n() {
        let rep = check_concentration(&reference::r2(), 0, &[0.05], &[100, 1000], 400, Seed(5)).unwrap();
        let (a, b) = (&rep.rows[0], &rep.rows[1]);
        assert!(b.p_hat < a.p_hat, "{a:?} {b:?}");
        assert!(rep.decreasing[0]);
    }
}

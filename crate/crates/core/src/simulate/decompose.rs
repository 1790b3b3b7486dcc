//! Recursive decomposition of a cluster into pruned pieces.
//!
//! Step 1 grows the root's cluster pruned at `n delta`. The suppressed
//! children of every step become the roots of the next step's pieces; pieces
//! rooted at type `i` are pruned at `delta tau_i(k-1)`, where `tau_i(k-1)` is
//! the total mass suppressed along `i` in the previous step. The recursion
//! stops at the first step without suppressed mass; gluing all pieces back
//! reproduces a sample of the full cluster.

use serde::Serialize;

use super::engine::Forest;
use super::source::{DrawSource, StreamSource};
use super::{integer_threshold, Caps};
use crate::dims::DimSet;
use crate::error::{Error, Result};
use crate::measures::GeneralizedType;
use crate::model::Model;
use crate::stream::StreamKey;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Decomposition {
    pub root: usize,
    pub n: u64,
    pub delta: f64,
    /// `tau[k-1][i] = tau_i(k)` for `k = 1..=depth`.
    pub tau: Vec<Vec<u64>>,
    pub depth: usize,
    /// `pieces[k-1][i]`: summed totals of the pieces of step `k` rooted at
    /// type `i`, for `k = 1..=depth+1`.
    pub pieces: Vec<Vec<Vec<u64>>>,
    /// Number of piece roots per step and type.
    pub piece_roots: Vec<Vec<u64>>,
    pub reconstructed: Vec<u64>,
    /// Every child drawn during the decomposition, kept or suppressed.
    pub births: Vec<u64>,
    pub gtype: GeneralizedType,
}

impl Decomposition {
    /// `tau_i(k) = 0` or `tau_i(k) > n delta^k` everywhere.
    pub fn tau_gap_holds(&self) -> bool {
        self.tau.iter().enumerate().all(|(k, row)| {
            let bound = self.n as f64 * self.delta.powi(k as i32 + 1);
            row.iter().all(|&t| t == 0 || t as f64 > bound)
        })
    }

    /// Integer bookkeeping: the pieces add up to the root plus every drawn
    /// child, each step's suppressed mass roots exactly the next step's
    /// pieces, and the type rows mark the positive `tau`.
    pub fn reconstruction_holds(&self) -> bool {
        let d = self.reconstructed.len();
        let mut sum = vec![0u64; d];
        for step in &self.pieces {
            for piece in step {
                for (s, v) in sum.iter_mut().zip(piece) {
                    *s += v;
                }
            }
        }
        let mut expected = self.births.clone();
        expected[self.root] += 1;
        let roots_ok = self.piece_roots.len() == self.tau.len() + 1
            && self.piece_roots[0].iter().sum::<u64>() == 1
            && self.piece_roots[0][self.root] == 1
            && self.tau.iter().zip(&self.piece_roots[1..]).all(|(t, r)| t == r);
        let rows_ok = self.gtype.depth() == self.depth
            && self
                .tau
                .iter()
                .zip(self.gtype.rows())
                .all(|(t, row)| (0..d).all(|i| (t[i] > 0) == row.contains(i)));
        sum == self.reconstructed && sum == expected && roots_ok && rows_ok
    }
}

/// Runs the decomposition on its own stream.
pub fn sample_decomposition(
    model: &Model,
    root: usize,
    n: u64,
    delta: f64,
    key: StreamKey,
    caps: Caps,
) -> Result<Decomposition> {
    sample_decomposition_with(model, root, n, delta, &mut StreamSource::new(key), caps)
}

pub fn sample_decomposition_with<S: DrawSource>(
    model: &Model,
    root: usize,
    n: u64,
    delta: f64,
    source: &mut S,
    caps: Caps,
) -> Result<Decomposition> {
    if !(delta > 0.0 && delta < 1.0) {
        return Err(Error::InvalidArgument(format!("delta = {delta} must lie in (0, 1)")));
    }
    if n == 0 {
        return Err(Error::InvalidArgument("n must be positive".into()));
    }
    let d = model.dim();
    let mut forest = Forest::new(d);
    let mut prev = vec![0u64; d];
    prev[root] = 1;
    let mut thresholds = vec![n as f64 * delta; d];
    let mut tau: Vec<Vec<u64>> = Vec::new();
    let mut pieces = Vec::new();
    let mut piece_roots = Vec::new();
    let mut reconstructed = vec![0u64; d];
    let mut births = vec![0u64; d];
    let mut nodes = 0u64;
    let mut single = vec![0u64; d];
    loop {
        if tau.len() > caps.depth {
            return Err(Error::DepthCapExceeded { cap: caps.depth });
        }
        let mut next = vec![0u64; d];
        let mut step = vec![vec![0u64; d]; d];
        for i in 0..d {
            if prev[i] == 0 {
                continue;
            }
            single.fill(0);
            single[i] = prev[i];
            forest.reset();
            forest.grow(
                model,
                &single,
                Some(integer_threshold(thresholds[i])),
                source,
                caps.nodes.saturating_sub(nodes),
            );
            if forest.censored {
                return Err(Error::CapExceeded { cap: caps.nodes });
            }
            nodes += forest.nodes;
            for l in 0..d {
                next[l] += forest.w[l];
                births[l] += forest.births[l];
                reconstructed[l] += forest.totals[l];
            }
            step[i].copy_from_slice(&forest.totals);
        }
        pieces.push(step);
        piece_roots.push(prev.clone());
        if next.iter().all(|&t| t == 0) {
            break;
        }
        for i in 0..d {
            thresholds[i] = delta * next[i] as f64;
        }
        tau.push(next.clone());
        prev = next;
    }
    let rows = tau
        .iter()
        .map(|t| (0..d).filter(|&i| t[i] > 0).collect::<DimSet>())
        .collect();
    Ok(Decomposition {
        root,
        n,
        delta,
        depth: tau.len(),
        tau,
        pieces,
        piece_roots,
        reconstructed,
        births,
        gtype: GeneralizedType::new(rows)?,
    })
}

/// `sum_k sum_i tau_i(k) / n * s_i`.
pub fn hat_s(decomposition: &Decomposition, model: &Model) -> Vec<f64> {
    hat_s_from_tau(&decomposition.tau, decomposition.n, model)
}

pub(crate) fn hat_s_from_tau(tau: &[Vec<u64>], n: u64, model: &Model) -> Vec<f64> {
    let d = model.dim();
    let mut out = vec![0.0; d];
    for row in tau {
        for (i, &t) in row.iter().enumerate() {
            if t > 0 {
                let s = model.expected_cluster(i);
                for l in 0..d {
                    out[l] += t as f64 / n as f64 * s[l];
                }
            }
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::super::ScriptedSource;
    use super::*;
    use crate::model::reference::r2;

    #[test]
    fn no_pruning_gives_depth_zero() {
        let m = r2();
        // root draws one child of each type, which have no offspring
        let mut src = ScriptedSource::new(vec![vec![1], vec![1]]);
        let dec = sample_decomposition_with(&m, 0, 16, 0.1, &mut src, Caps::default()).unwrap();
        assert_eq!(dec.depth, 0);
        assert_eq!(dec.gtype.depth(), 0);
        assert_eq!(dec.reconstructed, vec![2, 1]);
        assert_eq!(dec.reconstructed, dec.pieces[0][0]);
        assert!(dec.reconstruction_holds() && dec.tau_gap_holds());
    }

    #[test]
    fn single_big_jump_along_second_dimension() {
        let m = r2();
        // step 1, threshold 1.6: the root draws 5 children of type 2, pruned
        // step 2: five type-2 roots pruned at 0.5, no further offspring
        let mut src = ScriptedSource::new(vec![vec![], vec![5]]);
        let dec = sample_decomposition_with(&m, 0, 16, 0.1, &mut src, Caps::default()).unwrap();
        assert_eq!(dec.depth, 1);
        assert_eq!(dec.tau, vec![vec![0, 5]]);
        assert_eq!(dec.gtype.rows(), &[DimSet::singleton(1)]);
        assert!(dec.tau[0][1] as f64 > 16.0 * 0.1);
        assert_eq!(dec.reconstructed, vec![1, 5]);
        assert!(dec.reconstruction_holds() && dec.tau_gap_holds());
    }

    #[test]
    fn hat_s_examples() {
        let m = r2();
        assert_eq!(hat_s_from_tau(&[vec![0, 0]], 10, &m), vec![0.0, 0.0]);
        let one = hat_s_from_tau(&[vec![5, 0]], 10, &m);
        assert!((one[0] - 0.866_666_666_7).abs() < 1e-9 && (one[1] - 0.133_333_333_3).abs() < 1e-9);
        let two = hat_s_from_tau(&[vec![5, 0], vec![0, 10]], 10, &m);
        assert!((two[0] - 1.266_666_666_7).abs() < 1e-9 && (two[1] - 1.733_333_333_3).abs() < 1e-9);
    }

    #[test]
    fn random_decompositions_are_consistent() {
        let m = r2();
        for idx in 0..2000 {
            let dec = sample_decomposition(&m, idx as usize % 2, 16, 0.1, StreamKey::new(3, idx, 1), Caps::default())
                .unwrap();
            assert!(dec.reconstruction_holds(), "{dec:?}");
            assert!(dec.tau_gap_holds());
        }
    }
}

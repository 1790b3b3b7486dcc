//! Mean, pruning and regeneration identities checked by simulation.

use super::{IdentityCheck, IdentityReport};
use crate::exec;
use crate::model::Model;
use crate::simulate::{grow_cluster, integer_threshold, Forest, StreamSource, DEFAULT_NODE_CAP};
use crate::stats::{CountAccumulator, MeanAccumulator};
use crate::stream::{Seed, LANE_REGENERATION, LANE_TREE};

/// Per-sample statistics of direct clusters rooted at one type.
#[derive(Debug, Clone)]
struct DirectStats {
    first: Vec<CountAccumulator>,
    second: Vec<CountAccumulator>,
    censored: u64,
}

impl DirectStats {
    fn new(d: usize) -> Self {
        DirectStats {
            first: vec![CountAccumulator::default(); d],
            second: vec![CountAccumulator::default(); d],
            censored: 0,
        }
    }

    fn push(&mut self, totals: &[u64]) {
        for (l, &s) in totals.iter().enumerate() {
            self.first[l].push(s);
            self.second[l].push(s.saturating_mul(s));
        }
    }

    fn merge(mut self, other: &DirectStats) -> Self {
        for l in 0..self.first.len() {
            self.first[l] = self.first[l].merge(&other.first[l]);
            self.second[l] = self.second[l].merge(&other.second[l]);
        }
        self.censored += other.censored;
        self
    }
}

/// Statistics of pruned samples at one threshold, with the regenerated
/// cluster built on top of each.
#[derive(Debug, Clone)]
struct PrunedStats {
    pruned: Vec<CountAccumulator>,
    /// `pair_n[j][l] - S_l P(B_{j<-l} > M)` per sample, row-major in `j`.
    diff: Vec<MeanAccumulator>,
    pair: Vec<CountAccumulator>,
    regen: DirectStats,
}

fn direct_pass(model: &Model, root: usize, samples: u64, seed: Seed) -> DirectStats {
    let d = model.dim();
    exec::map_blocks(samples, |range| {
        let mut forest = Forest::new(d);
        let mut st = DirectStats::new(d);
        for idx in range {
            let mut src = StreamSource::new(seed.key(idx, LANE_TREE));
            grow_cluster(model, root, None, &mut src, DEFAULT_NODE_CAP, &mut forest);
            if forest.censored {
                st.censored += 1;
            } else {
                st.push(&forest.totals);
            }
        }
        st
    })
    .iter()
    .fold(DirectStats::new(d), |a, b| a.merge(b))
}

fn pruned_pass(model: &Model, root: usize, m: f64, samples: u64, seed: Seed) -> PrunedStats {
    let d = model.dim();
    let tail: Vec<f64> = (0..d * d).map(|k| model.law(k / d, k % d).survival(m)).collect();
    let empty = || PrunedStats {
        pruned: vec![CountAccumulator::default(); d],
        diff: vec![MeanAccumulator::default(); d * d],
        pair: vec![CountAccumulator::default(); d * d],
        regen: DirectStats::new(d),
    };
    let parts = exec::map_blocks(samples, |range| {
        let mut pruned = Forest::new(d);
        let mut second = Forest::new(d);
        let mut st = empty();
        let mut total = vec![0u64; d];
        for idx in range {
            let mut src = StreamSource::new(seed.key(idx, LANE_TREE));
            grow_cluster(model, root, Some(m), &mut src, DEFAULT_NODE_CAP, &mut pruned);
            if pruned.censored {
                st.regen.censored += 1;
                continue;
            }
            for l in 0..d {
                st.pruned[l].push(pruned.totals[l]);
            }
            for k in 0..d * d {
                let (j, l) = (k / d, k % d);
                st.pair[k].push(pruned.pair_n[k]);
                st.diff[k].push(pruned.pair_n[k] as f64 - pruned.totals[l] as f64 * tail[j * d + l]);
            }
            // regeneration: every pruned child roots an independent full cluster
            let mut src = StreamSource::new(seed.key(idx, LANE_REGENERATION));
            second.reset();
            let cap = DEFAULT_NODE_CAP.saturating_sub(pruned.nodes);
            second.grow(model, &pruned.w, None, &mut src, cap);
            if second.censored {
                st.regen.censored += 1;
                continue;
            }
            for ((t, a), b) in total.iter_mut().zip(&pruned.totals).zip(&second.totals) {
                *t = a + b;
            }
            st.regen.push(&total);
        }
        st
    });
    parts.iter().fold(empty(), |mut a, b| {
        for l in 0..d {
            a.pruned[l] = a.pruned[l].merge(&b.pruned[l]);
        }
        for k in 0..d * d {
            a.diff[k] = a.diff[k].merge(&b.diff[k]);
            a.pair[k] = a.pair[k].merge(&b.pair[k]);
        }
        a.regen = a.regen.merge(&b.regen);
        a
    })
}

/// Simulation checks of
/// - `E S_i = s_i`,
/// - `E N_{i; j<-l}(M) = E S^<=_{i,l}(M) P(B_{j<-l} > M)` and
///   `E S^<=_i(M) = (I - B^<=M)^-1 e_i`,
/// - first and second moments of the regenerated cluster
///   `S^<=_i(M) + sum over pruned children of fresh clusters` against
///   direct clusters,
///
/// for every root `i` and every `M` in `m_list`.
pub fn check_identities(model: &Model, m_list: &[f64], samples: u64, seed: Seed) -> IdentityReport {
    let d = model.dim();
    let seed = seed.derive_str("identities");
    let mut checks = Vec::new();
    let mut censored = 0;
    for i in 0..d {
        let direct = direct_pass(model, i, samples, seed.derive_str("direct").derive(i as u64));
        censored += direct.censored;
        for l in 0..d {
            let acc = &direct.first[l];
            checks.push(IdentityCheck::new(
                format!("mean i={} l={}", i + 1, l + 1),
                acc.mean(),
                model.s_bar(i, l),
                acc.std_error(),
            ));
        }
        for (mi, &m) in m_list.iter().enumerate() {
            let st = pruned_pass(model, i, m, samples, seed.derive_str("pruned").derive(mi as u64).derive(i as u64));
            censored += st.regen.censored;
            let oracle = model.pruned_cluster_matrix(m);
            let m_label = integer_threshold(m);
            for l in 0..d {
                let acc = &st.pruned[l];
                checks.push(IdentityCheck::new(
                    format!("pruned_mean M={m_label} i={} l={}", i + 1, l + 1),
                    acc.mean(),
                    oracle[(l, i)],
                    acc.std_error(),
                ));
            }
            for j in 0..d {
                for l in 0..d {
                    let k = j * d + l;
                    let lhs = st.pair[k].mean();
                    // N - S_l P is a sum of centred indicators, one per type-l
                    // individual, so its variance is E S_l P (1 - P); the
                    // sample variance is useless when no event was seen.
                    let p = model.law(j, l).survival(m);
                    let se = (st.pruned[l].mean() * p * (1.0 - p) / st.diff[k].n.max(1) as f64).sqrt();
                    checks.push(IdentityCheck::new(
                        format!("appendix M={m_label} i={} j={} l={}", i + 1, j + 1, l + 1),
                        lhs,
                        lhs - st.diff[k].mean(),
                        se,
                    ));
                }
            }
            for l in 0..d {
                for (name, a, b) in [
                    ("regeneration_first", &st.regen.first[l], &direct.first[l]),
                    ("regeneration_second", &st.regen.second[l], &direct.second[l]),
                ] {
                    let se = a.std_error().hypot(b.std_error());
                    checks.push(IdentityCheck::new(
                        format!("{name} M={m_label} i={} l={}", i + 1, l + 1),
                        a.mean(),
                        b.mean(),
                        se,
                    ));
                }
            }
        }
    }
    IdentityReport::new("identities", checks, censored)
}

//! Empirical law of the extracted type given that the cluster hits `nA`.

use std::collections::BTreeMap;

use serde::Serialize;

use super::MIN_HITS;
use crate::dims::DimSet;
use crate::error::{Error, Result};
use crate::exec;
use crate::geometry::{solve_ja, RareEventSet};
use crate::measures::GeneralizedType;
use crate::model::Model;
use crate::simulate::{sample_decomposition, Caps};
use crate::stream::{Seed, LANE_DECOMPOSITION};

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TypeFrequency {
    pub gtype: GeneralizedType,
    pub is_type: bool,
    pub count: u64,
    pub frequency: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TypeFrequencyReport {
    pub root: usize,
    pub jset: DimSet,
    pub n: u64,
    pub delta: f64,
    pub samples: u64,
    pub hits: u64,
    /// Decompositions that hit the node or depth cap.
    pub censored: u64,
    /// Most frequent first; ties in type order.
    pub frequencies: Vec<TypeFrequency>,
    /// Conditional mass of the types whose active set is `jset`.
    pub mass_on_jset: f64,
}

impl TypeFrequencyReport {
    pub fn frequency_of(&self, rows: &[DimSet]) -> f64 {
        self.frequencies
            .iter()
            .find(|f| f.gtype.rows() == rows)
            .map_or(0.0, |f| f.frequency)
    }
}

/// Runs `samples` decompositions at `(n, delta)` and tabulates the
/// generalized types of those whose reconstructed cluster lies in `nA`.
pub fn check_type_frequencies(
    model: &Model,
    root: usize,
    a: &RareEventSet,
    n: u64,
    delta: f64,
    samples: u64,
    seed: Seed,
) -> Result<TypeFrequencyReport> {
    if root >= model.dim() || a.dim() != model.dim() {
        return Err(Error::InvalidArgument("root or set dimension does not match the model".into()));
    }
    let ja = solve_ja(a, model)?;
    if !ja.bounded_away.bounded_away {
        return Err(Error::NotBoundedAway(ja.jset.to_string()));
    }
    let seed = seed.derive_str("types").derive(root as u64).derive(n);
    let caps = Caps::default();
    let parts = exec::map_blocks(samples, |range| {
        let mut table: BTreeMap<GeneralizedType, u64> = BTreeMap::new();
        let mut censored = 0u64;
        for idx in range {
            match sample_decomposition(model, root, n, delta, seed.key(idx, LANE_DECOMPOSITION), caps) {
                Ok(dec) => {
                    if a.contains_scaled(&dec.reconstructed, n as f64) {
                        *table.entry(dec.gtype).or_default() += 1;
                    }
                }
                Err(Error::CapExceeded { .. } | Error::DepthCapExceeded { .. }) => censored += 1,
                Err(e) => return Err(e),
            }
        }
        Ok((table, censored))
    });
    let mut table: BTreeMap<GeneralizedType, u64> = BTreeMap::new();
    let mut censored = 0;
    for part in parts {
        let (t, c) = part?;
        for (k, v) in t {
            *table.entry(k).or_default() += v;
        }
        censored += c;
    }
    let hits: u64 = table.values().sum();
    if hits < MIN_HITS {
        return Err(Error::InsufficientHits(format!(
            "{hits} of {samples} reconstructed clusters in nA at n = {n} (need {MIN_HITS})"
        )));
    }
    let mut frequencies: Vec<TypeFrequency> = table
        .into_iter()
        .map(|(gtype, count)| TypeFrequency {
            is_type: gtype.is_type(),
            frequency: count as f64 / hits as f64,
            gtype,
            count,
        })
        .collect();
    // stable: ties keep type order
    frequencies.sort_by_key(|f| std::cmp::Reverse(f.count));
    let mass_on_jset = frequencies
        .iter()
        .filter(|f| f.is_type && f.gtype.active_set() == ja.jset)
        .map(|f| f.frequency)
        .sum();
    Ok(TypeFrequencyReport {
        root,
        jset: ja.jset,
        n,
        delta,
        samples,
        hits,
        censored,
        frequencies,
        mass_on_jset,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::reference;

    #[test]
    fn barren_model_never_hits() {
        let a = RareEventSet::rect(&[1.0, 0.1], &[2.0, 0.4]).unwrap();
        let res = check_type_frequencies(&reference::barren(2), 0, &a, 8, 0.5, 1000, Seed(0));
        assert!(matches!(res, Err(Error::InsufficientHits(_))));
    }

    #[test]
    fn one_jump_set_is_driven_by_its_type() {
        let model = reference::r2();
        let a = RareEventSet::rect(&[1.0, 0.1], &[2.0, 0.4]).unwrap();
        let rep = check_type_frequencies(&model, 0, &a, 16, 0.5, 200_000, Seed(1)).unwrap();
        assert_eq!(rep.jset, DimSet::singleton(0));
        let total: f64 = rep.frequencies.iter().map(|f| f.frequency).sum();
        assert!((total - 1.0).abs() < 1e-12);
        assert!(rep.mass_on_jset > 0.5, "{rep:?}");
    }
}

//! Jump types, assignments and Monte Carlo evaluation of the limiting
//! measures `C^I` and `C_i^I`.
//!
//! A (generalized) type records which dimensions carry big jumps at each
//! depth of the recursive decomposition. For a type `I` with rows
//! `J_1, .., J_K` the limiting measure is
//!
//! ```text
//! C^I(A) = ∫ 1{ sum_{k,j} w_{k,j} s_j in A } prod_{k<K} g_{J_k <- J_{k+1}}(w_k) nu^I(dw)
//! ```
//!
//! with `nu^I` a product of power-law measures `alpha*(j) w^{-alpha*(j)-1} dw`.
//! Restricted to `w > delta` those are `delta^{-alpha*(j)}` times Pareto laws,
//! which gives the estimator.

use std::fmt;

use rand::Rng;
use serde::{Serialize, Serializer};

use crate::dims::DimSet;
use crate::error::{Error, Result};
use crate::exec;
use crate::geometry::{delta_bar, RareEventSet};
use crate::model::Model;
use crate::stats::MeanAccumulator;
use crate::stream::{Seed, LANE_MEASURE_BASE};

/// Rows of active dimensions per decomposition depth; every row nonempty.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Default)]
pub struct GeneralizedType {
    rows: Vec<DimSet>,
}

impl GeneralizedType {
    pub fn new(rows: Vec<DimSet>) -> Result<Self> {
        if rows.iter().any(|r| r.is_empty()) {
            return Err(Error::InvalidArgument("type rows must be nonempty".into()));
        }
        Ok(GeneralizedType { rows })
    }

    /// The depth-0 type.
    pub fn empty() -> Self {
        GeneralizedType { rows: Vec::new() }
    }

    pub fn rows(&self) -> &[DimSet] {
        &self.rows
    }

    pub fn depth(&self) -> usize {
        self.rows.len()
    }

    /// Union of all rows.
    pub fn active_set(&self) -> DimSet {
        self.rows.iter().fold(DimSet::EMPTY, |a, r| a.union(*r))
    }

    /// Singleton first row and no dimension active twice.
    pub fn is_type(&self) -> bool {
        if self.rows.is_empty() {
            return true;
        }
        if self.rows[0].len() != 1 {
            return false;
        }
        let total: usize = self.rows.iter().map(|r| r.len()).sum();
        total == self.active_set().len()
    }

    /// `1 + sum_k sum_{j in row k} (alpha*(j) - 1)`, and `0` at depth 0.
    pub fn tilde_alpha(&self, model: &Model) -> f64 {
        if self.rows.is_empty() {
            return 0.0;
        }
        1.0 + self
            .rows
            .iter()
            .flat_map(|r| r.iter())
            .map(|j| model.alpha_star()[j] - 1.0)
            .sum::<f64>()
    }
}

impl fmt::Display for GeneralizedType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str("(")?;
        for (k, r) in self.rows.iter().enumerate() {
            if k > 0 {
                f.write_str(",")?;
            }
            write!(f, "{r}")?;
        }
        f.write_str(")")
    }
}

impl Serialize for GeneralizedType {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.collect_seq(self.rows.iter())
    }
}

/// A generalized type with a singleton first row and disjoint rows.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
#[serde(transparent)]
pub struct JumpType(GeneralizedType);

impl JumpType {
    pub fn new(rows: Vec<DimSet>) -> Result<Self> {
        let g = GeneralizedType::new(rows)?;
        if !g.is_type() {
            return Err(Error::InvalidArgument(format!("{g} is not a type")));
        }
        Ok(JumpType(g))
    }

    pub fn generalized(&self) -> &GeneralizedType {
        &self.0
    }

    pub fn rows(&self) -> &[DimSet] {
        self.0.rows()
    }

    pub fn depth(&self) -> usize {
        self.0.depth()
    }

    pub fn active_set(&self) -> DimSet {
        self.0.active_set()
    }

    /// The unique dimension of the first row.
    pub fn first(&self) -> Option<usize> {
        self.0.rows.first().and_then(|r| r.first())
    }
}

impl fmt::Display for JumpType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        self.0.fmt(f)
    }
}

/// Every ordered partition of `set` into nonempty blocks.
fn ordered_partitions(set: DimSet) -> Vec<Vec<DimSet>> {
    if set.is_empty() {
        return vec![Vec::new()];
    }
    let mut out = Vec::new();
    for block in set.subsets().filter(|b| !b.is_empty()) {
        for mut rest in ordered_partitions(set.difference(block)) {
            rest.insert(0, block);
            out.push(rest);
        }
    }
    out
}

/// All types whose active set is `set`, sorted by depth then rows.
pub fn enumerate_types(set: DimSet) -> Result<Vec<JumpType>> {
    if set.is_empty() {
        return Err(Error::EmptySet);
    }
    let mut out = Vec::new();
    for first in set.iter() {
        let head = DimSet::singleton(first);
        for rest in ordered_partitions(set.difference(head)) {
            let mut rows = vec![head];
            rows.extend(rest);
            out.push(JumpType(GeneralizedType { rows }));
        }
    }
    out.sort_by(|a, b| a.depth().cmp(&b.depth()).then_with(|| a.rows().cmp(b.rows())));
    Ok(out)
}

/// All assignments of `target` to `source`: disjoint families
/// `{J(i) : i in source}` covering `target`, listed parallel to
/// `source.iter()`.
pub fn enumerate_assignments(source: DimSet, target: DimSet) -> Vec<Vec<DimSet>> {
    let sources: Vec<usize> = source.iter().collect();
    let targets: Vec<usize> = target.iter().collect();
    if sources.is_empty() {
        return if targets.is_empty() { vec![Vec::new()] } else { Vec::new() };
    }
    let m = sources.len();
    let total = m.checked_pow(targets.len() as u32).expect("assignment count overflow");
    (0..total)
        .map(|mut code| {
            let mut parts = vec![DimSet::EMPTY; m];
            for &j in &targets {
                parts[code % m].insert(j);
                code /= m;
            }
            parts
        })
        .collect()
}

/// `g_{I <- J}(w)` by enumeration of assignments; `w` is parallel to
/// `source.iter()`.
pub fn g_value(source: DimSet, target: DimSet, w: &[f64], model: &Model) -> f64 {
    let sources: Vec<usize> = source.iter().collect();
    assert_eq!(sources.len(), w.len(), "one weight per source index");
    enumerate_assignments(source, target)
        .iter()
        .map(|parts| {
            parts
                .iter()
                .zip(&sources)
                .zip(w)
                .map(|((part, &i), wi)| {
                    part.iter()
                        .map(|j| wi * model.s_bar(i, model.l_star()[j]))
                        .product::<f64>()
                })
                .product::<f64>()
        })
        .sum()
}

/// `g_{I <- J}(w)` in product form: summing over assignments is summing
/// over functions `J -> I`, which factorises into
/// `prod_{j in J} sum_{i in I} w_i s_{i, l*(j)}`.
pub fn g_value_factorized(source: DimSet, target: DimSet, w: &[f64], model: &Model) -> f64 {
    target
        .iter()
        .map(|j| {
            source
                .iter()
                .zip(w)
                .map(|(i, wi)| wi * model.s_bar(i, model.l_star()[j]))
                .sum::<f64>()
        })
        .product()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct MeasureEstimate {
    pub value: f64,
    pub std_error: f64,
    pub samples: u64,
    pub delta: f64,
}

/// How the Pareto truncation is chosen.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum DeltaPolicy {
    /// Half the geometric threshold from [`delta_bar`].
    Auto,
    Fixed(f64),
}

/// Monte Carlo estimate of `C^I(A)` with Pareto truncation `delta`.
///
/// `stream_slot` separates the random streams of different types drawn
/// under the same seed.
pub fn estimate_ci(
    ty: &JumpType,
    a: &RareEventSet,
    model: &Model,
    delta: f64,
    samples: u64,
    seed: Seed,
    stream_slot: u32,
) -> Result<MeasureEstimate> {
    if ty.depth() == 0 {
        return Err(Error::DepthZeroType);
    }
    if !(delta > 0.0 && delta.is_finite()) {
        return Err(Error::ZeroDelta);
    }
    let d = model.dim();
    let alpha = model.alpha_star();
    // flattened (row, dimension) slots
    let slots: Vec<(usize, usize)> = ty
        .rows()
        .iter()
        .enumerate()
        .flat_map(|(k, r)| r.iter().map(move |j| (k, j)))
        .collect();
    let inv_alpha: Vec<f64> = slots.iter().map(|&(_, j)| 1.0 / alpha[j]).collect();
    let scale: f64 = slots.iter().map(|&(_, j)| delta.powf(-alpha[j])).product();
    let gens: Vec<Vec<f64>> = (0..d).map(|j| model.expected_cluster(j)).collect();
    let rows = ty.rows().to_vec();
    let lane = LANE_MEASURE_BASE + stream_slot;

    let parts = exec::map_blocks(samples, |range| {
        let mut acc = MeanAccumulator::default();
        let mut w = vec![0.0; slots.len()];
        let mut x = vec![0.0; d];
        let mut row_w: Vec<f64> = Vec::with_capacity(d);
        for idx in range {
            let mut rng = seed.key(idx, lane).rng();
            x.fill(0.0);
            for (s, &(_, j)) in slots.iter().enumerate() {
                let u: f64 = rng.random();
                w[s] = delta * (1.0 - u).powf(-inv_alpha[s]);
                for (xk, gk) in x.iter_mut().zip(&gens[j]) {
                    *xk += w[s] * gk;
                }
            }
            if !a.contains(&x) {
                acc.push(0.0);
                continue;
            }
            let mut value = 1.0;
            let mut offset = 0;
            for k in 0..rows.len().saturating_sub(1) {
                let len = rows[k].len();
                row_w.clear();
                row_w.extend_from_slice(&w[offset..offset + len]);
                value *= g_value_factorized(rows[k], rows[k + 1], &row_w, model);
                offset += len;
            }
            acc.push(value);
        }
        acc
    });
    let acc = parts.into_iter().fold(MeanAccumulator::default(), |a, b| a.merge(&b));
    Ok(MeasureEstimate {
        value: scale * acc.mean(),
        std_error: scale * acc.std_error(),
        samples,
        delta,
    })
}

/// Estimate of one type's contribution to the total.
#[derive(Debug, Clone, Serialize)]
pub struct TypeContribution {
    pub rows: JumpType,
    pub c: MeasureEstimate,
    /// `s_{i, l*(j_1)} C^I(A)`.
    pub estimate: f64,
    pub se: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct TotalEstimate {
    pub root: usize,
    pub jset: DimSet,
    pub per_type: Vec<TypeContribution>,
    pub value: f64,
    pub std_error: f64,
    pub delta: f64,
    /// The geometric threshold; `None` when the cone misses the set.
    pub epsilon_bar: Option<f64>,
    /// Set when a fixed `delta` exceeds the geometric threshold, where the
    /// estimator may miss mass.
    pub delta_warning: bool,
    pub samples: u64,
}

/// Resolves the truncation for `set` under `policy`; returns
/// `(delta, epsilon_bar, warning)`.
pub fn resolve_delta(
    a: &RareEventSet,
    set: DimSet,
    model: &Model,
    policy: DeltaPolicy,
) -> Result<(f64, Option<f64>, bool)> {
    let eps = delta_bar(a, set, model)?;
    match policy {
        DeltaPolicy::Auto => Ok((eps.map_or(0.0, |e| 0.5 * e), eps, false)),
        DeltaPolicy::Fixed(delta) => {
            if !(delta > 0.0 && delta.is_finite()) {
                return Err(Error::ZeroDelta);
            }
            Ok((delta, eps, eps.is_some_and(|e| delta > e)))
        }
    }
}

/// `sum_{I : active set = J} s_{i, l*(j_1^I)} C^I(A)`, with independent
/// streams per type and standard errors combined in quadrature.
pub fn estimate_c_total(
    root: usize,
    set: DimSet,
    a: &RareEventSet,
    model: &Model,
    policy: DeltaPolicy,
    samples: u64,
    seed: Seed,
) -> Result<TotalEstimate> {
    let types = enumerate_types(set)?;
    let (delta, epsilon_bar, delta_warning) = resolve_delta(a, set, model, policy)?;
    let mut per_type = Vec::with_capacity(types.len());
    let (mut value, mut var) = (0.0, 0.0);
    for (slot, ty) in types.into_iter().enumerate() {
        let c = if epsilon_bar.is_none() {
            // cone misses the set: the indicator never fires
            MeasureEstimate {
                value: 0.0,
                std_error: 0.0,
                samples,
                delta,
            }
        } else {
            estimate_ci(&ty, a, model, delta, samples, seed, slot as u32)?
        };
        let j1 = ty.first().expect("depth >= 1");
        let weight = model.s_bar(root, model.l_star()[j1]);
        value += weight * c.value;
        var += (weight * c.std_error).powi(2);
        per_type.push(TypeContribution {
            rows: ty,
            estimate: weight * c.value,
            se: weight * c.std_error,
            c,
        });
    }
    Ok(TotalEstimate {
        root,
        jset: set,
        per_type,
        value,
        std_error: var.sqrt(),
        delta,
        epsilon_bar,
        delta_warning,
        samples,
    })
}

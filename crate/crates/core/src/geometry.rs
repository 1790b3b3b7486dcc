//! Cones spanned by expected clusters, rare-event sets and the discrete
//! optimiser `J(A)`.
//!
//! The cone of `J` is `{sum_{i in J} w_i s_i : w >= 0}`. Rare-event sets are
//! finite unions of closed boxes bounded away from the origin, so every
//! question about them reduces to a few small linear programs. Distances are
//! in the L1 norm throughout.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::dims::DimSet;
use crate::error::{Error, Result};
use crate::lp::{Lp, LpOutcome, Relation};
use crate::model::Model;

/// Two cone costs closer than this are considered tied.
pub const ALPHA_TIE_TOLERANCE: f64 = 1e-12;

/// Closed axis-aligned box `[lo, hi]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Rect {
    pub lo: Vec<f64>,
    pub hi: Vec<f64>,
}

impl Rect {
    pub fn new(lo: Vec<f64>, hi: Vec<f64>) -> Self {
        Rect { lo, hi }
    }

    #[inline]
    pub fn contains(&self, x: &[f64]) -> bool {
        x.iter()
            .zip(self.lo.iter().zip(&self.hi))
            .all(|(v, (lo, hi))| *lo <= *v && *v <= *hi)
    }

    pub fn center(&self) -> Vec<f64> {
        self.lo.iter().zip(&self.hi).map(|(a, b)| 0.5 * (a + b)).collect()
    }
}

/// A finite union of closed boxes in the positive orthant, bounded away
/// from the origin.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RareEventSet {
    boxes: Vec<Rect>,
}

#[derive(Deserialize)]
struct SetFile {
    boxes: Vec<Rect>,
}

impl RareEventSet {
    pub fn new(boxes: Vec<Rect>) -> Result<Self> {
        let Some(first) = boxes.first() else {
            return Err(Error::InvalidSet("no boxes".into()));
        };
        let d = first.lo.len();
        if d == 0 {
            return Err(Error::InvalidSet("zero-dimensional box".into()));
        }
        for (k, b) in boxes.iter().enumerate() {
            if b.lo.len() != d || b.hi.len() != d {
                return Err(Error::InvalidSet(format!("box {k}: expected {d} coordinates")));
            }
            for (lo, hi) in b.lo.iter().zip(&b.hi) {
                if !(lo.is_finite() && hi.is_finite() && 0.0 <= *lo && lo <= hi) {
                    return Err(Error::InvalidSet(format!(
                        "box {k}: need 0 <= lo <= hi < inf, got [{lo}, {hi}]"
                    )));
                }
            }
            if b.lo.iter().sum::<f64>() <= 0.0 {
                return Err(Error::InvalidSet(format!("box {k} touches the origin")));
            }
        }
        Ok(RareEventSet { boxes })
    }

    /// A single box.
    pub fn rect(lo: &[f64], hi: &[f64]) -> Result<Self> {
        Self::new(vec![Rect::new(lo.to_vec(), hi.to_vec())])
    }

    pub fn from_json_str(text: &str) -> Result<Self> {
        let file: SetFile = serde_json::from_str(text)?;
        Self::new(file.boxes)
    }

    pub fn from_path(path: impl AsRef<Path>) -> Result<Self> {
        Self::from_json_str(&std::fs::read_to_string(path)?)
    }

    pub fn dim(&self) -> usize {
        self.boxes[0].lo.len()
    }

    pub fn boxes(&self) -> &[Rect] {
        &self.boxes
    }

    #[inline]
    pub fn contains(&self, x: &[f64]) -> bool {
        self.boxes.iter().any(|b| b.contains(x))
    }

    /// Does `x / n` lie in the set?
    #[inline]
    pub fn contains_scaled(&self, x: &[u64], n: f64) -> bool {
        self.boxes.iter().any(|b| {
            x.iter()
                .zip(b.lo.iter().zip(&b.hi))
                .all(|(&v, (lo, hi))| {
                    let y = v as f64 / n;
                    *lo <= y && y <= *hi
                })
        })
    }

    pub fn scaled(&self, a: f64) -> Self {
        let boxes = self
            .boxes
            .iter()
            .map(|b| Rect::new(b.lo.iter().map(|v| v * a).collect(), b.hi.iter().map(|v| v * a).collect()))
            .collect();
        RareEventSet { boxes }
    }

    /// L1 distance from the origin.
    pub fn origin_distance(&self) -> f64 {
        self.boxes
            .iter()
            .map(|b| b.lo.iter().sum::<f64>())
            .fold(f64::INFINITY, f64::min)
    }

    fn check_dim(&self, model: &Model) -> Result<()> {
        if self.dim() != model.dim() {
            return Err(Error::InvalidSet(format!(
                "set has dimension {}, model {}",
                self.dim(),
                model.dim()
            )));
        }
        Ok(())
    }
}

/// Polar coordinates with respect to the L1 norm.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PolarPoint {
    pub r: f64,
    pub theta: Vec<f64>,
}

pub fn polar(x: &[f64]) -> Result<PolarPoint> {
    if let Some((index, &value)) = x.iter().enumerate().find(|(_, v)| v.is_nan() || **v < 0.0) {
        return Err(Error::NegativeCoordinate { index, value });
    }
    let r: f64 = x.iter().sum();
    let theta = if r > 0.0 {
        x.iter().map(|v| v / r).collect()
    } else {
        let mut e = vec![0.0; x.len()];
        if let Some(first) = e.first_mut() {
            *first = 1.0;
        }
        e
    };
    Ok(PolarPoint { r, theta })
}

/// A point of a cone with its generating weights.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ConeWitness {
    pub subset: DimSet,
    /// One weight per element of `subset`, in increasing index order.
    pub weights: Vec<f64>,
    pub point: Vec<f64>,
    /// Index of the box the point lies in.
    pub box_index: usize,
}

fn generators(model: &Model, set: DimSet) -> Vec<Vec<f64>> {
    set.iter().map(|i| model.expected_cluster(i)).collect()
}

fn cone_point(gens: &[Vec<f64>], w: &[f64], d: usize) -> Vec<f64> {
    let mut x = vec![0.0; d];
    for (g, wi) in gens.iter().zip(w) {
        for (xk, gk) in x.iter_mut().zip(g) {
            *xk += wi * gk;
        }
    }
    x
}

/// `min_{w >= 0} |x - sum w_i s_i|_1` and the minimising weights.
pub fn cone_distance_l1(x: &[f64], set: DimSet, model: &Model) -> Result<(f64, Vec<f64>)> {
    let d = model.dim();
    if x.len() != d {
        return Err(Error::InvalidArgument(format!("point has {} coordinates, model {d}", x.len())));
    }
    let gens = generators(model, set);
    let m = gens.len();
    // variables: w (m), u (d), v (d); x - S w = u - v
    let mut lp = Lp::new(m + 2 * d);
    for k in 0..2 * d {
        lp.set_cost(m + k, 1.0);
    }
    for k in 0..d {
        let mut terms: Vec<(usize, f64)> = gens.iter().enumerate().map(|(a, g)| (a, g[k])).collect();
        terms.push((m + k, 1.0));
        terms.push((m + d + k, -1.0));
        lp.constraint_sparse(&terms, Relation::Eq, x[k]);
    }
    let sol = lp
        .solve()?
        .optimal()
        .ok_or_else(|| Error::LpNonConvergence("distance LP reported infeasible".into()))?;
    Ok((sol.objective.max(0.0), sol.x[..m].to_vec()))
}

/// Witness LP on one box: the cone point in the box closest to its centre.
fn box_witness(rect: &Rect, gens: &[Vec<f64>], d: usize) -> Result<Option<Vec<f64>>> {
    let m = gens.len();
    let centre = rect.center();
    let mut lp = Lp::new(m + 2 * d);
    for k in 0..2 * d {
        lp.set_cost(m + k, 1.0);
    }
    for k in 0..d {
        let row: Vec<(usize, f64)> = gens.iter().enumerate().map(|(a, g)| (a, g[k])).collect();
        let mut terms = row.clone();
        terms.push((m + k, 1.0));
        terms.push((m + d + k, -1.0));
        lp.constraint_sparse(&terms, Relation::Eq, centre[k]);
        lp.constraint_sparse(&row, Relation::Ge, rect.lo[k]);
        lp.constraint_sparse(&row, Relation::Le, rect.hi[k]);
    }
    Ok(lp.solve()?.optimal().map(|s| s.x[..m].to_vec()))
}

/// Whether the cone of `set` meets `a`, with a witness point when it does.
pub fn set_intersects_cone(a: &RareEventSet, set: DimSet, model: &Model) -> Result<Option<ConeWitness>> {
    a.check_dim(model)?;
    if set.is_empty() {
        // the cone is the origin, which no admissible set contains
        return Ok(None);
    }
    let d = model.dim();
    let gens = generators(model, set);
    for (box_index, rect) in a.boxes().iter().enumerate() {
        if let Some(weights) = box_witness(rect, &gens, d)? {
            let point = cone_point(&gens, &weights, d);
            return Ok(Some(ConeWitness {
                subset: set,
                weights,
                point,
                box_index,
            }));
        }
    }
    Ok(None)
}

/// L1 distance between the set and the cone of `set`.
pub fn set_cone_distance(a: &RareEventSet, set: DimSet, model: &Model) -> Result<f64> {
    a.check_dim(model)?;
    if set.is_empty() {
        return Ok(a.origin_distance());
    }
    let d = model.dim();
    let gens = generators(model, set);
    let m = gens.len();
    let mut best = f64::INFINITY;
    for rect in a.boxes() {
        // variables: w (m), y (d) in the box, u (d), v (d); y - S w = u - v
        let mut lp = Lp::new(m + 3 * d);
        for k in 0..2 * d {
            lp.set_cost(m + d + k, 1.0);
        }
        for k in 0..d {
            let mut terms: Vec<(usize, f64)> = gens.iter().enumerate().map(|(a, g)| (a, -g[k])).collect();
            terms.push((m + k, 1.0));
            terms.push((m + d + k, -1.0));
            terms.push((m + 2 * d + k, 1.0));
            lp.constraint_sparse(&terms, Relation::Eq, 0.0);
            lp.constraint_sparse(&[(m + k, 1.0)], Relation::Ge, rect.lo[k]);
            lp.constraint_sparse(&[(m + k, 1.0)], Relation::Le, rect.hi[k]);
        }
        let sol = lp
            .solve()?
            .optimal()
            .ok_or_else(|| Error::LpNonConvergence("box distance LP reported infeasible".into()))?;
        best = best.min(sol.objective.max(0.0));
    }
    Ok(best)
}

/// Verdict of the bounded-away test for one cone subset.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BoundedAway {
    pub bounded_away: bool,
    /// Smallest L1 distance between the set and a cheaper cone (including
    /// the origin).
    pub distance: f64,
    /// A cheaper cone meeting the set, if any.
    pub blocking: Option<DimSet>,
}

/// Is `a` disjoint from every cone strictly cheaper than or as cheap as
/// `set` (other than `set` itself)?
pub fn is_bounded_away(a: &RareEventSet, set: DimSet, model: &Model) -> Result<BoundedAway> {
    a.check_dim(model)?;
    let target = model.alpha_of(set);
    let mut distance = a.origin_distance();
    let mut blocking = None;
    for other in DimSet::nonempty_subsets(model.dim()) {
        if other == set || model.alpha_of(other) > target {
            continue;
        }
        if blocking.is_none() && set_intersects_cone(a, other, model)?.is_some() {
            blocking = Some(other);
        }
        distance = distance.min(set_cone_distance(a, other, model)?);
    }
    if blocking.is_some() {
        distance = 0.0;
    }
    Ok(BoundedAway {
        bounded_away: blocking.is_none() && distance > 0.0,
        distance,
        blocking,
    })
}

/// Solution of the discrete optimisation `J(A) = argmin { alpha(J) : cone(J) meets A }`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct JaSolution {
    pub jset: DimSet,
    pub alpha: f64,
    pub witness: ConeWitness,
    pub bounded_away: BoundedAway,
}

pub fn solve_ja(a: &RareEventSet, model: &Model) -> Result<JaSolution> {
    a.check_dim(model)?;
    let mut hits: Vec<(f64, DimSet, ConeWitness)> = Vec::new();
    for set in DimSet::nonempty_subsets(model.dim()) {
        if let Some(w) = set_intersects_cone(a, set, model)? {
            hits.push((model.alpha_of(set), set, w));
        }
    }
    hits.sort_by(|x, y| x.0.total_cmp(&y.0).then(x.1.cmp(&y.1)));
    let mut it = hits.into_iter();
    let Some((alpha, jset, witness)) = it.next() else {
        return Err(Error::NoConeIntersects);
    };
    if let Some((alpha2, second, _)) = it.next() {
        if alpha2 - alpha <= ALPHA_TIE_TOLERANCE {
            return Err(Error::NonUniqueArgmin {
                first: jset.to_string(),
                second: second.to_string(),
                alpha,
            });
        }
    }
    let bounded_away = is_bounded_away(a, jset, model)?;
    Ok(JaSolution {
        jset,
        alpha,
        witness,
        bounded_away,
    })
}

/// Smallest weight any coordinate of `set` needs to place a cone point in
/// `a`: `min` over feasible boxes and `j in set` of `min w_j` subject to
/// `sum w_i s_i` in the box. `None` when the cone misses `a`.
pub fn delta_bar(a: &RareEventSet, set: DimSet, model: &Model) -> Result<Option<f64>> {
    a.check_dim(model)?;
    if set.is_empty() {
        return Err(Error::EmptySet);
    }
    let d = model.dim();
    let gens = generators(model, set);
    let m = gens.len();
    let mut best: Option<f64> = None;
    for rect in a.boxes() {
        for target in 0..m {
            let mut lp = Lp::new(m);
            lp.set_cost(target, 1.0);
            for k in 0..d {
                let row: Vec<(usize, f64)> = gens.iter().enumerate().map(|(a, g)| (a, g[k])).collect();
                lp.constraint_sparse(&row, Relation::Ge, rect.lo[k]);
                lp.constraint_sparse(&row, Relation::Le, rect.hi[k]);
            }
            match lp.solve()? {
                LpOutcome::Infeasible => break,
                LpOutcome::Optimal(s) => {
                    let v = s.objective.max(0.0);
                    best = Some(best.map_or(v, |b: f64| b.min(v)));
                }
            }
        }
    }
    Ok(best)
}

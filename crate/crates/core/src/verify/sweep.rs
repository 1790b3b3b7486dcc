//! Crude Monte Carlo sweeps of `P(S_i / n in A)` over a list of `n`.

use serde::Serialize;

use super::MIN_HITS;
use crate::dims::DimSet;
use crate::error::{Error, Result};
use crate::exec;
use crate::geometry::{solve_ja, RareEventSet};
use crate::measures::TotalEstimate;
use crate::model::Model;
use crate::simulate::{grow_cluster, Forest, StreamSource, DEFAULT_NODE_CAP};
use crate::stats::{binomial, fit_line, LineFit};
use crate::stream::{Seed, LANE_TREE};

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepRow {
    pub n: u64,
    pub samples: u64,
    pub hits: u64,
    pub p_hat: f64,
    pub se: f64,
    pub censored: u64,
    pub lambda: f64,
    /// `p_hat / lambda`.
    pub ratio: f64,
}

/// `p_hat / lambda` at the largest `n` with at least 100 hits, against the
/// limiting-measure estimate.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RatioCheck {
    pub n: u64,
    pub ratio: f64,
    pub c_hat: f64,
    pub within_factor_3: bool,
}

#[derive(Debug, Clone, Serialize)]
pub struct SweepResult {
    pub experiment: String,
    pub root: usize,
    /// The cone subset whose rate normalizes the rows.
    pub jset: DimSet,
    /// `alpha(jset)`; the predicted slope is `-alpha`.
    pub alpha: f64,
    pub rows: Vec<SweepRow>,
    /// Least-squares fit of `ln p_hat` on `ln n` over rows with hits;
    /// `None` with fewer than three such rows.
    pub fit: Option<LineFit>,
    /// Some row has fewer than [`MIN_HITS`] hits.
    pub insufficient_hits: bool,
    pub measure: Option<TotalEstimate>,
}

impl SweepResult {
    #[allow(clippy::too_many_arguments)]
    fn build(
        experiment: &str,
        root: usize,
        jset: DimSet,
        model: &Model,
        n_list: &[u64],
        samples: u64,
        counts: Vec<u64>,
        censored: u64,
    ) -> Result<Self> {
        let mut rows = Vec::with_capacity(n_list.len());
        for (&n, hits) in n_list.iter().zip(counts) {
            let (p_hat, se) = binomial(hits, samples);
            let lambda = model.rate_lambda(jset, n as f64)?;
            rows.push(SweepRow {
                n,
                samples,
                hits,
                p_hat,
                se,
                censored,
                lambda,
                ratio: if lambda > 0.0 { p_hat / lambda } else { 0.0 },
            });
        }
        let (x, y): (Vec<f64>, Vec<f64>) = rows
            .iter()
            .filter(|r| r.hits > 0)
            .map(|r| ((r.n as f64).ln(), r.p_hat.ln()))
            .unzip();
        let fit = if x.len() >= 3 { Some(fit_line(&x, &y)?) } else { None };
        Ok(SweepResult {
            experiment: experiment.to_string(),
            root,
            jset,
            alpha: model.alpha_of(jset),
            insufficient_hits: rows.iter().any(|r| r.hits < MIN_HITS),
            rows,
            fit,
            measure: None,
        })
    }

    /// Fails with [`Error::InsufficientHits`] when the result is flagged.
    pub fn require_hits(&self) -> Result<&Self> {
        match self.rows.iter().find(|r| r.hits < MIN_HITS) {
            Some(r) => Err(Error::InsufficientHits(format!(
                "{} hits at n = {} (need {MIN_HITS})",
                r.hits, r.n
            ))),
            None => Ok(self),
        }
    }

    pub fn slope(&self) -> Option<f64> {
        self.fit.map(|f| f.slope)
    }

    /// Is the fitted decay slower than the `-alpha` reference?
    pub fn slope_above_target(&self) -> Option<bool> {
        self.fit.map(|f| f.slope > -self.alpha)
    }

    pub fn ratio_check(&self) -> Option<RatioCheck> {
        let c_hat = self.measure.as_ref()?.value;
        let row = self.rows.iter().rev().find(|r| r.hits >= 100)?;
        let within = c_hat > 0.0 && row.ratio <= 3.0 * c_hat && row.ratio >= c_hat / 3.0;
        Some(RatioCheck {
            n: row.n,
            ratio: row.ratio,
            c_hat,
            within_factor_3: within,
        })
    }
}

fn check_n_list(n_list: &[u64]) -> Result<()> {
    if n_list.len() < 3 {
        return Err(Error::InvalidArgument(format!(
            "a sweep needs at least 3 values of n, got {}",
            n_list.len()
        )));
    }
    if n_list[0] == 0 || n_list.windows(2).any(|w| w[0] >= w[1]) {
        return Err(Error::InvalidArgument("n values must be positive and increasing".into()));
    }
    Ok(())
}

/// Hit counts per `n` of `hit(totals, n)` over `samples` direct clusters,
/// and the number of censored clusters (never counted as hits).
///
/// Every `n` is evaluated on the same clusters.
pub fn sweep_with<P>(model: &Model, root: usize, n_list: &[u64], samples: u64, seed: Seed, hit: P) -> (Vec<u64>, u64)
where
    P: Fn(&[u64], f64) -> bool + Sync,
{
    let k = n_list.len();
    let parts = exec::map_blocks(samples, |range| {
        let mut forest = Forest::new(model.dim());
        let mut hits = vec![0u64; k];
        let mut censored = 0u64;
        for idx in range {
            let mut src = StreamSource::new(seed.key(idx, LANE_TREE));
            grow_cluster(model, root, None, &mut src, DEFAULT_NODE_CAP, &mut forest);
            if forest.censored {
                censored += 1;
                continue;
            }
            for (h, &n) in hits.iter_mut().zip(n_list) {
                *h += hit(&forest.totals, n as f64) as u64;
            }
        }
        (hits, censored)
    });
    let mut hits = vec![0u64; k];
    let mut censored = 0;
    for (h, c) in parts {
        hits.iter_mut().zip(h).for_each(|(a, b)| *a += b);
        censored += c;
    }
    (hits, censored)
}

/// Estimates `P(S_root / n in A)` for each `n` and fits the log-log slope.
pub fn sweep_probability(
    model: &Model,
    root: usize,
    a: &RareEventSet,
    n_list: &[u64],
    samples: u64,
    seed: Seed,
) -> Result<SweepResult> {
    check_n_list(n_list)?;
    if root >= model.dim() || a.dim() != model.dim() {
        return Err(Error::InvalidArgument("root or set dimension does not match the model".into()));
    }
    let ja = solve_ja(a, model)?;
    if !ja.bounded_away.bounded_away {
        return Err(Error::NotBoundedAway(format!(
            "{} is blocked by {}",
            ja.jset,
            ja.bounded_away.blocking.map_or("the origin".to_string(), |b| b.to_string())
        )));
    }
    let seed = seed.derive_str("prob").derive(root as u64);
    let (hits, censored) = sweep_with(model, root, n_list, samples, seed, |x, n| a.contains_scaled(x, n));
    SweepResult::build("prob", root, ja.jset, model, n_list, samples, hits, censored)
}

/// Complement of the vertical tube of radius `r` around the ray through
/// `s_1`: `x1 = w s_11` and `|x2 - w s_12| > r` for some `w >= 0`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TubeSet {
    pub r: f64,
    pub s11: f64,
    pub s12: f64,
}

impl TubeSet {
    pub fn new(model: &Model, r: f64) -> Self {
        TubeSet {
            r,
            s11: model.s_bar(0, 0),
            s12: model.s_bar(0, 1),
        }
    }

    #[inline]
    pub fn contains(&self, x: &[f64]) -> bool {
        let w = x[0] / self.s11;
        (x[1] - w * self.s12).abs() > self.r
    }

    #[inline]
    pub fn contains_scaled(&self, x: &[u64], n: f64) -> bool {
        self.contains(&[x[0] as f64 / n, x[1] as f64 / n])
    }
}

/// Sweep of `P(S_1 / n in A(r))` for the tube complement `A(r)`, with rows
/// normalized by the naive rate of the cone through `s_2`.
pub fn counterexample_experiment(model: &Model, r: f64, n_list: &[u64], samples: u64, seed: Seed) -> Result<SweepResult> {
    check_n_list(n_list)?;
    if model.dim() != 2 {
        return Err(Error::Precondition(format!("needs d = 2, got {}", model.dim())));
    }
    let al = |i: usize, j: usize| model.law(i, j).alpha();
    if !(al(0, 1) > al(0, 0) && al(0, 0) > 2.0) {
        return Err(Error::Precondition(format!(
            "need alpha_(1<-2) > alpha_(1<-1) > 2, got {} and {}",
            al(0, 1),
            al(0, 0)
        )));
    }
    if al(1, 0).min(al(1, 1)) <= 2.0 * al(0, 0) {
        return Err(Error::Precondition(format!(
            "need min(alpha_(2<-1), alpha_(2<-2)) > 2 alpha_(1<-1) = {}",
            2.0 * al(0, 0)
        )));
    }
    if model.law(1, 0).survival(0.0) >= 1.0 {
        return Err(Error::Precondition("need P(B_(2<-1) = 0) > 0".into()));
    }
    if !(r > 0.0 && r.is_finite()) {
        return Err(Error::InvalidArgument(format!("tube radius {r} must be positive")));
    }
    let tube = TubeSet::new(model, r);
    let seed = seed.derive_str("counterexample");
    let (hits, censored) = sweep_with(model, 0, n_list, samples, seed, |x, n| tube.contains_scaled(x, n));
    SweepResult::build(
        "counterexample",
        0,
        DimSet::singleton(1),
        model,
        n_list,
        samples,
        hits,
        censored,
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::reference;

    #[test]
    fn rows_are_binomial() {
        let model = reference::r2();
        let a = RareEventSet::rect(&[1.0, 0.1], &[2.0, 0.4]).unwrap();
        let res = sweep_probability(&model, 0, &a, &[1, 2, 3], 20_000, Seed(1)).unwrap();
        for r in &res.rows {
            assert!(r.hits <= r.samples);
            assert_eq!(r.p_hat, r.hits as f64 / r.samples as f64);
            assert_eq!(r.se, (r.p_hat * (1.0 - r.p_hat) / r.samples as f64).sqrt());
        }
    }

    #[test]
    fn n_list_is_checked() {
        let model = reference::r2();
        let a = RareEventSet::rect(&[1.0, 0.1], &[2.0, 0.4]).unwrap();
        assert!(sweep_probability(&model, 0, &a, &[8, 16], 10, Seed(0)).is_err());
        assert!(sweep_probability(&model, 0, &a, &[8, 8, 16], 10, Seed(0)).is_err());
    }

    #[test]
    fn typical_values_at_n_one() {
        // S_1 = (1, 0) with probability P(B_(1<-1) = 0) P(B_(2<-1) = 0)
        let model = reference::r2();
        let a = RareEventSet::rect(&[0.5, 0.0], &[1.5, 0.5]).unwrap();
        let (hits, _) = sweep_with(&model, 0, &[1, 2, 3], 100_000, Seed(2), |x, n| a.contains_scaled(x, n));
        let p0 = (1.0 - model.law(0, 0).activity()) * (1.0 - model.law(1, 0).activity());
        let p_hat = hits[0] as f64 / 1e5;
        assert!((p_hat - p0).abs() <= 5.0 * (p0 * (1.0 - p0) / 1e5).sqrt(), "{p_hat} vs {p0}");
    }

    #[test]
    fn counterexample_preconditions() {
        let tube = reference::tube();
        let res = counterexample_experiment(&tube, 1e9, &[2, 4, 8], 1000, Seed(0)).unwrap();
        assert!(res.insufficient_hits && res.require_hits().is_err());
        assert!(matches!(
            counterexample_experiment(&reference::r2(), 1.0, &[2, 4, 8], 10, Seed(0)),
            Err(Error::Precondition(_))
        ));
        let mut cfg = reference::tube_config();
        cfg.offspring[0][1] = crate::law::OffspringLaw::zeta_tail(5.0, 1.0).unwrap();
        let always = Model::new(cfg).unwrap();
        assert!(matches!(
            counterexample_experiment(&always, 1.0, &[2, 4, 8], 10, Seed(0)),
            Err(Error::Precondition(_))
        ));
    }
}

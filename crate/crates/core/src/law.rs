//! Regularly varying offspring laws.
//!
//! Two families are supported:
//!
//! * `zeta_tail`: `P(B = 0) = 1 - p`, `P(B = k) = p k^{-(alpha+1)} / zeta(alpha+1)`.
//!   Mean, survival function and sampler are all exact.
//! * `mixed_poisson`: with probability `p`, draw `W ~ Pareto(alpha, x_m)` and
//!   `B | W ~ Poisson(W phi)`; otherwise `B = 0`. This is the offspring law of a
//!   Hawkes cluster whose excitation mark is Pareto and whose kernel has mass
//!   `phi`.

use rand::Rng;
use rand_distr::{Distribution, Poisson};
use serde::{Deserialize, Serialize};
use statrs::function::gamma::gamma_lr;

use crate::error::{Error, Result};
use crate::numeric::{integrate, power_tail_sum, zeta};

/// Size of the precomputed inverse-CDF table for zeta-tail sampling.
pub const ZETA_TABLE_LEN: usize = 4096;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case")]
pub enum OffspringLaw {
    ZetaTail {
        alpha: f64,
        p: f64,
    },
    MixedPoisson {
        alpha: f64,
        p: f64,
        x_m: f64,
        phi: f64,
    },
}

impl OffspringLaw {
    pub fn zeta_tail(alpha: f64, p: f64) -> Result<Self> {
        let law = OffspringLaw::ZetaTail { alpha, p };
        law.check()?;
        Ok(law)
    }

    /// Zeta-tail law with activity chosen so that the mean equals `mean`.
    pub fn zeta_tail_with_mean(alpha: f64, mean: f64) -> Result<Self> {
        check_alpha(alpha)?;
        if !(mean.is_finite() && mean >= 0.0) {
            return Err(Error::InvalidLaw(format!("mean {mean} must be finite and >= 0")));
        }
        // The mean is linear in p, so the activity solves in closed form.
        let p = mean * zeta(alpha + 1.0) / zeta(alpha);
        if p > 1.0 {
            return Err(Error::InvalidLaw(format!(
                "mean {mean} unreachable for alpha {alpha}: needs activity {p} > 1"
            )));
        }
        Self::zeta_tail(alpha, p)
    }

    pub fn mixed_poisson(alpha: f64, p: f64, x_m: f64, phi: f64) -> Result<Self> {
        let law = OffspringLaw::MixedPoisson { alpha, p, x_m, phi };
        law.check()?;
        Ok(law)
    }

    /// Validates parameters; deserialized laws must pass through here.
    pub fn check(&self) -> Result<()> {
        check_alpha(self.alpha())?;
        let p = self.activity();
        if !(0.0..=1.0).contains(&p) {
            return Err(Error::InvalidLaw(format!("activity p = {p} outside [0, 1]")));
        }
        if let OffspringLaw::MixedPoisson { x_m, phi, .. } = *self {
            if !(x_m.is_finite() && x_m > 0.0) {
                return Err(Error::InvalidLaw(format!("pareto scale x_m = {x_m} must be > 0")));
            }
            if !(phi.is_finite() && phi > 0.0) {
                return Err(Error::InvalidLaw(format!("fertility mass phi = {phi} must be > 0")));
            }
        }
        Ok(())
    }

    /// Tail index.
    pub fn alpha(&self) -> f64 {
        match *self {
            OffspringLaw::ZetaTail { alpha, .. } | OffspringLaw::MixedPoisson { alpha, .. } => alpha,
        }
    }

    /// Activity `p`.
    pub fn activity(&self) -> f64 {
        match *self {
            OffspringLaw::ZetaTail { p, .. } | OffspringLaw::MixedPoisson { p, .. } => p,
        }
    }

    pub fn mean(&self) -> f64 {
        match *self {
            OffspringLaw::ZetaTail { alpha, p } => {
                if p == 0.0 {
                    0.0
                } else {
                    p * zeta(alpha) / zeta(alpha + 1.0)
                }
            }
            OffspringLaw::MixedPoisson { alpha, p, x_m, phi } => p * phi * x_m * alpha / (alpha - 1.0),
        }
    }

    /// `P(B > x)` for `x >= 0`.
    pub fn survival(&self, x: f64) -> f64 {
        debug_assert!(x >= 0.0);
        let p = self.activity();
        if p == 0.0 {
            return 0.0;
        }
        // B is integer valued: P(B > x) = P(B > floor(x)).
        let k = x.max(0.0).floor();
        if k >= u64::MAX as f64 {
            return 0.0;
        }
        let k = k as u64;
        match *self {
            OffspringLaw::ZetaTail { alpha, p } => {
                if k == 0 {
                    p
                } else {
                    let s = alpha + 1.0;
                    p * power_tail_sum(s, k + 1) / zeta(s)
                }
            }
            OffspringLaw::MixedPoisson { alpha, p, x_m, phi } => {
                p * mixed_poisson_unit_survival(alpha, x_m * phi, k)
            }
        }
    }

    /// `E[B 1{B <= m}]`.
    pub fn truncated_mean(&self, m: f64) -> f64 {
        if self.activity() == 0.0 || m < 1.0 {
            return 0.0;
        }
        let m = m.floor() as u64;
        match *self {
            OffspringLaw::ZetaTail { alpha, p } => {
                // mean minus the part above m
                p * (zeta(alpha) - power_tail_sum(alpha, m + 1)) / zeta(alpha + 1.0)
            }
            OffspringLaw::MixedPoisson { .. } => {
                // E[B; B <= m] = sum_{k<m} P(B > k) - m P(B > m)
                let head: f64 = (0..m).map(|k| self.survival(k as f64)).sum();
                head - m as f64 * self.survival(m as f64)
            }
        }
    }

    /// Precomputes whatever the law needs for fast exact sampling.
    pub fn sampler(&self) -> LawSampler {
        match *self {
            _ if self.activity() == 0.0 => LawSampler::Zero,
            OffspringLaw::ZetaTail { alpha, p } => LawSampler::Zeta(ZetaSampler::new(alpha, p)),
            OffspringLaw::MixedPoisson { alpha, p, x_m, phi } => LawSampler::MixedPoisson {
                p,
                inv_alpha: 1.0 / alpha,
                scale: x_m * phi,
            },
        }
    }
}

fn check_alpha(alpha: f64) -> Result<()> {
    if !(alpha.is_finite() && alpha > 1.0) {
        return Err(Error::InvalidLaw(format!("tail index alpha = {alpha} must be > 1")));
    }
    Ok(())
}

/// `P(Poisson(Lambda) > k)` with `Lambda = c U^{-1/alpha}` Pareto on `[c, inf)`.
///
/// Integrates the Poisson tail against the Pareto law of the intensity:
/// quadrature over `[c, L]` and the closed-form Pareto mass of `(L, inf)`,
/// where `L` lies forty standard deviations past the Poisson threshold.
fn mixed_poisson_unit_survival(alpha: f64, c: f64, k: u64) -> f64 {
    let kf = k as f64 + 1.0;
    let poisson_tail = |lam: f64| gamma_lr(kf, lam);
    let density = |lam: f64| alpha * (c / lam).powf(alpha) / lam;
    let upper = c.max(kf) + 40.0 * kf.sqrt() + 40.0;
    let f = |lam: f64| poisson_tail(lam) * density(lam);
    let mut total = (c / upper).powf(alpha);
    if c < kf {
        total += integrate(f, c, kf, 1e-12, 0.0);
        total += integrate(f, kf, upper, 1e-12, 0.0);
    } else {
        total += integrate(f, c, upper, 1e-12, 0.0);
    }
    total.min(1.0)
}

/// Exact sampler for one offspring law.
#[derive(Debug, Clone)]
pub enum LawSampler {
    Zero,
    Zeta(ZetaSampler),
    MixedPoisson { p: f64, inv_alpha: f64, scale: f64 },
}

impl LawSampler {
    /// Probability that the activity coin succeeds.
    pub fn activity(&self) -> f64 {
        match self {
            LawSampler::Zero => 0.0,
            LawSampler::Zeta(z) => z.p,
            LawSampler::MixedPoisson { p, .. } => *p,
        }
    }

    /// Draw conditional on the activity coin succeeding (may still be 0 for
    /// the mixed-Poisson family).
    #[inline]
    pub fn sample_active<R: Rng + ?Sized>(&self, rng: &mut R) -> u64 {
        match self {
            LawSampler::Zero => 0,
            LawSampler::Zeta(z) => z.sample_active(rng),
            LawSampler::MixedPoisson { inv_alpha, scale, .. } => {
                let v: f64 = rng.random();
                let lam = (scale * (1.0 - v).powf(-inv_alpha)).min(1e15);
                match Poisson::new(lam) {
                    Ok(d) => d.sample(rng) as u64,
                    Err(_) => 0,
                }
            }
        }
    }

    #[inline]
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> u64 {
        match self {
            LawSampler::Zero => 0,
            LawSampler::Zeta(z) => z.sample(rng),
            LawSampler::MixedPoisson { p, .. } => {
                let u: f64 = rng.random();
                if u >= *p {
                    return 0;
                }
                self.sample_active(rng)
            }
        }
    }
}

/// Inverse-CDF table up to [`ZETA_TABLE_LEN`], rejection from a continuous
/// power law beyond it.
#[derive(Debug, Clone)]
pub struct ZetaSampler {
    p: f64,
    s: f64,
    /// `cdf[k-1] = P(K <= k | K >= 1)`.
    cdf: Box<[f64]>,
    tail_shape: f64,
    envelope: f64,
}

impl ZetaSampler {
    pub fn new(alpha: f64, p: f64) -> Self {
        let s = alpha + 1.0;
        let z = zeta(s);
        let mut cdf = Vec::with_capacity(ZETA_TABLE_LEN);
        // Accumulate from the tail side so the table ends exactly at 1 - tail.
        let tail = power_tail_sum(s, ZETA_TABLE_LEN as u64 + 1);
        let mut above = tail;
        let mut rev = Vec::with_capacity(ZETA_TABLE_LEN);
        for k in (1..=ZETA_TABLE_LEN).rev() {
            rev.push(1.0 - above / z);
            above += (k as f64).powf(-s);
        }
        cdf.extend(rev.into_iter().rev());
        let start = ZETA_TABLE_LEN as f64 + 1.0;
        ZetaSampler {
            p,
            s,
            cdf: cdf.into_boxed_slice(),
            tail_shape: 1.0 / (s - 1.0),
            envelope: (1.0 + 1.0 / start).powf(s),
        }
    }

    #[inline]
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> u64 {
        let u: f64 = rng.random();
        if u >= self.p {
            return 0;
        }
        self.active_from(u / self.p, rng)
    }

    /// Draw conditional on `K >= 1`.
    #[inline]
    pub fn sample_active<R: Rng + ?Sized>(&self, rng: &mut R) -> u64 {
        let v: f64 = rng.random();
        self.active_from(v, rng)
    }

    #[inline]
    fn active_from<R: Rng + ?Sized>(&self, v: f64, rng: &mut R) -> u64 {
        if v < self.cdf[0] {
            return 1;
        }
        if v < self.cdf[ZETA_TABLE_LEN - 1] {
            return self.cdf.partition_point(|&c| c <= v) as u64 + 1;
        }
        self.sample_tail(rng)
    }

    /// `K` from `P(K = k) ∝ k^{-s}`, `k > ZETA_TABLE_LEN`.
    ///
    /// Proposal `floor(Y)` with `Y` continuous Pareto on `[L+1, inf)`; its pmf
    /// is `∫_k^{k+1} y^{-s} dy`, which the target over-runs by at most
    /// `(1 + 1/(L+1))^s`.
    pub(crate) fn sample_tail<R: Rng + ?Sized>(&self, rng: &mut R) -> u64 {
        let start = ZETA_TABLE_LEN as f64 + 1.0;
        loop {
            let u: f64 = rng.random();
            let y = start * (1.0 - u).powf(-self.tail_shape);
            if y >= 1.8e19 {
                return u64::MAX;
            }
            let k = y.floor();
            // target / proposal ratio, normalised into [0, 1]
            let cell = k.powf(1.0 - self.s) * -(((1.0 - self.s) * (1.0 / k).ln_1p()).exp_m1())
                / (self.s - 1.0);
            let ratio = k.powf(-self.s) / (cell * self.envelope);
            let w: f64 = rng.random();
            if w <= ratio {
                return k as u64;
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn means_of_trivial_laws() {
        assert_eq!(OffspringLaw::zeta_tail(1.6, 0.0).unwrap().mean(), 0.0);
        let mp = OffspringLaw::mixed_poisson(2.0, 1.0, 1.0, 0.5).unwrap();
        assert!((mp.mean() - 1.0).abs() < 1e-15);
    }

    #[test]
    fn rejects_invalid_parameters() {
        assert!(OffspringLaw::zeta_tail(1.0, 0.5).is_err());
        assert!(OffspringLaw::zeta_tail(2.0, 1.5).is_err());
        assert!(OffspringLaw::mixed_poisson(2.0, 0.5, 0.0, 1.0).is_err());
        assert!(OffspringLaw::mixed_poisson(2.0, 0.5, 1.0, -1.0).is_err());
        assert!(OffspringLaw::zeta_tail_with_mean(1.6, 10.0).is_err());
    }

    #[test]
    fn survival_below_one_is_activity() {
        let law = OffspringLaw::zeta_tail(1.6, 0.3).unwrap();
        assert_eq!(law.survival(0.5), 0.3);
        assert_eq!(law.survival(0.0), 0.3);
        let none = OffspringLaw::zeta_tail(1.6, 0.0).unwrap();
        assert_eq!(none.survival(7.0), 0.0);
        let none = OffspringLaw::mixed_poisson(2.5, 0.0, 1.0, 1.0).unwrap();
        assert_eq!(none.survival(7.0), 0.0);
    }

    #[test]
    fn zeta_survival_matches_partial_sums() {
        let law = OffspringLaw::zeta_tail(1.6, 1.0).unwrap();
        // brute force: zeta(2.6) and the tail from k = 11, each summed to 1e7
        // with the integral bracket for the remainder
        let n_max = 10_000_000u64;
        let s = 2.6f64;
        let sum_from = |m: u64| {
            let mut acc = 0.0;
            for k in (m..n_max).rev() {
                acc += (k as f64).powf(-s);
            }
            acc + (n_max as f64 - 0.5).powf(1.0 - s) / (s - 1.0)
        };
        let expected = sum_from(11) / sum_from(1);
        assert!((law.survival(10.0) - expected).abs() < 1e-12);
        assert_eq!(law.survival(10.7), law.survival(10.0));
    }

    #[test]
    fn mixed_poisson_survival_matches_direct_mixture() {
        // independent route: P(B > k) = 1 - sum_{j<=k} E[Poisson pmf] with the
        // Pareto integral done by substitution u = (x_m / w)^alpha on (0, 1]
        let (alpha, x_m, phi) = (2.5, 1.0, 0.8);
        let law = OffspringLaw::mixed_poisson(alpha, 1.0, x_m, phi).unwrap();
        for k in [0u64, 1, 3, 10, 40] {
            let n = 400_000;
            let mut acc = 0.0;
            for i in 0..n {
                // midpoint rule in u
                let u = (i as f64 + 0.5) / n as f64;
                let lam = phi * x_m * u.powf(-1.0 / alpha);
                let mut cdf = 0.0;
                let mut term = (-lam).exp();
                for j in 0..=k {
                    if j > 0 {
                        term *= lam / j as f64;
                    }
                    cdf += term;
                }
                acc += (1.0 - cdf).max(0.0);
            }
            let direct = acc / n as f64;
            let got = law.survival(k as f64);
            assert!(
                ((got - direct) / direct).abs() < 1e-4,
                "k={k}: {got} vs {direct}"
            );
        }
    }

    #[test]
    fn zeta_survival_is_regularly_varying() {
        let law = OffspringLaw::zeta_tail(1.6, 0.4).unwrap();
        let x = 1e4;
        let ratio = law.survival(2.0 * x) / law.survival(x);
        let target = 2f64.powf(-1.6);
        assert!((ratio / target - 1.0).abs() < 0.02);
    }

    #[test]
    fn truncated_mean_tends_to_mean() {
        let law = OffspringLaw::zeta_tail(2.9, 0.2).unwrap();
        assert!((law.truncated_mean(1e6) - law.mean()).abs() < 1e-9);
        let z: f64 = (1..2_000_000u64).rev().map(|k| (k as f64).powf(-3.9)).sum();
        let head: f64 = (1..=10u64).map(|k| (k as f64).powf(-2.9)).sum();
        assert!((law.truncated_mean(10.5) - 0.2 * head / z).abs() < 1e-12);
        let mp = OffspringLaw::mixed_poisson(3.0, 0.5, 1.0, 0.4).unwrap();
        let direct: f64 = (0..2000).map(|k| mp.survival(k as f64)).sum();
        assert!((direct - mp.mean()).abs() < 1e-5);
        assert!((mp.truncated_mean(5.0) - {
            let head: f64 = (0..5).map(|k| mp.survival(k as f64)).sum();
            head - 5.0 * mp.survival(5.0)
        })
        .abs()
            < 1e-15);
    }

    #[test]
    fn zeta_sampler_matches_pmf_and_tail() {
        let law = OffspringLaw::zeta_tail(1.6, 0.7).unwrap();
        let sampler = law.sampler();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let n = 2_000_000u64;
        let mut zeros = 0u64;
        let mut ones = 0u64;
        let check = |count: u64, n: u64, prob: f64| {
            let se = (prob * (1.0 - prob) / n as f64).sqrt();
            let z = (count as f64 / n as f64 - prob) / se;
            assert!(z.abs() < 4.5, "count {count} prob {prob} z {z}");
        };
        for _ in 0..n {
            match sampler.sample(&mut rng) {
                0 => zeros += 1,
                1 => ones += 1,
                _ => {}
            }
        }
        check(zeros, n, 0.3);
        check(ones, n, law.survival(0.0) - law.survival(1.0));

        // the rejection stage, conditionally on K > table length
        let LawSampler::Zeta(z) = sampler else { unreachable!() };
        let l = ZETA_TABLE_LEN as f64;
        let base = law.survival(l);
        let m = 400_000;
        let (mut first, mut twice, mut tenfold) = (0u64, 0u64, 0u64);
        for _ in 0..m {
            let k = z.sample_tail(&mut rng);
            assert!(k > ZETA_TABLE_LEN as u64);
            first += (k == ZETA_TABLE_LEN as u64 + 1) as u64;
            twice += (k as f64 > 2.0 * l) as u64;
            tenfold += (k as f64 > 10.0 * l) as u64;
        }
        check(first, m, (base - law.survival(l + 1.0)) / base);
        check(twice, m, law.survival(2.0 * l) / base);
        check(tenfold, m, law.survival(10.0 * l) / base);
    }
}

//! Mergeable accumulators and small estimation helpers.

use serde::Serialize;

use crate::error::{Error, Result};

/// Count, sum and sum of squares of real observations.
///
/// Merging is associative but floating-point addition is not, so callers
/// that need bit-identical results merge partials in a fixed order.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct MeanAccumulator {
    pub n: u64,
    pub sum: f64,
    pub sum_sq: f64,
}

impl MeanAccumulator {
    #[inline]
    pub fn push(&mut self, x: f64) {
        self.n += 1;
        self.sum += x;
        self.sum_sq += x * x;
    }

    pub fn merge(mut self, other: &MeanAccumulator) -> Self {
        self.n += other.n;
        self.sum += other.sum;
        self.sum_sq += other.sum_sq;
        self
    }

    pub fn mean(&self) -> f64 {
        if self.n == 0 {
            0.0
        } else {
            self.sum / self.n as f64
        }
    }

    /// Unbiased sample variance.
    pub fn variance(&self) -> f64 {
        if self.n < 2 {
            return 0.0;
        }
        let n = self.n as f64;
        ((self.sum_sq - self.sum * self.sum / n) / (n - 1.0)).max(0.0)
    }

    pub fn std_error(&self) -> f64 {
        if self.n == 0 {
            0.0
        } else {
            (self.variance() / self.n as f64).sqrt()
        }
    }
}

/// Count, sum and sum of squares of nonnegative integer observations;
/// exact, so merge order does not matter.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct CountAccumulator {
    pub n: u64,
    pub sum: u128,
    pub sum_sq: u128,
}

impl CountAccumulator {
    #[inline]
    pub fn push(&mut self, x: u64) {
        self.n += 1;
        self.sum += x as u128;
        self.sum_sq = self.sum_sq.saturating_add((x as u128) * (x as u128));
    }

    pub fn merge(mut self, other: &CountAccumulator) -> Self {
        self.n += other.n;
        self.sum += other.sum;
        self.sum_sq = self.sum_sq.saturating_add(other.sum_sq);
        self
    }

    pub fn mean(&self) -> f64 {
        if self.n == 0 {
            0.0
        } else {
            self.sum as f64 / self.n as f64
        }
    }

    pub fn variance(&self) -> f64 {
        if self.n < 2 {
            return 0.0;
        }
        let n = self.n as f64;
        // exact numerator n * sum_sq - sum^2 where it fits
        let num = (self.n as u128)
            .checked_mul(self.sum_sq)
            .and_then(|a| self.sum.checked_mul(self.sum).map(|b| a.saturating_sub(b)));
        match num {
            Some(num) => num as f64 / (n * (n - 1.0)),
            None => {
                let mean = self.mean();
                ((self.sum_sq as f64 / n - mean * mean) * n / (n - 1.0)).max(0.0)
            }
        }
    }

    pub fn std_error(&self) -> f64 {
        if self.n == 0 {
            0.0
        } else {
            (self.variance() / self.n as f64).sqrt()
        }
    }
}

/// `p_hat = hits / n` with its binomial standard error.
pub fn binomial(hits: u64, n: u64) -> (f64, f64) {
    if n == 0 {
        return (0.0, 0.0);
    }
    let p = hits as f64 / n as f64;
    (p, (p * (1.0 - p) / n as f64).sqrt())
}

/// `(lhs - rhs) / se`, with `0` when both sides agree exactly and `se = 0`.
pub fn z_score(lhs: f64, rhs: f64, se: f64) -> f64 {
    let diff = lhs - rhs;
    if se > 0.0 {
        diff / se
    } else if diff == 0.0 {
        0.0
    } else {
        diff.signum() * f64::INFINITY
    }
}

/// Ordinary least-squares line through `(x, y)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct LineFit {
    pub slope: f64,
    pub intercept: f64,
    /// Standard error of the slope from the residual variance (`0` for two
    /// points or an exact fit).
    pub slope_se: f64,
}

pub fn fit_line(x: &[f64], y: &[f64]) -> Result<LineFit> {
    let n = x.len();
    if n != y.len() || n < 2 {
        return Err(Error::InvalidArgument("line fit needs at least two paired points".into()));
    }
    let nf = n as f64;
    let mx = x.iter().sum::<f64>() / nf;
    let my = y.iter().sum::<f64>() / nf;
    let sxx: f64 = x.iter().map(|v| (v - mx) * (v - mx)).sum();
    if sxx <= 0.0 {
        return Err(Error::InvalidArgument("line fit needs distinct abscissae".into()));
    }
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let slope_se = if n > 2 {
        let rss: f64 = x
            .iter()
            .zip(y)
            .map(|(a, b)| {
                let r = b - intercept - slope * a;
                r * r
            })
            .sum();
        (rss / (nf - 2.0) / sxx).sqrt()
    } else {
        0.0
    };
    Ok(LineFit {
        slope,
        intercept,
        slope_se,
    })
}

/// Hill estimator of the tail index from the top `k` order statistics.
pub fn hill_estimate(values: &[f64], k: usize) -> Result<f64> {
    if k < 10 {
        return Err(Error::TooFewSamples(format!("k = {k} < 10 order statistics")));
    }
    if k >= values.len() {
        return Err(Error::TooFewSamples(format!(
            "k = {k} needs more than {} values",
            values.len()
        )));
    }
    if values.iter().any(|v| !(*v > 0.0 && v.is_finite())) {
        return Err(Error::InvalidArgument("Hill estimator needs positive finite values".into()));
    }
    let mut sorted = values.to_vec();
    // k-th largest lands at position len - k - 1 after partial selection
    let pivot = sorted.len() - k - 1;
    sorted.select_nth_unstable_by(pivot, |a, b| a.total_cmp(b));
    let threshold = sorted[pivot].ln();
    let mean_excess = sorted[pivot + 1..].iter().map(|v| v.ln() - threshold).sum::<f64>() / k as f64;
    if mean_excess <= 0.0 {
        return Err(Error::TooFewSamples(
            "degenerate sample: top order statistics coincide".into(),
        ));
    }
    Ok(1.0 / mean_excess)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn accumulators_agree_with_two_pass() {
        let xs = [3u64, 0, 7, 7, 1, 12];
        let mut c = CountAccumulator::default();
        let mut m = MeanAccumulator::default();
        for &x in &xs {
            c.push(x);
            m.push(x as f64);
        }
        let mean = 30.0 / 6.0;
        let var = xs.iter().map(|&x| (x as f64 - mean).powi(2)).sum::<f64>() / 5.0;
        assert_eq!(c.mean(), mean);
        assert!((c.variance() - var).abs() < 1e-12);
        assert!((m.variance() - var).abs() < 1e-12);
        let (a, b) = xs.split_at(2);
        let mut ca = CountAccumulator::default();
        let mut cb = CountAccumulator::default();
        a.iter().for_each(|&x| ca.push(x));
        b.iter().for_each(|&x| cb.push(x));
        assert_eq!(ca.merge(&cb), c);
    }

    #[test]
    fn line_fit_is_exact_on_lines() {
        let x = [1.0, 2.0, 3.0, 4.0];
        let y: Vec<f64> = x.iter().map(|v| 2.0 - 1.5 * v).collect();
        let f = fit_line(&x, &y).unwrap();
        assert!((f.slope + 1.5).abs() < 1e-12 && (f.intercept - 2.0).abs() < 1e-12);
        assert!(f.slope_se < 1e-7);
    }

    #[test]
    fn hill_recovers_pareto_index() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for alpha in [2.0, 1.6] {
            let xs: Vec<f64> = (0..1_000_000)
                .map(|_| (1.0 - rng.random::<f64>()).powf(-1.0 / alpha))
                .collect();
            let est = hill_estimate(&xs, 10_000).unwrap();
            assert!((est - alpha).abs() < 0.1, "alpha {alpha}: {est}");
        }
    }

    #[test]
    fn hill_guards() {
        assert!(hill_estimate(&[2.0; 100], 20).is_err());
        assert!(hill_estimate(&[1.0, 2.0, 3.0], 10).is_err());
        assert!(hill_estimate(&(1..=20).map(|v| v as f64).collect::<Vec<_>>(), 5).is_err());
    }
}

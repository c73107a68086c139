//! Small numerical helpers shared by the estimators and the verification
//! suites.

use statrs::distribution::{Binomial, ContinuousCDF, DiscreteCDF, Normal};

/// Neumaier compensated accumulator.
#[derive(Debug, Clone, Copy, Default)]
pub struct KahanSum {
    sum: f64,
    comp: f64,
}

impl KahanSum {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn add(&mut self, v: f64) {
        let t = self.sum + v;
        if self.sum.abs() >= v.abs() {
            self.comp += (self.sum - t) + v;
        } else {
            self.comp += (v - t) + self.sum;
        }
        self.sum = t;
    }

    pub fn value(&self) -> f64 {
        self.sum + self.comp
    }
}

impl std::iter::FromIterator<f64> for KahanSum {
    fn from_iter<I: IntoIterator<Item = f64>>(iter: I) -> Self {
        let mut acc = KahanSum::new();
        for v in iter {
            acc.add(v);
        }
        acc
    }
}

pub fn exact_sum<I: IntoIterator<Item = f64>>(iter: I) -> f64 {
    iter.into_iter().collect::<KahanSum>().value()
}

/// Standard normal CDF.
pub fn std_normal_cdf(t: f64) -> f64 {
    Normal::new(0.0, 1.0).expect("unit normal").cdf(t)
}

/// `Pr(B >= k)` for `B ~ Bin(n, p)`.
pub fn binomial_upper_tail(n: u64, p: f64, k: u64) -> f64 {
    if k == 0 {
        return 1.0;
    }
    let b = Binomial::new(p, n).expect("valid binomial parameters");
    1.0 - b.cdf(k - 1)
}

/// `Pr(B < k)` for `B ~ Bin(n, p)`; `k` may be fractional.
pub fn binomial_lower_tail_strict(n: u64, p: f64, k: f64) -> f64 {
    if k <= 0.0 {
        return 0.0;
    }
    let kk = k.ceil() as u64;
    let b = Binomial::new(p, n).expect("valid binomial parameters");
    b.cdf(kk - 1)
}

/// One-sided exact binomial test of `H0: p <= p0` against `p > p0`.
/// Returns true when `H0` is rejected at the given level.
pub fn binomial_exceeds(successes: u64, trials: u64, p0: f64, level: f64) -> bool {
    binomial_upper_tail(trials, p0, successes) < level
}

/// Lower bound on `Pr(B < nt)` for `B ~ Bin(n, p)`, `0 < t < p < 1/2`.
pub fn binomial_tail_lower_bound(n: u64, p: f64, t: f64) -> f64 {
    let d = (4.0 * n as f64 * (t - p).powi(2) / p).sqrt();
    (1.0 / (2.0 * std::f64::consts::PI).sqrt()) * d / (d * d + 1.0) * (-0.5 * d * d).exp()
}

pub fn mean_and_std(values: &[f64]) -> (f64, f64) {
    let n = values.len() as f64;
    let mean = exact_sum(values.iter().copied()) / n;
    let var = exact_sum(values.iter().map(|v| (v - mean).powi(2))) / (n - 1.0).max(1.0);
    (mean, var.sqrt())
}

pub fn median(values: &mut [f64]) -> f64 {
    values.sort_by(|a, b| a.partial_cmp(b).expect("finite values"));
    let n = values.len();
    if n % 2 == 1 {
        values[n / 2]
    } else {
        0.5 * (values[n / 2 - 1] + values[n / 2])
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn compensated_sum_beats_naive() {
        let mut vals = vec![1e16, 1.0, -1e16];
        vals.extend(std::iter::repeat_n(1e-3, 1000));
        assert!((exact_sum(vals.iter().copied()) - 2.0).abs() < 1e-9);
    }

    #[test]
    fn binomial_tails() {
        assert!((binomial_upper_tail(10, 0.5, 0) - 1.0).abs() < 1e-15);
        // Pr(B >= 10) for Bin(10, .5)
        assert!((binomial_upper_tail(10, 0.5, 10) - 0.5f64.powi(10)).abs() < 1e-12);
        assert!((binomial_lower_tail_strict(10, 0.5, 1.0) - 0.5f64.powi(10)).abs() < 1e-12);
        assert!(binomial_exceeds(200, 10_000, 0.01, 0.05));
        assert!(!binomial_exceeds(100, 10_000, 0.01, 0.05));
    }

    #[test]
    fn median_even_and_odd() {
        assert_eq!(median(&mut [3.0, 1.0, 2.0]), 2.0);
        assert_eq!(median(&mut [4.0, 1.0, 2.0, 3.0]), 2.5);
    }
}

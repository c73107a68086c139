use serde::{Deserialize, Serialize};

use crate::error::{input_err, Result};

/// Optional clipping threshold `M >= 1`. Samples whose weight exceeds `M`
/// contribute nothing.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize, Default)]
pub struct ClipConfig(Option<f64>);

impl ClipConfig {
    pub fn none() -> Self {
        Self(None)
    }

    pub fn at(m: f64) -> Result<Self> {
        if !(m >= 1.0) {
            return input_err(format!("clip threshold must be >= 1, got {m}"));
        }
        Ok(Self(Some(m)))
    }

    pub fn threshold(&self) -> Option<f64> {
        self.0
    }

    #[inline]
    pub fn keeps(&self, weight: f64) -> bool {
        match self.0 {
            Some(m) => weight <= m,
            None => true,
        }
    }
}

/// Which tail event defines the threshold.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TailVariant {
    /// `Pr(W > M)` with `W = 1 / Q0`, used for passive learning.
    Passive,
    /// `Pr(W > M / 2)` with `W = (m + n_k) / (m Q0 + n_k)`, used per epoch by
    /// the active learner.
    Active,
}

/// Distribution of a nonnegative weight, as point masses.
#[derive(Debug, Clone, PartialEq)]
pub struct WeightDistribution {
    atoms: Vec<(f64, f64)>,
}

impl WeightDistribution {
    /// Exact distribution from `(value, probability)` pairs.
    pub fn from_atoms(atoms: Vec<(f64, f64)>) -> Result<Self> {
        if atoms.is_empty() {
            return input_err("weight distribution is empty");
        }
        if atoms.iter().any(|&(v, p)| !(v >= 0.0) || !v.is_finite() || !(p >= 0.0)) {
            return input_err("weights must be finite and nonnegative with nonnegative mass");
        }
        Ok(Self { atoms })
    }

    /// Empirical distribution of a sample, each value with mass `1/N`.
    pub fn from_sample(values: &[f64]) -> Result<Self> {
        let p = 1.0 / values.len() as f64;
        Self::from_atoms(values.iter().map(|&v| (v, p)).collect())
    }

    /// `Pr(W > t)`.
    pub fn tail(&self, t: f64) -> f64 {
        crate::stats::exact_sum(self.atoms.iter().filter(|(v, _)| *v > t).map(|(_, p)| *p))
    }

    pub fn max_value(&self) -> f64 {
        self.atoms.iter().map(|a| a.0).fold(0.0, f64::max)
    }

    pub fn atoms(&self) -> &[(f64, f64)] {
        &self.atoms
    }
}

/// `inf { M >= 1 : (2 M / count) log_term >= tail(M) }`, where `tail` is
/// `Pr(W > M)` or `Pr(W > M/2)` depending on `variant`.
///
/// The tail is a right-continuous step function in `M` with jumps at the
/// support points (scaled by 2 for the active variant). On each constant
/// piece `[lo, hi)` the smallest feasible point is `max(lo, tail / slope)`,
/// so scanning the pieces in increasing order gives the exact infimum.
pub fn choose_clip_threshold(
    dist: &WeightDistribution,
    count: usize,
    log_term: f64,
    variant: TailVariant,
) -> Result<f64> {
    if !(log_term > 0.0) {
        return input_err(format!("log term must be positive, got {log_term}"));
    }
    if count == 0 {
        return input_err("sample count must be positive");
    }
    let slope = 2.0 * log_term / count as f64;
    let scale = match variant {
        TailVariant::Passive => 1.0,
        TailVariant::Active => 2.0,
    };

    let mut jumps: Vec<(f64, f64)> =
        dist.atoms.iter().map(|&(v, p)| (scale * v, p)).filter(|&(j, _)| j > 1.0).collect();
    jumps.sort_by(|a, b| a.0.partial_cmp(&b.0).expect("finite weights"));

    let mut lo: f64 = 1.0;
    let mut tail = crate::stats::exact_sum(jumps.iter().map(|j| j.1));
    let mut i = 0;
    while i < jumps.len() {
        let hi = jumps[i].0;
        let candidate = lo.max(tail / slope);
        if candidate < hi {
            return Ok(candidate);
        }
        // absorb every atom sitting at this jump point
        while i < jumps.len() && jumps[i].0 == hi {
            tail -= jumps[i].1;
            i += 1;
        }
        tail = tail.max(0.0);
        lo = hi;
    }
    Ok(lo.max(tail / slope))
}

/// `e(M) = sqrt((4 log_term / count) E[W 1{W <= M}]) + Pr(W > M)`, the
/// passive error proxy the threshold trades off.
pub fn clip_error_proxy(dist: &WeightDistribution, count: usize, log_term: f64, m: f64) -> f64 {
    let kept = crate::stats::exact_sum(dist.atoms.iter().filter(|a| a.0 <= m).map(|&(v, p)| v * p));
    (4.0 * log_term / count as f64 * kept).sqrt() + dist.tail(m)
}

/// Whether `m` solves `(2M / count) log_term = Pr(W > M)` to within `tol`.
pub fn solves_threshold_equality(dist: &WeightDistribution, count: usize, log_term: f64, m: f64, tol: f64) -> bool {
    (2.0 * m / count as f64 * log_term - dist.tail(m)).abs() <= tol
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn clip_config_validation() {
        assert!(ClipConfig::at(0.5).is_err());
        assert!(ClipConfig::at(f64::NAN).is_err());
        let c = ClipConfig::at(2.0).unwrap();
        assert!(c.keeps(2.0) && !c.keeps(2.0000001));
        assert!(ClipConfig::none().keeps(1e300));
    }

    #[test]
    fn passive_two_point_example() {
        let dist = WeightDistribution::from_atoms(vec![(1.0, 0.9), (10.0, 0.1)]).unwrap();
        let m0 = choose_clip_threshold(&dist, 100, 20f64.ln(), TailVariant::Passive).unwrap();
        // 0.1 / (2 ln 20 / 100)
        assert!((m0 - 1.6690).abs() < 1e-4, "{m0}");
        // brute-force oracle over a fine grid
        let slope = 2.0 * 20f64.ln() / 100.0;
        let grid_inf = (0..2_000_000)
            .map(|i| 1.0 + i as f64 * 1e-5)
            .find(|&m| slope * m >= dist.tail(m))
            .unwrap();
        assert!((grid_inf - m0).abs() < 2e-5);
    }

    #[test]
    fn all_ones_gives_one() {
        let dist = WeightDistribution::from_atoms(vec![(1.0, 1.0)]).unwrap();
        assert_eq!(choose_clip_threshold(&dist, 10, 3.0, TailVariant::Passive).unwrap(), 1.0);
        // active tail is Pr(1 > M/2) = 1 on [1, 2): M = 1 / (2 * 3 / 10)
        let m = choose_clip_threshold(&dist, 10, 3.0, TailVariant::Active).unwrap();
        assert!((m - 10.0 / 6.0).abs() < 1e-12);
    }

    #[test]
    fn threshold_lands_on_jump_when_piece_is_infeasible() {
        // tail 0.5 on [1, 4): would need M = 0.5 / 0.02 = 25, so the
        // infimum is the jump point 4 where the tail vanishes.
        let dist = WeightDistribution::from_atoms(vec![(1.0, 0.5), (4.0, 0.5)]).unwrap();
        assert_eq!(choose_clip_threshold(&dist, 100, 1.0, TailVariant::Passive).unwrap(), 4.0);
        assert_eq!(choose_clip_threshold(&dist, 100, 1.0, TailVariant::Active).unwrap(), 8.0);
    }

    #[test]
    fn rejects_bad_inputs() {
        let dist = WeightDistribution::from_atoms(vec![(1.0, 1.0)]).unwrap();
        assert!(choose_clip_threshold(&dist, 10, 0.0, TailVariant::Passive).is_err());
        assert!(choose_clip_threshold(&dist, 0, 1.0, TailVariant::Passive).is_err());
        assert!(WeightDistribution::from_atoms(vec![]).is_err());
    }
}

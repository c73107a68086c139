//! Importance-weighted loss and second-moment estimators over logged and
//! actively collected samples.
//!
//! Every estimator is a normalized sum over the sample set of
//! `weight(x)^p * z * indicator`, with the clip indicator `1{weight <= M}`
//! applied per term. Sums are accumulated with compensation so that the
//! decomposition over data segments holds to rounding.

mod clip;
mod policy;

use serde::{Deserialize, Serialize};

pub use clip::{choose_clip_threshold, clip_error_proxy, solves_threshold_equality, ClipConfig, TailVariant, WeightDistribution};
pub use policy::{debias_closed_form, debias_policy, mis_weight, PolicyStack, QueryRule};

use crate::error::{input_err, Result};
use crate::hypothesis::{FiniteWorld, Label};
use crate::stats::KahanSum;

/// One record `(x, y, z)`; `y` is present exactly when `z = 1`. `epoch` 0
/// is the logged phase.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Sample {
    pub x: usize,
    pub z: bool,
    pub y: Option<Label>,
    pub epoch: usize,
}

impl Sample {
    pub fn observed(x: usize, y: Label, epoch: usize) -> Self {
        Self { x, z: true, y: Some(y), epoch }
    }

    pub fn unobserved(x: usize, epoch: usize) -> Self {
        Self { x, z: false, y: None, epoch }
    }

    pub fn validate(&self) -> Result<()> {
        match (self.z, self.y) {
            (true, Some(1 | -1)) | (false, None) => Ok(()),
            (true, Some(y)) => input_err(format!("label {y} is not +-1")),
            (true, None) => input_err("observed sample without a label"),
            (false, Some(_)) => input_err("unobserved sample carries a label"),
        }
    }

    #[inline]
    fn mistake(&self, h: &[Label]) -> bool {
        match self.y {
            Some(y) if self.z => h[self.x] != y,
            _ => false,
        }
    }
}

/// Serialize samples as CSV rows `epoch,x,z,y` (y empty when `z = 0`).
pub fn samples_to_csv(samples: &[Sample]) -> String {
    let mut out = String::from("epoch,x,z,y\n");
    for s in samples {
        let y = s.y.map(|v| v.to_string()).unwrap_or_default();
        out.push_str(&format!("{},{},{},{}\n", s.epoch, s.x, s.z as u8, y));
    }
    out
}

pub fn samples_from_csv(text: &str) -> Result<Vec<Sample>> {
    let mut lines = text.lines();
    match lines.next() {
        Some(h) if h.trim() == "epoch,x,z,y" => {}
        _ => return input_err("sample CSV must start with header epoch,x,z,y"),
    }
    let mut out = Vec::new();
    for (i, line) in lines.enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let f: Vec<&str> = line.split(',').collect();
        if f.len() != 4 {
            return input_err(format!("row {}: expected 4 fields", i + 1));
        }
        let parse = |s: &str| s.trim().parse::<i64>().map_err(|e| crate::error::CfalError::Input(format!("row {}: {e}", i + 1)));
        let epoch = parse(f[0])? as usize;
        let x = parse(f[1])? as usize;
        let z = parse(f[2])? == 1;
        let y = if f[3].trim().is_empty() { None } else { Some(parse(f[3])? as Label) };
        let s = Sample { x, z, y, epoch };
        s.validate()?;
        out.push(s);
    }
    Ok(out)
}

/// How per-sample importance weights are formed.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum WeightScheme {
    /// Multiple importance sampling: every sample weighted by the inverse of
    /// the mixture of all policies run so far.
    Mis,
    /// Each sample weighted by the inverse of the policy that collected it.
    PerEpochIw,
}

/// Per-(epoch, instance) weights for a finite world at a given epoch.
#[derive(Debug, Clone)]
pub struct SampleWeights {
    table: Vec<Vec<f64>>,
    scheme: WeightScheme,
    k: usize,
}

impl SampleWeights {
    pub fn new(world: &FiniteWorld, stack: &PolicyStack, k: usize, scheme: WeightScheme) -> Result<Self> {
        let table = match scheme {
            WeightScheme::Mis => {
                let row = world.q0().iter().map(|&q| mis_weight(q, k, stack)).collect::<Result<Vec<_>>>()?;
                vec![row]
            }
            WeightScheme::PerEpochIw => {
                let mut rows = vec![world.q0().iter().map(|&q| 1.0 / q).collect::<Vec<_>>()];
                let pols = world.q0().iter().map(|&q| stack.policies_upto(q, k)).collect::<Result<Vec<_>>>()?;
                for j in 0..k {
                    // Q_j is an indicator; instances it never queries carry no
                    // observed samples, so their weight is irrelevant.
                    rows.push(pols.iter().map(|p| if p[j] { 1.0 } else { 0.0 }).collect());
                }
                rows
            }
        };
        Ok(Self { table, scheme, k })
    }

    /// Plain inverse-propensity weights `1 / Q0(x)` for logged data.
    pub fn logged(world: &FiniteWorld) -> Self {
        Self { table: vec![world.q0().iter().map(|&q| 1.0 / q).collect()], scheme: WeightScheme::Mis, k: 0 }
    }

    pub fn epoch(&self) -> usize {
        self.k
    }

    #[inline]
    pub fn weight(&self, s: &Sample) -> f64 {
        match self.scheme {
            WeightScheme::Mis => self.table[0][s.x],
            WeightScheme::PerEpochIw => self.table[s.epoch][s.x],
        }
    }

    /// Weight of instance `x` for a sample collected in `epoch`.
    pub fn instance_weight(&self, x: usize, epoch: usize) -> f64 {
        match self.scheme {
            WeightScheme::Mis => self.table[0][x],
            WeightScheme::PerEpochIw => self.table[epoch][x],
        }
    }

    pub fn max_weight(&self) -> f64 {
        self.table.iter().flatten().copied().fold(0.0, f64::max)
    }

    fn check(&self, samples: &[Sample]) -> Result<()> {
        if samples.is_empty() {
            return input_err("empty sample set");
        }
        if let Some(s) = samples.iter().find(|s| s.epoch > self.k) {
            return input_err(format!("sample from epoch {} used with weights of epoch {}", s.epoch, self.k));
        }
        if let Some(s) = samples.iter().find(|s| s.x >= self.table[0].len()) {
            return input_err(format!("instance {} out of range", s.x));
        }
        Ok(())
    }
}

fn check_h(h: &[Label], weights: &SampleWeights) -> Result<()> {
    if h.len() != weights.table[0].len() {
        return input_err(format!("hypothesis has length {}, world has {}", h.len(), weights.table[0].len()));
    }
    Ok(())
}

fn accumulate(
    samples: &[Sample],
    weights: &SampleWeights,
    clip: ClipConfig,
    power: i32,
    term: impl Fn(&Sample) -> f64,
) -> f64 {
    let mut acc = KahanSum::new();
    for s in samples {
        if !s.z {
            continue;
        }
        let w = weights.weight(s);
        if !clip.keeps(w) {
            continue;
        }
        let t = term(s);
        if t != 0.0 {
            acc.add(w.powi(power) * t);
        }
    }
    acc.value() / samples.len() as f64
}

/// `(1/|S|) sum w z 1{h(x) != y} 1{w <= M}`.
pub fn weighted_loss(h: &[Label], samples: &[Sample], weights: &SampleWeights, clip: ClipConfig) -> Result<f64> {
    weights.check(samples)?;
    check_h(h, weights)?;
    Ok(accumulate(samples, weights, clip, 1, |s| s.mistake(h) as u8 as f64))
}

/// `l(h1; S, M) - l(h2; S, M)`, summed term by term so that samples where
/// the two hypotheses agree contribute exactly zero whatever their label.
pub fn weighted_loss_diff(
    h1: &[Label],
    h2: &[Label],
    samples: &[Sample],
    weights: &SampleWeights,
    clip: ClipConfig,
) -> Result<f64> {
    weights.check(samples)?;
    check_h(h1, weights)?;
    check_h(h2, weights)?;
    Ok(accumulate(samples, weights, clip, 1, |s| {
        if h1[s.x] == h2[s.x] {
            0.0
        } else {
            s.mistake(h1) as u8 as f64 - s.mistake(h2) as u8 as f64
        }
    }))
}

/// `(1/|S|) sum w^2 z 1{h(x) != y} 1{w <= M}`.
pub fn weighted_second_moment(h: &[Label], samples: &[Sample], weights: &SampleWeights, clip: ClipConfig) -> Result<f64> {
    weights.check(samples)?;
    check_h(h, weights)?;
    Ok(accumulate(samples, weights, clip, 2, |s| s.mistake(h) as u8 as f64))
}

/// `(1/|S|) sum w^2 z 1{h1(x) != h2(x)} 1{w <= M}`; reads no labels.
pub fn weighted_second_moment_pair(
    h1: &[Label],
    h2: &[Label],
    samples: &[Sample],
    weights: &SampleWeights,
    clip: ClipConfig,
) -> Result<f64> {
    weights.check(samples)?;
    check_h(h1, weights)?;
    check_h(h2, weights)?;
    Ok(accumulate(samples, weights, clip, 2, |s| (h1[s.x] != h2[s.x]) as u8 as f64))
}

fn logged_only(samples: &[Sample]) -> Result<()> {
    if samples.iter().any(|s| s.epoch != 0) {
        return input_err("expected logged (epoch 0) samples only");
    }
    Ok(())
}

/// Plain importance-weighted loss on logged data.
pub fn iw_loss(h: &[Label], samples: &[Sample], world: &FiniteWorld) -> Result<f64> {
    logged_only(samples)?;
    weighted_loss(h, samples, &SampleWeights::logged(world), ClipConfig::none())
}

/// Clipped importance-weighted loss on logged data.
pub fn clipped_iw_loss(h: &[Label], samples: &[Sample], world: &FiniteWorld, m: f64) -> Result<f64> {
    logged_only(samples)?;
    weighted_loss(h, samples, &SampleWeights::logged(world), ClipConfig::at(m)?)
}

/// Second moment of the importance-weighted loss on logged data.
pub fn second_moment(h: &[Label], samples: &[Sample], world: &FiniteWorld, clip: ClipConfig) -> Result<f64> {
    logged_only(samples)?;
    weighted_second_moment(h, samples, &SampleWeights::logged(world), clip)
}

/// Clipped MIS loss over samples collected up to epoch `k`.
pub fn mis_loss(
    h: &[Label],
    samples: &[Sample],
    world: &FiniteWorld,
    stack: &PolicyStack,
    k: usize,
    clip: ClipConfig,
) -> Result<f64> {
    weighted_loss(h, samples, &SampleWeights::new(world, stack, k, WeightScheme::Mis)?, clip)
}

pub fn mis_second_moment(
    h: &[Label],
    samples: &[Sample],
    world: &FiniteWorld,
    stack: &PolicyStack,
    k: usize,
    clip: ClipConfig,
) -> Result<f64> {
    weighted_second_moment(h, samples, &SampleWeights::new(world, stack, k, WeightScheme::Mis)?, clip)
}

pub fn mis_second_moment_pair(
    h1: &[Label],
    h2: &[Label],
    samples: &[Sample],
    world: &FiniteWorld,
    stack: &PolicyStack,
    k: usize,
    clip: ClipConfig,
) -> Result<f64> {
    weighted_second_moment_pair(h1, h2, samples, &SampleWeights::new(world, stack, k, WeightScheme::Mis)?, clip)
}

/// Exact distribution of the per-epoch weight `(m + n_k) / (m Q0 + n_k)`.
pub fn active_weight_distribution(world: &FiniteWorld, stack: &PolicyStack, k: usize) -> Result<WeightDistribution> {
    let m = stack.m() as f64;
    let nk = stack.n(k) as f64;
    let c = stack.count(k) as f64;
    WeightDistribution::from_atoms(world.weight_atoms(|q| c / (m * q + nk)))
}

/// Exact distribution of `1 / Q0(X)`.
pub fn inverse_propensity_distribution(world: &FiniteWorld) -> Result<WeightDistribution> {
    WeightDistribution::from_atoms(world.weight_atoms(|q| 1.0 / q))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn half_world() -> FiniteWorld {
        FiniteWorld::new(vec![0.5, 0.5], vec![1.0, 1.0], vec![0.5, 1.0]).unwrap()
    }

    #[test]
    fn iw_loss_examples() {
        let w = half_world();
        let s = [Sample::observed(0, 1, 0)];
        assert_eq!(iw_loss(&[1, 1], &s, &w).unwrap(), 0.0);
        assert_eq!(iw_loss(&[-1, 1], &s, &w).unwrap(), 2.0);
        let unobs = [Sample::unobserved(0, 0), Sample::unobserved(1, 0)];
        assert_eq!(iw_loss(&[-1, -1], &unobs, &w).unwrap(), 0.0);
        assert!(iw_loss(&[1, 1], &[], &w).is_err());
        assert!(iw_loss(&[1, 1], &[Sample::observed(0, 1, 1)], &w).is_err());
    }

    #[test]
    fn second_moment_examples() {
        let w = half_world();
        let s = [Sample::observed(0, 1, 0)];
        assert_eq!(second_moment(&[1, 1], &s, &w, ClipConfig::none()).unwrap(), 0.0);
        assert_eq!(second_moment(&[-1, 1], &s, &w, ClipConfig::none()).unwrap(), 4.0);
        assert_eq!(second_moment(&[-1, 1], &s, &w, ClipConfig::at(1.5).unwrap()).unwrap(), 0.0);
    }

    #[test]
    fn clipped_iw_examples() {
        let w = FiniteWorld::new(vec![0.25, 0.25, 0.5], vec![1.0; 3], vec![0.5, 0.1, 1.0]).unwrap();
        let s = [
            Sample::observed(0, 1, 0),
            Sample::observed(1, 1, 0),
            Sample::observed(2, 1, 0),
            Sample::unobserved(1, 0),
        ];
        let h = [-1, -1, -1];
        assert_eq!(clipped_iw_loss(&h, &s, &w, 10.0).unwrap(), iw_loss(&h, &s, &w).unwrap());
        assert_eq!(clipped_iw_loss(&[-1, 1, 1], &s[..1], &w, 1.5).unwrap(), 0.0);
        // M = 5 drops the 1/0.1 term: surviving terms 2 + 1 over 4 samples
        assert_eq!(clipped_iw_loss(&h, &s, &w, 5.0).unwrap(), (2.0 + 1.0) / 4.0);
        assert!(clipped_iw_loss(&h, &s, &w, 0.5).is_err());
    }

    #[test]
    fn mis_examples() {
        // m = 4, tau_1 = 2, Q_1 = 1: x0 has Q0 = 0.5 -> weight 1.5, x1 has Q0 = 1 -> weight 1.
        let w = half_world();
        let stack = PolicyStack::new(4, vec![2], QueryRule::QueryAll).unwrap();
        let sw = SampleWeights::new(&w, &stack, 1, WeightScheme::Mis).unwrap();
        assert_eq!(sw.weight(&Sample::observed(0, 1, 0)), 1.5);
        assert_eq!(sw.weight(&Sample::observed(1, 1, 1)), 1.0);
        let s = [Sample::observed(0, 1, 0), Sample::observed(1, 1, 1)];
        assert_eq!(mis_loss(&[1, 1], &s, &w, &stack, 1, ClipConfig::none()).unwrap(), 0.0);
        assert_eq!(mis_loss(&[-1, 1], &s, &w, &stack, 1, ClipConfig::none()).unwrap(), 0.75);
        // clip at 1 keeps only the unit-weight sample
        assert_eq!(mis_loss(&[-1, -1], &s, &w, &stack, 1, ClipConfig::at(1.0).unwrap()).unwrap(), 0.5);
        assert!(mis_loss(&[1, 1], &s, &w, &stack, 0, ClipConfig::none()).is_err());

        let one = [Sample::observed(0, 1, 0)];
        assert_eq!(mis_second_moment(&[-1, 1], &one, &w, &stack, 1, ClipConfig::none()).unwrap(), 2.25);
        assert_eq!(mis_second_moment_pair(&[1, 1], &[1, 1], &s, &w, &stack, 1, ClipConfig::none()).unwrap(), 0.0);
        let hidden = [Sample::unobserved(0, 0), Sample::unobserved(1, 1)];
        assert_eq!(mis_second_moment_pair(&[1, 1], &[-1, -1], &hidden, &w, &stack, 1, ClipConfig::none()).unwrap(), 0.0);
    }

    #[test]
    fn fully_clipped_mis_is_zero() {
        // weights above 1 everywhere, threshold 1 clips them all
        let w = FiniteWorld::new(vec![0.5, 0.5], vec![1.0, 1.0], vec![0.5, 0.25]).unwrap();
        let stack = PolicyStack::new(4, vec![], QueryRule::Debias).unwrap();
        let s = [Sample::observed(0, 1, 0), Sample::observed(1, 1, 0)];
        assert_eq!(mis_loss(&[-1, -1], &s, &w, &stack, 0, ClipConfig::at(1.0).unwrap()).unwrap(), 0.0);
    }

    #[test]
    fn csv_round_trip() {
        let s = vec![Sample::observed(3, -1, 0), Sample::unobserved(1, 2)];
        let text = samples_to_csv(&s);
        assert_eq!(text, "epoch,x,z,y\n0,3,1,-1\n2,1,0,\n");
        assert_eq!(samples_from_csv(&text).unwrap(), s);
        assert!(samples_from_csv("epoch,x,z,y\n0,1,0,1\n").is_err());
    }

    fn arb_samples(d: usize) -> impl Strategy<Value = Vec<Sample>> {
        prop::collection::vec((0..d, prop::bool::ANY, prop::bool::ANY), 1..60).prop_map(|v| {
            v.into_iter()
                .map(|(x, z, y)| if z { Sample::observed(x, if y { 1 } else { -1 }, 0) } else { Sample::unobserved(x, 0) })
                .collect()
        })
    }

    proptest! {
        #[test]
        fn second_moment_decomposes(samples in arb_samples(4), split in 0usize..60, q in prop::collection::vec(0.05f64..=1.0, 4)) {
            let w = FiniteWorld::new(vec![0.25; 4], vec![0.5; 4], q).unwrap();
            let h = [1, -1, 1, -1];
            let cut = split.min(samples.len() - 1).max(1).min(samples.len());
            prop_assume!(cut < samples.len());
            let (a, b) = samples.split_at(cut);
            let whole = second_moment(&h, &samples, &w, ClipConfig::none()).unwrap();
            let parts = (a.len() as f64 * second_moment(&h, a, &w, ClipConfig::none()).unwrap()
                + b.len() as f64 * second_moment(&h, b, &w, ClipConfig::none()).unwrap())
                / samples.len() as f64;
            prop_assert!((whole - parts).abs() <= 1e-12 * whole.max(1.0));
        }

        #[test]
        fn clipped_loss_monotone_in_threshold(samples in arb_samples(4), q in prop::collection::vec(0.05f64..=1.0, 4), m1 in 1.0f64..25.0, m2 in 1.0f64..25.0) {
            let w = FiniteWorld::new(vec![0.25; 4], vec![0.5; 4], q.clone()).unwrap();
            let h = [1, 1, -1, -1];
            let (lo, hi) = if m1 <= m2 { (m1, m2) } else { (m2, m1) };
            prop_assert!(clipped_iw_loss(&h, &samples, &w, lo).unwrap() <= clipped_iw_loss(&h, &samples, &w, hi).unwrap());
            let cap = q.iter().map(|v| 1.0 / v).fold(1.0, f64::max);
            prop_assert_eq!(clipped_iw_loss(&h, &samples, &w, cap).unwrap(), iw_loss(&h, &samples, &w).unwrap());
        }
    }
}

//! Passive learners over logged data: plain and clipped importance-weighted
//! ERM, second-moment-regularized ERM, and the two-hypothesis world on which
//! unregularized ERM provably misbehaves.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{input_err, Result};
use crate::estimators::{weighted_loss, weighted_second_moment, ClipConfig, Sample, SampleWeights};
use crate::hypothesis::{FiniteWorld, HypothesisClass};

/// Empirical loss minimized by [`erm`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind", content = "threshold")]
pub enum LossKind {
    Iw,
    Clipped(f64),
}

/// Lowest-index argmin of `objective` over the class. Evaluation may run in
/// parallel; the reduction is order-independent.
pub(crate) fn argmin_by<F>(indices: &[usize], objective: F) -> Result<usize>
where
    F: Fn(usize) -> Result<f64> + Sync,
{
    if indices.is_empty() {
        return input_err("cannot minimize over an empty hypothesis set");
    }
    let values = indices.par_iter().map(|&i| objective(i).map(|v| (i, v))).collect::<Result<Vec<_>>>()?;
    let mut best = values[0];
    for &(i, v) in &values[1..] {
        if v < best.1 || (v == best.1 && i < best.0) {
            best = (i, v);
        }
    }
    Ok(best.0)
}

fn all_indices(class: &HypothesisClass) -> Vec<usize> {
    (0..class.len()).collect()
}

/// Exhaustive minimizer of the (optionally clipped) importance-weighted loss.
pub fn erm(class: &HypothesisClass, samples: &[Sample], world: &FiniteWorld, loss: LossKind) -> Result<usize> {
    class.check_world(world)?;
    let clip = match loss {
        LossKind::Iw => ClipConfig::none(),
        LossKind::Clipped(m) => ClipConfig::at(m)?,
    };
    let weights = SampleWeights::logged(world);
    argmin_by(&all_indices(class), |i| weighted_loss(class.get(i), samples, &weights, clip))
}

/// `l(h, S, M) + sqrt(lambda / m * hvar(h, S, M))`.
pub fn regularized_objective(
    h: &[crate::hypothesis::Label],
    samples: &[Sample],
    weights: &SampleWeights,
    lambda: f64,
    clip: ClipConfig,
) -> Result<f64> {
    let loss = weighted_loss(h, samples, weights, clip)?;
    let var = weighted_second_moment(h, samples, weights, clip)?;
    Ok(loss + (lambda / samples.len() as f64 * var).sqrt())
}

/// Regularized ERM with the default `lambda = 4 log_term`.
pub fn regularized_erm(
    class: &HypothesisClass,
    samples: &[Sample],
    world: &FiniteWorld,
    log_term: f64,
    clip: ClipConfig,
) -> Result<usize> {
    if !(log_term > 0.0) {
        return input_err(format!("log term must be positive, got {log_term}"));
    }
    regularized_erm_with_lambda(class, samples, world, 4.0 * log_term, clip)
}

pub fn regularized_erm_with_lambda(
    class: &HypothesisClass,
    samples: &[Sample],
    world: &FiniteWorld,
    lambda: f64,
    clip: ClipConfig,
) -> Result<usize> {
    class.check_world(world)?;
    if !(lambda >= 0.0) {
        return input_err(format!("regularizer weight must be nonnegative, got {lambda}"));
    }
    let weights = SampleWeights::logged(world);
    argmin_by(&all_indices(class), |i| regularized_objective(class.get(i), samples, &weights, lambda, clip))
}

/// Right side of the excess-error bound for regularized ERM without
/// clipping, with its constants as stated.
pub fn regularized_erm_bound(world: &FiniteWorld, h_star: &[crate::hypothesis::Label], m: usize, log_term: f64) -> f64 {
    let m = m as f64;
    let q0 = world.min_q0();
    let weighted_err = crate::stats::exact_sum(
        (0..world.len()).map(|x| world.mass()[x] * world.error_at(x, h_star[x]) / world.q0()[x]),
    );
    28.0 * log_term / (3.0 * m * q0) + (4.0 * log_term / m * weighted_err).sqrt()
        + (4.0 * log_term).sqrt() / (m.powf(1.5) * q0 * q0)
}

/// Three-instance world where unregularized importance-weighted ERM picks
/// the worse of two hypotheses with constant probability.
///
/// `q0 = nu / 40`, `c = 1/3`, `eps = (c^2 + sqrt(c^4 + 4 c^2 q0 nu m)) / (2 q0 m)`.
pub fn theorem2_world(nu: f64, m: usize) -> Result<(FiniteWorld, HypothesisClass)> {
    if !(nu > 0.0 && nu < 1.0 / 3.0) {
        return input_err(format!("nu must lie in (0, 1/3), got {nu}"));
    }
    if m == 0 {
        return input_err("m must be positive");
    }
    let mf = m as f64;
    let q0 = nu / 40.0;
    let c: f64 = 1.0 / 3.0;
    let c2 = c * c;
    let eps = (c2 + (c2 * c2 + 4.0 * c2 * q0 * nu * mf).sqrt()) / (2.0 * q0 * mf);
    let rest = 1.0 - 2.0 * nu - eps;
    if rest < 0.0 {
        return input_err(format!("m = {m} too small for nu = {nu}: masses go negative"));
    }
    let world = FiniteWorld::new(vec![nu, nu + eps, rest], vec![1.0; 3], vec![1.0, q0, 1.0])?;
    let class = HypothesisClass::new(vec![vec![-1, 1, 1], vec![1, -1, 1]])?;
    Ok((world, class))
}

/// Smallest `m` for which the construction above is meant to be drawn.
pub fn theorem2_min_m(nu: f64) -> usize {
    (49.0 / (nu * nu)).ceil() as usize
}

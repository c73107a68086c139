//! Linear-classifier approximation of the active learner: squared hinge
//! surrogate, online gradient descent with step `sqrt(eta / (eta + t))`, and
//! a margin-based stand-in for the disagreement-region test.

use serde::{Deserialize, Serialize};

use crate::active::{doubling_schedule, Ablations};
use crate::error::{input_err, CfalError, Result};
use crate::estimators::{choose_clip_threshold, mis_weight, ClipConfig, PolicyStack, QueryRule, TailVariant, WeightDistribution};
use crate::hypothesis::Label;
use crate::sim::{dot, LinearEnvironment, LinearWorld, PropensityMap};

/// Online examples between two curve points.
pub const CURVE_EVERY: usize = 50;

/// Weight vector over the features plus a trailing bias term.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LinearModel {
    pub weights: Vec<f64>,
    pub eta: f64,
    pub c: f64,
}

/// `x` with a constant 1 appended for the bias.
pub fn augment(x: &[f64]) -> Vec<f64> {
    let mut v = Vec::with_capacity(x.len() + 1);
    v.extend_from_slice(x);
    v.push(1.0);
    v
}

impl LinearModel {
    pub fn new(dim: usize, eta: f64, c: f64) -> Result<Self> {
        if !(eta > 0.0) || !(c > 0.0) {
            return input_err(format!("eta and C must be positive, got eta = {eta}, C = {c}"));
        }
        Ok(Self { weights: vec![0.0; dim + 1], eta, c })
    }

    /// `w^T x~` for a raw feature vector.
    pub fn score(&self, x: &[f64]) -> f64 {
        let d = x.len();
        dot(&self.weights[..d], x) + self.weights[d]
    }

    pub fn predict(&self, x: &[f64]) -> Label {
        if self.score(x) >= 0.0 {
            1
        } else {
            -1
        }
    }

    pub fn step_size(&self, t: usize) -> f64 {
        (self.eta / (self.eta + t as f64)).sqrt()
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("models always serialize")
    }
}

/// `max(0, 1 - y w^T x~)^2`.
pub fn squared_loss(model: &LinearModel, x: &[f64], y: Label) -> f64 {
    let r = 1.0 - y as f64 * model.score(x);
    if r > 0.0 {
        r * r
    } else {
        0.0
    }
}

/// One importance-weighted gradient step on the squared loss with step size
/// `sqrt(eta / (eta + t))`.
///
/// The step is capped so a single update never pushes the example's margin
/// past 1, the point where its loss reaches zero; with large importance
/// weights an uncapped step overshoots and the iterates diverge.
pub fn ogd_step(model: &LinearModel, x: &[f64], y: Label, weight: f64, t: usize) -> Result<LinearModel> {
    if !(weight >= 0.0) || !weight.is_finite() {
        return Err(CfalError::Runtime(format!("invalid example weight {weight}")));
    }
    let r = 1.0 - y as f64 * model.score(x);
    if weight == 0.0 || r <= 0.0 {
        return Ok(model.clone());
    }
    let xx = dot(x, x) + 1.0;
    let a = model.step_size(t);
    // gradient is -2 r y x~; moving the margin by s * xx changes r by -s * xx
    let s = (2.0 * a * weight * r).min(r / xx);
    let mut next = model.clone();
    let d = x.len();
    let sy = s * y as f64;
    for (w, xi) in next.weights[..d].iter_mut().zip(x) {
        *w += sy * xi;
    }
    next.weights[d] += sy;
    if next.weights.iter().any(|w| !w.is_finite()) {
        return Err(CfalError::Runtime("gradient step produced non-finite weights".into()));
    }
    Ok(next)
}

/// How the left side of the disagreement test is scaled.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DisagreementScale {
    /// Divide the flip weight `|2 w^T x~| / (a x~^T x~)` by `m + n_k`, turning
    /// it into the loss gap per example that the right side bounds. This is
    /// what importance-aware online learners do in their query decision.
    #[default]
    PerExample,
    /// Compare the raw flip weight with the right side.
    Printed,
}

/// Whether `x` is treated as inside the disagreement region:
/// `|2 w^T x~| / (a x~^T x~) / s <= sqrt(C V / (m + n_k)) + C M_k / (m + n_k)`,
/// with `s = m + n_k` or `s = 1` depending on `scale`.
#[allow(clippy::too_many_arguments)]
pub fn approx_in_disagreement(
    model: &LinearModel,
    x: &[f64],
    a: f64,
    c: f64,
    second_moment_est: f64,
    m_plus_nk: usize,
    m_k: f64,
    scale: DisagreementScale,
) -> bool {
    let xx = dot(x, x) + 1.0;
    let denom = a * xx;
    if !(denom > 0.0) {
        return true;
    }
    let n = m_plus_nk.max(1) as f64;
    let mut lhs = (2.0 * model.score(x)).abs() / denom;
    if scale == DisagreementScale::PerExample {
        lhs /= n;
    }
    lhs <= (c * second_moment_est.max(0.0) / n).sqrt() + c * m_k / n
}

/// One example with its importance weight.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WeightedExample {
    pub x: Vec<f64>,
    pub y: Label,
    pub weight: f64,
}

fn kept_weight(e: &WeightedExample, clip: ClipConfig) -> f64 {
    if clip.keeps(e.weight) {
        e.weight
    } else {
        0.0
    }
}

/// `mean(u l) + sqrt(lambda / B * mean(u^2 l))` over a batch of size `B`,
/// with clipped weights set to zero.
pub fn regularized_objective(model: &LinearModel, batch: &[WeightedExample], clip: ClipConfig, lambda: f64) -> Result<f64> {
    if batch.is_empty() {
        return input_err("empty batch");
    }
    let b = batch.len() as f64;
    let (mut first, mut second) = (0.0, 0.0);
    for e in batch {
        let u = kept_weight(e, clip);
        let l = squared_loss(model, &e.x, e.y);
        first += u * l;
        second += u * u * l;
    }
    Ok(first / b + (lambda / b * (second / b)).sqrt())
}

/// Gradient of [`regularized_objective`] in the weights (bias last). The
/// square-root term contributes zero where its argument vanishes.
pub fn regularized_objective_gradient(
    model: &LinearModel,
    batch: &[WeightedExample],
    clip: ClipConfig,
    lambda: f64,
) -> Result<Vec<f64>> {
    if batch.is_empty() {
        return input_err("empty batch");
    }
    let b = batch.len() as f64;
    let dim = model.weights.len();
    let mut g_first = vec![0.0; dim];
    let mut g_second = vec![0.0; dim];
    let mut second = 0.0;
    for e in batch {
        let u = kept_weight(e, clip);
        let r = 1.0 - e.y as f64 * model.score(&e.x);
        if r <= 0.0 || u == 0.0 {
            continue;
        }
        second += u * u * r * r;
        let xa = augment(&e.x);
        let coef = -2.0 * r * e.y as f64;
        for j in 0..dim {
            g_first[j] += u * coef * xa[j];
            g_second[j] += u * u * coef * xa[j];
        }
    }
    let v = second / b;
    let reg = if v > 0.0 && lambda > 0.0 { (lambda / b).sqrt() / (2.0 * v.sqrt()) } else { 0.0 };
    Ok((0..dim).map(|j| g_first[j] / b + reg * g_second[j] / b).collect())
}

/// Running second moment `mean(u^2 l)` of the squared loss, feeding both the
/// one-pass regularizer and the disagreement test. Each example is scored
/// once, by the model current when it arrives.
///
/// The exact gradient of `sqrt(lambda / N * mean(u^2 l))` scales each
/// example's loss gradient by `sqrt(lambda / N) u^2 / (2 sqrt(mean(u^2 l)))`;
/// the mean is replaced by its running value so a single online step uses
/// weight `u + coef * u^2`.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct MomentAccumulator {
    sum: f64,
    count: usize,
}

impl MomentAccumulator {
    pub fn push(&mut self, weight: f64, sq_loss: f64) {
        self.sum += weight * weight * sq_loss;
        self.count += 1;
    }

    pub fn count(&self) -> usize {
        self.count
    }

    pub fn moment(&self) -> f64 {
        if self.count == 0 {
            0.0
        } else {
            self.sum / self.count as f64
        }
    }

    /// Per-example multiplier on `u^2` from the regularizer.
    pub fn coef(&self, lambda: f64, n: usize) -> f64 {
        let v = self.moment();
        if v <= 0.0 {
            return 0.0;
        }
        (lambda / n.max(1) as f64).sqrt() / (2.0 * v.sqrt())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Algorithm {
    Passive,
    ActiveIw,
    VcActive,
}

impl Algorithm {
    pub const ALL: [Algorithm; 3] = [Algorithm::Passive, Algorithm::ActiveIw, Algorithm::VcActive];

    pub fn name(&self) -> &'static str {
        match self {
            Algorithm::Passive => "passive",
            Algorithm::ActiveIw => "active_iw",
            Algorithm::VcActive => "vc_active",
        }
    }

    /// Effective ablations: the baseline runs without clipping and without
    /// the second-moment regularizer.
    pub fn ablations(&self, requested: Ablations) -> Ablations {
        match self {
            Algorithm::ActiveIw => Ablations { clipping: false, regularizer: false, ..requested },
            _ => requested,
        }
    }
}

impl std::str::FromStr for Algorithm {
    type Err = CfalError;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "passive" => Ok(Algorithm::Passive),
            "active_iw" => Ok(Algorithm::ActiveIw),
            "vc_active" => Ok(Algorithm::VcActive),
            other => Err(CfalError::Config(format!("unknown algorithm '{other}'"))),
        }
    }
}

/// A point on an error-versus-labels curve.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CurveSample {
    pub labels_used: usize,
    pub test_error: f64,
}

pub fn test_error(model: &LinearModel, world: &LinearWorld) -> f64 {
    let wrong = world.test.iter().filter(|&&i| model.predict(&world.features[i]) != world.labels[i]).count();
    wrong as f64 / world.test.len().max(1) as f64
}

/// Final model and error curve of one linear run.
#[derive(Debug, Clone, PartialEq)]
pub struct LinearRun {
    pub model: LinearModel,
    pub curve: Vec<CurveSample>,
    pub labels_used: usize,
}

/// Clip thresholds `M_0..M_K` from the empirical distribution of the
/// per-epoch weight over the logged propensities, with `C` as the log term.
fn empirical_thresholds(logged_q0: &[f64], stack: &PolicyStack, c: f64, clipping: bool) -> Result<Vec<f64>> {
    let m = stack.m() as f64;
    (0..=stack.epochs())
        .map(|k| {
            let nk = stack.n(k) as f64;
            let total = stack.count(k) as f64;
            let values: Vec<f64> = logged_q0.iter().map(|&q| total / (m * q + nk)).collect();
            let dist = WeightDistribution::from_sample(&values)?;
            if clipping {
                choose_clip_threshold(&dist, stack.count(k), c, TailVariant::Active)
            } else {
                // nothing is clipped: the largest weight any sample can get
                Ok(logged_q0.iter().map(|&q| 1.0 / q).fold(1.0, f64::max))
            }
        })
        .collect()
}

/// Run one algorithm over a prepared environment. Only online queries
/// count as labels; the logged phase is free.
#[allow(clippy::too_many_arguments)]
pub fn run_linear(
    world: &LinearWorld,
    policy: &PropensityMap,
    env: &LinearEnvironment,
    algorithm: Algorithm,
    eta: f64,
    c: f64,
    scale: DisagreementScale,
    requested: Ablations,
) -> Result<LinearRun> {
    let mut env = env.clone();
    let mut model = LinearModel::new(world.config.dim, eta, c)?;
    let ab = algorithm.ablations(requested);
    let passive = algorithm == Algorithm::Passive;
    let logged = env.logged.clone();
    let online = env.online.clone();
    if logged.is_empty() {
        return Err(CfalError::Runtime("no logged examples".into()));
    }
    let schedule = doubling_schedule(online.len());
    let rule = if passive || !ab.debias { QueryRule::QueryAll } else { QueryRule::Debias };
    let stack = PolicyStack::new(logged.len(), schedule.clone(), rule)?;
    let logged_q0: Vec<f64> = logged.iter().map(|p| p.q0).collect();
    let thresholds = if passive {
        vec![f64::INFINITY; schedule.len() + 1]
    } else {
        empirical_thresholds(&logged_q0, &stack, c, ab.clipping)?
    };
    let regularize = !passive && ab.regularizer;
    let mut acc = MomentAccumulator::default();
    let mut t = 0usize;

    let learn = |model: &mut LinearModel, acc: &mut MomentAccumulator, t: &mut usize, x: &[f64], y: Option<Label>, u: f64, n: usize, step: bool| -> Result<()> {
        let Some(y) = y else {
            acc.push(0.0, 0.0);
            return Ok(());
        };
        let sq = squared_loss(model, x, y);
        let eff = if regularize { u + acc.coef(c, n) * u * u } else { u };
        acc.push(u, sq);
        if step && u > 0.0 {
            *model = ogd_step(model, x, y, eff, *t)?;
            *t += 1;
        }
        Ok(())
    };

    let m0 = thresholds[0];
    for p in &logged {
        let x = &world.features[p.index];
        let w = 1.0 / p.q0;
        let u = if w <= m0 { w } else { 0.0 };
        let y = p.z.then_some(world.labels[p.index]);
        learn(&mut model, &mut acc, &mut t, x, y, u, logged.len(), true)?;
    }
    let mut curve = vec![CurveSample { labels_used: 0, test_error: test_error(&model, world) }];

    let mut pos = 0;
    for (k, &tau) in schedule.iter().enumerate() {
        let count_k = stack.count(k);
        let m_k = thresholds[k];
        let m_next = thresholds[k + 1];
        let v_hat = acc.moment();
        for &i in &online[pos..pos + tau] {
            let x = &world.features[i];
            let q0 = policy.propensity(x);
            let (y, u, step) = if passive {
                (Some(env.query(world, i)), 1.0, true)
            } else if !stack.query(q0, k + 1)? {
                (None, 0.0, false)
            } else {
                let in_dis = !ab.dbal
                    || approx_in_disagreement(&model, x, model.step_size(t), c, v_hat, count_k, m_k, scale);
                // Inferred labels join the sample (they count toward the
                // second moment) but take no gradient step: every candidate
                // agrees on them, and stepping on them in the unconstrained
                // relaxation is self-training, which drives the clipped
                // squared loss to a one-class solution on nonnegative data.
                let y = if in_dis { env.query(world, i) } else { model.predict(x) };
                let w = if ab.mis { mis_weight(q0, k + 1, &stack)? } else { 1.0 };
                (Some(y), if w <= m_next { w } else { 0.0 }, in_dis)
            };
            learn(&mut model, &mut acc, &mut t, x, y, u, stack.count(k + 1), step)?;
            pos += 1;
            if pos % CURVE_EVERY == 0 || pos == online.len() {
                curve.push(CurveSample { labels_used: env.oracle_calls(), test_error: test_error(&model, world) });
            }
        }
    }
    Ok(LinearRun { model, curve, labels_used: env.oracle_calls() })
}

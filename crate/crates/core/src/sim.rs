//! Seeded data-generating environments: the logged-then-online process over
//! a finite world, the fixture worlds used by the tests, and the synthetic
//! linear dataset with its certainty/uncertainty logging policies.

use rand::distributions::{Distribution, WeightedIndex};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{input_err, CfalError, Result};
use crate::estimators::Sample;
use crate::hypothesis::{FiniteWorld, HypothesisClass, Label};

/// Identity of the generator behind every seeded stream, recorded in run
/// metadata.
pub const RNG_ID: &str = "ChaCha8Rng/rand_chacha-0.3";

pub fn seeded_rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

fn draw_label(rng: &mut ChaCha8Rng, p_pos: f64) -> Label {
    if rng.gen::<f64>() < p_pos {
        1
    } else {
        -1
    }
}

/// Logged samples as the learner sees them, plus the true label of every
/// draw (revealed or not), kept for exact accounting.
#[derive(Debug, Clone, PartialEq)]
pub struct LoggedBatch {
    pub samples: Vec<Sample>,
    pub truth: Vec<Label>,
}

/// Logged-then-online environment over a finite world.
#[derive(Debug, Clone)]
pub struct Environment {
    world: FiniteWorld,
    rng: ChaCha8Rng,
    seed: u64,
    sampler: WeightedIndex<f64>,
    logged_reveals: usize,
    oracle_calls: usize,
    online_truth: Vec<(usize, Label)>,
}

impl Environment {
    pub fn new(world: FiniteWorld, seed: u64) -> Result<Self> {
        let sampler = WeightedIndex::new(world.mass().to_vec())
            .map_err(|e| CfalError::Input(format!("instance masses unusable for sampling: {e}")))?;
        Ok(Self {
            world,
            rng: seeded_rng(seed),
            seed,
            sampler,
            logged_reveals: 0,
            oracle_calls: 0,
            online_truth: Vec::new(),
        })
    }

    pub fn world(&self) -> &FiniteWorld {
        &self.world
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    /// Labels revealed by the logging policy (free).
    pub fn logged_reveals(&self) -> usize {
        self.logged_reveals
    }

    /// Costed online label-oracle calls.
    pub fn oracle_calls(&self) -> usize {
        self.oracle_calls
    }

    /// Every online draw so far with its true label, in draw order.
    pub fn online_truth(&self) -> &[(usize, Label)] {
        &self.online_truth
    }

    /// `m` i.i.d. draws; each label is revealed with probability `Q0(x)`.
    /// `x`, `y` and `z` are always all drawn so the stream does not depend
    /// on which labels end up revealed.
    pub fn generate_logged(&mut self, m: usize) -> LoggedBatch {
        let mut samples = Vec::with_capacity(m);
        let mut truth = Vec::with_capacity(m);
        for _ in 0..m {
            let x = self.sampler.sample(&mut self.rng);
            let y = draw_label(&mut self.rng, self.world.label_prob()[x]);
            let z = self.rng.gen::<f64>() < self.world.q0()[x];
            truth.push(y);
            if z {
                self.logged_reveals += 1;
                samples.push(Sample::observed(x, y, 0));
            } else {
                samples.push(Sample::unobserved(x, 0));
            }
        }
        LoggedBatch { samples, truth }
    }

    /// Open a stream of `count` further online draws.
    pub fn stream_online(&mut self, count: usize) -> OnlineStream<'_> {
        OnlineStream { env: self, remaining: count, current: None, queried: false }
    }
}

/// Lazily drawn online instances; labels only through [`OnlineStream::query`].
#[derive(Debug)]
pub struct OnlineStream<'a> {
    env: &'a mut Environment,
    remaining: usize,
    current: Option<(usize, Label)>,
    queried: bool,
}

impl OnlineStream<'_> {
    pub fn remaining(&self) -> usize {
        self.remaining
    }

    /// Draw the next instance.
    pub fn next_instance(&mut self) -> Result<usize> {
        if self.remaining == 0 {
            return Err(CfalError::Runtime("online stream exhausted".into()));
        }
        self.remaining -= 1;
        let env = &mut *self.env;
        let x = env.sampler.sample(&mut env.rng);
        let y = draw_label(&mut env.rng, env.world.label_prob()[x]);
        env.online_truth.push((x, y));
        self.current = Some((x, y));
        self.queried = false;
        Ok(x)
    }

    /// Reveal the current instance's label; counts one oracle call.
    pub fn query(&mut self) -> Result<Label> {
        let Some((_, y)) = self.current else {
            return Err(CfalError::Runtime("query before any instance was drawn".into()));
        };
        if self.queried {
            return Err(CfalError::Runtime("instance already queried".into()));
        }
        self.queried = true;
        self.env.oracle_calls += 1;
        Ok(y)
    }
}

/// Five-instance clipping example: masses `(nu - eps, eps, 4 eps, 16 eps,
/// 1 - nu - 20 eps)`, propensities `(1, a, a, 4a, 4a)`, every label `-1`,
/// with `eps = nu / (1 + 1 / (100 a))`.
pub fn fixture_table1(nu: f64, alpha: f64) -> Result<(FiniteWorld, HypothesisClass)> {
    if !(nu > 0.0 && nu < 0.1) {
        return input_err(format!("nu must lie in (0, 0.1), got {nu}"));
    }
    if !(alpha > 0.0 && alpha < 0.01) {
        return input_err(format!("alpha must lie in (0, 0.01), got {alpha}"));
    }
    let eps = table1_eps(nu, alpha);
    let last = 1.0 - nu - 20.0 * eps;
    if last < 0.0 {
        return input_err(format!("nu = {nu}, alpha = {alpha} leave negative mass on the last instance"));
    }
    let world = FiniteWorld::new(
        vec![nu - eps, eps, 4.0 * eps, 16.0 * eps, last],
        vec![0.0; 5],
        vec![1.0, alpha, alpha, 4.0 * alpha, 4.0 * alpha],
    )?;
    let class = HypothesisClass::new(vec![
        vec![1, 1, -1, -1, -1],
        vec![1, -1, 1, -1, -1],
        vec![1, -1, -1, 1, -1],
        vec![-1, -1, -1, -1, 1],
    ])?;
    Ok((world, class))
}

pub fn table1_eps(nu: f64, alpha: f64) -> f64 {
    nu / (1.0 + 1.0 / (100.0 * alpha))
}

/// Two-instance world where debiasing saves queries: `Q0 = (1, alpha)`,
/// masses `(1 - mu, mu)`. The frequently logged instance carries a fair
/// coin label so it never leaves the disagreement region; the rare one is
/// always `+1`. The class is all four labelings.
pub fn fixture_example2(mu: f64, alpha: f64, lambda: f64) -> Result<(FiniteWorld, HypothesisClass)> {
    if !(lambda > 1.0) {
        return input_err(format!("lambda must exceed 1, got {lambda}"));
    }
    if !(mu > 0.0 && mu <= 1.0 / (4.0 * lambda)) {
        return input_err(format!("need 0 < mu <= 1/(4 lambda), got mu = {mu}"));
    }
    if !(alpha > 0.0 && alpha <= mu * mu / (2.0 * lambda)) {
        return input_err(format!("need 0 < alpha <= mu^2/(2 lambda), got alpha = {alpha}"));
    }
    let world = FiniteWorld::new(vec![1.0 - mu, mu], vec![0.5, 1.0], vec![1.0, alpha])?;
    Ok((world, HypothesisClass::all_labelings(2)?))
}

/// Checks the size relation the query-savings example assumes: `m > 2n`.
pub fn example2_sizes_ok(m: usize, n: usize) -> bool {
    m > 2 * n
}

/// Noisy 20-instance world with a 32-hypothesis class for consistency runs.
///
/// Instance 0 carries most of the mass; instances `1..=19` have
/// geometrically shrinking masses `0.1 * 0.7^(i-1)`, are logged with
/// propensity 0.3 and are `+1` with probability 0.9. Instance 0's noise is
/// set so the all-`+1` hypothesis errs with probability exactly 0.05.
///
/// The alternatives flip nested tails `{j, ..., 19}` of the rare instances
/// (with or without instance 0), so a learner that has not yet seen the
/// rarest instances pays a small but nonzero excess error. The optimal
/// hypothesis is listed last so the lowest-index tie rule never favors it.
pub fn fixture_consistency() -> Result<(FiniteWorld, HypothesisClass)> {
    const D: usize = 20;
    let rare: Vec<f64> = (0..D - 1).map(|i| 0.1 * 0.7f64.powi(i as i32)).collect();
    let rare_mass: f64 = rare.iter().sum();
    let mut mass = vec![1.0 - rare_mass];
    mass.extend(&rare);
    let p0 = 1.0 - (0.05 - 0.1 * rare_mass) / (1.0 - rare_mass);
    let mut label_prob = vec![p0];
    label_prob.extend(std::iter::repeat_n(0.9, D - 1));
    let mut q0 = vec![0.9];
    q0.extend(std::iter::repeat_n(0.3, D - 1));
    let world = FiniteWorld::new(mass, label_prob, q0)?;

    let tail_flip = |start: usize, flip_first: bool| -> Vec<Label> {
        let mut h = vec![1; D];
        for v in &mut h[start..] {
            *v = -1;
        }
        if flip_first {
            h[0] = -1;
        }
        h
    };
    let mut hs: Vec<Vec<Label>> = (1..D).map(|j| tail_flip(j, false)).collect();
    hs.extend((1..=12).map(|j| tail_flip(j, true)));
    hs.push(vec![1; D]);
    Ok((world, HypothesisClass::new(hs)?))
}

/// Synthetic linear dataset settings.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LinearWorldConfig {
    pub dim: usize,
    pub n_points: usize,
    pub noise: f64,
    /// Fraction held out to fit the logging policy's hyperplane.
    pub holdout_frac: f64,
    /// Fraction of the remaining points used for testing.
    pub test_frac: f64,
    /// Probability that a training point belongs to the logged phase.
    pub logged_frac: f64,
    pub q_min: f64,
}

impl Default for LinearWorldConfig {
    fn default() -> Self {
        Self { dim: 30, n_points: 6000, noise: 0.05, holdout_frac: 0.1, test_frac: 0.2, logged_frac: 0.5, q_min: 0.05 }
    }
}

impl LinearWorldConfig {
    pub fn validate(&self) -> Result<()> {
        if self.dim == 0 || self.n_points < 10 {
            return input_err("linear world needs dim >= 1 and at least 10 points");
        }
        for (name, v) in [("noise", self.noise), ("holdout_frac", self.holdout_frac), ("test_frac", self.test_frac)] {
            if !(0.0..0.5).contains(&v) {
                return input_err(format!("{name} must lie in [0, 0.5), got {v}"));
            }
        }
        if !(self.logged_frac > 0.0 && self.logged_frac < 1.0) {
            return input_err("logged_frac must lie in (0, 1)");
        }
        if !(self.q_min > 0.0 && self.q_min <= 1.0) {
            return input_err("q_min must lie in (0, 1]");
        }
        Ok(())
    }
}

/// Points uniform in `[0, 1]^dim`, labeled by a random hyperplane through
/// the cube's center with i.i.d. label flips.
#[derive(Debug, Clone)]
pub struct LinearWorld {
    pub config: LinearWorldConfig,
    pub separator: Vec<f64>,
    pub bias: f64,
    pub features: Vec<Vec<f64>>,
    pub labels: Vec<Label>,
    pub holdout: Vec<usize>,
    pub train: Vec<usize>,
    pub test: Vec<usize>,
}

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

impl LinearWorld {
    pub fn generate(config: LinearWorldConfig, seed: u64) -> Result<Self> {
        config.validate()?;
        let mut rng = seeded_rng(seed);
        let d = config.dim;
        let separator: Vec<f64> = (0..d).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let bias = dot(&separator, &vec![0.5; d]);
        let mut features = Vec::with_capacity(config.n_points);
        let mut labels = Vec::with_capacity(config.n_points);
        for _ in 0..config.n_points {
            let x: Vec<f64> = (0..d).map(|_| rng.gen::<f64>()).collect();
            let clean: Label = if dot(&separator, &x) - bias >= 0.0 { 1 } else { -1 };
            let y = if rng.gen::<f64>() < config.noise { -clean } else { clean };
            features.push(x);
            labels.push(y);
        }
        let mut order: Vec<usize> = (0..config.n_points).collect();
        rand::seq::SliceRandom::shuffle(order.as_mut_slice(), &mut rng);
        let n_hold = (config.holdout_frac * config.n_points as f64).round() as usize;
        let rest = config.n_points - n_hold;
        let n_test = (config.test_frac * rest as f64).round() as usize;
        let holdout = order[..n_hold].to_vec();
        let test = order[n_hold..n_hold + n_test].to_vec();
        let train = order[n_hold + n_test..].to_vec();
        Ok(Self { config, separator, bias, features, labels, holdout, train, test })
    }
}

/// How propensity varies with distance from the fitted hyperplane.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PolicyKind {
    /// Label revealed more often far from the hyperplane.
    Certainty,
    /// Label revealed more often near the hyperplane.
    Uncertainty,
}

/// Linear ramp of `|margin|` onto `[q_min, 1]`, where the margin is the
/// distance to a hyperplane fit by one perceptron pass.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PropensityMap {
    pub kind: PolicyKind,
    pub normal: Vec<f64>,
    pub offset: f64,
    pub max_margin: f64,
    pub q_min: f64,
}

impl PropensityMap {
    pub fn margin(&self, x: &[f64]) -> f64 {
        let norm = dot(&self.normal, &self.normal).sqrt();
        (dot(&self.normal, x) + self.offset).abs() / norm
    }

    pub fn propensity(&self, x: &[f64]) -> f64 {
        let r = (self.margin(x) / self.max_margin).min(1.0);
        let span = 1.0 - self.q_min;
        match self.kind {
            PolicyKind::Certainty => self.q_min + span * r,
            PolicyKind::Uncertainty => 1.0 - span * r,
        }
    }
}

fn fit_policy(world: &LinearWorld, kind: PolicyKind) -> Result<PropensityMap> {
    let d = world.config.dim;
    let mut w = vec![0.0; d];
    let mut b = 0.0;
    for &i in &world.holdout {
        let x = &world.features[i];
        let y = world.labels[i] as f64;
        if y * (dot(&w, x) + b) <= 0.0 {
            for (wj, xj) in w.iter_mut().zip(x) {
                *wj += y * xj;
            }
            b += y;
        }
    }
    if w.iter().all(|&v| v == 0.0) {
        return input_err("perceptron fit produced an all-zero normal; margins are degenerate");
    }
    let mut map = PropensityMap { kind, normal: w, offset: b, max_margin: 0.0, q_min: world.config.q_min };
    map.max_margin = world.features.iter().map(|x| map.margin(x)).fold(0.0, f64::max);
    if !(map.max_margin > 0.0) {
        return input_err("every point lies on the fitted hyperplane");
    }
    Ok(map)
}

pub fn certainty_policy(world: &LinearWorld) -> Result<PropensityMap> {
    fit_policy(world, PolicyKind::Certainty)
}

pub fn uncertainty_policy(world: &LinearWorld) -> Result<PropensityMap> {
    fit_policy(world, PolicyKind::Uncertainty)
}

/// One logged linear example: its point index, propensity and whether the
/// label was revealed.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LoggedPoint {
    pub index: usize,
    pub q0: f64,
    pub z: bool,
}

/// Training points split into a logged phase and an online stream, with a
/// counted label oracle for the stream.
#[derive(Debug, Clone)]
pub struct LinearEnvironment {
    pub logged: Vec<LoggedPoint>,
    pub online: Vec<usize>,
    oracle_calls: usize,
}

impl LinearEnvironment {
    pub fn new(world: &LinearWorld, policy: &PropensityMap, seed: u64) -> Self {
        let mut rng = seeded_rng(seed);
        let mut logged = Vec::new();
        let mut online = Vec::new();
        for &i in &world.train {
            let in_log = rng.gen::<f64>() < world.config.logged_frac;
            let u = rng.gen::<f64>();
            if in_log {
                let q0 = policy.propensity(&world.features[i]);
                logged.push(LoggedPoint { index: i, q0, z: u < q0 });
            } else {
                online.push(i);
            }
        }
        Self { logged, online, oracle_calls: 0 }
    }

    pub fn query(&mut self, world: &LinearWorld, index: usize) -> Label {
        self.oracle_calls += 1;
        world.labels[index]
    }

    pub fn oracle_calls(&self) -> usize {
        self.oracle_calls
    }
}

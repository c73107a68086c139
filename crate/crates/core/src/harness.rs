//! Experiment orchestration: JSON configs, seeded multi-trial runs of the
//! three learners, the area-under-curve metric and parameter sweeps.

use std::fmt::Write as _;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::active::{doubling_schedule, run_traced, Ablations, AlgoConfig, DEFAULT_GAMMA1};
use crate::error::{CfalError, Result};
use crate::estimators::{weighted_loss, ClipConfig, PolicyStack, QueryRule, Sample, SampleWeights, WeightScheme};
use crate::hypothesis::{population_error, FiniteWorld, HypothesisClass, WorldDocument};
use crate::linear::{run_linear, Algorithm, CurveSample, DisagreementScale, CURVE_EVERY};
use crate::passive::{argmin_by, theorem2_world};
use crate::sim::{
    certainty_policy, fixture_consistency, fixture_example2, fixture_table1, uncertainty_policy, Environment,
    LinearEnvironment, LinearWorld, LinearWorldConfig, PolicyKind, RNG_ID,
};

pub const CSV_HEADER: &str = "algorithm,params,trial,labels_used,test_error";

/// `0.01 * 2^i` for `i = 0, 2, ..., 10`.
pub fn default_c_grid() -> Vec<f64> {
    (0..6).map(|i| 0.01 * 2f64.powi(2 * i)).collect()
}

/// `0.0001 * 2^i` for `i = 0, 2, ..., 12`.
pub fn default_eta_grid() -> Vec<f64> {
    (0..7).map(|i| 1e-4 * 2f64.powi(2 * i)).collect()
}

/// 64-bit seed from SHA-256 over the root seed and a list of tags.
pub fn derive_seed(root: u64, tags: &[&str]) -> u64 {
    let mut h = Sha256::new();
    h.update(root.to_le_bytes());
    for t in tags {
        h.update((t.len() as u64).to_le_bytes());
        h.update(t.as_bytes());
    }
    let digest = h.finalize();
    u64::from_le_bytes(digest[..8].try_into().expect("digest has 32 bytes"))
}

/// Seed of trial `trial`'s data. Every algorithm and grid point sees the
/// same data in a given trial.
pub fn trial_seed(root: u64, trial: usize) -> u64 {
    derive_seed(root, &["data", &trial.to_string()])
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Mode {
    Exact,
    Linear,
}

/// A named finite world, or an explicit one.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "name", rename_all = "snake_case", deny_unknown_fields)]
pub enum FixtureSpec {
    Table1 {
        #[serde(default = "d_nu")]
        nu: f64,
        #[serde(default = "d_alpha")]
        alpha: f64,
    },
    Example2 {
        #[serde(default = "d_mu")]
        mu: f64,
        #[serde(default = "d_alpha2")]
        alpha: f64,
        #[serde(default = "d_lambda")]
        lambda: f64,
    },
    Consistency,
    Theorem2 {
        #[serde(default = "d_nu2")]
        nu: f64,
        #[serde(default = "d_m2")]
        m: usize,
    },
    Custom { world: WorldDocument },
}

/// Re-tag a lower-level error as a configuration problem.
fn into_config(e: CfalError) -> CfalError {
    match e {
        CfalError::Config(m) | CfalError::Input(m) | CfalError::Runtime(m) | CfalError::Io(m) => CfalError::Config(m),
    }
}

fn d_nu() -> f64 {
    0.05
}
fn d_alpha() -> f64 {
    0.005
}
fn d_mu() -> f64 {
    0.05
}
fn d_alpha2() -> f64 {
    0.00025
}
fn d_lambda() -> f64 {
    5.0
}
fn d_nu2() -> f64 {
    0.3
}
fn d_m2() -> usize {
    1000
}

impl FixtureSpec {
    pub const NAMES: [&'static str; 4] = ["table1", "example2", "consistency", "theorem2"];

    /// Named fixture with its default parameters.
    pub fn by_name(name: &str) -> Result<Self> {
        match name {
            "table1" => Ok(Self::Table1 { nu: d_nu(), alpha: d_alpha() }),
            "example2" => Ok(Self::Example2 { mu: d_mu(), alpha: d_alpha2(), lambda: d_lambda() }),
            "consistency" => Ok(Self::Consistency),
            "theorem2" => Ok(Self::Theorem2 { nu: d_nu2(), m: d_m2() }),
            other => Err(CfalError::Config(format!(
                "unknown fixture '{other}', expected one of {}",
                Self::NAMES.join(", ")
            ))),
        }
    }

    pub fn build(&self) -> Result<(FiniteWorld, HypothesisClass)> {
        match self {
            Self::Table1 { nu, alpha } => fixture_table1(*nu, *alpha),
            Self::Example2 { mu, alpha, lambda } => fixture_example2(*mu, *alpha, *lambda),
            Self::Consistency => fixture_consistency(),
            Self::Theorem2 { nu, m } => theorem2_world(*nu, *m),
            Self::Custom { world } => world.clone().into_parts(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LinearSpec {
    #[serde(default)]
    pub world: LinearWorldConfig,
    pub policy: PolicyKind,
    #[serde(default)]
    pub disagreement: DisagreementScale,
}

fn default_delta() -> f64 {
    0.1
}
fn default_gamma1() -> Vec<f64> {
    vec![DEFAULT_GAMMA1]
}
fn default_trials() -> usize {
    1
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub mode: Mode,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub fixture: Option<FixtureSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub linear: Option<LinearSpec>,
    pub algorithm: Algorithm,
    /// Components switched off, by name.
    #[serde(default)]
    pub ablations: Vec<String>,
    /// Logged sample size (exact mode).
    #[serde(default)]
    pub m: usize,
    /// Online budget (exact mode); split by the doubling schedule unless
    /// `schedule` is given.
    #[serde(default)]
    pub n: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub schedule: Option<Vec<usize>>,
    #[serde(default = "default_delta")]
    pub delta: f64,
    #[serde(default = "default_gamma1")]
    pub gamma1: Vec<f64>,
    #[serde(default = "default_c_grid")]
    pub c_grid: Vec<f64>,
    #[serde(default = "default_eta_grid")]
    pub eta_grid: Vec<f64>,
    #[serde(default = "default_trials")]
    pub trials: usize,
    #[serde(default)]
    pub seed: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub out: Option<String>,
}

fn config_err<T>(msg: impl Into<String>) -> Result<T> {
    Err(CfalError::Config(msg.into()))
}

impl ExperimentConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        let c: Self = serde_json::from_str(text)?;
        c.validate()?;
        Ok(c)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("configs always serialize")
    }

    /// Everything that can be checked without running; failures are config
    /// errors.
    pub fn validate(&self) -> Result<()> {
        if self.trials == 0 {
            return config_err("trials must be at least 1");
        }
        self.ablations().map_err(into_config)?;
        match self.mode {
            Mode::Exact => {
                let Some(fixture) = &self.fixture else {
                    return config_err("exact mode needs a fixture");
                };
                if self.linear.is_some() {
                    return config_err("exact mode takes no linear section");
                }
                fixture.build().map_err(into_config)?;
                if self.gamma1.is_empty() {
                    return config_err("gamma1 grid is empty");
                }
                if self.m == 0 && self.online_budget() == 0 {
                    return config_err("exact mode needs m > 0 or an online budget");
                }
                let schedule = self.schedule();
                for &g in &self.gamma1 {
                    AlgoConfig::new(self.delta, g, schedule.clone(), Ablations::default())
                        .map_err(into_config)?;
                }
            }
            Mode::Linear => {
                let Some(spec) = &self.linear else {
                    return config_err("linear mode needs a linear section");
                };
                if self.fixture.is_some() {
                    return config_err("linear mode takes no fixture");
                }
                spec.world.validate().map_err(into_config)?;
                if self.c_grid.is_empty() || self.eta_grid.is_empty() {
                    return config_err("C and eta grids must be nonempty");
                }
                if self.c_grid.iter().chain(&self.eta_grid).any(|v| !(*v > 0.0) || !v.is_finite()) {
                    return config_err("C and eta values must be positive and finite");
                }
            }
        }
        Ok(())
    }

    pub fn ablations(&self) -> Result<Ablations> {
        Ablations::disabling(&self.ablations)
    }

    fn online_budget(&self) -> usize {
        match &self.schedule {
            Some(s) => s.iter().sum(),
            None => self.n,
        }
    }

    pub fn schedule(&self) -> Vec<usize> {
        self.schedule.clone().unwrap_or_else(|| doubling_schedule(self.n))
    }

    /// Every grid point this algorithm is swept over, in grid order.
    pub fn grid(&self) -> Vec<Params> {
        match (self.mode, self.algorithm) {
            (Mode::Exact, Algorithm::Passive) => vec![Params::None],
            (Mode::Exact, _) => self.gamma1.iter().map(|&g| Params::Gamma1(g)).collect(),
            (Mode::Linear, Algorithm::Passive) => self.eta_grid.iter().map(|&eta| Params::Eta(eta)).collect(),
            (Mode::Linear, _) => self
                .c_grid
                .iter()
                .flat_map(|&c| self.eta_grid.iter().map(move |&eta| Params::Linear { c, eta }))
                .collect(),
        }
    }
}

/// One point of a parameter grid.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Params {
    None,
    Gamma1(f64),
    Eta(f64),
    Linear { c: f64, eta: f64 },
}

impl Params {
    /// CSV-safe label, e.g. `C=0.01;eta=0.0001`.
    pub fn label(&self) -> String {
        match self {
            Params::None => "-".into(),
            Params::Gamma1(g) => format!("gamma1={g}"),
            Params::Eta(eta) => format!("eta={eta}"),
            Params::Linear { c, eta } => format!("C={c};eta={eta}"),
        }
    }
}

/// Curve of one trial plus the label horizon its AUC is taken over.
#[derive(Debug, Clone, PartialEq)]
pub struct TrialCurve {
    pub trial: usize,
    pub curve: Vec<CurveSample>,
    /// Size of the online stream: the most labels any learner could use.
    pub horizon: usize,
}

/// Error of the importance-weighted ERM over logged plus fully labeled
/// online data, after every epoch of the schedule.
fn passive_exact_curve(world: &FiniteWorld, class: &HypothesisClass, m: usize, schedule: &[usize], seed: u64) -> Result<Vec<CurveSample>> {
    let mut env = Environment::new(world.clone(), seed)?;
    let mut samples = env.generate_logged(m).samples;
    let stack = PolicyStack::new(m, schedule.to_vec(), QueryRule::QueryAll)?;
    let all: Vec<usize> = (0..class.len()).collect();
    let fit = |samples: &[Sample], k: usize| -> Result<f64> {
        if samples.is_empty() {
            return population_error(world, class.get(0));
        }
        let weights = SampleWeights::new(world, &stack, k, WeightScheme::PerEpochIw)?;
        let best = argmin_by(&all, |i| weighted_loss(class.get(i), samples, &weights, ClipConfig::none()))?;
        population_error(world, class.get(best))
    };
    let mut curve = vec![CurveSample { labels_used: 0, test_error: fit(&samples, 0)? }];
    for (k, &tau) in schedule.iter().enumerate() {
        let mut stream = env.stream_online(tau);
        for _ in 0..tau {
            let x = stream.next_instance()?;
            let y = stream.query()?;
            samples.push(Sample::observed(x, y, k + 1));
        }
        curve.push(CurveSample { labels_used: env.oracle_calls(), test_error: fit(&samples, k + 1)? });
    }
    Ok(curve)
}

fn exact_trial(config: &ExperimentConfig, params: Params, trial: usize) -> Result<TrialCurve> {
    let (world, class) = config.fixture.as_ref().expect("validated").build()?;
    let schedule = config.schedule();
    let horizon = schedule.iter().sum();
    let seed = trial_seed(config.seed, trial);
    if config.algorithm == Algorithm::Passive {
        let curve = passive_exact_curve(&world, &class, config.m, &schedule, seed)?;
        return Ok(TrialCurve { trial, curve, horizon });
    }
    let Params::Gamma1(gamma1) = params else {
        return Err(CfalError::Config(format!("exact mode takes gamma1, got {}", params.label())));
    };
    let ablations = config.algorithm.ablations(config.ablations()?);
    let algo = AlgoConfig::new(config.delta, gamma1, schedule, ablations)?;
    let mut env = Environment::new(world.clone(), seed)?;
    let (_, record, trace, _) = run_traced(&class, &algo, &mut env, config.m)?;
    // h^_k is fit before epoch k's queries: pair it with the labels used so far
    let mut curve = Vec::with_capacity(trace.len() + 1);
    let mut used = 0;
    for (state, row) in trace.iter().zip(&record.rows) {
        let err = population_error(&world, class.get(state.erm_k.expect("set by run_epoch")))?;
        curve.push(CurveSample { labels_used: used, test_error: err });
        used = row.cum_queries;
    }
    curve.push(CurveSample { labels_used: record.total_queries, test_error: record.final_error });
    Ok(TrialCurve { trial, curve, horizon })
}

fn linear_trial(config: &ExperimentConfig, params: Params, trial: usize) -> Result<TrialCurve> {
    let spec = config.linear.as_ref().expect("validated");
    let seed = trial_seed(config.seed, trial);
    let world = LinearWorld::generate(spec.world.clone(), seed)?;
    let policy = match spec.policy {
        PolicyKind::Certainty => certainty_policy(&world)?,
        PolicyKind::Uncertainty => uncertainty_policy(&world)?,
    };
    let env = LinearEnvironment::new(&world, &policy, derive_seed(seed, &["split"]));
    let (c, eta) = match params {
        Params::Linear { c, eta } => (c, eta),
        Params::Eta(eta) => (config.c_grid[0], eta),
        other => return Err(CfalError::Config(format!("linear mode takes C and eta, got {}", other.label()))),
    };
    let run = run_linear(&world, &policy, &env, config.algorithm, eta, c, spec.disagreement, config.ablations()?)?;
    Ok(TrialCurve { trial, curve: run.curve, horizon: env.online.len() })
}

pub fn run_trial(config: &ExperimentConfig, params: Params, trial: usize) -> Result<TrialCurve> {
    match config.mode {
        Mode::Exact => exact_trial(config, params, trial),
        Mode::Linear => linear_trial(config, params, trial),
    }
}

/// All trials at one grid point, in trial order.
pub fn run_point(config: &ExperimentConfig, params: Params) -> Result<Vec<TrialCurve>> {
    (0..config.trials).into_par_iter().map(|t| run_trial(config, params, t)).collect()
}

/// `(1/2N) sum_i sum_{l < L_i} (e_i(l + 1) + e_i(l))`, where `e_i(l)` is the
/// error of the last curve point using at most `l` labels and `L_i` is the
/// trial's horizon. Curves that stop early carry their last error forward.
pub fn auc(trials: &[TrialCurve]) -> Result<f64> {
    if trials.is_empty() {
        return Err(CfalError::Input("no trials to score".into()));
    }
    let mut total = 0.0;
    for t in trials {
        let c = &t.curve;
        if c.is_empty() {
            return Err(CfalError::Input(format!("trial {} has an empty curve", t.trial)));
        }
        if c.windows(2).any(|w| w[0].labels_used > w[1].labels_used) {
            return Err(CfalError::Input(format!("trial {} has decreasing label counts", t.trial)));
        }
        let mut j = 0;
        let mut at = |l: usize| {
            while j + 1 < c.len() && c[j + 1].labels_used <= l {
                j += 1;
            }
            c[j].test_error
        };
        let mut prev = at(0);
        for l in 0..t.horizon {
            let next = at(l + 1);
            total += prev + next;
            prev = next;
        }
    }
    Ok(total / (2.0 * trials.len() as f64))
}

/// Result of `run`: curve points for every trial at the first grid point.
#[derive(Debug, Clone, PartialEq)]
pub struct RunOutput {
    pub params: Params,
    pub trials: Vec<TrialCurve>,
    pub csv: String,
    pub metadata: serde_json::Value,
}

pub fn curves_csv(algorithm: Algorithm, params: Params, trials: &[TrialCurve]) -> String {
    let mut out = String::from(CSV_HEADER);
    out.push('\n');
    let label = params.label();
    for t in trials {
        for p in &t.curve {
            writeln!(out, "{},{},{},{},{}", algorithm.name(), label, t.trial, p.labels_used, p.test_error)
                .expect("writing to a string");
        }
    }
    out
}

/// JSON sidecar: seed, RNG, config and the constants that shape the output.
pub fn metadata(config: &ExperimentConfig, extra: serde_json::Value) -> serde_json::Value {
    let granularity = match config.mode {
        Mode::Exact => "epoch boundaries".to_string(),
        Mode::Linear => format!("every {CURVE_EVERY} online examples"),
    };
    let mut meta = serde_json::json!({
        "version": env!("CARGO_PKG_VERSION"),
        "seed": config.seed,
        "rng": RNG_ID,
        "seed_derivation": "sha256(root_seed, \"data\", trial) -> first 8 bytes little-endian",
        "config": config,
        "curve_granularity": granularity,
        "auc_horizon": "online stream length per trial; last error carried forward",
        "csv_header": CSV_HEADER,
        "constants": {
            "default_gamma1": DEFAULT_GAMMA1,
            "passive_lambda": "4 * log_term",
            "linear_loss": "max(0, 1 - y w.x)^2",
            "linear_step": "sqrt(eta / (eta + t)), capped at the hinge point",
            "linear_policy_map": "linear ramp of |margin| onto [q_min, 1]",
            "linear_q_min": config.linear.as_ref().map(|l| l.world.q_min),
            "linear_capacity_as_log_term": true,
        },
    });
    if let (Some(obj), serde_json::Value::Object(more)) = (meta.as_object_mut(), extra) {
        obj.extend(more);
    }
    meta
}

pub fn run_experiment(config: &ExperimentConfig) -> Result<RunOutput> {
    config.validate()?;
    let params = config.grid()[0];
    let trials = run_point(config, params)?;
    let csv = curves_csv(config.algorithm, params, &trials);
    let metadata = metadata(config, serde_json::json!({ "params": params.label() }));
    Ok(RunOutput { params, trials, csv, metadata })
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepOutput {
    /// `(params, AUC)` in grid order.
    pub table: Vec<(Params, f64)>,
    pub best: Params,
    pub best_auc: f64,
    pub best_trials: Vec<TrialCurve>,
    pub table_csv: String,
    pub curves_csv: String,
    pub metadata: serde_json::Value,
}

/// Evaluate every grid point over all trials and keep the smallest AUC;
/// ties go to the earlier grid point.
pub fn sweep(config: &ExperimentConfig) -> Result<SweepOutput> {
    config.validate()?;
    let grid = config.grid();
    let jobs: Vec<(usize, usize)> = (0..grid.len()).flat_map(|g| (0..config.trials).map(move |t| (g, t))).collect();
    let results: Vec<((usize, usize), TrialCurve)> = jobs
        .par_iter()
        .map(|&(g, t)| run_trial(config, grid[g], t).map(|c| ((g, t), c)))
        .collect::<Result<_>>()?;
    let mut per_point: Vec<Vec<TrialCurve>> = vec![Vec::new(); grid.len()];
    for ((g, _), c) in results {
        per_point[g].push(c);
    }
    let mut table = Vec::with_capacity(grid.len());
    for (g, trials) in per_point.iter_mut().enumerate() {
        trials.sort_by_key(|c| c.trial);
        table.push((grid[g], auc(trials)?));
    }
    let mut best = 0;
    for (g, (_, v)) in table.iter().enumerate() {
        if *v < table[best].1 {
            best = g;
        }
    }
    let mut table_csv = String::from("algorithm,params,auc,selected\n");
    for (g, (p, v)) in table.iter().enumerate() {
        writeln!(table_csv, "{},{},{},{}", config.algorithm.name(), p.label(), v, g == best).expect("writing to a string");
    }
    let best_trials = per_point.swap_remove(best);
    let curves_csv = curves_csv(config.algorithm, grid[best], &best_trials);
    let metadata = metadata(
        config,
        serde_json::json!({ "selected_params": grid[best].label(), "selected_auc": table[best].1, "grid_points": grid.len() }),
    );
    Ok(SweepOutput { best: grid[best], best_auc: table[best].1, table, best_trials, table_csv, curves_csv, metadata })
}

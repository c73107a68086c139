use cfal_core::active::{self, doubling_schedule, Ablations, AlgoConfig};
use cfal_core::estimators::{self, TailVariant, WeightDistribution};
use cfal_core::harness::{self, ExperimentConfig, FixtureSpec};
use cfal_core::hypothesis::{self, FiniteWorld, HypothesisClass, Label, WorldDocument};
use cfal_core::sim::Environment;
use cfal_core::{verify as suites, CfalError};
use pyo3::exceptions::{PyRuntimeError, PyValueError};
use pyo3::prelude::*;

fn py_err(e: CfalError) -> PyErr {
    match e {
        CfalError::Config(_) | CfalError::Input(_) => PyValueError::new_err(e.to_string()),
        CfalError::Runtime(_) | CfalError::Io(_) => PyRuntimeError::new_err(e.to_string()),
    }
}

/// A finite instance space together with its hypothesis class.
#[pyclass(name = "World", module = "cfal", frozen, skip_from_py_object)]
#[derive(Clone)]
struct PyWorld {
    world: FiniteWorld,
    class: HypothesisClass,
}

#[pymethods]
impl PyWorld {
    /// Named fixture with default parameters.
    #[staticmethod]
    fn fixture(name: &str) -> PyResult<Self> {
        let (world, class) = FixtureSpec::by_name(name).and_then(|s| s.build()).map_err(py_err)?;
        Ok(Self { world, class })
    }

    #[staticmethod]
    fn table1(nu: f64, alpha: f64) -> PyResult<Self> {
        let (world, class) = FixtureSpec::Table1 { nu, alpha }.build().map_err(py_err)?;
        Ok(Self { world, class })
    }

    #[staticmethod]
    fn example2(mu: f64, alpha: f64, lambda: f64) -> PyResult<Self> {
        let (world, class) = FixtureSpec::Example2 { mu, alpha, lambda }.build().map_err(py_err)?;
        Ok(Self { world, class })
    }

    #[staticmethod]
    fn from_json(text: &str) -> PyResult<Self> {
        let (world, class) = WorldDocument::from_json(text).and_then(|d| d.into_parts()).map_err(py_err)?;
        Ok(Self { world, class })
    }

    fn to_json(&self) -> String {
        WorldDocument::new(&self.world, &self.class).to_json()
    }

    #[getter]
    fn mass(&self) -> Vec<f64> {
        self.world.mass().to_vec()
    }

    #[getter]
    fn label_prob(&self) -> Vec<f64> {
        self.world.label_prob().to_vec()
    }

    #[getter]
    fn q0(&self) -> Vec<f64> {
        self.world.q0().to_vec()
    }

    #[getter]
    fn hypotheses(&self) -> Vec<Vec<Label>> {
        WorldDocument::new(&self.world, &self.class).hypotheses
    }

    fn population_error(&self, h: Vec<Label>) -> PyResult<f64> {
        hypothesis::population_error(&self.world, &h).map_err(py_err)
    }

    /// `(index, error)` of the best hypothesis.
    fn best_hypothesis(&self) -> PyResult<(usize, f64)> {
        hypothesis::best_hypothesis(&self.world, &self.class).map_err(py_err)
    }

    fn __len__(&self) -> usize {
        self.world.len()
    }

    fn __repr__(&self) -> String {
        format!("World(instances={}, hypotheses={})", self.world.len(), self.class.len())
    }
}

/// Summary of one active-learning run.
#[pyclass(name = "RunRecord", module = "cfal", frozen, get_all)]
struct PyRunRecord {
    output: usize,
    final_error: f64,
    excess_error: f64,
    total_queries: usize,
    logged_reveals: usize,
    thresholds: Vec<f64>,
    csv: String,
    json: String,
}

/// Run the active learner on `world` with `m` logged draws and `n` online
/// draws split by the doubling schedule.
#[pyfunction]
#[pyo3(signature = (world, m, n, seed, delta=0.1, gamma1=active::DEFAULT_GAMMA1, ablate=Vec::new()))]
fn run_active(
    world: &PyWorld,
    m: usize,
    n: usize,
    seed: u64,
    delta: f64,
    gamma1: f64,
    ablate: Vec<String>,
) -> PyResult<PyRunRecord> {
    let ablations = Ablations::disabling(&ablate).map_err(py_err)?;
    let config = AlgoConfig::new(delta, gamma1, doubling_schedule(n), ablations).map_err(py_err)?;
    let mut env = Environment::new(world.world.clone(), seed).map_err(py_err)?;
    let (output, record) = active::run(&world.class, &config, &mut env, m).map_err(py_err)?;
    Ok(PyRunRecord {
        output,
        final_error: record.final_error,
        excess_error: record.excess_error,
        total_queries: record.total_queries,
        logged_reveals: record.logged_reveals,
        thresholds: record.rows.iter().map(|r| r.m_k).collect(),
        csv: record.to_csv(),
        json: serde_json::to_string(&record).expect("run records serialize"),
    })
}

/// Smallest threshold `M >= 1` with `(2M / count) log_term >= tail(M)`.
///
/// `atoms` is a list of `(weight, probability)` pairs; `variant` is
/// `"passive"` or `"active"`.
#[pyfunction]
#[pyo3(signature = (atoms, count, log_term, variant="passive"))]
fn choose_clip_threshold(atoms: Vec<(f64, f64)>, count: usize, log_term: f64, variant: &str) -> PyResult<f64> {
    let variant = match variant {
        "passive" => TailVariant::Passive,
        "active" => TailVariant::Active,
        other => return Err(PyValueError::new_err(format!("unknown variant '{other}'"))),
    };
    let dist = WeightDistribution::from_atoms(atoms).map_err(py_err)?;
    estimators::choose_clip_threshold(&dist, count, log_term, variant).map_err(py_err)
}

#[pyfunction(name = "doubling_schedule")]
fn py_doubling_schedule(n: usize) -> Vec<usize> {
    doubling_schedule(n)
}

/// Run the first grid point of a JSON experiment config; returns the curve CSV.
#[pyfunction]
fn run_experiment(config_json: &str) -> PyResult<String> {
    let config = ExperimentConfig::from_json(config_json).map_err(py_err)?;
    Ok(harness::run_experiment(&config).map_err(py_err)?.csv)
}

/// Sweep a JSON experiment config; returns `(best_params, best_auc, table_csv)`.
#[pyfunction]
fn sweep(config_json: &str) -> PyResult<(String, f64, String)> {
    let config = ExperimentConfig::from_json(config_json).map_err(py_err)?;
    let out = harness::sweep(&config).map_err(py_err)?;
    Ok((out.best.label(), out.best_auc, out.table_csv))
}

/// Run a property suite (or `"all"`); returns `(all_passed, table_csv)`.
#[pyfunction]
#[pyo3(signature = (suite="all", seed=0))]
fn verify(suite: &str, seed: u64) -> PyResult<(bool, String)> {
    let reports = suites::run_suite(suite, seed).map_err(py_err)?;
    Ok((reports.iter().all(|r| r.passed), suites::report_table(&reports)))
}

#[pymodule]
fn cfal(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyWorld>()?;
    m.add_class::<PyRunRecord>()?;
    m.add_function(wrap_pyfunction!(run_active, m)?)?;
    m.add_function(wrap_pyfunction!(choose_clip_threshold, m)?)?;
    m.add_function(wrap_pyfunction!(py_doubling_schedule, m)?)?;
    m.add_function(wrap_pyfunction!(run_experiment, m)?)?;
    m.add_function(wrap_pyfunction!(sweep, m)?)?;
    m.add_function(wrap_pyfunction!(verify, m)?)?;
    m.add("ABLATIONS", Ablations::NAMES.to_vec())?;
    Ok(())
}

//! Python module `psofl`: swarm and grid search over LSTM configurations,
//! federated training on the synthetic workloads, and the experiment runner.

use std::path::PathBuf;
use std::sync::{Arc, Mutex};

use pyo3::exceptions::{PyRuntimeError, PyValueError};
use pyo3::prelude::*;

use psofl::config::ExperimentConfig;
use psofl::data::{self, CsvSchema, PartitionedDataset, TelemetryParams, TrafficParams};
use psofl::experiment::{run_experiment as run_configured, Overrides};
use psofl::federated::{self, FlConfig};
use psofl::harness::{self, ConfigEvaluator, EvalOutcome, GridSpec, SearchReport};
use psofl::learner::TrainSpec;
use psofl::pso::{self, CoefficientMode, Direction, PsoParams, UpdateRule};

fn value_err(e: psofl::Error) -> PyErr {
    PyValueError::new_err(e.to_string())
}

#[pyclass(name = "ModelConfig", frozen, eq, hash, from_py_object)]
#[derive(Clone, Copy, PartialEq, Eq, Hash)]
struct PyModelConfig(pso::ModelConfig);

#[pymethods]
impl PyModelConfig {
    #[new]
    fn new(layers: u32, neurons: u32, epochs: u32) -> Self {
        Self(pso::ModelConfig::new(layers, neurons, epochs))
    }

    #[getter]
    fn layers(&self) -> u32 {
        self.0.layers
    }

    #[getter]
    fn neurons(&self) -> u32 {
        self.0.neurons
    }

    #[getter]
    fn epochs(&self) -> u32 {
        self.0.epochs
    }

    fn as_tuple(&self) -> (u32, u32, u32) {
        (self.0.layers, self.0.neurons, self.0.epochs)
    }

    fn __repr__(&self) -> String {
        format!(
            "ModelConfig(layers={}, neurons={}, epochs={})",
            self.0.layers, self.0.neurons, self.0.epochs
        )
    }
}

#[pyclass(name = "SearchBounds", frozen, from_py_object)]
#[derive(Clone, Copy)]
struct PySearchBounds(pso::SearchBounds);

#[pymethods]
impl PySearchBounds {
    #[new]
    #[pyo3(signature = (layers = (1, 5), neurons = (1, 200), epochs = (1, 50)))]
    fn new(layers: (u32, u32), neurons: (u32, u32), epochs: (u32, u32)) -> PyResult<Self> {
        pso::SearchBounds::new(layers, neurons, epochs)
            .map(Self)
            .map_err(value_err)
    }

    /// Number of integer configurations in the box.
    fn size(&self) -> usize {
        self.0.size()
    }

    fn contains(&self, cfg: PyModelConfig) -> bool {
        self.0.contains(cfg.0)
    }

    fn __repr__(&self) -> String {
        let b = &self.0;
        format!(
            "SearchBounds(layers=({}, {}), neurons=({}, {}), epochs=({}, {}))",
            b.min_layers, b.max_layers, b.min_neurons, b.max_neurons, b.min_epochs, b.max_epochs
        )
    }
}

/// Outcome of a swarm or grid search.
#[pyclass(name = "SearchResult", frozen)]
struct PySearchResult(SearchReport);

#[pymethods]
impl PySearchResult {
    #[getter]
    fn method(&self) -> &'static str {
        self.0.method.as_str()
    }

    #[getter]
    fn best_config(&self) -> PyModelConfig {
        PyModelConfig(self.0.best_config)
    }

    #[getter]
    fn best_fitness(&self) -> f64 {
        self.0.best_fitness
    }

    #[getter]
    fn total_rounds(&self) -> usize {
        self.0.total_rounds
    }

    #[getter]
    fn distinct_configs(&self) -> usize {
        self.0.distinct_configs
    }

    /// Swarm iterations run, or None for grid search.
    #[getter]
    fn iterations(&self) -> Option<usize> {
        self.0.pso.as_ref().map(|p| p.iterations)
    }

    /// `(layers, neurons, epochs, fitness, rounds, cache_hit)` per logged evaluation.
    #[getter]
    fn evaluations(&self) -> Vec<(u32, u32, u32, f64, usize, bool)> {
        self.0
            .evaluations
            .iter()
            .map(|e| {
                let c = e.config;
                (
                    c.layers,
                    c.neurons,
                    c.epochs,
                    e.fitness,
                    e.rounds,
                    e.cache_hit,
                )
            })
            .collect()
    }

    /// `(mean, lo, hi)` over the five best distinct configurations.
    fn best_five_ci(&self) -> Option<(f64, f64, f64)> {
        self.0.best_five_ci().map(|ci| (ci.mean, ci.lo, ci.hi))
    }

    fn to_json(&self) -> PyResult<String> {
        serde_json::to_string_pretty(&self.0).map_err(|e| PyRuntimeError::new_err(e.to_string()))
    }

    fn __repr__(&self) -> String {
        format!(
            "SearchResult(method={:?}, best={}, fitness={}, total_rounds={})",
            self.0.method.as_str(),
            self.0.best_config,
            self.0.best_fitness,
            self.0.total_rounds
        )
    }
}

/// A Python callable scored under the interpreter lock. The first Python
/// exception is kept so it can be re-raised unchanged.
struct CallableEvaluator {
    fitness: Py<PyAny>,
    direction: Direction,
    comm_rounds: usize,
    raised: Mutex<Option<PyErr>>,
}

impl ConfigEvaluator for CallableEvaluator {
    fn direction(&self) -> Direction {
        self.direction
    }

    fn comm_rounds(&self) -> usize {
        self.comm_rounds
    }

    fn evaluate(&self, cfg: pso::ModelConfig) -> psofl::Result<EvalOutcome> {
        let scored = Python::attach(|py| {
            self.fitness
                .call1(py, (PyModelConfig(cfg),))
                .and_then(|v| v.extract::<f64>(py))
        });
        match scored {
            Ok(fitness) => Ok(EvalOutcome {
                fitness,
                rounds: self.comm_rounds,
            }),
            Err(e) => {
                let message = e.to_string();
                self.raised.lock().expect("lock").get_or_insert(e);
                Err(psofl::Error::Config(format!(
                    "fitness callable raised: {message}"
                )))
            }
        }
    }
}

impl CallableEvaluator {
    fn new(fitness: Py<PyAny>, maximize: bool, comm_rounds: usize) -> Self {
        Self {
            fitness,
            direction: if maximize {
                Direction::Maximize
            } else {
                Direction::Minimize
            },
            comm_rounds,
            raised: Mutex::new(None),
        }
    }

    /// Runs `search` with the lock released, so evaluations on worker
    /// threads can take it, then surfaces any Python exception.
    fn run<F>(&self, py: Python<'_>, search: F) -> PyResult<SearchReport>
    where
        F: FnOnce(&Self) -> psofl::Result<SearchReport> + Send,
    {
        let result = py.detach(|| search(self));
        if let Some(e) = self.raised.lock().expect("lock").take() {
            return Err(e);
        }
        result.map_err(value_err)
    }
}

/// Swarm search. `fitness` receives a ModelConfig and returns a float.
#[pyfunction]
#[pyo3(signature = (
    fitness, bounds = None, *, pop = 5, max_it = 10, w = pso::DEFAULT_INERTIA,
    c1 = None, c2 = None, seed = 0, maximize = true, literal = false, comm_rounds = 15
))]
#[allow(clippy::too_many_arguments)]
fn pso_search(
    py: Python<'_>,
    fitness: Py<PyAny>,
    bounds: Option<PySearchBounds>,
    pop: usize,
    max_it: usize,
    w: f64,
    c1: Option<f64>,
    c2: Option<f64>,
    seed: u64,
    maximize: bool,
    literal: bool,
    comm_rounds: usize,
) -> PyResult<PySearchResult> {
    let coefficients = match (c1, c2) {
        (None, None) => CoefficientMode::Random,
        (Some(c1), Some(c2)) => CoefficientMode::Fixed { c1, c2 },
        _ => return Err(PyValueError::new_err("give both c1 and c2, or neither")),
    };
    let params = PsoParams {
        pop_size: pop,
        max_it,
        w,
        coefficients,
        rule: if literal {
            UpdateRule::Literal
        } else {
            UpdateRule::Canonical
        },
        seed,
        ..Default::default()
    };
    let bounds = bounds.map(|b| b.0).unwrap_or_default();
    let eval = CallableEvaluator::new(fitness, maximize, comm_rounds);
    eval.run(py, |e| harness::pso_search(bounds, &params, e))
        .map(PySearchResult)
}

/// Exhaustive search over the product of the three value lists.
#[pyfunction]
#[pyo3(signature = (fitness, layers, neurons, epochs, *, maximize = true, comm_rounds = 15))]
fn grid_search(
    py: Python<'_>,
    fitness: Py<PyAny>,
    layers: Vec<u32>,
    neurons: Vec<u32>,
    epochs: Vec<u32>,
    maximize: bool,
    comm_rounds: usize,
) -> PyResult<PySearchResult> {
    let grid = GridSpec {
        layers,
        neurons,
        epochs,
    };
    let eval = CallableEvaluator::new(fitness, maximize, comm_rounds);
    eval.run(py, |e| harness::grid_search(&grid, e))
        .map(PySearchResult)
}

/// `−((L − 3)² + (N/40 − 2.5)² + (E/10 − 2.5)²)`.
#[pyfunction]
fn quadratic_surrogate(cfg: PyModelConfig) -> f64 {
    harness::quadratic_surrogate(cfg.0)
}

/// Student-t 95% interval `(mean, lo, hi)` of exactly five values.
#[pyfunction]
fn confidence_interval_95(values: Vec<f64>) -> PyResult<(f64, f64, f64)> {
    let ci = harness::confidence_interval_95(&values).map_err(value_err)?;
    Ok((ci.mean, ci.lo, ci.hi))
}

/// Client shards plus a held-out test set.
#[pyclass(name = "Dataset", frozen)]
struct PyDataset(Arc<PartitionedDataset>);

#[pymethods]
impl PyDataset {
    #[staticmethod]
    #[pyo3(signature = (seed, n_clients, rows_per_client = 1000, test_fraction = 0.2, lookback = 24))]
    fn traffic(
        seed: u64,
        n_clients: usize,
        rows_per_client: usize,
        test_fraction: f64,
        lookback: usize,
    ) -> PyResult<Self> {
        let params = TrafficParams {
            rows_per_client,
            ..Default::default()
        };
        data::gen_traffic_with(seed, n_clients, &params, test_fraction, lookback)
            .map(|d| Self(Arc::new(d)))
            .map_err(value_err)
    }

    #[staticmethod]
    #[pyo3(signature = (seed, n_machines, hours = 1000, test_fraction = 0.2, lookback = 24))]
    fn telemetry(
        seed: u64,
        n_machines: usize,
        hours: usize,
        test_fraction: f64,
        lookback: usize,
    ) -> PyResult<Self> {
        let params = TelemetryParams {
            hours,
            ..Default::default()
        };
        data::gen_telemetry_with(seed, n_machines, &params, test_fraction, lookback)
            .map(|d| Self(Arc::new(d)))
            .map_err(value_err)
    }

    /// Loads `timestamp,count` (schema "traffic", split into `num_clients`
    /// contiguous shards) or machine telemetry (one shard per machine).
    #[staticmethod]
    #[pyo3(signature = (path, schema, num_clients = 1, test_fraction = 0.2, lookback = 24))]
    fn from_csv(
        path: PathBuf,
        schema: &str,
        num_clients: usize,
        test_fraction: f64,
        lookback: usize,
    ) -> PyResult<Self> {
        let schema: CsvSchema = schema.parse().map_err(value_err)?;
        let ds = data::load_csv(&path, schema).map_err(value_err)?;
        let part = match schema {
            CsvSchema::Traffic => data::partition(&ds, num_clients, test_fraction, lookback),
            CsvSchema::Telemetry => data::partition_by_group(&ds, test_fraction, lookback),
        };
        part.map(|d| Self(Arc::new(d))).map_err(value_err)
    }

    #[getter]
    fn task(&self) -> String {
        self.0.task.to_string()
    }

    #[getter]
    fn num_clients(&self) -> usize {
        self.0.shards.len()
    }

    #[getter]
    fn train_samples(&self) -> usize {
        self.0.train_samples()
    }

    #[getter]
    fn test_samples(&self) -> usize {
        self.0.test_samples()
    }

    fn __repr__(&self) -> String {
        format!(
            "Dataset(task={}, clients={}, train={}, test={})",
            self.0.task,
            self.0.shards.len(),
            self.0.train_samples(),
            self.0.test_samples()
        )
    }
}

fn train_spec(lr: f64, batch: usize, seed: u64) -> TrainSpec {
    TrainSpec {
        epochs: 1,
        learning_rate: lr,
        batch_size: batch,
        shuffle_seed_base: seed,
    }
}

/// Federated training of one configuration; returns test RMSE (regression,
/// raw units) or accuracy (classification).
#[pyfunction]
#[pyo3(signature = (dataset, config, *, comm_rounds = 15, lr = 0.01, batch = 32, seed = 0))]
fn run_fl(
    py: Python<'_>,
    dataset: &PyDataset,
    config: PyModelConfig,
    comm_rounds: usize,
    lr: f64,
    batch: usize,
    seed: u64,
) -> PyResult<f64> {
    let fl = FlConfig {
        num_clients: dataset.0.shards.len(),
        comm_rounds,
        model_seed: seed,
    };
    let spec = train_spec(lr, batch, seed);
    let data = Arc::clone(&dataset.0);
    py.detach(|| federated::run_fl(config.0, &fl, &data, &spec))
        .map(|o| o.fitness.value())
        .map_err(value_err)
}

/// Training on the pooled client data for `epochs` passes, scored on the
/// same test set as `run_fl`.
#[pyfunction]
#[pyo3(signature = (dataset, config, epochs, *, lr = 0.01, batch = 32, seed = 0))]
fn centralized_train(
    py: Python<'_>,
    dataset: &PyDataset,
    config: PyModelConfig,
    epochs: usize,
    lr: f64,
    batch: usize,
    seed: u64,
) -> PyResult<f64> {
    let spec = train_spec(lr, batch, seed);
    let data = Arc::clone(&dataset.0);
    py.detach(|| federated::centralized_train(config.0, &data, epochs, seed, &spec))
        .map(|o| o.fitness.value())
        .map_err(value_err)
}

fn parse_config(text: &str, preset: Option<&str>) -> PyResult<ExperimentConfig> {
    ExperimentConfig::from_toml(text, preset, None).map_err(value_err)
}

/// Problems found in a TOML experiment configuration; empty when runnable.
#[pyfunction]
#[pyo3(signature = (config_toml, preset = None))]
fn validate_config(config_toml: &str, preset: Option<&str>) -> PyResult<Vec<String>> {
    Ok(parse_config(config_toml, preset)?
        .problems()
        .iter()
        .map(ToString::to_string)
        .collect())
}

/// Runs a TOML experiment configuration, writes its report files, and
/// returns one summary line per method.
#[pyfunction]
#[pyo3(signature = (config_toml, *, preset = None, seed = None, out = None))]
fn run_experiment(
    py: Python<'_>,
    config_toml: &str,
    preset: Option<&str>,
    seed: Option<u64>,
    out: Option<PathBuf>,
) -> PyResult<Vec<String>> {
    let mut cfg = parse_config(config_toml, preset)?;
    Overrides {
        seed,
        output: out,
        pso_literal: false,
    }
    .apply(&mut cfg);
    py.detach(|| run_configured(&cfg))
        .map(|o| o.summary_lines())
        .map_err(value_err)
}

#[pymodule]
#[pyo3(name = "psofl")]
pub fn psofl_module(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyModelConfig>()?;
    m.add_class::<PySearchBounds>()?;
    m.add_class::<PySearchResult>()?;
    m.add_class::<PyDataset>()?;
    m.add_function(wrap_pyfunction!(pso_search, m)?)?;
    m.add_function(wrap_pyfunction!(grid_search, m)?)?;
    m.add_function(wrap_pyfunction!(quadratic_surrogate, m)?)?;
    m.add_function(wrap_pyfunction!(confidence_interval_95, m)?)?;
    m.add_function(wrap_pyfunction!(run_fl, m)?)?;
    m.add_function(wrap_pyfunction!(centralized_train, m)?)?;
    m.add_function(wrap_pyfunction!(validate_config, m)?)?;
    m.add_function(wrap_pyfunction!(run_experiment, m)?)?;
    Ok(())
}

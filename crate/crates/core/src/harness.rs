//! Grid search and swarm search over model configurations, with
//! communication-round accounting and the comparison report.

use std::collections::HashMap;
use std::sync::Arc;
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::data::PartitionedDataset;
use crate::error::{Error, Result};
use crate::federated::{self, FlConfig};
use crate::learner::{direction_for, TrainSpec};
use crate::pso::{self, Direction, Fitness, ModelConfig, PsoParams, SearchBounds};

/// Two-sided 97.5% quantile of Student's t with 4 degrees of freedom.
pub const T_975_DF4: f64 = 2.776;

/// Result of scoring one configuration.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EvalOutcome {
    pub fitness: f64,
    /// Communication rounds spent producing the score.
    pub rounds: usize,
}

/// Scores configurations. Implementations must be deterministic in the
/// configuration so that repeated and concurrent calls agree.
pub trait ConfigEvaluator: Sync {
    fn direction(&self) -> Direction;
    fn comm_rounds(&self) -> usize;
    fn evaluate(&self, cfg: ModelConfig) -> Result<EvalOutcome>;
}

/// A closed-form fitness that charges `comm_rounds` per configuration
/// without training anything.
pub struct Surrogate<F> {
    f: F,
    direction: Direction,
    comm_rounds: usize,
}

impl<F: Fn(ModelConfig) -> f64 + Sync> Surrogate<F> {
    pub fn new(f: F, direction: Direction, comm_rounds: usize) -> Self {
        Self {
            f,
            direction,
            comm_rounds,
        }
    }
}

impl<F: Fn(ModelConfig) -> f64 + Sync> ConfigEvaluator for Surrogate<F> {
    fn direction(&self) -> Direction {
        self.direction
    }

    fn comm_rounds(&self) -> usize {
        self.comm_rounds
    }

    fn evaluate(&self, cfg: ModelConfig) -> Result<EvalOutcome> {
        Ok(EvalOutcome {
            fitness: (self.f)(cfg),
            rounds: self.comm_rounds,
        })
    }
}

/// `−((L − 3)² + (N/40 − 2.5)² + (E/10 − 2.5)²)`, maximal at (3, 100, 25).
pub fn quadratic_surrogate(cfg: ModelConfig) -> f64 {
    let l = cfg.layers as f64 - 3.0;
    let n = cfg.neurons as f64 / 40.0 - 2.5;
    let e = cfg.epochs as f64 / 10.0 - 2.5;
    0.0 - (l * l + n * n + e * e)
}

/// Scores a configuration by a full federated run.
pub struct FlEvaluator {
    pub data: Arc<PartitionedDataset>,
    pub fl: FlConfig,
    pub spec: TrainSpec,
}

impl ConfigEvaluator for FlEvaluator {
    fn direction(&self) -> Direction {
        direction_for(self.data.task)
    }

    fn comm_rounds(&self) -> usize {
        self.fl.comm_rounds
    }

    fn evaluate(&self, cfg: ModelConfig) -> Result<EvalOutcome> {
        let out = federated::run_fl(cfg, &self.fl, &self.data, &self.spec)?;
        Ok(EvalOutcome {
            fitness: out.fitness.value(),
            rounds: out.rounds_consumed,
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct GridSpec {
    pub layers: Vec<u32>,
    pub neurons: Vec<u32>,
    pub epochs: Vec<u32>,
}

impl Default for GridSpec {
    /// 5 × 8 × 10 = 400 configurations.
    fn default() -> Self {
        Self {
            layers: (1..=5).collect(),
            neurons: vec![1, 10, 25, 50, 75, 100, 150, 200],
            epochs: (1..=46).step_by(5).collect(),
        }
    }
}

impl GridSpec {
    /// 5 × 25 × 10 = 1250 configurations.
    pub fn paper_scale() -> Self {
        Self {
            layers: (1..=5).collect(),
            neurons: (1..=193).step_by(8).collect(),
            epochs: (1..=46).step_by(5).collect(),
        }
    }

    pub fn len(&self) -> usize {
        self.layers.len() * self.neurons.len() * self.epochs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn validate(&self, bounds: Option<&SearchBounds>) -> Result<()> {
        for (name, values) in [
            ("layers", &self.layers),
            ("neurons", &self.neurons),
            ("epochs", &self.epochs),
        ] {
            if values.is_empty() {
                return Err(Error::config(format!("grid.{name} must not be empty")));
            }
            if values.windows(2).any(|w| w[0] >= w[1]) {
                return Err(Error::config(format!(
                    "grid.{name} must be strictly increasing"
                )));
            }
        }
        if let Some(b) = bounds {
            if let Some(c) = self.configs().find(|c| !b.contains(*c)) {
                return Err(Error::config(format!(
                    "grid point {c} lies outside the search bounds"
                )));
            }
        }
        Ok(())
    }

    /// Lexicographic in (layers, neurons, epochs).
    pub fn configs(&self) -> impl Iterator<Item = ModelConfig> + '_ {
        self.layers.iter().flat_map(move |&l| {
            self.neurons
                .iter()
                .flat_map(move |&n| self.epochs.iter().map(move |&e| ModelConfig::new(l, n, e)))
        })
    }

    /// Smallest box containing every grid point.
    pub fn bounds(&self) -> Result<SearchBounds> {
        self.validate(None)?;
        let span = |v: &Vec<u32>| (v[0], v[v.len() - 1]);
        SearchBounds::new(span(&self.layers), span(&self.neurons), span(&self.epochs))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Method {
    Pso,
    Grid,
}

impl Method {
    pub fn as_str(self) -> &'static str {
        match self {
            Method::Pso => "pso",
            Method::Grid => "grid",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvaluationRecord {
    pub config: ModelConfig,
    pub fitness: f64,
    /// Zero for a cache hit.
    pub rounds: usize,
    pub cache_hit: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub iteration: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub particle: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PsoSummary {
    pub iterations: usize,
    pub w: f64,
    pub c1: f64,
    pub c2: f64,
    pub gbest_history: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SearchReport {
    pub method: Method,
    pub direction: Direction,
    pub comm_rounds: usize,
    pub evaluations: Vec<EvaluationRecord>,
    pub best_config: ModelConfig,
    pub best_fitness: f64,
    pub total_rounds: usize,
    pub distinct_configs: usize,
    pub wall_time_secs: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub pso: Option<PsoSummary>,
}

impl SearchReport {
    /// `total_rounds = distinct_configs × comm_rounds`, with the log agreeing.
    pub fn round_accounting_holds(&self) -> bool {
        let logged: usize = self.evaluations.iter().map(|e| e.rounds).sum();
        let misses = self.evaluations.iter().filter(|e| !e.cache_hit).count();
        self.total_rounds == self.distinct_configs * self.comm_rounds
            && logged == self.total_rounds
            && misses == self.distinct_configs
    }

    /// Fitness of the best five distinct configurations in the log, best first.
    pub fn best_five(&self) -> Vec<(ModelConfig, f64)> {
        let mut seen: HashMap<ModelConfig, f64> = HashMap::new();
        for e in &self.evaluations {
            seen.entry(e.config).or_insert(e.fitness);
        }
        let mut all: Vec<(ModelConfig, f64)> = seen.into_iter().collect();
        let dir = self.direction;
        all.sort_by(|a, b| {
            let ord = a.1.partial_cmp(&b.1).unwrap_or(std::cmp::Ordering::Equal);
            let ord = if dir == Direction::Maximize {
                ord.reverse()
            } else {
                ord
            };
            ord.then(a.0.cmp(&b.0))
        });
        all.truncate(5);
        all
    }

    pub fn best_five_ci(&self) -> Option<ConfidenceInterval> {
        let values: Vec<f64> = self.best_five().into_iter().map(|(_, f)| f).collect();
        confidence_interval_95(&values).ok()
    }
}

fn outcome_error(cfg: ModelConfig, e: Error) -> Error {
    Error::Evaluation {
        config: cfg,
        source: Box::new(e),
    }
}

/// Scores every grid point exactly once. Points may be evaluated
/// concurrently; the log is in lexicographic order.
pub fn grid_search(grid: &GridSpec, eval: &dyn ConfigEvaluator) -> Result<SearchReport> {
    grid.validate(None)?;
    let start = Instant::now();
    let configs: Vec<ModelConfig> = grid.configs().collect();
    let results: Vec<Result<EvalOutcome>> = configs.par_iter().map(|&c| eval.evaluate(c)).collect();
    let direction = eval.direction();
    let mut evaluations = Vec::with_capacity(configs.len());
    let mut best: Option<(ModelConfig, f64)> = None;
    for (&cfg, r) in configs.iter().zip(results) {
        let out = r.map_err(|e| outcome_error(cfg, e))?;
        if best.is_none_or(|(_, b)| direction.improves(out.fitness, b)) {
            best = Some((cfg, out.fitness));
        }
        evaluations.push(EvaluationRecord {
            config: cfg,
            fitness: out.fitness,
            rounds: out.rounds,
            cache_hit: false,
            iteration: None,
            particle: None,
        });
    }
    let (best_config, best_fitness) = best.expect("grid is non-empty");
    Ok(SearchReport {
        method: Method::Grid,
        direction,
        comm_rounds: eval.comm_rounds(),
        total_rounds: evaluations.iter().map(|e| e.rounds).sum(),
        distinct_configs: evaluations.len(),
        evaluations,
        best_config,
        best_fitness,
        wall_time_secs: start.elapsed().as_secs_f64(),
        pso: None,
    })
}

/// Runs the swarm with a memoized evaluator: a configuration already scored
/// is answered from the cache and costs no rounds.
pub fn pso_search(
    bounds: SearchBounds,
    params: &PsoParams,
    eval: &dyn ConfigEvaluator,
) -> Result<SearchReport> {
    let start = Instant::now();
    let mut cache: HashMap<ModelConfig, EvalOutcome> = HashMap::new();
    let mut hits: Vec<bool> = Vec::new();

    let batch = |configs: &[ModelConfig]| -> Vec<Result<f64>> {
        let mut misses: Vec<ModelConfig> = Vec::new();
        for c in configs {
            if !cache.contains_key(c) && !misses.contains(c) {
                misses.push(*c);
            }
        }
        let fresh: Vec<Result<EvalOutcome>> =
            misses.par_iter().map(|&c| eval.evaluate(c)).collect();
        let mut failed: HashMap<ModelConfig, Error> = HashMap::new();
        for (c, r) in misses.iter().zip(fresh) {
            match r {
                Ok(o) => {
                    cache.insert(*c, o);
                }
                Err(e) => {
                    failed.insert(*c, outcome_error(*c, e));
                }
            }
        }
        let mut first_seen: Vec<ModelConfig> = Vec::new();
        configs
            .iter()
            .map(|c| {
                if let Some(e) = failed.remove(c) {
                    return Err(e);
                }
                let hit = !misses.contains(c) || first_seen.contains(c);
                first_seen.push(*c);
                hits.push(hit);
                cache.get(c).map(|o| o.fitness).ok_or_else(|| {
                    Error::config(format!("evaluation of {c} failed earlier in this batch"))
                })
            })
            .collect()
    };

    let result = pso::run(bounds, params, eval.direction(), batch)?;
    let comm_rounds = eval.comm_rounds();
    let evaluations: Vec<EvaluationRecord> = result
        .evaluations
        .iter()
        .zip(&hits)
        .map(|(e, &hit)| EvaluationRecord {
            config: e.config,
            fitness: e.fitness,
            rounds: if hit { 0 } else { cache[&e.config].rounds },
            cache_hit: hit,
            iteration: Some(e.iteration),
            particle: Some(e.particle),
        })
        .collect();
    Ok(SearchReport {
        method: Method::Pso,
        direction: eval.direction(),
        comm_rounds,
        total_rounds: evaluations.iter().map(|e| e.rounds).sum(),
        distinct_configs: evaluations.iter().filter(|e| !e.cache_hit).count(),
        evaluations,
        best_config: result.best_config,
        best_fitness: result.best_fitness.value,
        wall_time_secs: start.elapsed().as_secs_f64(),
        pso: Some(PsoSummary {
            iterations: result.iterations,
            w: result.coefficients.w,
            c1: result.coefficients.c1,
            c2: result.coefficients.c2,
            gbest_history: result.gbest_history,
        }),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ConfidenceInterval {
    pub mean: f64,
    pub lo: f64,
    pub hi: f64,
}

/// Student-t 95% interval of exactly five values: `mean ± 2.776·s/√5`.
pub fn confidence_interval_95(values: &[f64]) -> Result<ConfidenceInterval> {
    if values.len() != 5 {
        return Err(Error::ConfidenceInterval(values.len()));
    }
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0);
    let half = T_975_DF4 * var.sqrt() / n.sqrt();
    Ok(ConfidenceInterval {
        mean,
        lo: mean - half,
        hi: mean + half,
    })
}

/// Federated and centralized scores of one configuration.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LearningComparison {
    pub config: ModelConfig,
    pub federated: f64,
    pub centralized: f64,
    /// `federated − centralized`
    pub delta: f64,
}

/// Centralized baselines for the best configuration of each method.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct CentralizedResults {
    pub pso_best: Option<f64>,
    pub grid_best: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComparisonReport {
    pub direction: Direction,
    pub pso_total_rounds: usize,
    pub grid_total_rounds: usize,
    /// `pso_total_rounds / grid_total_rounds`
    pub rounds_ratio: f64,
    pub pso_best: Fitness,
    pub pso_best_config: ModelConfig,
    pub grid_best: Fitness,
    pub grid_best_config: ModelConfig,
    /// `pso best − grid best`
    pub search_delta: f64,
    pub pso_ci: Option<ConfidenceInterval>,
    pub grid_ci: Option<ConfidenceInterval>,
    pub pso_learning: Option<LearningComparison>,
    pub grid_learning: Option<LearningComparison>,
}

pub fn compare(
    pso: &SearchReport,
    grid: &SearchReport,
    centralized: &CentralizedResults,
) -> Result<ComparisonReport> {
    if pso.direction != grid.direction {
        return Err(Error::TaskMismatch(format!(
            "pso report {:?}s, grid report {:?}s",
            pso.direction, grid.direction
        )));
    }
    if grid.total_rounds == 0 {
        return Err(Error::config("grid report consumed no rounds"));
    }
    let learning = |r: &SearchReport, c: Option<f64>| {
        c.map(|centralized| LearningComparison {
            config: r.best_config,
            federated: r.best_fitness,
            centralized,
            delta: r.best_fitness - centralized,
        })
    };
    Ok(ComparisonReport {
        direction: pso.direction,
        pso_total_rounds: pso.total_rounds,
        grid_total_rounds: grid.total_rounds,
        rounds_ratio: pso.total_rounds as f64 / grid.total_rounds as f64,
        pso_best: Fitness::new(pso.best_fitness, pso.direction),
        pso_best_config: pso.best_config,
        grid_best: Fitness::new(grid.best_fitness, grid.direction),
        grid_best_config: grid.best_config,
        search_delta: pso.best_fitness - grid.best_fitness,
        pso_ci: pso.best_five_ci(),
        grid_ci: grid.best_five_ci(),
        pso_learning: learning(pso, centralized.pso_best),
        grid_learning: learning(grid, centralized.grid_best),
    })
}

/// Centralized score of `cfg` trained for `comm_rounds × E` epochs.
pub fn centralized_fitness(
    cfg: ModelConfig,
    data: &PartitionedDataset,
    fl: &FlConfig,
    spec: &TrainSpec,
) -> Result<f64> {
    let epochs = fl.comm_rounds * cfg.epochs as usize;
    Ok(
        federated::centralized_train(cfg, data, epochs, fl.model_seed, spec)?
            .fitness
            .value(),
    )
}

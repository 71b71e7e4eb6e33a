//! Federated averaging over client shards, plus the centralized baseline.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::data::{ClientShard, PartitionedDataset, Task};
use crate::error::{Error, Result};
use crate::learner::{self, config_seed, init_model, EvalResult, LstmModel, TrainSpec};
use crate::pso::ModelConfig;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FlConfig {
    pub num_clients: usize,
    pub comm_rounds: usize,
    pub model_seed: u64,
}

impl Default for FlConfig {
    fn default() -> Self {
        Self {
            num_clients: 5,
            comm_rounds: 15,
            model_seed: 0,
        }
    }
}

impl FlConfig {
    pub fn validate(&self) -> Result<()> {
        if self.num_clients == 0 {
            return Err(Error::config("num_clients must be >= 1"));
        }
        if self.comm_rounds == 0 {
            return Err(Error::config("comm_rounds must be >= 1"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone)]
pub struct FlOutcome {
    pub model: LstmModel,
    pub fitness: EvalResult,
    pub rounds_consumed: usize,
}

/// Weighted mean `Σ_k (n_k / n) · w_k`, accumulated in the given order.
pub fn fedavg(updates: &[(usize, Vec<f64>)]) -> Result<Vec<f64>> {
    let Some((_, first)) = updates.first() else {
        return Err(Error::config("no client updates to average"));
    };
    let dim = first.len();
    let total: usize = updates.iter().map(|(n, _)| n).sum();
    if total == 0 {
        return Err(Error::config("client updates carry no samples"));
    }
    let mut avg = vec![0.0; dim];
    for (n, w) in updates {
        if w.len() != dim {
            return Err(Error::LayoutMismatch {
                expected: dim,
                got: w.len(),
            });
        }
        let weight = *n as f64 / total as f64;
        for (a, x) in avg.iter_mut().zip(w) {
            *a += weight * x;
        }
    }
    Ok(avg)
}

/// One round: broadcast, local training on every shard, weighted average.
/// `round` numbers the local epochs so shuffling continues across rounds.
pub fn run_round(
    global: &LstmModel,
    shards: &[ClientShard],
    spec: &TrainSpec,
    round: usize,
) -> Result<LstmModel> {
    let first_epoch = (round * spec.epochs) as u64;
    let updates: Vec<Result<(usize, Vec<f64>)>> = shards
        .par_iter()
        .map(|shard| {
            let data = shard.local_data(shard.client_id)?;
            if data.is_empty() {
                return Err(Error::EmptyDataset(format!(
                    "shard of client {}",
                    shard.client_id
                )));
            }
            let mut local = global.clone();
            learner::train(
                &mut local,
                &[data],
                spec,
                shard.client_id as u64,
                first_epoch,
            )?;
            Ok((data.len(), local.flatten()))
        })
        .collect();
    let mut collected = Vec::with_capacity(updates.len());
    for (shard, u) in shards.iter().zip(updates) {
        collected.push(u.map_err(|e| Error::Client {
            client: shard.client_id,
            source: Box::new(e),
        })?);
    }
    LstmModel::unflatten(&fedavg(&collected)?, *global.layout())
}

fn train_spec_for(cfg: ModelConfig, base: &TrainSpec) -> TrainSpec {
    TrainSpec {
        epochs: cfg.epochs as usize,
        ..*base
    }
}

/// Fitness in reporting units: RMSE rescaled to the raw target, or accuracy.
fn test_fitness(model: &LstmModel, data: &PartitionedDataset) -> Result<EvalResult> {
    let mut r = learner::evaluate(model, &data.test_series())?;
    if data.task == Task::Regression {
        r.metric.value *= data.target_scale;
    }
    Ok(r)
}

pub fn initial_model(cfg: ModelConfig, data: &PartitionedDataset, seed: u64) -> Result<LstmModel> {
    init_model(
        cfg,
        data.feature_width,
        data.output_width,
        data.task,
        config_seed(seed, cfg),
    )
}

/// Trains `cfg` for `fl.comm_rounds` federated rounds with `cfg.epochs`
/// local epochs each, then scores the global model on the test set.
pub fn run_fl(
    cfg: ModelConfig,
    fl: &FlConfig,
    data: &PartitionedDataset,
    spec: &TrainSpec,
) -> Result<FlOutcome> {
    fl.validate()?;
    if data.shards.len() != fl.num_clients {
        return Err(Error::config(format!(
            "dataset has {} shards but num_clients is {}",
            data.shards.len(),
            fl.num_clients
        )));
    }
    let spec = train_spec_for(cfg, spec);
    let mut model = initial_model(cfg, data, fl.model_seed)?;
    for round in 0..fl.comm_rounds {
        model = run_round(&model, &data.shards, &spec, round)?;
    }
    let fitness = test_fitness(&model, data)?;
    Ok(FlOutcome {
        model,
        fitness,
        rounds_consumed: fl.comm_rounds,
    })
}

#[derive(Debug, Clone)]
pub struct CentralizedOutcome {
    pub model: LstmModel,
    pub fitness: EvalResult,
}

/// Trains one model on the pooled training data of every client for
/// `total_epochs`, scored on the same test set as [`run_fl`].
pub fn centralized_train(
    cfg: ModelConfig,
    data: &PartitionedDataset,
    total_epochs: usize,
    seed: u64,
    spec: &TrainSpec,
) -> Result<CentralizedOutcome> {
    let pooled = data.pooled();
    if pooled.iter().all(|s| s.is_empty()) {
        return Err(Error::EmptyDataset("no training samples".into()));
    }
    let spec = TrainSpec {
        epochs: total_epochs,
        ..*spec
    };
    let mut model = initial_model(cfg, data, seed)?;
    learner::train(&mut model, &pooled, &spec, 0, 0)?;
    let fitness = test_fitness(&model, data)?;
    Ok(CentralizedOutcome { model, fitness })
}

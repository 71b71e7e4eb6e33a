//! Oracles and property checks shared by the integration tests and the
//! acceptance run.
#![allow(dead_code)]

use ndarray::Array2;
use proptest::prelude::*;
use psofl::data::{
    self, partition, partition_by_group, PartitionedDataset, Row, Task, TimeSeriesDataset,
    TrafficParams,
};
use psofl::federated::fedavg;
use psofl::learner::{self, init_model, Batch, LstmModel, TrainSpec};
use psofl::pso::{
    self, round_to_config, sequential, Direction, ModelConfig, PsoCoefficients, PsoParams,
    SearchBounds, SwarmState, UpdateRule,
};
use rand::Rng;

// ---------------------------------------------------------------------------
// Gradient oracle

pub fn random_batch<R: Rng>(
    rng: &mut R,
    steps: usize,
    size: usize,
    width: usize,
    classes: Option<usize>,
) -> Batch {
    let inputs = Array2::from_shape_fn((steps * size, width), |_| rng.random_range(-1.0..1.0));
    let targets = (0..size)
        .map(|_| match classes {
            Some(k) => rng.random_range(0..k) as f64,
            None => rng.random_range(-1.0..1.0),
        })
        .collect();
    Batch {
        inputs,
        targets,
        steps,
    }
}

/// Central differences with step `h` on every parameter.
pub fn numeric_gradient(model: &LstmModel, batch: &Batch, h: f64) -> Vec<f64> {
    let base = model.flatten();
    (0..base.len())
        .map(|k| {
            let mut p = base.clone();
            p[k] = base[k] + h;
            let up = LstmModel::unflatten(&p, *model.layout())
                .unwrap()
                .loss(batch)
                .unwrap();
            p[k] = base[k] - h;
            let down = LstmModel::unflatten(&p, *model.layout())
                .unwrap()
                .loss(batch)
                .unwrap();
            (up - down) / (2.0 * h)
        })
        .collect()
}

/// Relative error with an absolute floor, so entries that are zero up to
/// rounding do not dominate.
pub fn max_relative_error(analytic: &[f64], numeric: &[f64]) -> f64 {
    analytic
        .iter()
        .zip(numeric)
        .map(|(a, n)| (a - n).abs() / a.abs().max(n.abs()).max(1e-6))
        .fold(0.0, f64::max)
}

// ---------------------------------------------------------------------------
// Swarm properties

/// Deterministic pseudo-random fitness landscape keyed by `salt`.
pub fn rough(salt: u64, cfg: ModelConfig) -> f64 {
    let mut z = salt
        ^ (cfg.layers as u64).wrapping_mul(0x9E37_79B9_7F4A_7C15)
        ^ (cfg.neurons as u64).wrapping_mul(0xC2B2_AE3D_27D4_EB4F)
        ^ (cfg.epochs as u64).wrapping_mul(0x1656_67B1_9E37_79F9);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^= z >> 31;
    (z >> 11) as f64 / (1u64 << 53) as f64
}

pub fn bounds_strategy() -> impl Strategy<Value = SearchBounds> {
    (1u32..4, 0u32..4, 1u32..50, 0u32..150, 1u32..10, 0u32..40).prop_map(|(l, dl, n, dn, e, de)| {
        SearchBounds::new((l, l + dl), (n, n + dn), (e, e + de)).unwrap()
    })
}

pub fn direction_strategy() -> impl Strategy<Value = Direction> {
    prop_oneof![Just(Direction::Maximize), Just(Direction::Minimize)]
}

pub fn rule_strategy() -> impl Strategy<Value = UpdateRule> {
    prop_oneof![Just(UpdateRule::Canonical), Just(UpdateRule::Literal)]
}

fn better_or_equal(d: Direction, new: f64, old: f64) -> bool {
    match d {
        Direction::Maximize => new >= old,
        Direction::Minimize => new <= old,
    }
}

#[derive(Debug, Clone)]
pub struct SwarmCase {
    pub bounds: SearchBounds,
    pub pop: usize,
    pub steps: usize,
    pub seed: u64,
    pub salt: u64,
    pub direction: Direction,
    pub rule: UpdateRule,
    pub coef: PsoCoefficients,
}

pub fn swarm_case() -> impl Strategy<Value = SwarmCase> {
    (
        bounds_strategy(),
        1usize..8,
        1usize..8,
        any::<u64>(),
        any::<u64>(),
        direction_strategy(),
        rule_strategy(),
        (0.05f64..=1.0, 0.0f64..=4.0, 0.0f64..=4.0),
    )
        .prop_map(
            |(bounds, pop, steps, seed, salt, direction, rule, (w, c1, c2))| SwarmCase {
                bounds,
                pop,
                steps,
                seed,
                salt,
                direction,
                rule,
                coef: PsoCoefficients { w, c1, c2 },
            },
        )
}

/// Positions and velocities stay in their boxes; personal and global bests
/// never get worse; the global best is the best personal best.
pub fn check_swarm_bounds(case: &SwarmCase) -> Result<(), TestCaseError> {
    let SwarmCase {
        bounds, direction, ..
    } = *case;
    let salt = case.salt;
    let mut eval = sequential(|c| Ok(rough(salt, c)));
    let mut swarm = SwarmState::new(bounds, case.pop, case.seed, direction).unwrap();
    swarm.evaluate_initial(&mut eval).unwrap();
    let (lo, hi) = (bounds.lower(), bounds.upper());
    let vmax = bounds.velocity_bounds().max_v();
    for _ in 0..case.steps {
        let before: Vec<f64> = swarm
            .particles
            .iter()
            .map(|p| p.pbest_fitness.value)
            .collect();
        let gbefore = swarm.gbest_fitness.value;
        let evals = swarm.step(&case.coef, case.rule, &mut eval).unwrap();
        prop_assert_eq!(evals.len(), case.pop);
        for (p, b) in swarm.particles.iter().zip(&before) {
            let x = p.position.to_array();
            let v = p.velocity.to_array();
            for d in 0..3 {
                prop_assert!(
                    x[d] >= lo[d] && x[d] <= hi[d],
                    "position {} outside [{}, {}]",
                    x[d],
                    lo[d],
                    hi[d]
                );
                prop_assert!(
                    v[d].abs() <= vmax[d],
                    "velocity {} beyond {}",
                    v[d],
                    vmax[d]
                );
            }
            prop_assert!(bounds.contains(round_to_config(p.position)));
            prop_assert!(better_or_equal(direction, p.pbest_fitness.value, *b));
        }
        prop_assert!(better_or_equal(
            direction,
            swarm.gbest_fitness.value,
            gbefore
        ));
        let best = swarm
            .particles
            .iter()
            .map(|p| p.pbest_fitness.value)
            .reduce(|a, b| if direction.improves(b, a) { b } else { a })
            .unwrap();
        prop_assert_eq!(swarm.gbest_fitness.value, best);
    }
    Ok(())
}

#[derive(Debug, Clone)]
pub struct RunCase {
    pub bounds: SearchBounds,
    pub pop: usize,
    pub max_it: usize,
    pub seed: u64,
    pub salt: u64,
    pub direction: Direction,
}

pub fn run_case() -> impl Strategy<Value = RunCase> {
    (
        bounds_strategy(),
        1usize..7,
        1usize..12,
        any::<u64>(),
        any::<u64>(),
        direction_strategy(),
    )
        .prop_map(|(bounds, pop, max_it, seed, salt, direction)| RunCase {
            bounds,
            pop,
            max_it,
            seed,
            salt,
            direction,
        })
}

/// Same seed, same trace; evaluation and iteration budgets hold.
pub fn check_run_determinism(case: &RunCase) -> Result<(), TestCaseError> {
    let RunCase {
        bounds,
        pop,
        max_it,
        seed,
        salt,
        direction,
    } = *case;
    let params = PsoParams {
        pop_size: pop,
        max_it,
        seed,
        ..Default::default()
    };
    let f = |c: ModelConfig| Ok(rough(salt, c));
    let a = pso::run(bounds, &params, direction, sequential(f)).unwrap();
    let b = pso::run(bounds, &params, direction, sequential(f)).unwrap();
    prop_assert_eq!(&a.evaluations, &b.evaluations);
    prop_assert_eq!(a.best_config, b.best_config);
    prop_assert_eq!(
        a.best_fitness.value.to_bits(),
        b.best_fitness.value.to_bits()
    );
    prop_assert_eq!(&a.gbest_history, &b.gbest_history);
    prop_assert!(a.iterations >= 1 && a.iterations <= max_it);
    prop_assert_eq!(a.evaluations.len(), pop * (a.iterations + 1));
    prop_assert!(a.evaluations.len() <= pop * (max_it + 1));
    prop_assert_eq!(a.gbest_history.len(), a.iterations + 1);
    prop_assert_eq!(rough(salt, a.best_config), a.best_fitness.value);
    let best_logged = a
        .evaluations
        .iter()
        .map(|e| e.fitness)
        .reduce(|x, y| if direction.improves(y, x) { y } else { x })
        .unwrap();
    prop_assert_eq!(best_logged, a.best_fitness.value);
    Ok(())
}

// ---------------------------------------------------------------------------
// Partition properties

pub fn single_series(n: usize) -> TimeSeriesDataset {
    TimeSeriesDataset {
        task: Task::Regression,
        feature_names: vec!["x".into()],
        rows: (0..n)
            .map(|i| {
                let x = ((i * 7919) % 101) as f64;
                Row {
                    timestamp: i as i64 * 3600,
                    group: 0,
                    features: vec![x],
                    target: x,
                }
            })
            .collect(),
    }
}

/// Train ranges and test target ranges tile `0..total` without overlap.
pub fn check_tiling(p: &PartitionedDataset) -> Result<(), TestCaseError> {
    let mut ranges: Vec<(usize, usize)> = p
        .shards
        .iter()
        .map(|s| (s.source_rows.start, s.source_rows.end))
        .chain(
            p.test
                .iter()
                .map(|t| (t.target_rows.start, t.target_rows.end)),
        )
        .filter(|(a, b)| a < b)
        .collect();
    ranges.sort();
    let mut next = 0;
    for (a, b) in ranges {
        prop_assert_eq!(a, next, "gap or overlap at row {}", a);
        next = b;
    }
    prop_assert_eq!(next, p.total_rows);
    for (k, s) in p.shards.iter().enumerate() {
        prop_assert_eq!(s.client_id, k);
        prop_assert_eq!(s.len(), s.source_rows.len() - p.lookback);
    }
    for t in &p.test {
        prop_assert_eq!(t.data.len(), t.target_rows.len());
    }
    Ok(())
}

pub fn contiguous_case() -> impl Strategy<Value = (usize, usize, usize, usize, f64)> {
    (1usize..8, 10usize..60, 0usize..10, 1usize..6, 0.0f64..0.4)
}

pub fn check_contiguous_partition(
    (k, per_client, extra, lookback, test_fraction): (usize, usize, usize, usize, f64),
) -> Result<(), TestCaseError> {
    let n = k * per_client + extra;
    let p = partition(&single_series(n), k, test_fraction, lookback).unwrap();
    prop_assert_eq!(p.shards.len(), k);
    check_tiling(&p)?;
    let sizes: Vec<usize> = p
        .shards
        .iter()
        .zip(0..)
        .map(|(s, i)| s.source_rows.len() + p.test.get(i).map_or(0, |t| t.target_rows.len()))
        .collect();
    let (lo, hi) = (sizes.iter().min().unwrap(), sizes.iter().max().unwrap());
    prop_assert!(hi - lo <= 1, "uneven client chunks {:?}", sizes);
    Ok(())
}

pub fn group_case() -> impl Strategy<Value = (u64, usize, usize, usize, f64)> {
    (
        any::<u64>(),
        1usize..6,
        20usize..80,
        1usize..8,
        0.05f64..0.4,
    )
}

pub fn check_group_partition(
    (seed, clients, rows, lookback, test_fraction): (u64, usize, usize, usize, f64),
) -> Result<(), TestCaseError> {
    let params = TrafficParams {
        rows_per_client: rows,
        ..Default::default()
    };
    let ds = data::traffic_dataset(seed, clients, &params);
    let p = partition_by_group(&ds, test_fraction, lookback).unwrap();
    prop_assert_eq!(p.shards.len(), clients);
    check_tiling(&p)?;
    for (k, s) in p.shards.iter().enumerate() {
        prop_assert!(s.source_rows.start >= k * rows && s.source_rows.end <= (k + 1) * rows);
    }
    prop_assert!(ds.rows.iter().all(|r| r.target >= 0.0));
    Ok(())
}

// ---------------------------------------------------------------------------
// Averaging and determinism

pub fn fedavg_case() -> impl Strategy<Value = Vec<(usize, Vec<f64>)>> {
    prop::collection::vec((1usize..500, prop::collection::vec(-1e3f64..1e3, 6)), 1..9)
}

/// Every averaged component lies between the smallest and largest client value.
pub fn check_fedavg_bounds(updates: &[(usize, Vec<f64>)]) -> Result<(), TestCaseError> {
    let avg = fedavg(updates).unwrap();
    for (j, a) in avg.iter().enumerate() {
        let lo = updates
            .iter()
            .map(|(_, w)| w[j])
            .fold(f64::INFINITY, f64::min);
        let hi = updates
            .iter()
            .map(|(_, w)| w[j])
            .fold(f64::NEG_INFINITY, f64::max);
        let slack = 1e-12 * lo.abs().max(hi.abs()).max(1.0);
        prop_assert!(
            *a >= lo - slack && *a <= hi + slack,
            "{} outside [{}, {}]",
            a,
            lo,
            hi
        );
    }
    Ok(())
}

pub fn seeded_case() -> impl Strategy<Value = (u64, usize, usize)> {
    (any::<u64>(), 1usize..4, 30usize..60)
}

/// Data generation and local training repeat exactly for a fixed seed.
pub fn check_seed_determinism(
    (seed, clients, rows): (u64, usize, usize),
) -> Result<(), TestCaseError> {
    let params = TrafficParams {
        rows_per_client: rows,
        ..Default::default()
    };
    let a = data::traffic_dataset(seed, clients, &params);
    let b = data::traffic_dataset(seed, clients, &params);
    prop_assert_eq!(&a.rows, &b.rows);

    let p = partition_by_group(&a, 0.2, 4).unwrap();
    let model = init_model(ModelConfig::new(1, 2, 1), 1, 1, Task::Regression, seed).unwrap();
    let spec = TrainSpec {
        epochs: 1,
        shuffle_seed_base: seed,
        batch_size: 8,
        ..Default::default()
    };
    let shard = p.shards[0].local_data(0).unwrap();
    let mut m1 = model.clone();
    let mut m2 = model.clone();
    learner::train(&mut m1, &[shard], &spec, 0, 0).unwrap();
    learner::train(&mut m2, &[shard], &spec, 0, 0).unwrap();
    prop_assert_eq!(m1.flatten(), m2.flatten());
    Ok(())
}

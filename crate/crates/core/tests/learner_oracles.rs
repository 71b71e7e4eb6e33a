//! Independent reference computations for the LSTM learner.

mod common;

use common::{max_relative_error, numeric_gradient, random_batch};
use ndarray::{array, Array2};
use psofl::data::{Task, WindowedSeries};
use psofl::learner::{self, forward, gradients, init_model, Batch, TrainSpec};
use psofl::pso::ModelConfig;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn sig(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

/// Scalar-by-scalar single-layer LSTM using the flattened parameter order.
fn reference_forward(
    params: &[f64],
    input_width: usize,
    hidden: usize,
    window: &[Vec<f64>],
) -> f64 {
    let n = hidden;
    let wx = &params[..4 * n * input_width];
    let wh = &params[4 * n * input_width..4 * n * (input_width + n)];
    let b = &params[4 * n * (input_width + n)..4 * n * (input_width + n) + 4 * n];
    let head = &params[4 * n * (input_width + n) + 4 * n..];
    let mut h = vec![0.0; n];
    let mut c = vec![0.0; n];
    for x in window {
        let mut z = vec![0.0; 4 * n];
        for (r, zr) in z.iter_mut().enumerate() {
            let mut acc = b[r];
            for k in 0..input_width {
                acc += wx[r * input_width + k] * x[k];
            }
            for k in 0..n {
                acc += wh[r * n + k] * h[k];
            }
            *zr = acc;
        }
        let mut h_new = vec![0.0; n];
        for j in 0..n {
            let i = sig(z[j]);
            let f = sig(z[n + j]);
            let g = z[2 * n + j].tanh();
            let o = sig(z[3 * n + j]);
            c[j] = f * c[j] + i * g;
            h_new[j] = o * c[j].tanh();
        }
        h = h_new;
    }
    let mut y = head[n];
    for j in 0..n {
        y += head[j] * h[j];
    }
    y
}

#[test]
fn forward_matches_hand_stepped_recurrence() {
    let model = init_model(ModelConfig::new(1, 2, 1), 2, 1, Task::Regression, 17).unwrap();
    let window = vec![vec![0.5, -1.0], vec![0.25, 0.75], vec![-0.6, 0.1]];
    let expected = reference_forward(&model.flatten(), 2, 2, &window);
    let w = array![[0.5, -1.0], [0.25, 0.75], [-0.6, 0.1]];
    let got = forward(&model, w.view()).unwrap()[0];
    assert!((got - expected).abs() < 1e-12, "{got} vs {expected}");
}

#[test]
fn gradient_matches_finite_differences() {
    let mut rng = ChaCha8Rng::seed_from_u64(99);
    for (k, (layers, neurons, width, classes)) in [
        (1, 3, 2, None),
        (2, 3, 2, Some(5)),
        (3, 2, 1, None),
        (1, 4, 3, Some(3)),
    ]
    .into_iter()
    .enumerate()
    {
        let task = if classes.is_some() {
            Task::Classification
        } else {
            Task::Regression
        };
        let out = classes.unwrap_or(1);
        let model = init_model(
            ModelConfig::new(layers, neurons, 1),
            width,
            out,
            task,
            k as u64,
        )
        .unwrap();
        assert!(model.param_count() <= 500);
        let batch = random_batch(&mut rng, 5, 4, width, classes);
        let analytic = gradients(&model, &batch).unwrap();
        let numeric = numeric_gradient(&model, &batch, 1e-5);
        let err = max_relative_error(&analytic, &numeric);
        assert!(err < 1e-4, "case {k}: max relative error {err}");
    }
}

fn series(rng: &mut ChaCha8Rng, rows: usize, width: usize, lookback: usize) -> WindowedSeries {
    let features = Array2::from_shape_fn((rows, width), |_| rng.random_range(-1.0..1.0));
    let targets = (0..rows).map(|i| features[[i, 0]] * 0.5).collect();
    WindowedSeries::new(features, targets, lookback)
}

#[test]
fn one_sgd_step_reduces_single_sample_loss() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let data = series(&mut rng, 7, 2, 6);
    assert_eq!(data.len(), 1);
    let mut model = init_model(ModelConfig::new(2, 4, 1), 2, 1, Task::Regression, 8).unwrap();
    let batch = Batch::gather(&[&data], &[(0, 0)]);
    let before = model.loss(&batch).unwrap();
    let spec = TrainSpec {
        epochs: 1,
        learning_rate: 1e-3,
        batch_size: 1,
        shuffle_seed_base: 0,
    };
    learner::train(&mut model, &[&data], &spec, 0, 0).unwrap();
    let after = model.loss(&batch).unwrap();
    assert!(after < before, "{after} !< {before}");
}

#[test]
fn zero_epochs_or_zero_rate_leave_parameters_unchanged() {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let data = series(&mut rng, 40, 2, 6);
    let model = init_model(ModelConfig::new(1, 3, 1), 2, 1, Task::Regression, 1).unwrap();
    for spec in [
        TrainSpec {
            epochs: 0,
            ..Default::default()
        },
        TrainSpec {
            epochs: 3,
            learning_rate: 0.0,
            ..Default::default()
        },
    ] {
        let mut m = model.clone();
        learner::train(&mut m, &[&data], &spec, 0, 0).unwrap();
        assert_eq!(m.flatten(), model.flatten());
    }
}

#[test]
fn training_is_deterministic_and_lowers_loss() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let data = series(&mut rng, 120, 2, 8);
    let model = init_model(ModelConfig::new(1, 4, 1), 2, 1, Task::Regression, 2).unwrap();
    let spec = TrainSpec {
        epochs: 5,
        learning_rate: 1e-3,
        batch_size: 8,
        shuffle_seed_base: 77,
    };
    let mut a = model.clone();
    let mut b = model.clone();
    learner::train(&mut a, &[&data], &spec, 0, 0).unwrap();
    learner::train(&mut b, &[&data], &spec, 0, 0).unwrap();
    assert_eq!(a.flatten(), b.flatten());

    let all: Vec<(usize, usize)> = (0..data.len()).map(|i| (0, i)).collect();
    let batch = Batch::gather(&[&data], &all);
    assert!(a.loss(&batch).unwrap() <= model.loss(&batch).unwrap());
}

#[test]
fn split_training_equals_one_long_run() {
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let data = series(&mut rng, 60, 2, 5);
    let model = init_model(ModelConfig::new(1, 3, 1), 2, 1, Task::Regression, 3).unwrap();
    let spec = |epochs| TrainSpec {
        epochs,
        learning_rate: 0.01,
        batch_size: 7,
        shuffle_seed_base: 5,
    };
    let mut long = model.clone();
    learner::train(&mut long, &[&data], &spec(4), 0, 0).unwrap();
    let mut split = model.clone();
    learner::train(&mut split, &[&data], &spec(2), 0, 0).unwrap();
    learner::train(&mut split, &[&data], &spec(2), 0, 2).unwrap();
    assert_eq!(long.flatten(), split.flatten());
}

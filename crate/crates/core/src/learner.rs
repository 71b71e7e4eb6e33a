//! Stacked LSTM with a linear head, trained by plain mini-batch SGD.
//!
//! Gates are laid out `[input, forget, cell, output]` along the rows of each
//! layer's weight matrices. A batch is stored time-major: row `t * B + b`
//! holds step `t` of sample `b`. The head reads the top layer's hidden state
//! at the last step.

use ndarray::linalg::general_mat_mul;
use ndarray::{s, Array1, Array2, ArrayView2, Axis};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::data::{Task, WindowedSeries};
use crate::error::{Error, Result};
use crate::pso::{Direction, Fitness, ModelConfig};

pub const DEFAULT_LEARNING_RATE: f64 = 0.01;
pub const DEFAULT_BATCH_SIZE: usize = 32;

/// Shape of a model; enough to rebuild it from a flat parameter vector.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ModelLayout {
    pub input_width: usize,
    pub hidden: usize,
    pub layers: usize,
    pub output_width: usize,
    pub task: Task,
}

impl ModelLayout {
    pub fn layer_input(&self, layer: usize) -> usize {
        if layer == 0 {
            self.input_width
        } else {
            self.hidden
        }
    }

    /// `4·(N·(in + N) + N)`
    pub fn layer_param_count(&self, layer: usize) -> usize {
        let n = self.hidden;
        4 * (n * (self.layer_input(layer) + n) + n)
    }

    pub fn head_param_count(&self) -> usize {
        self.output_width * self.hidden + self.output_width
    }

    pub fn param_count(&self) -> usize {
        (0..self.layers)
            .map(|l| self.layer_param_count(l))
            .sum::<usize>()
            + self.head_param_count()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LstmLayer {
    /// `4N × in`
    pub w_x: Array2<f64>,
    /// `4N × N`
    pub w_h: Array2<f64>,
    /// `4N`
    pub b: Array1<f64>,
}

impl LstmLayer {
    fn zeros(input: usize, hidden: usize) -> Self {
        Self {
            w_x: Array2::zeros((4 * hidden, input)),
            w_h: Array2::zeros((4 * hidden, hidden)),
            b: Array1::zeros(4 * hidden),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LstmModel {
    layout: ModelLayout,
    pub layers: Vec<LstmLayer>,
    /// `out × N`
    pub head_w: Array2<f64>,
    pub head_b: Array1<f64>,
}

/// Time-major batch of equally long windows.
#[derive(Debug, Clone)]
pub struct Batch {
    /// `(steps · size) × width`
    pub inputs: Array2<f64>,
    pub targets: Vec<f64>,
    pub steps: usize,
}

impl Batch {
    pub fn size(&self) -> usize {
        self.targets.len()
    }

    pub fn from_windows(windows: &[ArrayView2<'_, f64>], targets: &[f64]) -> Self {
        assert_eq!(windows.len(), targets.len());
        let steps = windows.first().map_or(0, |w| w.nrows());
        let width = windows.first().map_or(0, |w| w.ncols());
        let b = windows.len();
        let mut inputs = Array2::zeros((steps * b, width));
        for (k, w) in windows.iter().enumerate() {
            for t in 0..steps {
                inputs.row_mut(t * b + k).assign(&w.row(t));
            }
        }
        Self {
            inputs,
            targets: targets.to_vec(),
            steps,
        }
    }

    /// Gathers `(series, sample)` pairs into one batch.
    pub fn gather(data: &[&WindowedSeries], samples: &[(usize, usize)]) -> Self {
        let windows: Vec<_> = samples.iter().map(|&(s, i)| data[s].window(i)).collect();
        let targets: Vec<_> = samples.iter().map(|&(s, i)| data[s].target(i)).collect();
        Self::from_windows(&windows, &targets)
    }
}

struct LayerCache {
    /// Post-activation gates, `(steps · B) × 4N`.
    gates: Array2<f64>,
    cells: Array2<f64>,
    /// `tanh` of `cells`, kept for the backward pass.
    cells_tanh: Array2<f64>,
    hidden: Array2<f64>,
}

fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

fn softmax_in_place(v: &mut [f64]) {
    let max = v.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let mut sum = 0.0;
    for x in v.iter_mut() {
        *x = (*x - max).exp();
        sum += *x;
    }
    for x in v.iter_mut() {
        *x /= sum;
    }
}

fn c_order(a: Array2<f64>) -> Array2<f64> {
    if a.is_standard_layout() {
        a
    } else {
        a.as_standard_layout().into_owned()
    }
}

fn all_finite(a: &Array2<f64>) -> bool {
    a.iter().all(|x| x.is_finite())
}

/// Derives a model seed from a base seed and the configuration so the same
/// configuration always starts from the same weights.
pub fn config_seed(base: u64, cfg: ModelConfig) -> u64 {
    let mut h = base ^ 0x9e37_79b9_7f4a_7c15;
    for v in [cfg.layers, cfg.neurons, cfg.epochs] {
        h = splitmix(h ^ v as u64);
    }
    h
}

pub(crate) fn splitmix(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Builds an `L`-layer, `N`-wide model. Weights are Glorot-uniform, biases
/// zero except the forget gate, which starts at 1.
pub fn init_model(
    cfg: ModelConfig,
    input_width: usize,
    output_width: usize,
    task: Task,
    seed: u64,
) -> Result<LstmModel> {
    if cfg.layers == 0 || cfg.neurons == 0 || input_width == 0 || output_width == 0 {
        return Err(Error::config(format!(
            "model widths must be positive: {cfg}, input {input_width}, output {output_width}"
        )));
    }
    let layout = ModelLayout {
        input_width,
        hidden: cfg.neurons as usize,
        layers: cfg.layers as usize,
        output_width,
        task,
    };
    let mut model = LstmModel::zeros(layout);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = layout.hidden;
    let mut fill = |a: &mut Array2<f64>, fan_in: usize, fan_out: usize| {
        let r = (6.0 / (fan_in + fan_out) as f64).sqrt();
        a.mapv_inplace(|_| rng.random_range(-r..=r));
    };
    for (l, layer) in model.layers.iter_mut().enumerate() {
        let fan_in = layout.layer_input(l) + n;
        fill(&mut layer.w_x, fan_in, n);
        fill(&mut layer.w_h, fan_in, n);
        layer.b.slice_mut(s![n..2 * n]).fill(1.0);
    }
    fill(&mut model.head_w, n, output_width);
    Ok(model)
}

impl LstmModel {
    pub fn zeros(layout: ModelLayout) -> Self {
        Self {
            layers: (0..layout.layers)
                .map(|l| LstmLayer::zeros(layout.layer_input(l), layout.hidden))
                .collect(),
            head_w: Array2::zeros((layout.output_width, layout.hidden)),
            head_b: Array1::zeros(layout.output_width),
            layout,
        }
    }

    pub fn layout(&self) -> &ModelLayout {
        &self.layout
    }

    pub fn param_count(&self) -> usize {
        self.layout.param_count()
    }

    fn tensors(&self) -> Vec<&[f64]> {
        let mut out = Vec::with_capacity(3 * self.layers.len() + 2);
        for layer in &self.layers {
            out.push(layer.w_x.as_slice().expect("standard layout"));
            out.push(layer.w_h.as_slice().expect("standard layout"));
            out.push(layer.b.as_slice().expect("standard layout"));
        }
        out.push(self.head_w.as_slice().expect("standard layout"));
        out.push(self.head_b.as_slice().expect("standard layout"));
        out
    }

    fn tensors_mut(&mut self) -> Vec<&mut [f64]> {
        let mut out = Vec::with_capacity(3 * self.layers.len() + 2);
        for layer in &mut self.layers {
            out.push(layer.w_x.as_slice_mut().expect("standard layout"));
            out.push(layer.w_h.as_slice_mut().expect("standard layout"));
            out.push(layer.b.as_slice_mut().expect("standard layout"));
        }
        out.push(self.head_w.as_slice_mut().expect("standard layout"));
        out.push(self.head_b.as_slice_mut().expect("standard layout"));
        out
    }

    /// Parameters in layer order (`w_x`, `w_h`, `b` each row-major), then the head.
    pub fn flatten(&self) -> Vec<f64> {
        let mut v = Vec::with_capacity(self.param_count());
        for t in self.tensors() {
            v.extend_from_slice(t);
        }
        v
    }

    pub fn unflatten(params: &[f64], layout: ModelLayout) -> Result<Self> {
        let expected = layout.param_count();
        if params.len() != expected {
            return Err(Error::LayoutMismatch {
                expected,
                got: params.len(),
            });
        }
        let mut model = Self::zeros(layout);
        let mut offset = 0;
        for t in model.tensors_mut() {
            t.copy_from_slice(&params[offset..offset + t.len()]);
            offset += t.len();
        }
        Ok(model)
    }

    /// `self += alpha · other`, parameter-wise.
    pub fn add_scaled(&mut self, alpha: f64, other: &LstmModel) {
        for (dst, src) in self.tensors_mut().into_iter().zip(other.tensors()) {
            for (d, s) in dst.iter_mut().zip(src) {
                *d += alpha * s;
            }
        }
    }

    fn forward_layer(
        &self,
        l: usize,
        input: ArrayView2<'_, f64>,
        steps: usize,
        batch: usize,
    ) -> Result<LayerCache> {
        let layer = &self.layers[l];
        let n = self.layout.hidden;
        let mut gates = c_order(input.dot(&layer.w_x.t()));
        gates += &layer.b;
        let mut cells = Array2::<f64>::zeros((steps * batch, n));
        let mut cells_tanh = Array2::<f64>::zeros((steps * batch, n));
        let mut hidden = Array2::<f64>::zeros((steps * batch, n));
        for t in 0..steps {
            let rows = t * batch..(t + 1) * batch;
            if t > 0 {
                let prev = hidden.slice(s![(t - 1) * batch..t * batch, ..]);
                let mut z = gates.slice_mut(s![rows.clone(), ..]);
                general_mat_mul(1.0, &prev, &layer.w_h.t(), 1.0, &mut z);
            }
            let g = gates.as_slice_mut().expect("standard layout");
            let c = cells.as_slice_mut().expect("standard layout");
            let h = hidden.as_slice_mut().expect("standard layout");
            let tc = cells_tanh.as_slice_mut().expect("standard layout");
            for r in rows {
                let z = &mut g[r * 4 * n..(r + 1) * 4 * n];
                for x in &mut z[..2 * n] {
                    *x = sigmoid(*x);
                }
                for x in &mut z[2 * n..3 * n] {
                    *x = x.tanh();
                }
                for x in &mut z[3 * n..] {
                    *x = sigmoid(*x);
                }
                let (c_prev, c_now) = c.split_at_mut(r * n);
                let c_now = &mut c_now[..n];
                for j in 0..n {
                    c_now[j] = z[j] * z[2 * n + j];
                }
                if t > 0 {
                    let c_prev = &c_prev[(r - batch) * n..(r - batch + 1) * n];
                    for j in 0..n {
                        c_now[j] += z[n + j] * c_prev[j];
                    }
                }
                let h_now = &mut h[r * n..(r + 1) * n];
                let tc_now = &mut tc[r * n..(r + 1) * n];
                for j in 0..n {
                    tc_now[j] = c_now[j].tanh();
                    h_now[j] = z[3 * n + j] * tc_now[j];
                }
                if !h_now.iter().all(|x| x.is_finite()) {
                    return Err(Error::Numeric { layer: l, step: t });
                }
            }
        }
        Ok(LayerCache {
            gates,
            cells,
            cells_tanh,
            hidden,
        })
    }

    /// Head outputs before any softmax, `B × out`, plus per-layer caches.
    fn forward_batch(&self, batch: &Batch) -> Result<(Array2<f64>, Vec<LayerCache>)> {
        let (steps, size) = (batch.steps, batch.size());
        let mut caches: Vec<LayerCache> = Vec::with_capacity(self.layers.len());
        for l in 0..self.layers.len() {
            let input = match caches.last() {
                None => batch.inputs.view(),
                Some(c) => c.hidden.view(),
            };
            let cache = self.forward_layer(l, input, steps, size)?;
            caches.push(cache);
        }
        let top = &caches.last().expect("at least one layer").hidden;
        let last = top.slice(s![(steps - 1) * size..steps * size, ..]);
        let mut out = c_order(last.dot(&self.head_w.t()));
        out += &self.head_b;
        if !all_finite(&out) {
            return Err(Error::Numeric {
                layer: self.layers.len(),
                step: steps - 1,
            });
        }
        Ok((out, caches))
    }

    /// Predictions for a batch: values for regression, class probabilities
    /// for classification.
    pub fn predict(&self, batch: &Batch) -> Result<Array2<f64>> {
        let (mut out, _) = self.forward_batch(batch)?;
        if self.layout.task == Task::Classification {
            for mut row in out.rows_mut() {
                softmax_in_place(row.as_slice_mut().expect("standard layout"));
            }
        }
        Ok(out)
    }

    /// Mean loss of a batch: squared error for regression, cross-entropy for
    /// classification.
    pub fn loss(&self, batch: &Batch) -> Result<f64> {
        let (out, _) = self.forward_batch(batch)?;
        Ok(self.loss_and_delta(&out, &batch.targets).0)
    }

    fn loss_and_delta(&self, out: &Array2<f64>, targets: &[f64]) -> (f64, Array2<f64>) {
        let b = targets.len() as f64;
        let mut delta = out.clone();
        let mut loss = 0.0;
        match self.layout.task {
            Task::Regression => {
                for (k, mut row) in delta.rows_mut().into_iter().enumerate() {
                    for x in row.iter_mut() {
                        let e = *x - targets[k];
                        loss += e * e;
                        *x = 2.0 * e / b;
                    }
                }
            }
            Task::Classification => {
                for (k, mut row) in delta.rows_mut().into_iter().enumerate() {
                    let p = row.as_slice_mut().expect("standard layout");
                    softmax_in_place(p);
                    let y = targets[k] as usize;
                    loss -= p[y].max(f64::MIN_POSITIVE).ln();
                    p[y] -= 1.0;
                    for x in p.iter_mut() {
                        *x /= b;
                    }
                }
            }
        }
        (loss / b, delta)
    }

    /// Gradient of the mean batch loss, shaped like the model.
    pub fn gradient(&self, batch: &Batch) -> Result<(f64, LstmModel)> {
        if batch.size() == 0 {
            return Err(Error::EmptyDataset("gradient of an empty batch".into()));
        }
        let (steps, size) = (batch.steps, batch.size());
        let n = self.layout.hidden;
        let (out, caches) = self.forward_batch(batch)?;
        let (loss, delta) = self.loss_and_delta(&out, &batch.targets);

        let mut grad = LstmModel::zeros(self.layout);
        let top = &caches.last().expect("at least one layer").hidden;
        let last = top.slice(s![(steps - 1) * size..steps * size, ..]);
        grad.head_w = c_order(delta.t().dot(&last));
        grad.head_b = delta.sum_axis(Axis(0));

        let mut d_hidden = Array2::<f64>::zeros((steps * size, n));
        d_hidden
            .slice_mut(s![(steps - 1) * size..steps * size, ..])
            .assign(&delta.dot(&self.head_w));

        for l in (0..self.layers.len()).rev() {
            let layer = &self.layers[l];
            let cache = &caches[l];
            let mut dz = Array2::<f64>::zeros((steps * size, 4 * n));
            let mut dh_next = Array2::<f64>::zeros((size, n));
            let mut dc_next = vec![0.0; size * n];
            let gates = cache.gates.as_slice().expect("standard layout");
            let cells = cache.cells.as_slice().expect("standard layout");
            let cells_tanh = cache.cells_tanh.as_slice().expect("standard layout");
            let dh_top = d_hidden.as_slice().expect("standard layout");
            for t in (0..steps).rev() {
                {
                    let dzs = dz.as_slice_mut().expect("standard layout");
                    let dhn = dh_next.as_slice().expect("standard layout");
                    for b in 0..size {
                        let r = t * size + b;
                        let g = &gates[r * 4 * n..(r + 1) * 4 * n];
                        let d = &mut dzs[r * 4 * n..(r + 1) * 4 * n];
                        let dcn = &mut dc_next[b * n..(b + 1) * n];
                        for j in 0..n {
                            let (i_g, f_g, g_g, o_g) = (g[j], g[n + j], g[2 * n + j], g[3 * n + j]);
                            let c_prev = if t > 0 {
                                cells[(r - size) * n + j]
                            } else {
                                0.0
                            };
                            let tc = cells_tanh[r * n + j];
                            let dh = dh_top[r * n + j] + dhn[b * n + j];
                            let d_o = dh * tc;
                            let dc = dh * o_g * (1.0 - tc * tc) + dcn[j];
                            let d_i = dc * g_g;
                            let d_g = dc * i_g;
                            let d_f = dc * c_prev;
                            dcn[j] = dc * f_g;
                            d[j] = d_i * i_g * (1.0 - i_g);
                            d[n + j] = d_f * f_g * (1.0 - f_g);
                            d[2 * n + j] = d_g * (1.0 - g_g * g_g);
                            d[3 * n + j] = d_o * o_g * (1.0 - o_g);
                        }
                    }
                }
                if t > 0 {
                    let dz_t = dz.slice(s![t * size..(t + 1) * size, ..]);
                    general_mat_mul(1.0, &dz_t, &layer.w_h, 0.0, &mut dh_next);
                }
            }
            if !all_finite(&dz) {
                return Err(Error::Numeric { layer: l, step: 0 });
            }
            let g = &mut grad.layers[l];
            let input = if l == 0 {
                batch.inputs.view()
            } else {
                caches[l - 1].hidden.view()
            };
            g.w_x = c_order(dz.t().dot(&input));
            if steps > 1 {
                let dz_late = dz.slice(s![size.., ..]);
                let h_early = cache.hidden.slice(s![..(steps - 1) * size, ..]);
                g.w_h = c_order(dz_late.t().dot(&h_early));
            }
            g.b = dz.sum_axis(Axis(0));
            if l > 0 {
                d_hidden = c_order(dz.dot(&layer.w_x));
            }
        }
        Ok((loss, grad))
    }
}

/// Forward pass on one window.
pub fn forward(model: &LstmModel, window: ArrayView2<'_, f64>) -> Result<Vec<f64>> {
    if window.ncols() != model.layout.input_width {
        return Err(Error::config(format!(
            "window width {} does not match model input width {}",
            window.ncols(),
            model.layout.input_width
        )));
    }
    let batch = Batch::from_windows(&[window], &[0.0]);
    Ok(model.predict(&batch)?.row(0).to_vec())
}

/// Flat gradient of the mean batch loss, in [`LstmModel::flatten`] order.
pub fn gradients(model: &LstmModel, batch: &Batch) -> Result<Vec<f64>> {
    Ok(model.gradient(batch)?.1.flatten())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrainSpec {
    pub epochs: usize,
    pub learning_rate: f64,
    pub batch_size: usize,
    pub shuffle_seed_base: u64,
}

impl Default for TrainSpec {
    fn default() -> Self {
        Self {
            epochs: 1,
            learning_rate: DEFAULT_LEARNING_RATE,
            batch_size: DEFAULT_BATCH_SIZE,
            shuffle_seed_base: 0,
        }
    }
}

impl TrainSpec {
    pub fn validate(&self) -> Result<()> {
        if self.learning_rate.is_nan() || self.learning_rate < 0.0 {
            return Err(Error::config("learning_rate must be >= 0"));
        }
        if self.batch_size == 0 {
            return Err(Error::config("batch_size must be >= 1"));
        }
        Ok(())
    }
}

/// Order of the samples in one epoch, keyed on (seed base, stream, epoch).
pub fn epoch_order(
    data: &[&WindowedSeries],
    seed_base: u64,
    stream: u64,
    epoch: u64,
) -> Vec<(usize, usize)> {
    let mut order: Vec<(usize, usize)> = data
        .iter()
        .enumerate()
        .flat_map(|(s, series)| (0..series.len()).map(move |i| (s, i)))
        .collect();
    let mut rng = ChaCha8Rng::seed_from_u64(splitmix(seed_base ^ splitmix(epoch)));
    rng.set_stream(stream);
    order.shuffle(&mut rng);
    order
}

/// Runs `spec.epochs` SGD passes over `data`. Epochs are numbered from
/// `first_epoch` for shuffling, so a run split across calls shuffles the
/// same way as one long run.
pub fn train(
    model: &mut LstmModel,
    data: &[&WindowedSeries],
    spec: &TrainSpec,
    stream: u64,
    first_epoch: u64,
) -> Result<()> {
    spec.validate()?;
    if data.iter().all(|d| d.is_empty()) {
        return Err(Error::EmptyDataset("no training samples".into()));
    }
    if spec.learning_rate == 0.0 {
        return Ok(());
    }
    for e in 0..spec.epochs as u64 {
        let order = epoch_order(data, spec.shuffle_seed_base, stream, first_epoch + e);
        for chunk in order.chunks(spec.batch_size) {
            let batch = Batch::gather(data, chunk);
            let (_, grad) = model.gradient(&batch)?;
            model.add_scaled(-spec.learning_rate, &grad);
        }
    }
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EvalResult {
    pub metric: Fitness,
    pub samples: usize,
}

impl EvalResult {
    pub fn value(&self) -> f64 {
        self.metric.value
    }
}

pub fn direction_for(task: Task) -> Direction {
    match task {
        Task::Regression => Direction::Minimize,
        Task::Classification => Direction::Maximize,
    }
}

const EVAL_BATCH: usize = 256;

/// RMSE over all windows (regression) or argmax accuracy (classification).
pub fn evaluate(model: &LstmModel, data: &[&WindowedSeries]) -> Result<EvalResult> {
    let samples: Vec<(usize, usize)> = data
        .iter()
        .enumerate()
        .flat_map(|(s, series)| (0..series.len()).map(move |i| (s, i)))
        .collect();
    if samples.is_empty() {
        return Err(Error::EmptyDataset("nothing to evaluate".into()));
    }
    let task = model.layout.task;
    let mut acc = 0.0;
    for chunk in samples.chunks(EVAL_BATCH) {
        let batch = Batch::gather(data, chunk);
        let pred = model.predict(&batch)?;
        acc += score(task, &pred, &batch.targets);
    }
    Ok(finish_score(task, acc, samples.len()))
}

/// Sum of squared errors, or number of correct predictions.
fn score(task: Task, pred: &Array2<f64>, targets: &[f64]) -> f64 {
    match task {
        Task::Regression => pred
            .column(0)
            .iter()
            .zip(targets)
            .map(|(p, y)| (p - y).powi(2))
            .sum(),
        Task::Classification => pred
            .rows()
            .into_iter()
            .zip(targets)
            .filter(|(row, y)| argmax(row.as_slice().expect("standard layout")) == **y as usize)
            .count() as f64,
    }
}

fn finish_score(task: Task, acc: f64, n: usize) -> EvalResult {
    let value = match task {
        Task::Regression => (acc / n as f64).sqrt(),
        Task::Classification => acc / n as f64,
    };
    EvalResult {
        metric: Fitness::new(value, direction_for(task)),
        samples: n,
    }
}

/// Scores precomputed predictions; `pred` holds one row per sample.
pub fn evaluate_predictions(task: Task, pred: &Array2<f64>, targets: &[f64]) -> Result<EvalResult> {
    if targets.is_empty() {
        return Err(Error::EmptyDataset("nothing to evaluate".into()));
    }
    Ok(finish_score(
        task,
        score(task, pred, targets),
        targets.len(),
    ))
}

fn argmax(v: &[f64]) -> usize {
    v.iter()
        .enumerate()
        .fold((0, f64::NEG_INFINITY), |(bi, bv), (i, &x)| {
            if x > bv {
                (i, x)
            } else {
                (bi, bv)
            }
        })
        .0
}

//! Time-series datasets, windowing, and client partitioning.
//!
//! Two seeded generators stand in for the traffic-count and machine-telemetry
//! workloads; `load_csv` ingests real exports with the same columns. Rows are
//! cut into contiguous, non-overlapping client shards whose tails form the
//! held-out test set.

use std::fmt;
use std::ops::Range;
use std::path::Path;
use std::str::FromStr;
use std::sync::atomic::{AtomicUsize, Ordering};

use chrono::{DateTime, NaiveDate, NaiveDateTime};
use ndarray::{s, Array2, ArrayView2};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const DEFAULT_LOOKBACK: usize = 24;
pub const DEFAULT_TEST_FRACTION: f64 = 0.2;
/// Hours before a failure whose rows carry that failure's label.
pub const FAILURE_HORIZON: usize = 24;
/// Trailing window of the rolling-mean lag features.
pub const LAG_WINDOW: usize = 24;
pub const FAILURE_CLASSES: usize = 5;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Task {
    Regression,
    Classification,
}

impl fmt::Display for Task {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Task::Regression => "regression",
            Task::Classification => "classification",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FailureLabel {
    None,
    Comp1,
    Comp2,
    Comp3,
    Comp4,
}

impl FailureLabel {
    pub fn class_index(self) -> usize {
        self as usize
    }

    pub fn from_component(component: usize) -> Self {
        match component {
            1 => FailureLabel::Comp1,
            2 => FailureLabel::Comp2,
            3 => FailureLabel::Comp3,
            4 => FailureLabel::Comp4,
            _ => FailureLabel::None,
        }
    }
}

impl FromStr for FailureLabel {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s.trim().to_ascii_lowercase().as_str() {
            "none" | "" => Ok(FailureLabel::None),
            "comp1" => Ok(FailureLabel::Comp1),
            "comp2" => Ok(FailureLabel::Comp2),
            "comp3" => Ok(FailureLabel::Comp3),
            "comp4" => Ok(FailureLabel::Comp4),
            other => Err(format!("unknown failure label {other:?}")),
        }
    }
}

/// One observation. `target` is the value the row contributes when it is the
/// prediction target of a window: the count itself for traffic, the class
/// index of the failure label for telemetry.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Row {
    /// Seconds since the Unix epoch.
    pub timestamp: i64,
    /// Sensor or machine id; rows of different groups never share a window.
    pub group: u32,
    pub features: Vec<f64>,
    pub target: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TimeSeriesDataset {
    pub task: Task,
    pub feature_names: Vec<String>,
    /// Sorted by (group, timestamp); timestamps strictly increase within a group.
    pub rows: Vec<Row>,
}

impl TimeSeriesDataset {
    pub fn feature_width(&self) -> usize {
        self.feature_names.len()
    }

    pub fn output_width(&self) -> usize {
        match self.task {
            Task::Regression => 1,
            Task::Classification => FAILURE_CLASSES,
        }
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    /// Row ranges of each group, in order.
    pub fn group_ranges(&self) -> Vec<Range<usize>> {
        let mut out = Vec::new();
        let mut start = 0;
        for i in 1..=self.rows.len() {
            if i == self.rows.len() || self.rows[i].group != self.rows[start].group {
                if i > start {
                    out.push(start..i);
                }
                start = i;
            }
        }
        out
    }
}

/// An eagerly materialized training example.
#[derive(Debug, Clone, PartialEq)]
pub struct Window {
    /// `lookback × feature_width`, oldest row first.
    pub inputs: Array2<f64>,
    pub target: f64,
}

/// Window `i` covers rows `[i, i + lookback)` and predicts row `i + lookback`.
pub fn make_windows(rows: &[Row], lookback: usize) -> Result<Vec<Window>> {
    if lookback == 0 || rows.len() <= lookback {
        return Err(Error::SeriesTooShort {
            len: rows.len(),
            lookback,
        });
    }
    let series = WindowedSeries::from_rows(rows, lookback);
    Ok((0..series.len())
        .map(|i| Window {
            inputs: series.window(i).to_owned(),
            target: series.target(i),
        })
        .collect())
}

/// A contiguous run of rows viewed as overlapping lookback windows. Sample
/// `i` has inputs `features[i .. i + lookback]` and target
/// `targets[i + lookback]`.
#[derive(Debug, Clone, PartialEq)]
pub struct WindowedSeries {
    features: Array2<f64>,
    targets: Vec<f64>,
    lookback: usize,
}

impl WindowedSeries {
    pub fn new(features: Array2<f64>, targets: Vec<f64>, lookback: usize) -> Self {
        assert_eq!(features.nrows(), targets.len());
        Self {
            features,
            targets,
            lookback,
        }
    }

    fn from_rows(rows: &[Row], lookback: usize) -> Self {
        let width = rows.first().map_or(0, |r| r.features.len());
        let mut features = Array2::zeros((rows.len(), width));
        for (i, r) in rows.iter().enumerate() {
            for (j, &v) in r.features.iter().enumerate() {
                features[[i, j]] = v;
            }
        }
        Self::new(features, rows.iter().map(|r| r.target).collect(), lookback)
    }

    pub fn len(&self) -> usize {
        self.targets.len().saturating_sub(self.lookback)
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn lookback(&self) -> usize {
        self.lookback
    }

    pub fn feature_width(&self) -> usize {
        self.features.ncols()
    }

    pub fn window(&self, i: usize) -> ArrayView2<'_, f64> {
        self.features.slice(s![i..i + self.lookback, ..])
    }

    pub fn target(&self, i: usize) -> f64 {
        self.targets[i + self.lookback]
    }
}

/// One client's private training partition.
#[derive(Debug)]
pub struct ClientShard {
    pub client_id: usize,
    /// Row indices of the source dataset this shard trains on.
    pub source_rows: Range<usize>,
    data: WindowedSeries,
    reads: AtomicUsize,
    foreign_reads: AtomicUsize,
}

impl Clone for ClientShard {
    fn clone(&self) -> Self {
        Self {
            client_id: self.client_id,
            source_rows: self.source_rows.clone(),
            data: self.data.clone(),
            reads: AtomicUsize::new(0),
            foreign_reads: AtomicUsize::new(0),
        }
    }
}

impl ClientShard {
    pub fn new(client_id: usize, source_rows: Range<usize>, data: WindowedSeries) -> Self {
        Self {
            client_id,
            source_rows,
            data,
            reads: AtomicUsize::new(0),
            foreign_reads: AtomicUsize::new(0),
        }
    }

    /// Number of windowed samples.
    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    /// Access to the samples, granted only to the owning client.
    pub fn local_data(&self, requester: usize) -> Result<&WindowedSeries> {
        if requester != self.client_id {
            self.foreign_reads.fetch_add(1, Ordering::Relaxed);
            return Err(Error::config(format!(
                "client {requester} may not read the shard of client {}",
                self.client_id
            )));
        }
        self.reads.fetch_add(1, Ordering::Relaxed);
        Ok(&self.data)
    }

    pub fn reads(&self) -> usize {
        self.reads.load(Ordering::Relaxed)
    }

    pub fn foreign_reads(&self) -> usize {
        self.foreign_reads.load(Ordering::Relaxed)
    }
}

#[derive(Debug, Clone)]
pub struct TestSegment {
    /// Row indices whose values are predicted; the `lookback` rows before
    /// them serve only as input context.
    pub target_rows: Range<usize>,
    pub data: WindowedSeries,
}

#[derive(Debug)]
pub struct PartitionedDataset {
    pub task: Task,
    pub feature_width: usize,
    pub output_width: usize,
    pub lookback: usize,
    pub total_rows: usize,
    pub shards: Vec<ClientShard>,
    pub test: Vec<TestSegment>,
    /// Multiplier that converts standardized regression errors back to the
    /// units of the raw target.
    pub target_scale: f64,
    uploads: AtomicUsize,
}

impl PartitionedDataset {
    /// Every shard's samples, as if uploaded to a central server. Counted, so
    /// federated runs can be checked for never calling it.
    pub fn pooled(&self) -> Vec<&WindowedSeries> {
        self.uploads.fetch_add(1, Ordering::Relaxed);
        self.shards.iter().map(|s| &s.data).collect()
    }

    pub fn uploads(&self) -> usize {
        self.uploads.load(Ordering::Relaxed)
    }

    pub fn test_series(&self) -> Vec<&WindowedSeries> {
        self.test.iter().map(|t| &t.data).collect()
    }

    pub fn train_samples(&self) -> usize {
        self.shards.iter().map(ClientShard::len).sum()
    }

    pub fn test_samples(&self) -> usize {
        self.test.iter().map(|t| t.data.len()).sum()
    }
}

/// Splits the rows into `k` contiguous chunks, one per client, and holds out
/// the last `test_fraction` of each chunk for testing.
pub fn partition(
    dataset: &TimeSeriesDataset,
    k: usize,
    test_fraction: f64,
    lookback: usize,
) -> Result<PartitionedDataset> {
    if k == 0 {
        return Err(Error::config("number of shards must be >= 1"));
    }
    let n = dataset.len();
    if n < k {
        return Err(Error::SeriesTooShort { len: n, lookback });
    }
    let chunks: Vec<Range<usize>> = (0..k).map(|i| i * n / k..(i + 1) * n / k).collect();
    for c in &chunks {
        if dataset.rows[c.start].group != dataset.rows[c.end.max(c.start + 1) - 1].group {
            return Err(Error::config(
                "a contiguous shard would span several series; use partition_by_group",
            ));
        }
    }
    build_partition(dataset, &chunks, test_fraction, lookback)
}

/// One shard per group (machine or sensor).
pub fn partition_by_group(
    dataset: &TimeSeriesDataset,
    test_fraction: f64,
    lookback: usize,
) -> Result<PartitionedDataset> {
    build_partition(dataset, &dataset.group_ranges(), test_fraction, lookback)
}

fn build_partition(
    dataset: &TimeSeriesDataset,
    chunks: &[Range<usize>],
    test_fraction: f64,
    lookback: usize,
) -> Result<PartitionedDataset> {
    if dataset.is_empty() {
        return Err(Error::EmptyDataset("nothing to partition".into()));
    }
    if !(0.0..1.0).contains(&test_fraction) {
        return Err(Error::config(format!(
            "test_fraction must lie in [0, 1), got {test_fraction}"
        )));
    }
    if lookback == 0 {
        return Err(Error::config("lookback must be >= 1"));
    }

    let mut splits = Vec::with_capacity(chunks.len());
    for c in chunks {
        let m = c.len();
        let n_test = (m as f64 * test_fraction).round() as usize;
        let n_train = m - n_test;
        if n_train <= lookback {
            return Err(Error::SeriesTooShort {
                len: n_train,
                lookback,
            });
        }
        splits.push((c.start..c.start + n_train, c.start + n_train..c.end));
    }

    let width = dataset.feature_width();
    let (mean, std) = feature_stats(
        dataset,
        splits.iter().map(|(train, _)| train.clone()),
        width,
    );
    let (target_mean, target_std) = match dataset.task {
        Task::Regression => {
            let (m, s) = target_stats(dataset, splits.iter().map(|(train, _)| train.clone()));
            (m, s)
        }
        Task::Classification => (0.0, 1.0),
    };

    let series = |range: Range<usize>| -> WindowedSeries {
        let rows = &dataset.rows[range];
        let mut features = Array2::zeros((rows.len(), width));
        for (i, r) in rows.iter().enumerate() {
            for j in 0..width {
                features[[i, j]] = (r.features[j] - mean[j]) / std[j];
            }
        }
        let targets = rows
            .iter()
            .map(|r| (r.target - target_mean) / target_std)
            .collect();
        WindowedSeries::new(features, targets, lookback)
    };

    let mut shards = Vec::with_capacity(splits.len());
    let mut test = Vec::new();
    for (client_id, (train, held_out)) in splits.into_iter().enumerate() {
        shards.push(ClientShard::new(
            client_id,
            train.clone(),
            series(train.clone()),
        ));
        if !held_out.is_empty() {
            test.push(TestSegment {
                target_rows: held_out.clone(),
                data: series(held_out.start - lookback..held_out.end),
            });
        }
    }

    Ok(PartitionedDataset {
        task: dataset.task,
        feature_width: width,
        output_width: dataset.output_width(),
        lookback,
        total_rows: dataset.len(),
        shards,
        test,
        target_scale: target_std,
        uploads: AtomicUsize::new(0),
    })
}

fn feature_stats(
    dataset: &TimeSeriesDataset,
    ranges: impl Iterator<Item = Range<usize>>,
    width: usize,
) -> (Vec<f64>, Vec<f64>) {
    let mut sum = vec![0.0; width];
    let mut sq = vec![0.0; width];
    let mut count = 0usize;
    for r in ranges {
        for row in &dataset.rows[r] {
            for j in 0..width {
                sum[j] += row.features[j];
                sq[j] += row.features[j] * row.features[j];
            }
            count += 1;
        }
    }
    let n = count.max(1) as f64;
    let mean: Vec<f64> = sum.iter().map(|s| s / n).collect();
    let std = sq
        .iter()
        .zip(&mean)
        .map(|(q, m)| {
            let var = (q / n - m * m).max(0.0);
            if var > 1e-12 {
                var.sqrt()
            } else {
                1.0
            }
        })
        .collect();
    (mean, std)
}

fn target_stats(
    dataset: &TimeSeriesDataset,
    ranges: impl Iterator<Item = Range<usize>>,
) -> (f64, f64) {
    let (mut sum, mut sq, mut n) = (0.0, 0.0, 0usize);
    for r in ranges {
        for row in &dataset.rows[r] {
            sum += row.target;
            sq += row.target * row.target;
            n += 1;
        }
    }
    let n = n.max(1) as f64;
    let mean = sum / n;
    let var = (sq / n - mean * mean).max(0.0);
    (mean, if var > 1e-12 { var.sqrt() } else { 1.0 })
}

// ---------------------------------------------------------------------------
// Synthetic traffic counts

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrafficParams {
    pub rows_per_client: usize,
    pub base_count: f64,
    /// Spread of the per-client offset around `base_count`.
    pub offset_spread: f64,
    pub daily_amplitude: f64,
    pub weekly_amplitude: f64,
    pub noise_sd: f64,
}

impl Default for TrafficParams {
    fn default() -> Self {
        Self {
            rows_per_client: 1000,
            base_count: 40.0,
            offset_spread: 15.0,
            daily_amplitude: 25.0,
            weekly_amplitude: 8.0,
            noise_sd: 4.0,
        }
    }
}

/// Hourly car counts of one sensor pair: daily and weekly cycles around a
/// client-specific level plus Gaussian noise, clipped at zero.
pub fn traffic_series(seed: u64, client: usize, params: &TrafficParams) -> Vec<Row> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(client as u64 + 1);
    let offset = rng.random_range(-params.offset_spread..=params.offset_spread);
    let phase = rng.random_range(0.0..std::f64::consts::TAU);
    let noise = Normal::new(0.0, params.noise_sd.max(0.0)).expect("finite sd");
    let tau = std::f64::consts::TAU;
    (0..params.rows_per_client)
        .map(|h| {
            let t = h as f64;
            let count = params.base_count
                + offset
                + params.daily_amplitude * (tau * t / 24.0 + phase).sin()
                + params.weekly_amplitude * (tau * t / 168.0).sin()
                + noise.sample(&mut rng);
            let count = count.max(0.0);
            Row {
                timestamp: h as i64 * 3600,
                group: client as u32,
                features: vec![count],
                target: count,
            }
        })
        .collect()
}

pub fn traffic_dataset(seed: u64, n_clients: usize, params: &TrafficParams) -> TimeSeriesDataset {
    TimeSeriesDataset {
        task: Task::Regression,
        feature_names: vec!["count".into()],
        rows: (0..n_clients)
            .flat_map(|c| traffic_series(seed, c, params))
            .collect(),
    }
}

/// Synthetic traffic workload with one sensor series per client.
pub fn gen_traffic(
    seed: u64,
    n_clients: usize,
    rows_per_client: usize,
) -> Result<PartitionedDataset> {
    let params = TrafficParams {
        rows_per_client,
        ..Default::default()
    };
    gen_traffic_with(
        seed,
        n_clients,
        &params,
        DEFAULT_TEST_FRACTION,
        DEFAULT_LOOKBACK,
    )
}

pub fn gen_traffic_with(
    seed: u64,
    n_clients: usize,
    params: &TrafficParams,
    test_fraction: f64,
    lookback: usize,
) -> Result<PartitionedDataset> {
    if n_clients == 0 {
        return Err(Error::config("n_clients must be >= 1"));
    }
    partition_by_group(
        &traffic_dataset(seed, n_clients, params),
        test_fraction,
        lookback,
    )
}

// ---------------------------------------------------------------------------
// Synthetic machine telemetry

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TelemetryParams {
    pub hours: usize,
    /// Per-hour failure probability of components 1..4.
    pub hazard: [f64; 4],
    /// Channel means: volt, rotate, pressure, vibration.
    pub level: [f64; 4],
    pub noise_sd: [f64; 4],
    /// Shift of the affected channel reached at the failure hour.
    pub precursor: [f64; 4],
}

impl Default for TelemetryParams {
    fn default() -> Self {
        Self {
            hours: 1000,
            hazard: [1.0 / 500.0; 4],
            level: [170.0, 450.0, 100.0, 40.0],
            noise_sd: [15.0, 50.0, 10.0, 5.0],
            precursor: [45.0, -150.0, 30.0, 15.0],
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct FailureEvent {
    pub hour: usize,
    /// 1..=4
    pub component: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MachineTelemetry {
    pub rows: Vec<Row>,
    pub failures: Vec<FailureEvent>,
}

pub const TELEMETRY_CHANNELS: [&str; 4] = ["volt", "rotate", "pressure", "vibration"];

/// Label of each hour: the component of the nearest failure that happens
/// within the next [`FAILURE_HORIZON`] hours (ties go to the lower
/// component), else `none`.
pub fn label_hours(hours: usize, failures: &[FailureEvent]) -> Vec<FailureLabel> {
    (0..hours)
        .map(|h| {
            failures
                .iter()
                .filter(|f| f.hour > h && f.hour - h <= FAILURE_HORIZON)
                .min_by_key(|f| (f.hour - h, f.component))
                .map_or(FailureLabel::None, |f| {
                    FailureLabel::from_component(f.component)
                })
        })
        .collect()
}

/// Appends trailing rolling means over [`LAG_WINDOW`] rows (fewer at the
/// start of a series) of the first `channels` features of each row.
pub fn add_lag_features(rows: &mut [Row], channels: usize) {
    let mut sums = vec![0.0; channels];
    for i in 0..rows.len() {
        for (c, sum) in sums.iter_mut().enumerate() {
            *sum += rows[i].features[c];
            if i >= LAG_WINDOW {
                *sum -= rows[i - LAG_WINDOW].features[c];
            }
        }
        let n = (i + 1).min(LAG_WINDOW) as f64;
        let means: Vec<f64> = sums.iter().map(|s| s / n).collect();
        rows[i].features.extend(means);
    }
}

/// Hourly telemetry of one machine. Failures arrive independently per
/// component; in the hours before a failure the associated channel drifts
/// toward its precursor shift.
pub fn telemetry_machine(seed: u64, machine: usize, params: &TelemetryParams) -> MachineTelemetry {
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x7e1e_3e72);
    rng.set_stream(machine as u64 + 1);
    let hours = params.hours;

    let mut failures = Vec::new();
    for h in 0..hours {
        for (c, &p) in params.hazard.iter().enumerate() {
            if p > 0.0 && rng.random::<f64>() < p {
                failures.push(FailureEvent {
                    hour: h,
                    component: c + 1,
                });
            }
        }
    }
    let labels = label_hours(hours, &failures);

    let machine_bias: [f64; 4] =
        std::array::from_fn(|c| rng.random_range(-0.5..=0.5) * params.noise_sd[c]);
    let mut drift = [0.0f64; 4];
    let mut rows = Vec::with_capacity(hours);
    for h in 0..hours {
        let mut features = Vec::with_capacity(8);
        for c in 0..4 {
            drift[c] = 0.98 * drift[c] + rng.random_range(-0.1..=0.1) * params.noise_sd[c];
            let precursor: f64 = failures
                .iter()
                .filter(|f| f.component == c + 1 && f.hour > h && f.hour - h <= FAILURE_HORIZON)
                .map(|f| {
                    params.precursor[c]
                        * (1.0 - (f.hour - h) as f64 / (FAILURE_HORIZON as f64 + 1.0))
                })
                .fold(0.0, |a, b| if b.abs() > a.abs() { b } else { a });
            let noise = Normal::new(0.0, params.noise_sd[c])
                .expect("finite sd")
                .sample(&mut rng);
            features.push(params.level[c] + machine_bias[c] + drift[c] + precursor + noise);
        }
        rows.push(Row {
            timestamp: h as i64 * 3600,
            group: machine as u32,
            features,
            target: labels[h].class_index() as f64,
        });
    }
    add_lag_features(&mut rows, 4);
    MachineTelemetry { rows, failures }
}

pub fn telemetry_feature_names() -> Vec<String> {
    TELEMETRY_CHANNELS
        .iter()
        .map(|c| c.to_string())
        .chain(TELEMETRY_CHANNELS.iter().map(|c| format!("{c}_mean_24h")))
        .collect()
}

pub fn telemetry_dataset(
    seed: u64,
    n_machines: usize,
    params: &TelemetryParams,
) -> TimeSeriesDataset {
    TimeSeriesDataset {
        task: Task::Classification,
        feature_names: telemetry_feature_names(),
        rows: (0..n_machines)
            .flat_map(|m| telemetry_machine(seed, m, params).rows)
            .collect(),
    }
}

/// Synthetic predictive-maintenance workload with one machine per client.
pub fn gen_telemetry(seed: u64, n_machines: usize, hours: usize) -> Result<PartitionedDataset> {
    let params = TelemetryParams {
        hours,
        ..Default::default()
    };
    gen_telemetry_with(
        seed,
        n_machines,
        &params,
        DEFAULT_TEST_FRACTION,
        DEFAULT_LOOKBACK,
    )
}

pub fn gen_telemetry_with(
    seed: u64,
    n_machines: usize,
    params: &TelemetryParams,
    test_fraction: f64,
    lookback: usize,
) -> Result<PartitionedDataset> {
    if n_machines == 0 {
        return Err(Error::config("n_machines must be >= 1"));
    }
    if params.hours < 48 {
        return Err(Error::config(format!(
            "hours must be >= 48, got {}",
            params.hours
        )));
    }
    partition_by_group(
        &telemetry_dataset(seed, n_machines, params),
        test_fraction,
        lookback,
    )
}

// ---------------------------------------------------------------------------
// CSV ingestion

/// Column layout of an input file.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CsvSchema {
    /// `timestamp,count`
    Traffic,
    /// `timestamp,machine_id,volt,rotate,pressure,vibration,failure`
    Telemetry,
}

impl CsvSchema {
    pub fn columns(self) -> &'static [&'static str] {
        match self {
            CsvSchema::Traffic => &["timestamp", "count"],
            CsvSchema::Telemetry => &[
                "timestamp",
                "machine_id",
                "volt",
                "rotate",
                "pressure",
                "vibration",
                "failure",
            ],
        }
    }
}

impl FromStr for CsvSchema {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "traffic" => Ok(CsvSchema::Traffic),
            "telemetry" => Ok(CsvSchema::Telemetry),
            other => Err(Error::config(format!("unknown csv schema {other:?}"))),
        }
    }
}

/// Integer epoch hours, RFC 3339, or `YYYY-MM-DD[ T]HH:MM:SS`, as epoch seconds.
pub fn parse_timestamp(s: &str) -> Option<i64> {
    let s = s.trim();
    if let Ok(h) = s.parse::<i64>() {
        return h.checked_mul(3600);
    }
    if let Ok(t) = DateTime::parse_from_rfc3339(s) {
        return Some(t.timestamp());
    }
    for fmt in [
        "%Y-%m-%d %H:%M:%S",
        "%Y-%m-%dT%H:%M:%S",
        "%Y-%m-%d %H:%M",
        "%Y-%m-%dT%H:%M",
    ] {
        if let Ok(t) = NaiveDateTime::parse_from_str(s, fmt) {
            return Some(t.and_utc().timestamp());
        }
    }
    NaiveDate::parse_from_str(s, "%Y-%m-%d")
        .ok()
        .and_then(|d| d.and_hms_opt(0, 0, 0))
        .map(|t| t.and_utc().timestamp())
}

pub fn load_csv(path: impl AsRef<Path>, schema: CsvSchema) -> Result<TimeSeriesDataset> {
    let path = path.as_ref();
    let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    let mut reader = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_reader(file);
    let csv_err = |line: u64, message: String| Error::Csv {
        path: path.to_path_buf(),
        line,
        message,
    };

    let headers = reader
        .headers()
        .map_err(|e| csv_err(1, e.to_string()))?
        .clone();
    let mut idx = Vec::new();
    for col in schema.columns() {
        match headers.iter().position(|h| h == *col) {
            Some(i) => idx.push(i),
            None => return Err(csv_err(1, format!("missing column {col:?}"))),
        }
    }

    let mut rows = Vec::new();
    for record in reader.records() {
        let record =
            record.map_err(|e| csv_err(e.position().map_or(0, |p| p.line()), e.to_string()))?;
        let line = record.position().map_or(0, |p| p.line());
        let cell = |k: usize| record.get(idx[k]).unwrap_or("");
        let number = |k: usize| -> Result<f64> {
            cell(k)
                .parse::<f64>()
                .ok()
                .filter(|v| v.is_finite())
                .ok_or_else(|| {
                    csv_err(
                        line,
                        format!(
                            "column {:?}: not a number: {:?}",
                            schema.columns()[k],
                            cell(k)
                        ),
                    )
                })
        };
        let timestamp = parse_timestamp(cell(0)).ok_or_else(|| {
            csv_err(
                line,
                format!("column \"timestamp\": unparsable timestamp {:?}", cell(0)),
            )
        })?;
        let row = match schema {
            CsvSchema::Traffic => {
                let count = number(1)?;
                Row {
                    timestamp,
                    group: 0,
                    features: vec![count],
                    target: count,
                }
            }
            CsvSchema::Telemetry => {
                let group = cell(1).parse::<u32>().map_err(|_| {
                    csv_err(
                        line,
                        format!("column \"machine_id\": not an integer id: {:?}", cell(1)),
                    )
                })?;
                let features = (2..6).map(number).collect::<Result<Vec<_>>>()?;
                let label: FailureLabel = cell(6)
                    .parse()
                    .map_err(|e: String| csv_err(line, format!("column \"failure\": {e}")))?;
                Row {
                    timestamp,
                    group,
                    features,
                    target: label.class_index() as f64,
                }
            }
        };
        rows.push((line, row));
    }
    if rows.is_empty() {
        return Err(Error::EmptyDataset(format!(
            "{} has no data rows",
            path.display()
        )));
    }

    rows.sort_by_key(|(_, r)| (r.group, r.timestamp));
    for pair in rows.windows(2) {
        let (a, b) = (&pair[0].1, &pair[1].1);
        if a.group == b.group && a.timestamp == b.timestamp {
            return Err(csv_err(
                pair[1].0,
                format!("duplicate timestamp {} for series {}", b.timestamp, b.group),
            ));
        }
    }
    let mut rows: Vec<Row> = rows.into_iter().map(|(_, r)| r).collect();

    let (task, feature_names) = match schema {
        CsvSchema::Traffic => (Task::Regression, vec!["count".to_string()]),
        CsvSchema::Telemetry => {
            let mut start = 0;
            while start < rows.len() {
                let g = rows[start].group;
                let end = rows[start..]
                    .iter()
                    .position(|r| r.group != g)
                    .map_or(rows.len(), |p| start + p);
                add_lag_features(&mut rows[start..end], 4);
                start = end;
            }
            (Task::Classification, telemetry_feature_names())
        }
    };
    Ok(TimeSeriesDataset {
        task,
        feature_names,
        rows,
    })
}

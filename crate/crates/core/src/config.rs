//! Experiment configuration: a TOML file layered over a named preset.
//!
//! ```toml
//! preset = "table1"       # optional base
//! use_case = "traffic"    # traffic | telemetry | csv
//! method = "both"         # pso | grid | both
//! seed = 7
//!
//! [pso]
//! pop = 5
//! c1c2 = "fixed"
//! c1 = 1.5
//! c2 = 1.5
//! ```
//!
//! Keys not set in the file come from the preset, and keys not set in the
//! preset come from the defaults below.

use std::fmt;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use toml::Value;

use crate::data::{self, CsvSchema, PartitionedDataset, TelemetryParams, TrafficParams};
use crate::error::{Error, Result};
use crate::federated::FlConfig;
use crate::harness::GridSpec;
use crate::learner::TrainSpec;
use crate::pso::{CoefficientMode, PsoParams, SearchBounds, UpdateRule};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum UseCase {
    Traffic,
    Telemetry,
    Csv,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum MethodChoice {
    Pso,
    Grid,
    Both,
}

impl MethodChoice {
    pub fn runs_pso(self) -> bool {
        matches!(self, MethodChoice::Pso | MethodChoice::Both)
    }

    pub fn runs_grid(self) -> bool {
        matches!(self, MethodChoice::Grid | MethodChoice::Both)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CoefficientChoice {
    Random,
    Fixed,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PsoSection {
    pub pop: usize,
    pub max_it: usize,
    pub w: f64,
    pub c1c2: CoefficientChoice,
    /// Only read when `c1c2 = "fixed"`.
    pub c1: f64,
    pub c2: f64,
    /// Falls back to the experiment seed.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    pub literal: bool,
    pub epsilon: f64,
    /// Inclusive search ranges.
    pub layers: [u32; 2],
    pub neurons: [u32; 2],
    pub epochs: [u32; 2],
}

impl Default for PsoSection {
    fn default() -> Self {
        let p = PsoParams::default();
        let b = SearchBounds::default();
        Self {
            pop: p.pop_size,
            max_it: p.max_it,
            w: p.w,
            c1c2: CoefficientChoice::Random,
            c1: 2.0,
            c2: 2.0,
            seed: None,
            literal: false,
            epsilon: p.epsilon,
            layers: [b.min_layers, b.max_layers],
            neurons: [b.min_neurons, b.max_neurons],
            epochs: [b.min_epochs, b.max_epochs],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FlSection {
    pub num_clients: usize,
    pub comm_rounds: usize,
    pub test_fraction: f64,
}

impl Default for FlSection {
    fn default() -> Self {
        let fl = FlConfig::default();
        Self {
            num_clients: fl.num_clients,
            comm_rounds: fl.comm_rounds,
            test_fraction: data::DEFAULT_TEST_FRACTION,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LearnerSection {
    pub lr: f64,
    pub batch: usize,
    pub lookback: usize,
}

impl Default for LearnerSection {
    fn default() -> Self {
        let t = TrainSpec::default();
        Self {
            lr: t.learning_rate,
            batch: t.batch_size,
            lookback: data::DEFAULT_LOOKBACK,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DataSection {
    /// Rows per traffic sensor.
    pub rows_per_client: usize,
    /// Hours per telemetry machine.
    pub hours: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub csv_path: Option<PathBuf>,
    pub csv_schema: CsvSchema,
}

impl Default for DataSection {
    fn default() -> Self {
        Self {
            rows_per_client: TrafficParams::default().rows_per_client,
            hours: TelemetryParams::default().hours,
            csv_path: None,
            csv_schema: CsvSchema::Traffic,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub use_case: UseCase,
    pub method: MethodChoice,
    pub seed: u64,
    /// Score configurations with the closed-form quadratic instead of
    /// federated training. Rounds are still charged.
    pub surrogate: bool,
    pub output: PathBuf,
    pub pso: PsoSection,
    pub grid: GridSpec,
    pub fl: FlSection,
    pub learner: LearnerSection,
    pub data: DataSection,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            use_case: UseCase::Traffic,
            method: MethodChoice::Both,
            seed: 0,
            surrogate: false,
            output: PathBuf::from("out"),
            pso: PsoSection::default(),
            grid: GridSpec::default(),
            fl: FlSection::default(),
            learner: LearnerSection::default(),
            data: DataSection::default(),
        }
    }
}

pub const PRESETS: &[&str] = &["table1", "traffic", "telemetry"];

const TABLE1: &str = r#"
use_case = "traffic"
[fl]
num_clients = 5
comm_rounds = 15
"#;

const TRAFFIC: &str = r#"
use_case = "traffic"
[fl]
num_clients = 18
"#;

const TELEMETRY: &str = r#"
use_case = "telemetry"
[fl]
num_clients = 99
"#;

fn preset_table(name: &str) -> Option<Value> {
    let text = match name {
        "table1" => TABLE1,
        "traffic" => TRAFFIC,
        "telemetry" => TELEMETRY,
        _ => return None,
    };
    Some(
        text.parse::<toml::Table>()
            .expect("built-in preset parses")
            .into(),
    )
}

fn unknown_preset(name: &str) -> String {
    format!(
        "unknown preset {name:?}; expected one of {}",
        PRESETS.join(", ")
    )
}

/// Overwrites `base` with `top`, descending into tables.
fn merge(base: &mut Value, top: Value) {
    match (base, top) {
        (Value::Table(b), Value::Table(t)) => {
            for (k, v) in t {
                match b.get_mut(&k) {
                    Some(slot) => merge(slot, v),
                    None => {
                        b.insert(k, v);
                    }
                }
            }
        }
        (slot, v) => *slot = v,
    }
}

fn defaults_table() -> Value {
    Value::try_from(ExperimentConfig::default()).expect("defaults serialize")
}

impl ExperimentConfig {
    pub fn preset(name: &str) -> Result<Self> {
        let mut v = defaults_table();
        merge(
            &mut v,
            preset_table(name).ok_or_else(|| Error::config(unknown_preset(name)))?,
        );
        v.try_into()
            .map_err(|e: toml::de::Error| Error::config(e.message().to_string()))
    }

    /// Parses TOML text, layered over `base_preset` (or a `preset` key in
    /// the text) and the defaults. Relative CSV paths resolve against
    /// `origin`'s directory when given.
    pub fn from_toml(text: &str, base_preset: Option<&str>, origin: Option<&Path>) -> Result<Self> {
        let label = origin
            .map(Path::to_path_buf)
            .unwrap_or_else(|| "<config>".into());
        let fail = |message: String| Error::ConfigFile {
            path: label.clone(),
            message,
        };
        let mut file: toml::Table = text
            .parse()
            .map_err(|e: toml::de::Error| fail(e.to_string()))?;
        let named = match file.remove("preset") {
            Some(Value::String(s)) => Some(s),
            Some(_) => return Err(fail("preset: expected a string".into())),
            None => None,
        };
        let mut v = defaults_table();
        if let Some(name) = base_preset.or(named.as_deref()) {
            merge(
                &mut v,
                preset_table(name).ok_or_else(|| fail(unknown_preset(name)))?,
            );
        }
        merge(&mut v, Value::Table(file));
        let mut cfg: ExperimentConfig = v
            .try_into()
            .map_err(|e: toml::de::Error| fail(e.to_string()))?;
        if let (Some(dir), Some(p)) = (origin.and_then(Path::parent), cfg.data.csv_path.as_mut()) {
            if p.is_relative() {
                *p = dir.join(&*p);
            }
        }
        Ok(cfg)
    }

    pub fn load(path: &Path, base_preset: Option<&str>) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_toml(&text, base_preset, Some(path))
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    pub fn pso_params(&self, literal_override: bool) -> PsoParams {
        PsoParams {
            pop_size: self.pso.pop,
            max_it: self.pso.max_it,
            w: self.pso.w,
            coefficients: match self.pso.c1c2 {
                CoefficientChoice::Random => CoefficientMode::Random,
                CoefficientChoice::Fixed => CoefficientMode::Fixed {
                    c1: self.pso.c1,
                    c2: self.pso.c2,
                },
            },
            rule: if self.pso.literal || literal_override {
                UpdateRule::Literal
            } else {
                UpdateRule::Canonical
            },
            epsilon: self.pso.epsilon,
            seed: self.pso.seed.unwrap_or(self.seed),
        }
    }

    pub fn search_bounds(&self) -> Result<SearchBounds> {
        let [l, n, e] = [self.pso.layers, self.pso.neurons, self.pso.epochs];
        SearchBounds::new((l[0], l[1]), (n[0], n[1]), (e[0], e[1]))
    }

    pub fn fl_config(&self) -> FlConfig {
        FlConfig {
            num_clients: self.fl.num_clients,
            comm_rounds: self.fl.comm_rounds,
            model_seed: self.seed,
        }
    }

    pub fn train_spec(&self) -> TrainSpec {
        TrainSpec {
            epochs: 1,
            learning_rate: self.learner.lr,
            batch_size: self.learner.batch,
            shuffle_seed_base: self.seed,
        }
    }

    /// Static checks only. An empty list means the configuration can run.
    pub fn problems(&self) -> Vec<Problem> {
        let mut out = Vec::new();
        let mut check = |ok: bool, key: &str, message: String| {
            if !ok {
                out.push(Problem {
                    key: key.into(),
                    message,
                });
            }
        };
        let p = &self.pso;
        check(p.pop >= 1, "pso.pop", "pop_size must be ≥ 1".into());
        check(p.max_it >= 1, "pso.max_it", "max_it must be ≥ 1".into());
        check(
            p.w > 0.0 && p.w <= 1.0,
            "pso.w",
            format!("w must lie in (0, 1], got {}", p.w),
        );
        if p.c1c2 == CoefficientChoice::Fixed {
            for (key, c) in [("pso.c1", p.c1), ("pso.c2", p.c2)] {
                check(
                    (0.0..=4.0).contains(&c),
                    key,
                    format!("{} must lie in [0, 4], got {c}", &key[4..]),
                );
            }
        }
        check(
            p.epsilon >= 0.0 && p.epsilon.is_finite(),
            "pso.epsilon",
            format!("epsilon must be a finite value ≥ 0, got {}", p.epsilon),
        );
        for (key, r) in [
            ("pso.layers", p.layers),
            ("pso.neurons", p.neurons),
            ("pso.epochs", p.epochs),
        ] {
            check(
                r[0] >= 1 && r[0] <= r[1],
                key,
                format!("range must satisfy 1 ≤ min ≤ max, got [{}, {}]", r[0], r[1]),
            );
        }
        for (key, values) in [
            ("grid.layers", &self.grid.layers),
            ("grid.neurons", &self.grid.neurons),
            ("grid.epochs", &self.grid.epochs),
        ] {
            check(
                !values.is_empty(),
                key,
                "value list must not be empty".into(),
            );
            check(
                values.iter().all(|&v| v >= 1),
                key,
                "values must be ≥ 1".into(),
            );
            check(
                values.windows(2).all(|w| w[0] < w[1]),
                key,
                "values must be strictly increasing".into(),
            );
        }
        check(
            self.fl.num_clients >= 1,
            "fl.num_clients",
            "num_clients must be ≥ 1".into(),
        );
        check(
            self.fl.comm_rounds >= 1,
            "fl.comm_rounds",
            "comm_rounds must be ≥ 1".into(),
        );
        check(
            (0.0..1.0).contains(&self.fl.test_fraction) && self.fl.test_fraction > 0.0,
            "fl.test_fraction",
            format!(
                "test_fraction must lie in (0, 1), got {}",
                self.fl.test_fraction
            ),
        );
        check(
            self.learner.lr > 0.0 && self.learner.lr.is_finite(),
            "learner.lr",
            format!("lr must be a finite value > 0, got {}", self.learner.lr),
        );
        check(
            self.learner.batch >= 1,
            "learner.batch",
            "batch must be ≥ 1".into(),
        );
        check(
            self.learner.lookback >= 1,
            "learner.lookback",
            "lookback must be ≥ 1".into(),
        );

        let min_rows = |rows: usize| {
            let train = rows - (rows as f64 * self.fl.test_fraction).round() as usize;
            train > self.learner.lookback
        };
        match self.use_case {
            UseCase::Traffic => check(
                self.data.rows_per_client >= 1 && min_rows(self.data.rows_per_client),
                "data.rows_per_client",
                format!(
                    "rows_per_client ({}) leaves no training window for lookback {}",
                    self.data.rows_per_client, self.learner.lookback
                ),
            ),
            UseCase::Telemetry => check(
                self.data.hours >= 48 && min_rows(self.data.hours),
                "data.hours",
                format!(
                    "hours must be ≥ 48 and leave a training window for lookback {}, got {}",
                    self.learner.lookback, self.data.hours
                ),
            ),
            UseCase::Csv => match &self.data.csv_path {
                None => check(
                    false,
                    "data.csv_path",
                    "use_case = \"csv\" needs data.csv_path".into(),
                ),
                Some(p) => check(
                    p.is_file(),
                    "data.csv_path",
                    format!("file not found: {}", p.display()),
                ),
            },
        }
        out
    }

    /// Builds the partitioned dataset the evaluators train on.
    pub fn dataset(&self) -> Result<PartitionedDataset> {
        let (tf, lookback, k) = (
            self.fl.test_fraction,
            self.learner.lookback,
            self.fl.num_clients,
        );
        match self.use_case {
            UseCase::Traffic => {
                let params = TrafficParams {
                    rows_per_client: self.data.rows_per_client,
                    ..Default::default()
                };
                data::gen_traffic_with(self.seed, k, &params, tf, lookback)
            }
            UseCase::Telemetry => {
                let params = TelemetryParams {
                    hours: self.data.hours,
                    ..Default::default()
                };
                data::gen_telemetry_with(self.seed, k, &params, tf, lookback)
            }
            UseCase::Csv => {
                let path = self
                    .data
                    .csv_path
                    .as_ref()
                    .ok_or_else(|| Error::config("data.csv_path is not set"))?;
                let ds = data::load_csv(path, self.data.csv_schema)?;
                let groups = ds.group_ranges().len();
                if groups == 1 {
                    data::partition(&ds, k, tf, lookback)
                } else if groups == k {
                    data::partition_by_group(&ds, tf, lookback)
                } else {
                    Err(Error::config(format!(
                        "{} holds {groups} machines but fl.num_clients is {k}",
                        path.display()
                    )))
                }
            }
        }
    }
}

/// One failed static check, keyed by the dotted config path.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Problem {
    pub key: String,
    pub message: String,
}

impl fmt::Display for Problem {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}: {}", self.key, self.message)
    }
}

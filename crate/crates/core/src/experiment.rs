//! Runs a configured experiment and writes its report files.

use std::path::{Path, PathBuf};
use std::sync::Arc;

use serde::Serialize;

use crate::config::{ExperimentConfig, Problem};
use crate::error::{Error, Result};
use crate::harness::{
    centralized_fitness, compare, grid_search, pso_search, quadratic_surrogate, CentralizedResults,
    ComparisonReport, ConfigEvaluator, FlEvaluator, SearchReport, Surrogate,
};
use crate::pso::Direction;
use crate::report::{evaluations_csv, to_json, write_atomic};

/// Command-line adjustments applied on top of the loaded configuration.
#[derive(Debug, Clone, Default)]
pub struct Overrides {
    pub seed: Option<u64>,
    pub output: Option<PathBuf>,
    pub pso_literal: bool,
}

impl Overrides {
    pub fn apply(&self, cfg: &mut ExperimentConfig) {
        if let Some(seed) = self.seed {
            cfg.seed = seed;
            cfg.pso.seed = None;
        }
        if let Some(out) = &self.output {
            cfg.output = out.clone();
        }
        if self.pso_literal {
            cfg.pso.literal = true;
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct ExperimentReport {
    pub config: ExperimentConfig,
    pub pso: Option<SearchReport>,
    pub grid: Option<SearchReport>,
}

#[derive(Debug, Clone)]
pub struct ExperimentOutcome {
    pub report: ExperimentReport,
    pub comparison: Option<ComparisonReport>,
    pub files: Vec<PathBuf>,
}

impl ExperimentOutcome {
    /// One line per method: best configuration, fitness and rounds spent.
    pub fn summary_lines(&self) -> Vec<String> {
        [&self.report.pso, &self.report.grid]
            .into_iter()
            .flatten()
            .map(|r| {
                format!(
                    "{}: best {} fitness {} total_rounds {} ({} configs)",
                    r.method.as_str(),
                    r.best_config,
                    crate::report::format_g(r.best_fitness, 6),
                    r.total_rounds,
                    r.distinct_configs
                )
            })
            .collect()
    }
}

fn invalid(problems: &[Problem]) -> Error {
    let lines: Vec<String> = problems.iter().map(Problem::to_string).collect();
    Error::config(lines.join("; "))
}

/// Validates, runs the selected searches, and writes `report.json`,
/// `evaluations.csv` and, when both methods ran, `comparison.json`.
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<ExperimentOutcome> {
    let problems = cfg.problems();
    if !problems.is_empty() {
        return Err(invalid(&problems));
    }
    let bounds = cfg.search_bounds()?;
    let params = cfg.pso_params(false);
    let fl = cfg.fl_config();
    let spec = cfg.train_spec();

    let data = if cfg.surrogate {
        None
    } else {
        Some(Arc::new(cfg.dataset()?))
    };
    let evaluator: Box<dyn ConfigEvaluator> = match &data {
        None => Box::new(Surrogate::new(
            quadratic_surrogate,
            Direction::Maximize,
            fl.comm_rounds,
        )),
        Some(d) => Box::new(FlEvaluator {
            data: Arc::clone(d),
            fl,
            spec,
        }),
    };

    let pso = if cfg.method.runs_pso() {
        Some(pso_search(bounds, &params, evaluator.as_ref())?)
    } else {
        None
    };
    let grid = if cfg.method.runs_grid() {
        Some(grid_search(&cfg.grid, evaluator.as_ref())?)
    } else {
        None
    };
    for r in pso.iter().chain(&grid) {
        if !r.round_accounting_holds() {
            return Err(Error::config(format!(
                "{} report: total_rounds {} != distinct_configs {} x comm_rounds {}",
                r.method.as_str(),
                r.total_rounds,
                r.distinct_configs,
                r.comm_rounds
            )));
        }
    }

    let comparison = match (&pso, &grid) {
        (Some(p), Some(g)) => {
            let centralized = match &data {
                Some(d) => CentralizedResults {
                    pso_best: Some(centralized_fitness(p.best_config, d, &fl, &spec)?),
                    grid_best: Some(centralized_fitness(g.best_config, d, &fl, &spec)?),
                },
                None => CentralizedResults {
                    pso_best: None,
                    grid_best: None,
                },
            };
            Some(compare(p, g, &centralized)?)
        }
        _ => None,
    };

    let report = ExperimentReport {
        config: cfg.clone(),
        pso,
        grid,
    };
    let files = write_outputs(&cfg.output, cfg.seed, &report, comparison.as_ref())?;
    Ok(ExperimentOutcome {
        report,
        comparison,
        files,
    })
}

fn write_outputs(
    dir: &Path,
    seed: u64,
    report: &ExperimentReport,
    comparison: Option<&ComparisonReport>,
) -> Result<Vec<PathBuf>> {
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let mut files = Vec::new();
    let mut put = |name: &str, bytes: &[u8]| -> Result<()> {
        let path = dir.join(name);
        write_atomic(&path, bytes)?;
        files.push(path);
        Ok(())
    };
    put("report.json", to_json(report)?.as_bytes())?;
    let logs: Vec<&SearchReport> = report.pso.iter().chain(&report.grid).collect();
    put("evaluations.csv", evaluations_csv(&logs, seed).as_bytes())?;
    if let Some(c) = comparison {
        put("comparison.json", to_json(c)?.as_bytes())?;
    }
    Ok(files)
}

/// Convenience for callers that only want the problem list of a file.
pub fn validate_file(path: &Path, preset: Option<&str>) -> Result<Vec<Problem>> {
    Ok(ExperimentConfig::load(path, preset)?.problems())
}

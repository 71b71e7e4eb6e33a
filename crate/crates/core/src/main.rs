use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use psofl::config::ExperimentConfig;
use psofl::experiment::{run_experiment, Overrides};

#[derive(Parser, Debug)]
#[command(
    name = "psofl",
    version,
    about = "Swarm vs grid hyperparameter search for federated LSTMs"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,

    /// Built-in base configuration: table1, traffic or telemetry.
    #[arg(long, global = true)]
    preset: Option<String>,

    /// Seed for data generation, model initialization, shuffling and the swarm.
    #[arg(long, global = true)]
    seed: Option<u64>,

    /// Output directory for the report files.
    #[arg(long, global = true)]
    out: Option<PathBuf>,

    /// Worker threads; 1 runs everything sequentially.
    #[arg(long, global = true)]
    threads: Option<usize>,

    /// Use the velocity-difference form of the update equations.
    #[arg(long, global = true)]
    pso_literal: bool,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Run an experiment and write its reports.
    Run { config: Option<PathBuf> },
    /// Check a configuration without running it.
    Validate { config: Option<PathBuf> },
}

fn load(config: Option<&Path>, preset: Option<&str>) -> psofl::Result<ExperimentConfig> {
    match (config, preset) {
        (Some(path), preset) => ExperimentConfig::load(path, preset),
        (None, Some(name)) => ExperimentConfig::preset(name),
        (None, None) => Err(psofl::Error::Config(
            "give a config file or --preset <name>".into(),
        )),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if let Some(n) = cli.threads {
        if n == 0 {
            eprintln!("error: --threads must be >= 1");
            return ExitCode::FAILURE;
        }
        if let Err(e) = rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
        {
            eprintln!("error: {e}");
            return ExitCode::FAILURE;
        }
    }
    let overrides = Overrides {
        seed: cli.seed,
        output: cli.out.clone(),
        pso_literal: cli.pso_literal,
    };

    match &cli.command {
        Command::Validate { config } => {
            let mut cfg = match load(config.as_deref(), cli.preset.as_deref()) {
                Ok(c) => c,
                Err(e) => {
                    eprintln!("error: {e}");
                    return ExitCode::FAILURE;
                }
            };
            overrides.apply(&mut cfg);
            let problems = cfg.problems();
            if problems.is_empty() {
                println!("ok");
                ExitCode::SUCCESS
            } else {
                for p in &problems {
                    println!("{p}");
                }
                ExitCode::FAILURE
            }
        }
        Command::Run { config } => {
            let result = load(config.as_deref(), cli.preset.as_deref()).and_then(|mut cfg| {
                overrides.apply(&mut cfg);
                run_experiment(&cfg)
            });
            match result {
                Ok(outcome) => {
                    // the files are written; a closed stdout is not a failure
                    let mut out = std::io::stdout().lock();
                    for line in outcome.summary_lines() {
                        let _ = writeln!(out, "{line}");
                    }
                    if let Some(c) = &outcome.comparison {
                        let _ = writeln!(out, "rounds_ratio {:.4}", c.rounds_ratio);
                    }
                    ExitCode::SUCCESS
                }
                Err(e) => {
                    eprintln!("error: {e}");
                    ExitCode::FAILURE
                }
            }
        }
    }
}

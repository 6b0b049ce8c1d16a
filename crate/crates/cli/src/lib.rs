//! Experiment harness behind the `tnmpf` binary.

pub mod commands;
pub mod config;
pub mod output;

use std::path::PathBuf;

use clap::{Parser, Subcommand};
use serde_json::json;

use config::{ConfigErrors, ExperimentConfig};

#[derive(Debug, Parser)]
#[command(name = "tnmpf", version, about = "Dynamic multiproduct formula experiments on spin chains")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
    /// Experiment config (TOML).
    #[arg(long, global = true, value_name = "PATH")]
    pub config: Option<PathBuf>,
    /// Output directory; overrides `output` in the config.
    #[arg(long, global = true, value_name = "DIR")]
    pub out: Option<PathBuf>,
    /// Worker threads for grid points and operator pairs.
    #[arg(long, global = true, value_name = "N")]
    pub workers: Option<usize>,
    /// Sampling seed; overrides `seed` in the config.
    #[arg(long, global = true, value_name = "S")]
    pub seed: Option<u64>,
}

#[derive(Debug, Clone, Copy, Subcommand)]
pub enum Command {
    /// Exact-Trotter, capped-MPS and MPO-MPF errors along the grid.
    Compare,
    /// MPF test and Trotter test along the grid.
    Tests,
    /// Single-k and MPF-combined observable traces.
    Observables,
    /// Tests and traces with a compiled initial window.
    Aqc,
    /// Bond-dimension growth sweeps and fits.
    Scaling,
}

impl Command {
    pub fn name(self) -> &'static str {
        match self {
            Command::Compare => "compare",
            Command::Tests => "tests",
            Command::Observables => "observables",
            Command::Aqc => "aqc",
            Command::Scaling => "scaling",
        }
    }
}

#[derive(Debug)]
pub enum CliError {
    Usage(String),
    Config(ConfigErrors),
    Runtime(anyhow::Error),
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Runtime(_) => 1,
            CliError::Usage(_) | CliError::Config(_) => 2,
        }
    }

    /// JSON error report for stderr.
    pub fn report(&self) -> serde_json::Value {
        let (kind, messages) = match self {
            CliError::Usage(m) => ("usage", vec![m.clone()]),
            CliError::Config(ConfigErrors(e)) => ("config", e.clone()),
            CliError::Runtime(e) => ("runtime", e.chain().map(|c| c.to_string()).collect()),
        };
        json!({ "error": { "kind": kind, "messages": messages } })
    }
}

/// Runs one subcommand and returns the files written.
pub fn run(cli: &Cli) -> Result<Vec<PathBuf>, CliError> {
    let path = cli.config.as_ref().ok_or_else(|| CliError::Usage("--config PATH is required".into()))?;
    let mut cfg = ExperimentConfig::load(path).map_err(CliError::Config)?;
    if let Some(seed) = cli.seed {
        cfg.seed = seed;
    }
    if let Some(out) = &cli.out {
        cfg.output = out.clone();
    }
    let out = cfg.output.clone();
    let dispatch = || match cli.command {
        Command::Compare => commands::run_compare(&cfg, &out),
        Command::Tests => commands::run_tests(&cfg, &out),
        Command::Observables => commands::run_observables(&cfg, &out),
        Command::Aqc => commands::run_aqc(&cfg, &out),
        Command::Scaling => commands::run_scaling(&cfg, &out),
    };
    match cli.workers {
        Some(0) => Err(CliError::Usage("--workers must be >= 1".into())),
        Some(n) => rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build()
            .map_err(|e| CliError::Runtime(e.into()))?
            .install(dispatch),
        None => dispatch(),
    }
}

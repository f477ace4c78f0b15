//! Experiment driver behind the `pos-chainlab` binary.
//!
//! Every experiment takes a flat JSON config, a run count and a base seed,
//! and returns CSV files plus named pass/fail checks. Per-run seeds are
//! `splitmix64(seed ^ run)`, so `runs` only changes how many runs exist,
//! never what an individual run does.

pub mod config;
pub mod experiments;
pub mod manifest;

use std::fmt;
use std::path::Path;
use std::str::FromStr;

use serde::Serialize;
use thiserror::Error;

pub use config::ExperimentConfig;

#[derive(Debug, Error)]
pub enum ExperimentError {
    #[error("config error: {0}")]
    Config(String),
    #[error(transparent)]
    Sim(#[from] chainlab::simnet::SimError),
    #[error(transparent)]
    Numerics(#[from] chainlab::numerics::NumericsError),
    #[error(transparent)]
    Analyzer(#[from] chainlab::analyzer::AnalyzerError),
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
}

impl ExperimentError {
    pub fn is_config(&self) -> bool {
        matches!(self, ExperimentError::Config(_))
            || matches!(self, ExperimentError::Sim(chainlab::simnet::SimError::Config(_)))
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, clap::ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum Experiment {
    PhiTable,
    NasGrowth,
    BalanceAttack,
    ThresholdSweep,
    ConvergenceFreq,
    TailBound,
    RgTable,
    D1Rates,
    CoinGrindDemo,
}

impl Experiment {
    pub const ALL: [Experiment; 9] = [
        Experiment::PhiTable,
        Experiment::NasGrowth,
        Experiment::BalanceAttack,
        Experiment::ThresholdSweep,
        Experiment::ConvergenceFreq,
        Experiment::TailBound,
        Experiment::RgTable,
        Experiment::D1Rates,
        Experiment::CoinGrindDemo,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Experiment::PhiTable => "phi-table",
            Experiment::NasGrowth => "nas-growth",
            Experiment::BalanceAttack => "balance-attack",
            Experiment::ThresholdSweep => "threshold-sweep",
            Experiment::ConvergenceFreq => "convergence-freq",
            Experiment::TailBound => "tail-bound",
            Experiment::RgTable => "rg-table",
            Experiment::D1Rates => "d1-rates",
            Experiment::CoinGrindDemo => "coin-grind-demo",
        }
    }

    /// Runs used when `--runs` is not given.
    pub fn default_runs(self) -> u64 {
        match self {
            Experiment::PhiTable | Experiment::RgTable | Experiment::D1Rates => 1,
            Experiment::NasGrowth => 10,
            Experiment::BalanceAttack | Experiment::ThresholdSweep => 200,
            Experiment::ConvergenceFreq => 20,
            Experiment::TailBound => 10_000,
            Experiment::CoinGrindDemo => 100,
        }
    }
}

impl fmt::Display for Experiment {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Experiment {
    type Err = ExperimentError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Experiment::ALL
            .into_iter()
            .find(|e| e.name() == s)
            .ok_or_else(|| ExperimentError::Config(format!("unknown experiment {s:?}")))
    }
}

/// One CSV produced by an experiment.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct OutputFile {
    pub name: String,
    pub contents: String,
}

/// A named acceptance threshold and whether the run met it.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Check {
    pub name: String,
    pub passed: bool,
    pub detail: String,
}

impl Check {
    pub fn new(name: impl Into<String>, passed: bool, detail: impl Into<String>) -> Self {
        Self { name: name.into(), passed, detail: detail.into() }
    }
}

#[derive(Clone, Debug, Default)]
pub struct Outcome {
    pub files: Vec<OutputFile>,
    pub checks: Vec<Check>,
}

impl Outcome {
    pub fn file(&mut self, name: &str, contents: String) {
        self.files.push(OutputFile { name: name.into(), contents });
    }

    pub fn check(&mut self, name: impl Into<String>, passed: bool, detail: impl Into<String>) {
        self.checks.push(Check::new(name, passed, detail));
    }

    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }

    pub fn get(&self, name: &str) -> Option<&OutputFile> {
        self.files.iter().find(|f| f.name == name)
    }
}

/// Runs `experiment` with `config` (JSON text, or the defaults when `None`).
pub fn run_experiment(
    experiment: Experiment,
    config: Option<&str>,
    runs: Option<u64>,
    seed: u64,
) -> Result<(ExperimentConfig, Outcome), ExperimentError> {
    let cfg = ExperimentConfig::parse(experiment, config)?;
    let runs = runs.unwrap_or_else(|| experiment.default_runs());
    if runs == 0 {
        return Err(ExperimentError::Config("runs must be at least 1".into()));
    }
    let outcome = experiments::run(&cfg, runs, seed)?;
    Ok((cfg, outcome))
}

/// Writes the outcome's CSVs and `manifest.json` into `out_dir`.
pub fn write_outputs(
    out_dir: &Path,
    experiment: Experiment,
    cfg: &ExperimentConfig,
    runs: u64,
    seed: u64,
    outcome: &Outcome,
) -> Result<(), ExperimentError> {
    std::fs::create_dir_all(out_dir)?;
    for f in &outcome.files {
        std::fs::write(out_dir.join(&f.name), &f.contents)?;
    }
    let m = manifest::Manifest::new(experiment, cfg, runs, seed, outcome);
    let mut text = serde_json::to_string_pretty(&m).expect("manifest serializes");
    text.push('\n');
    std::fs::write(out_dir.join("manifest.json"), text)?;
    Ok(())
}

use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::Context;
use clap::Parser;

use chainlab_cli::{run_experiment, write_outputs, Experiment, ExperimentError};

/// Longest-chain proof-of-stake simulation lab.
#[derive(Debug, Parser)]
#[command(name = "pos-chainlab", version)]
struct Args {
    experiment: Experiment,
    /// Flat JSON config; defaults are used when omitted.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long, default_value = "out")]
    out: PathBuf,
    /// Number of Monte Carlo runs (experiment-specific default).
    #[arg(long)]
    runs: Option<u64>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Exit with status 3 when any acceptance check fails.
    #[arg(long)]
    assert: bool,
}

fn main() -> ExitCode {
    let args = Args::parse();
    match real_main(&args) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(3),
        Err(e) => {
            eprintln!("error: {e:#}");
            let config = e.downcast_ref::<ExperimentError>().is_some_and(ExperimentError::is_config);
            ExitCode::from(if config { 2 } else { 1 })
        }
    }
}

/// Returns whether the run is acceptable (always true without `--assert`).
fn real_main(args: &Args) -> anyhow::Result<bool> {
    let text = match &args.config {
        Some(p) => Some(
            std::fs::read_to_string(p)
                .map_err(|e| ExperimentError::Config(format!("reading {}: {e}", p.display())))?,
        ),
        None => None,
    };
    let (cfg, outcome) = run_experiment(args.experiment, text.as_deref(), args.runs, args.seed)?;
    let runs = args.runs.unwrap_or_else(|| args.experiment.default_runs());
    write_outputs(&args.out, args.experiment, &cfg, runs, args.seed, &outcome)
        .with_context(|| format!("writing outputs to {}", args.out.display()))?;
    for c in &outcome.checks {
        println!("{} {}: {}", if c.passed { "PASS" } else { "FAIL" }, c.name, c.detail);
    }
    println!("wrote {} files to {}", outcome.files.len() + 1, args.out.display());
    Ok(!args.assert || outcome.passed())
}

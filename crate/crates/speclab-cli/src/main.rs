//! `speclab <experiment> --config <path> [--seed N] [--out <dir>]`

use std::path::PathBuf;
use std::process::ExitCode;

use clap::builder::PossibleValuesParser;
use clap::Parser;

use speclab::experiments::{self, EXPERIMENTS};

#[derive(Debug, Parser)]
#[command(name = "speclab", version)]
#[command(about = "Run a seeded speclab experiment and write its JSON report")]
struct Cli {
    /// Experiment to run.
    #[arg(value_parser = PossibleValuesParser::new(EXPERIMENTS))]
    experiment: String,

    /// JSON config for the experiment.
    #[arg(long)]
    config: PathBuf,

    /// Overrides the config's seed.
    #[arg(long)]
    seed: Option<u64>,

    /// Directory for the report and CSV outputs.
    #[arg(long, default_value = "reports")]
    out: PathBuf,
}

const USAGE_ERROR: u8 = 2;

fn main() -> ExitCode {
    let cli = Cli::parse();
    let text = match std::fs::read_to_string(&cli.config) {
        Ok(t) => t,
        Err(e) => {
            eprintln!("error: cannot read {}: {e}", cli.config.display());
            return ExitCode::from(USAGE_ERROR);
        }
    };
    let config: serde_json::Value = match serde_json::from_str(&text) {
        Ok(v) => v,
        Err(e) => {
            eprintln!("error: {} is not valid JSON: {e}", cli.config.display());
            return ExitCode::from(USAGE_ERROR);
        }
    };
    let outcome = match experiments::run(&cli.experiment, &config, cli.seed) {
        Ok(o) => o,
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::from(USAGE_ERROR);
        }
    };
    let path = match experiments::write_outcome(&cli.out, &outcome) {
        Ok(p) => p,
        Err(e) => {
            eprintln!("error: cannot write report: {e}");
            return ExitCode::from(USAGE_ERROR);
        }
    };
    for c in &outcome.report.checks {
        println!("{} {} (value {:e}, tolerance {:e})", if c.pass { "PASS" } else { "FAIL" }, c.name, c.value, c.tolerance);
    }
    println!("report: {}", path.display());
    if outcome.report.all_pass() {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}

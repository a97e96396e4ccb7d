//! Command-line front end for the experiment drivers.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use serde_json::Value;

use shadowkit::experiments::{
    apply_override, run_classify, run_generate, run_invariant, run_pca, run_predict, run_shadow_bench, ExperimentConfig,
};
use shadowkit::{Error, Result};

#[derive(Parser)]
#[command(
    name = "shadowkit",
    version,
    about = "Learn ground-state properties and phases from classical shadows"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Sample a dataset: Hamiltonian specs, shadow files and exact values.
    Generate(Common),
    /// Train a property predictor and report held-out errors.
    Predict(Common),
    /// Train a shadow-kernel SVM phase classifier.
    Classify(Common),
    /// Kernel PCA plus unsupervised random-projection split.
    Pca(Common),
    /// Partial-reflection invariant of each ground state.
    Invariant(Common),
    /// Shadow size against reduced-density-matrix error.
    ShadowBench(Common),
}

#[derive(Args)]
struct Common {
    /// JSON experiment config.
    #[arg(long)]
    config: PathBuf,
    /// Root seed (overrides the config).
    #[arg(long)]
    seed: Option<u64>,
    /// Worker threads; results do not depend on this.
    #[arg(long)]
    threads: Option<usize>,
    /// Output directory.
    #[arg(long, default_value = "out")]
    out: PathBuf,
    /// Override a config key, e.g. `--set dataset.shadow_size=500`.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    overrides: Vec<String>,
}

fn load(common: &Common) -> Result<ExperimentConfig> {
    let text = std::fs::read_to_string(&common.config).map_err(|e| Error::Io {
        path: common.config.clone(),
        source: e,
    })?;
    let mut value: Value = serde_json::from_str(&text)?;
    for o in &common.overrides {
        let (key, val) = o
            .split_once('=')
            .ok_or_else(|| Error::Config(format!("override `{o}` is not KEY=VALUE")))?;
        apply_override(&mut value, key, val)?;
    }
    if let Some(seed) = common.seed {
        apply_override(&mut value, "seed", &seed.to_string())?;
    }
    ExperimentConfig::from_value(value)
}

fn run(cli: Cli) -> Result<Value> {
    let (common, name) = match &cli.command {
        Command::Generate(c) => (c, "generate"),
        Command::Predict(c) => (c, "predict"),
        Command::Classify(c) => (c, "classify"),
        Command::Pca(c) => (c, "pca"),
        Command::Invariant(c) => (c, "invariant"),
        Command::ShadowBench(c) => (c, "shadow-bench"),
    };
    let cfg = load(common)?;
    let mut pool = rayon::ThreadPoolBuilder::new();
    if let Some(k) = common.threads {
        pool = pool.num_threads(k);
    }
    let pool = pool.build().map_err(|e| Error::Config(e.to_string()))?;
    let out = &common.out;
    pool.install(|| {
        Ok(match name {
            "generate" => serde_json::to_value(run_generate(&cfg, out)?)?,
            "predict" => serde_json::to_value(run_predict(&cfg, out)?)?,
            "classify" => serde_json::to_value(run_classify(&cfg, out)?)?,
            "pca" => serde_json::to_value(run_pca(&cfg, out)?)?,
            "invariant" => serde_json::to_value(run_invariant(&cfg, out)?)?,
            _ => serde_json::to_value(run_shadow_bench(&cfg, out)?)?,
        })
    })
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(summary) => {
            println!("{}", serde_json::to_string_pretty(&summary).unwrap_or_default());
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}

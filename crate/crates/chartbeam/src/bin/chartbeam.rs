// SPDX-License-Identifier: Apache-2.0

//! `chartbeam` experiment CLI.
//!
//! Exit codes: 0 success, 1 invalid configuration or arguments, 2 runtime
//! failure.

use std::path::PathBuf;
use std::process::ExitCode;

use chartbeam::config::{ExperimentConfig, NetBackend, Task};
use chartbeam::pipeline;
use chartbeam::PipelineError;
use clap::{Parser, Subcommand};

#[derive(Parser)]
#[command(name = "chartbeam", version, about = "Chart-based beam prediction experiments")]
struct Cli {
    /// Experiment configuration (TOML); the built-in default when omitted.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Override the master seed.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Override the output directory.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Print nothing on success.
    #[arg(long, global = true)]
    quiet: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Synthesize the dataset.
    Generate,
    /// Chart the calibration uplink channels at BS1.
    Chart,
    /// Train networks; every backend, BS and task unless narrowed.
    Train {
        /// rff or mlp
        #[arg(long)]
        backend: Option<String>,
        /// 1-based BS index
        #[arg(long)]
        bs: Option<usize>,
        /// classification or regression
        #[arg(long)]
        task: Option<String>,
    },
    /// Evaluate trained networks and write the report bundle.
    Evaluate,
    /// Run generate, chart, train and evaluate in order.
    Report,
    /// Print the effective configuration.
    Config,
}

fn load_config(cli: &Cli) -> Result<ExperimentConfig, PipelineError> {
    let mut cfg = match &cli.config {
        Some(path) => ExperimentConfig::load(path)?,
        None => ExperimentConfig::default(),
    };
    if let Some(seed) = cli.seed {
        cfg.seed = seed;
    }
    if let Some(out) = &cli.out {
        cfg.output_dir = out.clone();
    }
    Ok(cfg)
}

fn run(cli: &Cli) -> Result<(), PipelineError> {
    let cfg = load_config(cli)?;
    let say = |msg: String| {
        if !cli.quiet {
            println!("{msg}");
        }
    };
    match &cli.command {
        Command::Generate => say(format!("generate: {}", pipeline::run_generate(&cfg)?)),
        Command::Chart => {
            let (summary, diag) = pipeline::run_chart(&cfg)?;
            say(format!("chart: {summary}, repaired edges {}", diag.repaired_edges));
        }
        Command::Train { backend, bs, task } => {
            let backend = backend.as_deref().map(NetBackend::parse).transpose()?;
            let task = task.as_deref().map(Task::parse).transpose()?;
            for t in pipeline::run_train(&cfg, backend, *bs, task)? {
                say(format!("train: {t}"));
            }
        }
        Command::Evaluate => {
            let (report, files) = pipeline::run_evaluate(&cfg)?;
            say(format!("{report}wrote {} report files", files.len()));
        }
        Command::Report => {
            let (report, files) = pipeline::run_all(&cfg, say)?;
            say(format!("{report}wrote {} report files", files.len()));
        }
        Command::Config => say(cfg.to_toml()),
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(1) } else { ExitCode::SUCCESS };
        }
    };
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(if e.is_validation() { 1 } else { 2 })
        }
    }
}

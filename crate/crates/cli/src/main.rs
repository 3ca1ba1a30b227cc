use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{bail, Context};
use clap::{Parser, Subcommand};
use ltlab::experiment::{emit_report, run_experiment, ExperimentConfig, ExperimentId, ALL_FORMATS};

/// Local times of killed and reflected lattice random walks.
#[derive(Parser)]
#[command(name = "ltlab", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// List the experiment ids.
    List,
    /// Run one experiment and write its reports.
    ///
    /// Exits with 0 when every check passes, 1 when some check fails and 2 on
    /// errors.
    Run {
        /// Experiment id, see `ltlab list`.
        id: String,
        /// INI config; experiment defaults are used when omitted.
        #[arg(long)]
        config: Option<PathBuf>,
        /// Master seed (overrides the config).
        #[arg(long)]
        seed: Option<u64>,
        /// Worker threads (overrides the config and LTLAB_WORKERS).
        #[arg(long)]
        workers: Option<usize>,
        /// Output directory (overrides the config; default results/<id>).
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

fn run(
    id: &str,
    config: Option<PathBuf>,
    seed: Option<u64>,
    workers: Option<usize>,
    out: Option<PathBuf>,
) -> anyhow::Result<bool> {
    let id: ExperimentId = id.parse()?;
    let mut cfg = match &config {
        Some(path) => ExperimentConfig::from_path(path)?,
        None => ExperimentConfig::new(id),
    };
    if cfg.id != id {
        bail!("config {} is for '{}', not '{id}'", config.unwrap().display(), cfg.id);
    }
    if let Some(s) = seed {
        cfg.seed = s;
    }
    if let Some(w) = workers {
        if w == 0 {
            bail!("--workers must be at least 1");
        }
        cfg.workers = Some(w);
    }
    let dir = out
        .or_else(|| cfg.out_dir.clone())
        .unwrap_or_else(|| PathBuf::from("results").join(id.as_str()));
    let mut record = run_experiment(&cfg).with_context(|| format!("experiment {id} failed"))?;
    emit_report(&mut record, &dir, &ALL_FORMATS)?;
    print!("{}", record.summary());
    println!("reports written to {}", dir.display());
    Ok(record.passed())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match cli.command {
        Command::List => {
            for id in ExperimentId::ALL {
                println!("{:<24} {}", id.as_str(), id.description());
            }
            ExitCode::SUCCESS
        }
        Command::Run {
            id,
            config,
            seed,
            workers,
            out,
        } => match run(&id, config, seed, workers, out) {
            Ok(true) => ExitCode::SUCCESS,
            Ok(false) => ExitCode::from(1),
            Err(e) => {
                eprintln!("error: {e:#}");
                ExitCode::from(2)
            }
        },
    }
}

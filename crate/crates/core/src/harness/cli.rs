//! Command-line front end.

use std::ffi::OsString;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};
use log::{error, info};

use super::config::{EstimatorKind, RunConfig};
use super::eval::run_eval;
use super::report::run_metric_report;
use super::train::{run_train, seed_dir, TrainOutcome};
use crate::error::{Error, Result};

#[derive(Debug, Parser)]
#[command(name = "metricmm", version, about = "Metric multimodal state estimation with SAC")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Args)]
struct Common {
    /// Configuration file (sectioned key = value).
    #[arg(long)]
    config: Option<PathBuf>,
    /// Replaces the seed list with a single seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Output directory.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Single worker, sequential evaluation; output is a pure function of config and seed.
    #[arg(long)]
    deterministic: bool,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Train one agent per seed.
    Train(Common),
    /// Evaluate a checkpoint under the configured corruptions.
    Eval {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        checkpoint: Option<PathBuf>,
    },
    /// Compare latent distances with shortest-path distances on a gridworld checkpoint.
    MetricReport {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        checkpoint: Option<PathBuf>,
    },
    /// Train and evaluate metricmm, metricmm_no_inv and metricmm_no_metric.
    Ablate(Common),
}

fn load(common: &Common) -> Result<RunConfig> {
    let mut cfg = match &common.config {
        Some(path) => RunConfig::load(path)?,
        None => RunConfig::default(),
    };
    if let Some(seed) = common.seed {
        cfg.train.seeds = vec![seed];
        cfg.eval.seeds = vec![seed];
    }
    if let Some(out) = &common.out {
        cfg.train.out_dir = out.clone();
        cfg.eval.out_dir = out.clone();
    }
    if common.deterministic {
        cfg.train.deterministic = true;
        cfg.eval.deterministic = true;
    }
    Ok(cfg)
}

fn ablate(cfg: &RunConfig) -> Result<Vec<(EstimatorKind, Vec<TrainOutcome>)>> {
    let mut all = Vec::new();
    for kind in EstimatorKind::ABLATIONS {
        let mut train = cfg.train.clone();
        train.estimator = kind;
        train.out_dir = cfg.train.out_dir.join(kind.name());
        info!("ablation variant {}", kind.name());
        let outcomes = run_train(&train)?;
        for o in &outcomes {
            let mut spec = cfg.eval.clone();
            spec.checkpoint = Some(o.best_checkpoint());
            spec.out_dir = seed_dir(&train.out_dir, o.seed);
            run_eval(&spec)?;
        }
        all.push((kind, outcomes));
    }
    Ok(all)
}

fn execute(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Train(common) => {
            run_train(&load(&common)?.train)?;
        }
        Command::Eval { common, checkpoint } => {
            let mut cfg = load(&common)?;
            if checkpoint.is_some() {
                cfg.eval.checkpoint = checkpoint;
            }
            run_eval(&cfg.eval)?;
        }
        Command::MetricReport { common, checkpoint } => {
            let cfg = load(&common)?;
            let path = checkpoint
                .or(cfg.eval.checkpoint)
                .ok_or_else(|| Error::Usage("metric-report needs --checkpoint".into()))?;
            let seed = cfg.train.seeds[0];
            let r = run_metric_report(&path, &cfg.eval.out_dir, seed)?;
            info!("spearman {:.3}, adjacent mean |dz-1| {:.3}", r.spearman, r.adjacent_mean_abs_dev);
        }
        Command::Ablate(common) => {
            ablate(&load(&common)?)?;
        }
    }
    Ok(())
}

/// Parses `args` (including the program name) and runs the command.
/// Returns 0 on success, 2 on usage or configuration errors, 1 otherwise.
pub fn run_cli<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    match execute(cli) {
        Ok(()) => 0,
        Err(e) => {
            error!("{e}");
            eprintln!("error: {e}");
            match e {
                Error::Usage(_) | Error::Config(_) => 2,
                _ => 1,
            }
        }
    }
}

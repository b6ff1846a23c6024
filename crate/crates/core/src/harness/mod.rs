//! Configuration, training and evaluation pipelines, reports and the CLI.

pub mod cli;
pub mod config;
pub mod eval;
pub mod ini;
pub mod model;
pub mod report;
pub mod rollout;
pub mod train;

pub use cli::run_cli;
pub use config::{parse_corruption, EnvKind, EstimatorKind, EvalSpec, GridConfig, RunConfig, TrainConfig};
pub use eval::{evaluate_conditions, load_results, read_results_csv, run_eval, write_results_csv, ResultRow, RESULTS_FILE, RESULTS_HEADER};
pub use model::{FusionModel, FusionOptimizer};
pub use report::{
    load_report, metric_report_for, metric_report_from_checkpoint, pearson, read_report_csv, run_metric_report,
    spearman, write_report_csv, MetricReport, REPORT_FILE, REPORT_HEADER,
};
pub use rollout::{estimate, evaluate, mean_std, pendulum_bank, run_episode, stream_rng};
pub use train::{
    grid_batch, load_grid_model, load_policy, load_world, policy_from_checkpoint, random_walk_dataset, run_train,
    seed_dir, train_seed, Policy, TrainOutcome, BEST_CHECKPOINT_FILE, CHECKPOINT_FILE, CURVE_FILE,
};

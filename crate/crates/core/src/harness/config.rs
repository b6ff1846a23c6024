//! Training and evaluation configuration.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use super::ini::{parse_ini, Entry};
use crate::corrupt::{CorruptionKind, CorruptionParams, CorruptionSpec};
use crate::envs::PendulumParams;
use crate::error::{Error, Result};
use crate::metricmm::{FusionConfig, LossWeights, RepresentationConfig};
use crate::sac::SacConfig;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EnvKind {
    Pendulum,
    Gridworld,
}

impl EnvKind {
    pub fn name(self) -> &'static str {
        match self {
            EnvKind::Pendulum => "pendulum",
            EnvKind::Gridworld => "gridworld",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "pendulum" => Ok(EnvKind::Pendulum),
            "gridworld" => Ok(EnvKind::Gridworld),
            _ => Err(Error::Config(format!("unknown environment `{s}`"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum EstimatorKind {
    MetricMm,
    LinearComb,
    Concat,
    MetricMmNoInv,
    MetricMmNoMetric,
}

impl EstimatorKind {
    pub const ALL: [EstimatorKind; 5] = [
        EstimatorKind::MetricMm,
        EstimatorKind::LinearComb,
        EstimatorKind::Concat,
        EstimatorKind::MetricMmNoInv,
        EstimatorKind::MetricMmNoMetric,
    ];

    /// The full model and its two ablations.
    pub const ABLATIONS: [EstimatorKind; 3] = [
        EstimatorKind::MetricMm,
        EstimatorKind::MetricMmNoInv,
        EstimatorKind::MetricMmNoMetric,
    ];

    pub fn name(self) -> &'static str {
        match self {
            EstimatorKind::MetricMm => "metricmm",
            EstimatorKind::LinearComb => "linearcomb",
            EstimatorKind::Concat => "concat",
            EstimatorKind::MetricMmNoInv => "metricmm_no_inv",
            EstimatorKind::MetricMmNoMetric => "metricmm_no_metric",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        Self::ALL
            .into_iter()
            .find(|k| k.name() == s)
            .ok_or_else(|| Error::Config(format!("unknown estimator `{s}`")))
    }

    pub fn is_metric(self) -> bool {
        !matches!(self, EstimatorKind::LinearComb | EstimatorKind::Concat)
    }

    /// Applies the ablation to user-supplied weights: `no_inv` zeroes λ3,
    /// `no_metric` zeroes λ1 and λ2.
    pub fn loss_weights(self, base: LossWeights) -> LossWeights {
        match self {
            EstimatorKind::MetricMmNoInv => LossWeights {
                invariance: 0.0,
                ..base
            },
            EstimatorKind::MetricMmNoMetric => LossWeights {
                positive: 0.0,
                negative: 0.0,
                ..base
            },
            _ => base,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GridConfig {
    /// Map file; the built-in 10×10 map with a wall when absent.
    pub map: Option<PathBuf>,
    pub dataset_size: usize,
    pub walk_length: usize,
    pub grad_steps: usize,
    pub batch_size: usize,
}

impl Default for GridConfig {
    fn default() -> Self {
        GridConfig {
            map: None,
            dataset_size: 50_000,
            walk_length: 100,
            grad_steps: 5_000,
            batch_size: 256,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainConfig {
    pub env: EnvKind,
    pub estimator: EstimatorKind,
    pub representation: RepresentationConfig,
    pub repr_lr: f64,
    /// Adam rate of the critic-trained encoders of the fusion baselines.
    pub encoder_lr: f64,
    /// Polyak rate of the target encoders used by the fusion baselines.
    pub encoder_tau: f64,
    pub sac: SacConfig,
    pub total_steps: usize,
    pub eval_every: usize,
    pub eval_episodes: usize,
    pub warmup_steps: usize,
    pub seeds: Vec<u64>,
    pub out_dir: PathBuf,
    pub deterministic: bool,
    pub workers: usize,
    /// Route critic gradients into the metric encoders as well.
    pub joint_gradients: bool,
    pub frame_stack: usize,
    pub episode_len: usize,
    /// Stop a pendulum run at the first evaluation whose mean reaches this.
    pub stop_return: Option<f64>,
    pub pendulum: PendulumParams,
    pub grid: GridConfig,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            env: EnvKind::Pendulum,
            estimator: EstimatorKind::MetricMm,
            representation: RepresentationConfig::default(),
            repr_lr: 1e-3,
            encoder_lr: 3e-4,
            encoder_tau: 0.05,
            sac: SacConfig::default(),
            total_steps: 100_000,
            eval_every: 5_000,
            eval_episodes: 10,
            warmup_steps: 1_000,
            seeds: vec![0],
            out_dir: PathBuf::from("runs"),
            deterministic: false,
            workers: 1,
            joint_gradients: false,
            frame_stack: 3,
            episode_len: 200,
            stop_return: None,
            pendulum: PendulumParams::default(),
            grid: GridConfig::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EvalSpec {
    pub checkpoint: Option<PathBuf>,
    pub corruptions: Vec<CorruptionSpec>,
    pub episodes: usize,
    pub seeds: Vec<u64>,
    /// Act with `a_max·tanh(μ)` instead of sampling.
    pub deterministic_actions: bool,
    pub out_dir: PathBuf,
    pub deterministic: bool,
}

impl Default for EvalSpec {
    fn default() -> Self {
        EvalSpec {
            checkpoint: None,
            corruptions: Vec::new(),
            episodes: 50,
            seeds: vec![0],
            deterministic_actions: true,
            out_dir: PathBuf::from("runs"),
            deterministic: false,
        }
    }
}

impl EvalSpec {
    pub fn validate(&self) -> Result<()> {
        if self.episodes == 0 {
            return Err(Error::Config("eval.episodes: must be ≥ 1".into()));
        }
        if self.seeds.is_empty() {
            return Err(Error::Config("eval.seeds: list is empty".into()));
        }
        for c in &self.corruptions {
            c.validate()?;
        }
        Ok(())
    }
}

/// Both halves of a configuration file.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct RunConfig {
    pub train: TrainConfig,
    pub eval: EvalSpec,
}

fn parse_value<T: FromStr>(e: &Entry) -> Result<T> {
    e.value.parse().map_err(|_| {
        Error::Config(format!(
            "{}.{} (line {}): cannot parse {:?}",
            e.section, e.key, e.line, e.value
        ))
    })
}

fn parse_list<T: FromStr>(e: &Entry) -> Result<Vec<T>> {
    if e.value.is_empty() {
        return Ok(Vec::new());
    }
    e.value
        .split(',')
        .map(|s| {
            s.trim().parse().map_err(|_| {
                Error::Config(format!(
                    "{}.{} (line {}): cannot parse list entry {s:?}",
                    e.section, e.key, e.line
                ))
            })
        })
        .collect()
}

fn parse_bool(e: &Entry) -> Result<bool> {
    match e.value.as_str() {
        "true" | "yes" | "1" => Ok(true),
        "false" | "no" | "0" => Ok(false),
        _ => Err(Error::Config(format!(
            "{}.{} (line {}): expected true or false, got {:?}",
            e.section, e.key, e.line, e.value
        ))),
    }
}

/// `kind:p:K:targets` with targets joined by `+`, e.g. `failure:0.9:1:1`.
pub fn parse_corruption(text: &str) -> Result<CorruptionSpec> {
    let parts: Vec<&str> = text.split(':').map(str::trim).collect();
    if parts.len() != 4 {
        return Err(Error::Config(format!(
            "corruption {text:?}: expected kind:p:K:targets"
        )));
    }
    let kind = CorruptionKind::parse(parts[0])?;
    let p: f64 = parts[1]
        .parse()
        .map_err(|_| Error::Config(format!("corruption {text:?}: bad probability")))?;
    let k: usize = parts[2]
        .parse()
        .map_err(|_| Error::Config(format!("corruption {text:?}: bad persistence")))?;
    let targets = parts[3]
        .split('+')
        .map(|t| {
            t.trim()
                .parse()
                .map_err(|_| Error::Config(format!("corruption {text:?}: bad target {t:?}")))
        })
        .collect::<Result<Vec<usize>>>()?;
    let spec = CorruptionSpec::new(kind, p, k, targets);
    spec.validate()?;
    Ok(spec)
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| {
            Error::Usage(format!("cannot read config {}: {e}", path.display()))
        })?;
        Self::parse(&text)
    }

    pub fn parse(text: &str) -> Result<Self> {
        let mut cfg = RunConfig::default();
        let t = &mut cfg.train;
        let ev = &mut cfg.eval;
        let mut weights = LossWeights::default();
        let mut corruption_params = CorruptionParams::default();
        let mut corruption_lines = Vec::new();
        let mut seen: BTreeMap<(String, String), usize> = BTreeMap::new();
        for e in parse_ini(text)? {
            let id = (e.section.clone(), e.key.clone());
            if e.key != "corruption" {
                if let Some(prev) = seen.insert(id, e.line) {
                    return Err(Error::Config(format!(
                        "{}.{} set twice (lines {prev} and {})",
                        e.section, e.key, e.line
                    )));
                }
            }
            match (e.section.as_str(), e.key.as_str()) {
                ("run", "env") => t.env = EnvKind::parse(&e.value)?,
                ("run", "estimator") => t.estimator = EstimatorKind::parse(&e.value)?,
                ("run", "total_steps") => t.total_steps = parse_value(&e)?,
                ("run", "eval_every") => t.eval_every = parse_value(&e)?,
                ("run", "eval_episodes") => t.eval_episodes = parse_value(&e)?,
                ("run", "warmup_steps") => t.warmup_steps = parse_value(&e)?,
                ("run", "seeds") => t.seeds = parse_list(&e)?,
                ("run", "out") => t.out_dir = PathBuf::from(&e.value),
                ("run", "deterministic") => t.deterministic = parse_bool(&e)?,
                ("run", "workers") => t.workers = parse_value(&e)?,
                ("run", "joint_gradients") => t.joint_gradients = parse_bool(&e)?,
                ("run", "frame_stack") => t.frame_stack = parse_value(&e)?,
                ("run", "episode_len") => t.episode_len = parse_value(&e)?,
                ("run", "stop_return") => t.stop_return = Some(parse_value(&e)?),
                ("representation", "latent_dim") => t.representation.latent_dim = parse_value(&e)?,
                ("representation", "encoder_hidden") => {
                    t.representation.encoder_hidden = parse_list(&e)?
                }
                ("representation", "transition_hidden") => {
                    t.representation.transition_hidden = parse_list(&e)?
                }
                ("representation", "lambda1") => weights.positive = parse_value(&e)?,
                ("representation", "lambda2") => weights.negative = parse_value(&e)?,
                ("representation", "lambda3") => weights.invariance = parse_value(&e)?,
                ("representation", "delta") => {
                    t.representation.fusion = FusionConfig {
                        delta: parse_value(&e)?,
                    }
                }
                ("representation", "lr") => t.repr_lr = parse_value(&e)?,
                ("sac", "gamma") => t.sac.gamma = parse_value(&e)?,
                ("sac", "tau") => t.sac.tau = parse_value(&e)?,
                ("sac", "encoder_lr") => t.encoder_lr = parse_value(&e)?,
                ("sac", "encoder_tau") => t.encoder_tau = parse_value(&e)?,
                ("sac", "actor_lr") => t.sac.actor_lr = parse_value(&e)?,
                ("sac", "critic_lr") => t.sac.critic_lr = parse_value(&e)?,
                ("sac", "alpha_lr") => t.sac.alpha_lr = parse_value(&e)?,
                ("sac", "capacity") => t.sac.capacity = parse_value(&e)?,
                ("sac", "batch_size") => t.sac.batch_size = parse_value(&e)?,
                ("sac", "initial_alpha") => t.sac.initial_alpha = parse_value(&e)?,
                ("sac", "num_critics") => t.sac.num_critics = parse_value(&e)?,
                ("sac", "hidden") => t.sac.hidden = parse_list(&e)?,
                ("sac", "target_entropy") => t.sac.target_entropy = Some(parse_value(&e)?),
                ("pendulum", "sigma") => t.pendulum.sigma = parse_value(&e)?,
                ("pendulum", "dt") => t.pendulum.dt = parse_value(&e)?,
                ("pendulum", "max_torque") => t.pendulum.max_torque = parse_value(&e)?,
                ("gridworld", "map") => t.grid.map = Some(PathBuf::from(&e.value)),
                ("gridworld", "dataset_size") => t.grid.dataset_size = parse_value(&e)?,
                ("gridworld", "walk_length") => t.grid.walk_length = parse_value(&e)?,
                ("gridworld", "grad_steps") => t.grid.grad_steps = parse_value(&e)?,
                ("gridworld", "batch_size") => t.grid.batch_size = parse_value(&e)?,
                ("eval", "checkpoint") => ev.checkpoint = Some(PathBuf::from(&e.value)),
                ("eval", "episodes") => ev.episodes = parse_value(&e)?,
                ("eval", "seeds") => ev.seeds = parse_list(&e)?,
                ("eval", "deterministic_actions") => ev.deterministic_actions = parse_bool(&e)?,
                ("eval", "corruption") => corruption_lines.push(e.value.clone()),
                ("corruption", "gaussian_sigma") => {
                    corruption_params.gaussian_sigma = Some(parse_list(&e)?)
                }
                ("corruption", "salt_pepper_fraction") => {
                    corruption_params.salt_pepper_fraction = parse_value(&e)?
                }
                ("corruption", "patch_fraction") => {
                    corruption_params.patch_fraction = parse_value(&e)?
                }
                ("corruption", "puzzle_grid") => corruption_params.puzzle_grid = parse_value(&e)?,
                ("corruption", "texture_seed") => corruption_params.texture_seed = parse_value(&e)?,
                _ => {
                    return Err(Error::Config(format!(
                        "unknown setting `{}.{}` (line {})",
                        e.section, e.key, e.line
                    )))
                }
            }
        }
        t.representation.weights = weights;
        ev.out_dir = t.out_dir.clone();
        for line in corruption_lines {
            let mut spec = parse_corruption(&line)?;
            spec.params = corruption_params.clone();
            ev.corruptions.push(spec);
        }
        cfg.train.validate()?;
        cfg.eval.validate()?;
        Ok(cfg)
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |f: &str, why: &str| Err(Error::Config(format!("{f}: {why}")));
        if self.seeds.is_empty() {
            return bad("run.seeds", "list is empty");
        }
        if self.eval_episodes == 0 {
            return bad("run.eval_episodes", "must be ≥ 1");
        }
        if self.frame_stack == 0 {
            return bad("run.frame_stack", "must be ≥ 1");
        }
        if self.episode_len == 0 {
            return bad("run.episode_len", "must be ≥ 1");
        }
        if !(1..=2).contains(&self.workers) {
            return bad("run.workers", "must be 1 or 2");
        }
        if !(self.repr_lr >= 0.0 && self.repr_lr.is_finite()) {
            return bad("representation.lr", "must be ≥ 0");
        }
        if !(self.encoder_lr >= 0.0 && self.encoder_lr.is_finite()) {
            return bad("sac.encoder_lr", "must be ≥ 0");
        }
        if !(self.encoder_tau > 0.0 && self.encoder_tau <= 1.0) {
            return bad("sac.encoder_tau", "must be in (0, 1]");
        }
        if self.representation.latent_dim == 0 {
            return bad("representation.latent_dim", "must be ≥ 1");
        }
        self.representation.weights.validate()?;
        self.representation.fusion.validate()?;
        self.sac.validate()?;
        self.pendulum.validate()?;
        if self.env == EnvKind::Gridworld {
            if !self.estimator.is_metric() {
                return bad(
                    "run.estimator",
                    "gridworld trains representations only; use a metricmm variant",
                );
            }
            if self.grid.batch_size == 0 || self.grid.dataset_size < 2 || self.grid.walk_length == 0 {
                return bad("gridworld", "batch_size, dataset_size and walk_length must be positive");
            }
        }
        Ok(())
    }
}

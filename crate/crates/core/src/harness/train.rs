//! Training runs: SAC with a fused latent state on the pendulum, and
//! representation-only training on the gridworld.

use std::fs;
use std::path::{Path, PathBuf};

use log::info;
use rand::seq::SliceRandom;
use rand::Rng;
use rand_chacha::ChaCha8Rng;

use super::config::{EnvKind, EstimatorKind, TrainConfig};
use super::model::{FusionModel, FusionOptimizer};
use super::rollout::{
    estimate, evaluate, mean_std, stream_rng, DATASET_STREAM, INIT_STREAM, TRAIN_STREAM,
    UPDATE_STREAM,
};
use crate::corrupt::TrainingGuard;
use crate::diffcore::Matrix;
use crate::envs::{
    Cell, FrameStack, GridAction, GridWorld, MultiModalObservation, PendulumEnv, PendulumParams,
};
use crate::error::{Error, Result};
use crate::metricmm::{write_atomic, Checkpoint, LatentState, LossReport, RepresentationBatch};
use crate::sac::{
    write_curve_csv, Actor, CompactObservation, CurveRow, ReplayBuffer, SacAgent, SacBatch,
    TransitionRecord, UpdateReport,
};

pub const CHECKPOINT_FILE: &str = "checkpoint.bin";
pub const BEST_CHECKPOINT_FILE: &str = "best.bin";
pub const CURVE_FILE: &str = "curve.csv";

#[derive(Debug, Clone)]
pub struct TrainOutcome {
    pub seed: u64,
    pub dir: PathBuf,
    pub curve: Vec<CurveRow>,
}

impl TrainOutcome {
    pub fn checkpoint(&self) -> PathBuf {
        self.dir.join(CHECKPOINT_FILE)
    }

    /// Checkpoint with the highest evaluation return seen during training.
    pub fn best_checkpoint(&self) -> PathBuf {
        self.dir.join(BEST_CHECKPOINT_FILE)
    }
}

pub fn seed_dir(out: &Path, seed: u64) -> PathBuf {
    out.join(format!("seed_{seed}"))
}

/// Trains one model per configured seed under `out_dir/seed_<s>/`.
pub fn run_train(cfg: &TrainConfig) -> Result<Vec<TrainOutcome>> {
    cfg.validate()?;
    cfg.seeds
        .iter()
        .map(|&seed| train_seed(cfg, seed, &seed_dir(&cfg.out_dir, seed)))
        .collect()
}

pub fn train_seed(cfg: &TrainConfig, seed: u64, dir: &Path) -> Result<TrainOutcome> {
    cfg.validate()?;
    fs::create_dir_all(dir)?;
    // corruption is refused on this thread until training returns
    let _guard = TrainingGuard::enter();
    match cfg.env {
        EnvKind::Pendulum => train_pendulum(cfg, seed, dir),
        EnvKind::Gridworld => train_gridworld(cfg, seed, dir),
    }
}

pub fn make_pendulum(params: PendulumParams, episode_len: usize) -> Result<PendulumEnv> {
    let mut env = PendulumEnv::new(params)?;
    env.episode_len = episode_len;
    Ok(env)
}

/// Trained pendulum policy with everything needed to run it.
#[derive(Debug, Clone)]
pub struct Policy {
    pub model: FusionModel,
    pub actor: Actor,
    pub env: PendulumEnv,
    pub frame_stack: usize,
    pub estimator: EstimatorKind,
}

fn policy_checkpoint(
    cfg: &TrainConfig,
    seed: u64,
    model: &FusionModel,
    agent: &SacAgent,
    env_steps: usize,
) -> Checkpoint {
    let mut ck = Checkpoint::new();
    ck.set_meta("env", "pendulum");
    ck.set_meta("estimator", cfg.estimator.name());
    ck.set_meta("seed", seed);
    ck.set_meta("env_steps", env_steps);
    ck.set_meta("frame_stack", cfg.frame_stack);
    ck.set_meta("episode_len", cfg.episode_len);
    ck.set_meta("sigma", cfg.pendulum.sigma);
    ck.set_meta("dt", cfg.pendulum.dt);
    ck.set_meta("max_torque", cfg.pendulum.max_torque);
    ck.set_meta("max_action", agent.actor.max_action);
    ck.set_meta("log_alpha", agent.log_alpha);
    model.write_into(&mut ck);
    ck.push_net("actor", &agent.actor.net);
    ck
}

pub fn load_policy(path: &Path) -> Result<Policy> {
    let ck = Checkpoint::load(path)?;
    policy_from_checkpoint(&ck)
}

pub fn policy_from_checkpoint(ck: &Checkpoint) -> Result<Policy> {
    match ck.meta("env") {
        Some("pendulum") => {}
        other => {
            return Err(Error::Config(format!(
                "expected a pendulum checkpoint, found env {other:?}"
            )))
        }
    }
    let params = PendulumParams {
        sigma: ck.meta_parse("sigma")?,
        dt: ck.meta_parse("dt")?,
        max_torque: ck.meta_parse("max_torque")?,
        ..PendulumParams::default()
    };
    let env = make_pendulum(params, ck.meta_parse("episode_len")?)?;
    let model = FusionModel::from_checkpoint(ck)?;
    let actor = Actor::new(ck.net("actor")?.clone(), ck.meta_parse("max_action")?)?;
    if actor.latent_dim() != model.latent_dim() {
        return Err(Error::Format("actor input does not match latent size".into()));
    }
    let estimator: String = ck.meta_parse("estimator")?;
    Ok(Policy {
        model,
        actor,
        env,
        frame_stack: ck.meta_parse("frame_stack")?,
        estimator: EstimatorKind::parse(&estimator)?,
    })
}

/// One environment instance with its frame stack and recursive state.
struct Worker {
    env: PendulumEnv,
    stack: FrameStack,
    obs: MultiModalObservation,
    prev: Option<(LatentState, Vec<f64>)>,
    rng: ChaCha8Rng,
    episode_return: f64,
}

impl Worker {
    fn start(template: &PendulumEnv, frame_stack: usize, seed: u64, episode: u64) -> Result<Self> {
        let mut rng = stream_rng(seed, TRAIN_STREAM + episode);
        let mut env = template.clone();
        let mut stack = FrameStack::new(frame_stack)?;
        let obs = stack.reset(env.reset(&mut rng)?);
        Ok(Worker {
            env,
            stack,
            obs,
            prev: None,
            rng,
            episode_return: 0.0,
        })
    }
}

/// Running sums between two curve rows.
#[derive(Default)]
struct Accum {
    episode_returns: Vec<f64>,
    sac: Vec<UpdateReport>,
    repr: Vec<LossReport>,
}

fn mean_of(xs: impl Iterator<Item = f64>) -> f64 {
    let v: Vec<f64> = xs.collect();
    if v.is_empty() {
        f64::NAN
    } else {
        v.iter().sum::<f64>() / v.len() as f64
    }
}

impl Accum {
    fn row(&mut self, epoch: usize, env_steps: usize, eval: (f64, f64), alpha: f64) -> CurveRow {
        let r = CurveRow {
            epoch,
            env_steps,
            train_return: mean_of(self.episode_returns.iter().copied()),
            eval_return_mean: eval.0,
            eval_return_std: eval.1,
            critic_loss: mean_of(self.sac.iter().map(|s| s.critic_loss)),
            actor_loss: mean_of(self.sac.iter().map(|s| s.actor_loss)),
            alpha,
            repr_loss_total: mean_of(self.repr.iter().map(|s| s.total)),
            l_t: mean_of(self.repr.iter().map(|s| s.transition)),
            l_plus: mean_of(self.repr.iter().map(|s| s.positive)),
            l_minus: mean_of(self.repr.iter().map(|s| s.negative)),
            l_inv: mean_of(self.repr.iter().map(|s| s.invariance)),
        };
        *self = Accum::default();
        r
    }
}

/// One gradient step of the estimator and the agent on a replay batch.
fn update_step(
    model: &mut FusionModel,
    opt: &mut FusionOptimizer,
    agent: &mut SacAgent,
    replay: &ReplayBuffer<TransitionRecord>,
    rng: &mut ChaCha8Rng,
    joint: bool,
    target: Option<(&mut FusionModel, f64)>,
    acc: &mut Accum,
) -> Result<()> {
    let size = agent.config.batch_size;
    let (encoder_grads, extra_grads) = match &*model {
        FusionModel::Metric(m) => {
            let batch = replay.sample_pairs(size, rng)?;
            let enc = m.encode_stacked(batch.obs_pairs)?;
            let sac_batch = SacBatch {
                z: enc.mean_t.clone(),
                actions: batch.actions,
                rewards: batch.rewards,
                z_next: enc.mean_next.clone(),
                dones: batch.dones,
            };
            let out = agent.update(&sac_batch, rng, joint)?;
            acc.sac.push(out.report);
            let mut negatives: Vec<usize> = (0..size).collect();
            negatives.shuffle(rng);
            let (report, grads) = m.loss_and_grads(&enc, &sac_batch.actions, &negatives, out.dz.as_ref())?;
            acc.repr.push(report);
            (grads.encoders, grads.transition)
        }
        other => {
            let base = other.baseline().expect("baseline");
            let batch = replay.sample(size, rng)?;
            let z_next = match &target {
                Some((t, _)) => t.batch_latents(&batch.next_obs)?,
                None => base.predict_batch(&batch.next_obs)?,
            };
            let (z, cache) = base.fuse_batch_owned(batch.obs)?;
            let sac_batch = SacBatch {
                z,
                actions: batch.actions,
                rewards: batch.rewards,
                z_next,
                dones: batch.dones,
            };
            let out = agent.update(&sac_batch, rng, true)?;
            acc.sac.push(out.report);
            let grads = base.backward(&cache, out.dz.as_ref().expect("requested"))?;
            (grads.encoders, grads.head)
        }
    };
    opt.step(model, &encoder_grads, &extra_grads)?;
    match target {
        Some((t, tau)) => t.soft_update_from(model, tau),
        None => Ok(()),
    }
}

fn save_outputs(dir: &Path, ck: &Checkpoint, curve: &[CurveRow], best: bool) -> Result<()> {
    ck.save(&dir.join(CHECKPOINT_FILE))?;
    if best {
        ck.save(&dir.join(BEST_CHECKPOINT_FILE))?;
    }
    write_atomic(&dir.join(CURVE_FILE), write_curve_csv(curve).as_bytes())
}

fn train_pendulum(cfg: &TrainConfig, seed: u64, dir: &Path) -> Result<TrainOutcome> {
    let template = make_pendulum(cfg.pendulum, cfg.episode_len)?;
    let dims: Vec<usize> = template
        .modalities()
        .iter()
        .map(|m| m.frame_len * cfg.frame_stack)
        .collect();
    let mut init = stream_rng(seed, INIT_STREAM);
    let mut model = FusionModel::new(
        cfg.estimator,
        &dims,
        template.action_dim(),
        &cfg.representation,
        &mut init,
    )?;
    let mut agent = SacAgent::new(
        model.latent_dim(),
        template.action_dim(),
        template.max_action(),
        cfg.sac.clone(),
        &mut init,
    )?;
    let lr = if model.baseline().is_some() { cfg.encoder_lr } else { cfg.repr_lr };
    let mut opt = FusionOptimizer::new(&model, lr);
    // Baselines bootstrap through slowly tracking copies of their encoders.
    let mut target_model = model.baseline().is_some().then(|| model.clone());
    let mut replay = ReplayBuffer::new(cfg.sac.capacity)?;
    let mut update_rng = stream_rng(seed, UPDATE_STREAM);
    let n_workers = if cfg.deterministic { 1 } else { cfg.workers };
    let mut next_episode = 0u64;
    let mut workers = Vec::with_capacity(n_workers);
    for _ in 0..n_workers {
        workers.push(Worker::start(&template, cfg.frame_stack, seed, next_episode)?);
        next_episode += 1;
    }

    let mut curve = Vec::new();
    let mut acc = Accum::default();
    let mut best = f64::NEG_INFINITY;
    save_outputs(dir, &policy_checkpoint(cfg, seed, &model, &agent, 0), &curve, true)?;
    let a_max = template.max_action();

    for step in 0..cfg.total_steps {
        let w = &mut workers[step % n_workers];
        let z = estimate(&model, w.prev.as_ref().map(|(z, a)| (z, a.as_slice())), &w.obs)?;
        let action = if step < cfg.warmup_steps {
            vec![w.rng.random_range(-a_max..=a_max)]
        } else {
            agent.act(&z.0, &mut w.rng, false)?
        };
        let out = w.env.step(action[0], &mut w.rng)?;
        let next_obs = w.stack.push(out.frames);
        replay.push(TransitionRecord {
            obs: CompactObservation::from_observation(&w.obs),
            action: action.clone(),
            reward: out.reward,
            next_obs: CompactObservation::from_observation(&next_obs),
            done: false,
        });
        w.episode_return += out.reward;
        if out.truncated {
            acc.episode_returns.push(w.episode_return);
            *w = Worker::start(&template, cfg.frame_stack, seed, next_episode)?;
            next_episode += 1;
        } else {
            w.obs = next_obs;
            w.prev = Some((z, action));
        }

        if step + 1 >= cfg.warmup_steps && replay.len() >= cfg.sac.batch_size {
            update_step(
                &mut model,
                &mut opt,
                &mut agent,
                &replay,
                &mut update_rng,
                cfg.joint_gradients,
                target_model.as_mut().map(|t| (t, cfg.encoder_tau)),
                &mut acc,
            )?;
        }

        let done = step + 1 == cfg.total_steps;
        if (cfg.eval_every > 0 && (step + 1) % cfg.eval_every == 0) || done {
            let returns = evaluate(
                &model,
                &agent.actor,
                &template,
                cfg.frame_stack,
                seed,
                cfg.eval_episodes,
                None,
                true,
                !cfg.deterministic,
            )?;
            let stats = mean_std(&returns);
            curve.push(acc.row(curve.len(), step + 1, stats, agent.alpha()));
            info!(
                "seed {seed} step {}: eval {:.1} ± {:.1}",
                step + 1,
                stats.0,
                stats.1
            );
            let is_best = stats.0 > best;
            if is_best {
                best = stats.0;
            }
            let ck = policy_checkpoint(cfg, seed, &model, &agent, step + 1);
            save_outputs(dir, &ck, &curve, is_best)?;
            if cfg.stop_return.is_some_and(|r| stats.0 >= r) {
                info!("seed {seed}: target return reached after {} steps", step + 1);
                break;
            }
        }
    }
    Ok(TrainOutcome {
        seed,
        dir: dir.to_path_buf(),
        curve,
    })
}

pub fn load_world(cfg: &TrainConfig) -> Result<GridWorld> {
    match &cfg.grid.map {
        None => Ok(GridWorld::default_map()),
        Some(p) => {
            let text = fs::read_to_string(p)
                .map_err(|e| Error::Usage(format!("cannot read map {}: {e}", p.display())))?;
            GridWorld::parse_map(&text)
        }
    }
}

/// Uniform random walks restarted from a uniform open cell every
/// `walk_length` steps.
pub fn random_walk_dataset(
    world: &GridWorld,
    size: usize,
    walk_length: usize,
    rng: &mut ChaCha8Rng,
) -> Vec<(Cell, GridAction, Cell)> {
    let cells = world.open_cells();
    let mut out = Vec::with_capacity(size);
    let mut cur = cells[rng.random_range(0..cells.len())];
    for i in 0..size {
        if i > 0 && i % walk_length == 0 {
            cur = cells[rng.random_range(0..cells.len())];
        }
        let a = GridAction::ALL[rng.random_range(0..4)];
        let next = world.successor(cur, a);
        out.push((cur, a, next));
        cur = next;
    }
    out
}

/// Dense batch of gridworld transitions.
pub fn grid_batch(world: &GridWorld, transitions: &[(Cell, GridAction, Cell)]) -> RepresentationBatch {
    let b = transitions.len();
    let cells = world.width() * world.height();
    let mut occ = Matrix::zeros(b, cells);
    let mut coords = Matrix::zeros(b, 2);
    let mut next_occ = Matrix::zeros(b, cells);
    let mut next_coords = Matrix::zeros(b, 2);
    let mut actions = Matrix::zeros(b, 4);
    for (r, &(s, a, s2)) in transitions.iter().enumerate() {
        let o = world.observe_cell(s);
        let o2 = world.observe_cell(s2);
        occ.row_mut(r).copy_from_slice(&o[0]);
        coords.row_mut(r).copy_from_slice(&o[1]);
        next_occ.row_mut(r).copy_from_slice(&o2[0]);
        next_coords.row_mut(r).copy_from_slice(&o2[1]);
        actions.row_mut(r).copy_from_slice(&a.one_hot());
    }
    RepresentationBatch {
        obs: vec![occ, coords],
        actions,
        next_obs: vec![next_occ, next_coords],
    }
}

fn train_gridworld(cfg: &TrainConfig, seed: u64, dir: &Path) -> Result<TrainOutcome> {
    let world = load_world(cfg)?;
    let g = &cfg.grid;
    let dataset = random_walk_dataset(&world, g.dataset_size, g.walk_length, &mut stream_rng(seed, DATASET_STREAM));
    let dims = [world.width() * world.height(), 2];
    let mut init = stream_rng(seed, INIT_STREAM);
    let mut model = FusionModel::new(cfg.estimator, &dims, 4, &cfg.representation, &mut init)?;
    let mut opt = FusionOptimizer::new(&model, cfg.repr_lr);
    let mut rng = stream_rng(seed, UPDATE_STREAM);
    let mut acc = Accum::default();
    let mut curve = Vec::new();
    let checkpoint = |model: &FusionModel, steps: usize| {
        let mut ck = Checkpoint::new();
        ck.set_meta("env", "gridworld");
        ck.set_meta("estimator", cfg.estimator.name());
        ck.set_meta("seed", seed);
        ck.set_meta("grad_steps", steps);
        ck.set_meta("map", world.to_map_string().trim_end().replace('\n', "/"));
        model.write_into(&mut ck);
        ck
    };
    save_outputs(dir, &checkpoint(&model, 0), &curve, true)?;
    for step in 0..g.grad_steps {
        let picks: Vec<_> = (0..g.batch_size)
            .map(|_| dataset[rng.random_range(0..dataset.len())])
            .collect();
        let batch = grid_batch(&world, &picks);
        let mut negatives: Vec<usize> = (0..g.batch_size).collect();
        negatives.shuffle(&mut rng);
        let FusionModel::Metric(m) = &model else {
            return Err(Error::Config("gridworld training needs a metricmm estimator".into()));
        };
        let (report, grads) = m.total_representation_loss(&batch, &negatives)?;
        acc.repr.push(report);
        opt.step(&mut model, &grads.encoders, &grads.transition)?;
        let done = step + 1 == g.grad_steps;
        if (cfg.eval_every > 0 && (step + 1) % cfg.eval_every == 0) || done {
            curve.push(acc.row(curve.len(), step + 1, (f64::NAN, f64::NAN), f64::NAN));
            info!("seed {seed} grad step {}: L = {:.4}", step + 1, curve.last().map_or(f64::NAN, |r| r.repr_loss_total));
            save_outputs(dir, &checkpoint(&model, step + 1), &curve, done)?;
        }
    }
    Ok(TrainOutcome {
        seed,
        dir: dir.to_path_buf(),
        curve,
    })
}

/// Gridworld and representation model stored in a gridworld checkpoint.
pub fn load_grid_model(ck: &Checkpoint) -> Result<(GridWorld, crate::metricmm::RepresentationModel)> {
    if ck.meta("env") != Some("gridworld") {
        return Err(Error::Config(format!(
            "expected a gridworld checkpoint, found env {:?}",
            ck.meta("env")
        )));
    }
    let map: String = ck.meta_parse("map")?;
    let world = GridWorld::parse_map(&map.replace('/', "\n"))?;
    let FusionModel::Metric(model) = FusionModel::from_checkpoint(ck)? else {
        return Err(Error::Config("gridworld checkpoint holds no metric model".into()));
    };
    let dims = model.encoders.input_dims();
    if dims != [world.width() * world.height(), 2] {
        return Err(Error::Config(format!(
            "checkpoint encoders expect inputs {dims:?}, which do not fit the stored map"
        )));
    }
    Ok((world, model))
}

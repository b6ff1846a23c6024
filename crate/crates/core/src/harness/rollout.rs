//! Episode execution shared by training-time evaluation and `eval`.

use std::f64::consts::PI;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::model::FusionModel;
use crate::corrupt::{apply_corruption, CorruptionContext, CorruptionScheduler, CorruptionSpec};
use crate::envs::{FrameStack, MultiModalObservation, PendulumEnv, PendulumState};
use crate::error::Result;
use crate::metricmm::{estimate_step, LatentState};
use crate::sac::Actor;

/// Stream offsets that keep training, evaluation and update randomness
/// independent for a given seed.
pub const TRAIN_STREAM: u64 = 0;
pub const EVAL_STREAM: u64 = 1 << 40;
pub const INIT_STREAM: u64 = u64::MAX;
pub const UPDATE_STREAM: u64 = u64::MAX - 1;
pub const DATASET_STREAM: u64 = u64::MAX - 2;
pub const BANK_STREAM: u64 = u64::MAX - 3;

/// Independent generator for `(seed, stream)`.
pub fn stream_rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// One recursive estimation step for any estimator kind.
pub fn estimate(
    model: &FusionModel,
    prev: Option<(&LatentState, &[f64])>,
    obs: &MultiModalObservation,
) -> Result<LatentState> {
    match model {
        FusionModel::Metric(m) => estimate_step(m, prev, obs),
        other => other.baseline().expect("baseline").fuse(obs),
    }
}

/// Observation corruption for one evaluation condition.
#[derive(Debug, Clone)]
pub struct Corruptor<'a> {
    pub spec: &'a CorruptionSpec,
    pub ctx: &'a CorruptionContext,
}

/// In-distribution frames for Hallucination, drawn from random pendulum states.
pub fn pendulum_bank(env: &PendulumEnv, size: usize, seed: u64) -> Result<Vec<Vec<Vec<f64>>>> {
    let mut rng = stream_rng(seed, BANK_STREAM);
    let mut probe = env.clone();
    let w = probe.params.max_speed;
    let mut bank: Vec<Vec<Vec<f64>>> = (0..2).map(|_| Vec::with_capacity(size)).collect();
    for _ in 0..size {
        let s = PendulumState::new(rng.random_range(-PI..PI), rng.random_range(-w..w));
        for (b, f) in bank.iter_mut().zip(probe.reset_to(s)?) {
            b.push(f);
        }
    }
    Ok(bank)
}

/// Runs one pendulum episode and returns its undiscounted return.
///
/// With a corruptor, the newest raw frame of each scheduled modality is
/// corrupted before it enters the frame stack. The estimator never learns
/// which modalities were touched.
pub fn run_episode(
    model: &FusionModel,
    actor: &Actor,
    env: &mut PendulumEnv,
    frame_stack: usize,
    rng: &mut ChaCha8Rng,
    corruptor: Option<&Corruptor>,
    deterministic_actions: bool,
) -> Result<f64> {
    let mut stack = FrameStack::new(frame_stack)?;
    let mut scheduler = CorruptionScheduler::new(2);
    let mut frames = env.reset(rng)?;
    let mut step_index = 0;
    let mut total = 0.0;
    let mut prev: Option<(LatentState, Vec<f64>)> = None;
    let mut obs = stack.reset(frames.clone());
    loop {
        let z = estimate(model, prev.as_ref().map(|(z, a)| (z, a.as_slice())), &obs)?;
        let (action, _) = actor.sample_action(&z.0, rng, deterministic_actions)?;
        let out = env.step(action[0], rng)?;
        total += out.reward;
        if out.truncated {
            break;
        }
        step_index += 1;
        frames = out.frames;
        if let Some(c) = corruptor {
            let sched = scheduler.step(c.spec, rng, step_index);
            for (m, frame) in frames.iter_mut().enumerate() {
                if sched.active[m] {
                    *frame = apply_corruption(frame, m, c.spec, c.ctx, rng)?;
                }
            }
        }
        obs = stack.push(frames.clone());
        prev = Some((z, action));
    }
    Ok(total)
}

/// Returns of `episodes` evaluation episodes for `seed`. Episode `i` always
/// uses the same random stream, so conditions are compared on identical
/// initial states.
#[allow(clippy::too_many_arguments)]
pub fn evaluate(
    model: &FusionModel,
    actor: &Actor,
    env: &PendulumEnv,
    frame_stack: usize,
    seed: u64,
    episodes: usize,
    corruptor: Option<&Corruptor>,
    deterministic_actions: bool,
    parallel: bool,
) -> Result<Vec<f64>> {
    let one = |i: usize| -> Result<f64> {
        let mut rng = stream_rng(seed, EVAL_STREAM + i as u64);
        let mut e = env.clone();
        run_episode(model, actor, &mut e, frame_stack, &mut rng, corruptor, deterministic_actions)
    };
    if !parallel || episodes < 2 {
        return (0..episodes).map(one).collect();
    }
    let threads = std::thread::available_parallelism().map_or(1, |n| n.get()).min(episodes);
    if threads < 2 {
        return (0..episodes).map(one).collect();
    }
    let mut results: Vec<Option<Result<f64>>> = (0..episodes).map(|_| None).collect();
    std::thread::scope(|s| {
        let chunks: Vec<_> = results.chunks_mut(episodes.div_ceil(threads)).enumerate().collect();
        let per = episodes.div_ceil(threads);
        for (c, slot) in chunks {
            let one = &one;
            s.spawn(move || {
                for (j, r) in slot.iter_mut().enumerate() {
                    *r = Some(one(c * per + j));
                }
            });
        }
    });
    results.into_iter().map(|r| r.expect("filled")).collect()
}

pub fn mean_std(xs: &[f64]) -> (f64, f64) {
    if xs.is_empty() {
        return (f64::NAN, f64::NAN);
    }
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    let var = xs.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / n;
    (mean, var.sqrt())
}

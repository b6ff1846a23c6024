//! Episodic pendulum producing per-modality frames (image, sound).

use std::f64::consts::PI;
use std::io::Write;

use rand::Rng;
use rand_distr::{Distribution, Normal};

use super::observation::{ModalityInfo, ModalityLayout};
use super::pendulum::{
    image_observe, pendulum_reward, pendulum_step, sound_observe, PendulumParams, PendulumState,
    RenderConfig, SoundConfig,
};
use crate::error::{Error, Result};

pub const IMAGE_MODALITY: usize = 0;
pub const SOUND_MODALITY: usize = 1;

/// Scales raw sound readings into roughly `[-1, 1]`: the frequency shift is
/// divided by the largest shift the tip can produce, the amplitude by the
/// reference amplitude.
pub fn normalize_sound(raw: &[f64; 6], params: &PendulumParams, cfg: &SoundConfig) -> Vec<f64> {
    let max_shift = cfg.base_frequency * params.length * params.max_speed / cfg.sound_speed;
    raw.chunks(2)
        .flat_map(|fa| {
            [
                (fa[0] - cfg.base_frequency) / max_shift,
                fa[1] / cfg.reference_amplitude,
            ]
        })
        .collect()
}

#[derive(Debug, Clone)]
pub struct StepOutcome {
    pub frames: Vec<Vec<f64>>,
    pub reward: f64,
    /// Episode ended by the time limit (never a true terminal state).
    pub truncated: bool,
}

#[derive(Debug, Clone)]
pub struct PendulumEnv {
    pub params: PendulumParams,
    pub sound: SoundConfig,
    pub render: RenderConfig,
    pub episode_len: usize,
    state: PendulumState,
    t: usize,
}

impl PendulumEnv {
    pub fn new(params: PendulumParams) -> Result<Self> {
        let sound = SoundConfig::default();
        params.validate()?;
        sound.validate(&params)?;
        Ok(PendulumEnv {
            params,
            sound,
            render: RenderConfig::default(),
            episode_len: 200,
            state: PendulumState::new(PI, 0.0),
            t: 0,
        })
    }

    pub fn modalities(&self) -> Vec<ModalityInfo> {
        vec![
            ModalityInfo {
                name: "image".into(),
                frame_len: self.render.side * self.render.side,
                layout: ModalityLayout::Image {
                    width: self.render.side,
                    height: self.render.side,
                },
                range: (0.0, 1.0),
            },
            ModalityInfo {
                name: "sound".into(),
                frame_len: 6,
                layout: ModalityLayout::Vector,
                range: (-1.0, 1.0),
            },
        ]
    }

    pub fn action_dim(&self) -> usize {
        1
    }

    pub fn max_action(&self) -> f64 {
        self.params.max_torque
    }

    pub fn state(&self) -> PendulumState {
        self.state
    }

    pub fn time(&self) -> usize {
        self.t
    }

    /// Random start: θ uniform on the circle, θ̇ uniform in `[-1, 1]`.
    pub fn reset<R: Rng + ?Sized>(&mut self, rng: &mut R) -> Result<Vec<Vec<f64>>> {
        let theta = rng.random_range(-PI..PI);
        let theta_dot = rng.random_range(-1.0..1.0);
        self.reset_to(PendulumState::new(theta, theta_dot))
    }

    pub fn reset_to(&mut self, state: PendulumState) -> Result<Vec<Vec<f64>>> {
        self.state = state;
        self.t = 0;
        self.frames()
    }

    pub fn frames(&self) -> Result<Vec<Vec<f64>>> {
        frames_for(self.state, &self.params, &self.sound, &self.render)
    }

    pub fn step<R: Rng + ?Sized>(&mut self, torque: f64, rng: &mut R) -> Result<StepOutcome> {
        if self.t >= self.episode_len {
            return Err(Error::Usage("step called after the episode ended".into()));
        }
        let torque = torque.clamp(-self.params.max_torque, self.params.max_torque);
        let noise = if self.params.sigma > 0.0 {
            Normal::new(0.0, self.params.sigma)
                .map_err(|e| Error::Config(e.to_string()))?
                .sample(rng)
        } else {
            0.0
        };
        let reward = pendulum_reward(self.state, torque);
        self.state = pendulum_step(self.state, torque, &self.params, noise)?;
        self.t += 1;
        Ok(StepOutcome {
            frames: self.frames()?,
            reward,
            truncated: self.t >= self.episode_len,
        })
    }
}

/// Image and normalized sound frames for a state.
pub fn frames_for(
    state: PendulumState,
    params: &PendulumParams,
    sound: &SoundConfig,
    render: &RenderConfig,
) -> Result<Vec<Vec<f64>>> {
    let raw = sound_observe(state, params, sound)?;
    Ok(vec![
        image_observe(state, render),
        normalize_sound(&raw, params, sound),
    ])
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrajectoryRow {
    pub episode: usize,
    pub t: usize,
    pub theta: f64,
    pub theta_dot: f64,
    pub action: f64,
    pub reward: f64,
}

pub const TRAJECTORY_HEADER: &str = "episode,t,theta,theta_dot,action,reward";

pub fn write_trajectory_csv<W: Write>(rows: &[TrajectoryRow], w: &mut W) -> Result<()> {
    writeln!(w, "{TRAJECTORY_HEADER}")?;
    for r in rows {
        writeln!(
            w,
            "{},{},{},{},{},{}",
            r.episode, r.t, r.theta, r.theta_dot, r.action, r.reward
        )?;
    }
    Ok(())
}

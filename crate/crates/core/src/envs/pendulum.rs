//! Torque-driven 1-D pendulum with rendered-image and Doppler-sound
//! observations. θ = 0 is upright.

use std::f64::consts::PI;

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PendulumState {
    /// Angle in radians, unwrapped.
    pub theta: f64,
    /// Angular velocity in rad/s.
    pub theta_dot: f64,
}

impl PendulumState {
    pub fn new(theta: f64, theta_dot: f64) -> Self {
        PendulumState { theta, theta_dot }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PendulumParams {
    pub gravity: f64,
    pub length: f64,
    pub mass: f64,
    pub dt: f64,
    /// Standard deviation of the angular-acceleration noise.
    pub sigma: f64,
    pub max_torque: f64,
    pub max_speed: f64,
}

impl Default for PendulumParams {
    fn default() -> Self {
        PendulumParams {
            gravity: 10.0,
            length: 1.0,
            mass: 1.0,
            dt: 0.05,
            sigma: 0.0,
            max_torque: 2.0,
            max_speed: 8.0,
        }
    }
}

impl PendulumParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.dt > 0.0) {
            return Err(Error::Config(format!("dt must be positive, got {}", self.dt)));
        }
        if !(self.max_torque > 0.0) {
            return Err(Error::Config(format!(
                "max torque must be positive, got {}",
                self.max_torque
            )));
        }
        if !(self.sigma >= 0.0) || !(self.max_speed > 0.0) {
            return Err(Error::Config("sigma must be ≥ 0 and max speed > 0".into()));
        }
        Ok(())
    }

    /// Angular acceleration at angle `theta` under torque `torque`.
    pub fn angular_acceleration(&self, theta: f64, torque: f64) -> f64 {
        3.0 * self.gravity / (2.0 * self.length) * theta.sin()
            + 3.0 / (self.mass * self.length * self.length) * torque
    }
}

/// Wraps an angle into `(-π, π]`.
pub fn wrap_angle(theta: f64) -> f64 {
    let w = (theta + PI).rem_euclid(2.0 * PI) - PI;
    if w <= -PI {
        w + 2.0 * PI
    } else {
        w
    }
}

/// Semi-implicit Euler step. `noise` is a sample of the acceleration noise,
/// drawn by the caller (zero for deterministic runs).
pub fn pendulum_step(
    state: PendulumState,
    torque: f64,
    params: &PendulumParams,
    noise: f64,
) -> Result<PendulumState> {
    if !(state.theta.is_finite() && state.theta_dot.is_finite()) {
        return Err(Error::Numerical(format!("non-finite pendulum state {state:?}")));
    }
    if !(torque.is_finite() && noise.is_finite()) {
        return Err(Error::Numerical(format!(
            "non-finite torque {torque} or noise {noise}"
        )));
    }
    let a = torque.clamp(-params.max_torque, params.max_torque);
    let acc = params.angular_acceleration(state.theta, a);
    let theta_dot =
        (state.theta_dot + (acc + noise) * params.dt).clamp(-params.max_speed, params.max_speed);
    let theta = state.theta + theta_dot * params.dt;
    Ok(PendulumState { theta, theta_dot })
}

/// Swing-up cost: `-(wrap(θ)² + 0.1·θ̇² + 0.001·a²)`.
pub fn pendulum_reward(state: PendulumState, torque: f64) -> f64 {
    let th = wrap_angle(state.theta);
    -(th * th + 0.1 * state.theta_dot * state.theta_dot + 0.001 * torque * torque)
}

/// Receivers and acoustic constants of the sound modality.
#[derive(Debug, Clone, PartialEq)]
pub struct SoundConfig {
    pub receivers: [(f64, f64); 3],
    /// Emitted frequency (Hz).
    pub base_frequency: f64,
    /// Speed of sound (m/s).
    pub sound_speed: f64,
    pub reference_amplitude: f64,
    /// Distances below this are clamped in the inverse-square law.
    pub min_distance: f64,
}

impl Default for SoundConfig {
    fn default() -> Self {
        let r = 2.0;
        let at = |deg: f64| (r * deg.to_radians().cos(), r * deg.to_radians().sin());
        SoundConfig {
            receivers: [at(90.0), at(210.0), at(330.0)],
            base_frequency: 440.0,
            sound_speed: 343.0,
            reference_amplitude: 1.0,
            min_distance: 0.1,
        }
    }
}

impl SoundConfig {
    pub fn validate(&self, params: &PendulumParams) -> Result<()> {
        for (i, a) in self.receivers.iter().enumerate() {
            if a.0.hypot(a.1) < 1e-12 {
                return Err(Error::Config(format!("receiver {i} sits on the pivot")));
            }
            for b in &self.receivers[i + 1..] {
                if (a.0 - b.0).hypot(a.1 - b.1) < 1e-12 {
                    return Err(Error::Config("receivers must be distinct".into()));
                }
            }
        }
        if !(self.sound_speed > params.length * params.max_speed) {
            return Err(Error::Config(format!(
                "sound speed {} must exceed the maximum tip speed {}",
                self.sound_speed,
                params.length * params.max_speed
            )));
        }
        if !(self.base_frequency > 0.0 && self.reference_amplitude > 0.0 && self.min_distance > 0.0)
        {
            return Err(Error::Config("sound constants must be positive".into()));
        }
        Ok(())
    }
}

/// Frequency and amplitude heard by each receiver:
/// `(f_1, A_1, f_2, A_2, f_3, A_3)`.
pub fn sound_observe(
    state: PendulumState,
    params: &PendulumParams,
    cfg: &SoundConfig,
) -> Result<[f64; 6]> {
    let l = params.length;
    let (s, c) = state.theta.sin_cos();
    let tip = (l * s, l * c);
    let vel = (l * state.theta_dot * c, -l * state.theta_dot * s);
    let mut out = [0.0; 6];
    for (k, r) in cfg.receivers.iter().enumerate() {
        let d = (r.0 - tip.0, r.1 - tip.1);
        let dist = d.0.hypot(d.1);
        let radial = if dist > 0.0 {
            (vel.0 * d.0 + vel.1 * d.1) / dist
        } else {
            0.0
        };
        if cfg.sound_speed <= radial {
            return Err(Error::Config(format!(
                "source approaches receiver {k} at {radial} m/s, not below the speed of sound"
            )));
        }
        out[2 * k] = cfg.base_frequency * cfg.sound_speed / (cfg.sound_speed - radial);
        out[2 * k + 1] = cfg.reference_amplitude / dist.max(cfg.min_distance).powi(2);
    }
    Ok(out)
}

pub const IMAGE_SIDE: usize = 24;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RenderConfig {
    pub side: usize,
    /// Rod length in pixels.
    pub rod_pixels: f64,
    /// Points sampled along the rod.
    pub samples: usize,
}

impl Default for RenderConfig {
    fn default() -> Self {
        RenderConfig {
            side: IMAGE_SIDE,
            rod_pixels: 10.0,
            samples: 32,
        }
    }
}

/// Grayscale line drawing of the rod, row-major, background 0, rod 1.
pub fn image_observe(state: PendulumState, cfg: &RenderConfig) -> Vec<f64> {
    let n = cfg.side;
    let mut img = vec![0.0; n * n];
    let centre = n as f64 / 2.0;
    let (s, c) = state.theta.sin_cos();
    // image y grows downward; upright (θ = 0) points up
    let tip = (centre + cfg.rod_pixels * s, centre - cfg.rod_pixels * c);
    let last = cfg.samples.max(2) - 1;
    for i in 0..=last {
        let t = i as f64 / last as f64;
        let x = centre + t * (tip.0 - centre);
        let y = centre + t * (tip.1 - centre);
        let px = (x.floor().max(0.0) as usize).min(n - 1);
        let py = (y.floor().max(0.0) as usize).min(n - 1);
        img[py * n + px] = 1.0;
    }
    img
}

//! Desk-scale multimodal environments: a gridworld with an exact
//! minimum-action distance oracle and a pendulum observed through a rendered
//! image and Doppler-shifted sound.

mod grid;
mod observation;
mod pendulum;
mod pendulum_env;

pub use grid::{Cell, GridAction, GridWorld};
pub use observation::{
    stack_frames, FrameStack, ModalityInfo, ModalityLayout, MultiModalObservation,
};
pub use pendulum::{
    image_observe, pendulum_reward, pendulum_step, sound_observe, wrap_angle, PendulumParams,
    PendulumState, RenderConfig, SoundConfig, IMAGE_SIDE,
};
pub use pendulum_env::{
    frames_for, normalize_sound, write_trajectory_csv, PendulumEnv, StepOutcome, TrajectoryRow,
    IMAGE_MODALITY, SOUND_MODALITY, TRAJECTORY_HEADER,
};

/// Modality descriptions for the gridworld: occupancy grid and coordinates.
/// Neither is treated as an image by the corruption module.
pub fn grid_modalities(world: &GridWorld) -> Vec<ModalityInfo> {
    vec![
        ModalityInfo {
            name: "occupancy".into(),
            frame_len: world.width() * world.height(),
            layout: ModalityLayout::Vector,
            range: (0.0, 1.0),
        },
        ModalityInfo {
            name: "coordinates".into(),
            frame_len: 2,
            layout: ModalityLayout::Vector,
            range: (0.0, 1.0),
        },
    ]
}

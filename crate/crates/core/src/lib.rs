//! Metric latent spaces for multimodal state estimation.
//!
//! Per-modality encoders map observations into a shared latent space whose
//! Euclidean distances track the minimum number of actions between states.
//! A latent transition model predicts the next state, and the modalities are
//! fused by weighting each encoding with the inverse of its distance to that
//! prediction. A from-scratch Soft Actor-Critic agent acts on the fused state.

pub mod diffcore;
pub mod envs;
pub mod corrupt;
pub mod metricmm;
pub mod baselines;
pub mod sac;
pub mod harness;
pub mod csvio;
mod error;

pub use error::{Error, Result};

//! Soft Actor-Critic over latent states: squashed-Gaussian actor, twin
//! critics with Polyak-averaged targets, learned entropy temperature, and a
//! replay buffer of raw observations.

mod actor;
mod agent;
mod curve;
mod replay;

pub use actor::{Actor, ActorSample, LOG_STD_MAX, LOG_STD_MIN, TANH_EPS};
pub use agent::{soft_update, SacAgent, SacBatch, SacConfig, UpdateOutput, UpdateReport};
pub use curve::{read_curve_csv, write_curve_csv, CurveRow, CURVE_HEADER};
pub use replay::{gather, gather_pairs, CompactObservation, PairBatch, ReplayBatch, ReplayBuffer, TransitionRecord};

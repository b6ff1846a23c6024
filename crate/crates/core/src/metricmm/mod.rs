//! Per-modality encoders into a shared metric latent space, the latent
//! transition model, the representation losses, and inverse-distance-weighted
//! fusion for recursive state estimation.

mod checkpoint;
mod estimator;
mod fusion;
mod losses;
mod model;

pub use checkpoint::{write_atomic, Checkpoint};
pub use estimator::{estimate_step, MetricEstimator, StateEstimator};
pub use fusion::{euclidean, fuse_idw, idw_weights, FusionConfig, DEFAULT_DELTA};
pub use losses::{
    loss_invariance, loss_negative, loss_positive, loss_transition, LossWeights, LOG_EPS,
};
pub use model::{
    mean_latent, read_encoders, write_encoders, EncodedPairs, EncoderSet, LatentState, LossReport, RepresentationBatch,
    RepresentationConfig, RepresentationGrads, RepresentationModel, TransitionModel,
};

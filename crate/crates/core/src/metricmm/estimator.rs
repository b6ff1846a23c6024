//! Recursive state estimation: predict with the transition model, correct
//! with inverse-distance-weighted fusion of the modality encodings.

use super::fusion::fuse_idw;
use super::model::{LatentState, RepresentationModel};
use crate::envs::MultiModalObservation;
use crate::error::{Error, Result};

/// Common interface of every state estimator the harness can drive.
pub trait StateEstimator {
    /// Forget the recursive state at an episode boundary.
    fn reset(&mut self);

    /// Estimate the latent state from the current observation.
    /// `prev_action` is `None` on the first step of an episode.
    fn estimate(
        &mut self,
        obs: &MultiModalObservation,
        prev_action: Option<&[f64]>,
    ) -> Result<LatentState>;
}

/// One estimation step. At t = 0 (`prev` is `None`) the estimate is the mean
/// encoding; afterwards the encodings are fused around
/// `ẑ = φ_T(z_{t−1}, a_{t−1})`. The estimator is never told which
/// modalities are corrupted.
pub fn estimate_step(
    model: &RepresentationModel,
    prev: Option<(&LatentState, &[f64])>,
    obs: &MultiModalObservation,
) -> Result<LatentState> {
    let latents = model.encoders.encode_all(obs)?;
    match prev {
        None => Ok(super::model::mean_latent(&latents)),
        Some((z_prev, a_prev)) => {
            let predicted = model.transition.predict(z_prev, a_prev)?;
            let fused = fuse_idw(
                &latents.iter().map(|z| z.0.as_slice()).collect::<Vec<_>>(),
                &predicted.0,
                model.fusion.delta,
            )?;
            Ok(LatentState(fused))
        }
    }
}

/// Stateful wrapper that carries `z_{t−1}` between calls.
#[derive(Debug, Clone)]
pub struct MetricEstimator<'a> {
    model: &'a RepresentationModel,
    prev: Option<LatentState>,
}

impl<'a> MetricEstimator<'a> {
    pub fn new(model: &'a RepresentationModel) -> Self {
        MetricEstimator { model, prev: None }
    }
}

impl StateEstimator for MetricEstimator<'_> {
    fn reset(&mut self) {
        self.prev = None;
    }

    fn estimate(
        &mut self,
        obs: &MultiModalObservation,
        prev_action: Option<&[f64]>,
    ) -> Result<LatentState> {
        let z = match (&self.prev, prev_action) {
            (None, None) => estimate_step(self.model, None, obs)?,
            (Some(z), Some(a)) => estimate_step(self.model, Some((z, a)), obs)?,
            (None, Some(_)) => {
                return Err(Error::Usage(
                    "previous action given but no previous state; call reset at episode start"
                        .into(),
                ))
            }
            (Some(_), None) => {
                return Err(Error::Usage(
                    "previous action missing after the first step".into(),
                ))
            }
        };
        self.prev = Some(z.clone());
        Ok(z)
    }
}

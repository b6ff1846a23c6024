//! The trainable estimator behind a run, plus its optimizers.

use rand::Rng;

use super::config::EstimatorKind;
use crate::baselines::{BaselineEstimator, BaselineFusion, ConcatFusion, LinearCombFusion};
use crate::diffcore::{lerp_into, AdamConfig, AdamState, Matrix};
use crate::error::{Error, Result};
use crate::metricmm::{
    Checkpoint, EncoderSet, MetricEstimator, RepresentationConfig, RepresentationModel,
    StateEstimator,
};

#[derive(Debug, Clone, PartialEq)]
pub enum FusionModel {
    Metric(RepresentationModel),
    LinearComb(LinearCombFusion),
    Concat(ConcatFusion),
}

impl FusionModel {
    pub fn new<R: Rng + ?Sized>(
        kind: EstimatorKind,
        input_dims: &[usize],
        action_dim: usize,
        config: &RepresentationConfig,
        rng: &mut R,
    ) -> Result<Self> {
        let (h, d) = (&config.encoder_hidden, config.latent_dim);
        Ok(match kind {
            EstimatorKind::LinearComb => {
                FusionModel::LinearComb(LinearCombFusion::new(input_dims, h, d, rng)?)
            }
            EstimatorKind::Concat => FusionModel::Concat(ConcatFusion::new(input_dims, h, d, rng)?),
            k => {
                let cfg = RepresentationConfig {
                    weights: k.loss_weights(config.weights),
                    ..config.clone()
                };
                FusionModel::Metric(RepresentationModel::new(input_dims, action_dim, &cfg, rng)?)
            }
        })
    }

    pub fn baseline(&self) -> Option<&dyn BaselineFusion> {
        match self {
            FusionModel::Metric(_) => None,
            FusionModel::LinearComb(m) => Some(m),
            FusionModel::Concat(m) => Some(m),
        }
    }

    pub fn encoders(&self) -> &EncoderSet {
        match self {
            FusionModel::Metric(m) => &m.encoders,
            FusionModel::LinearComb(m) => &m.encoders,
            FusionModel::Concat(m) => &m.encoders,
        }
    }

    pub fn latent_dim(&self) -> usize {
        self.encoders().latent_dim()
    }

    pub fn estimator(&self) -> Box<dyn StateEstimator + '_> {
        match self {
            FusionModel::Metric(m) => Box::new(MetricEstimator::new(m)),
            FusionModel::LinearComb(m) => Box::new(BaselineEstimator::new(m)),
            FusionModel::Concat(m) => Box::new(BaselineEstimator::new(m)),
        }
    }

    /// Latents used for replayed samples: mean encoding for the metric model,
    /// the learned fusion for baselines.
    pub fn batch_latents(&self, obs: &[Matrix]) -> Result<Matrix> {
        match self {
            FusionModel::Metric(m) => {
                let lat = m.encoders.predict_batch(obs)?;
                let mut mean = lat[0].clone();
                for l in &lat[1..] {
                    mean.add_assign(l)?;
                }
                mean.scale(1.0 / lat.len() as f64);
                Ok(mean)
            }
            other => other.baseline().expect("baseline").predict_batch(obs),
        }
    }

    /// Moves every parameter a fraction `tau` towards `online`.
    pub fn soft_update_from(&mut self, online: &FusionModel, tau: f64) -> Result<()> {
        let (dst_enc, dst_extra): (&mut EncoderSet, &mut [f64]) = match self {
            FusionModel::Metric(m) => (&mut m.encoders, m.transition.network_mut().params_mut()),
            FusionModel::LinearComb(m) => (&mut m.encoders, &mut m.mix),
            FusionModel::Concat(m) => (&mut m.encoders, m.projection.params_mut()),
        };
        let (src_enc, src_extra): (&EncoderSet, &[f64]) = match online {
            FusionModel::Metric(m) => (&m.encoders, m.transition.network().params()),
            FusionModel::LinearComb(m) => (&m.encoders, &m.mix),
            FusionModel::Concat(m) => (&m.encoders, m.projection.params()),
        };
        crate::error::ensure_len("soft update encoders", dst_enc.networks().len(), src_enc.networks().len())?;
        for (d, s) in dst_enc.networks_mut().iter_mut().zip(src_enc.networks()) {
            lerp_into(d.params_mut(), s.params(), tau)?;
        }
        lerp_into(dst_extra, src_extra, tau)
    }

    pub fn write_into(&self, ck: &mut Checkpoint) {
        match self {
            FusionModel::Metric(m) => {
                ck.set_meta("kind", "metricmm");
                m.write_into(ck);
            }
            other => other.baseline().expect("baseline").write_into(ck),
        }
    }

    pub fn from_checkpoint(ck: &Checkpoint) -> Result<Self> {
        match ck.meta("kind") {
            Some("metricmm") => Ok(FusionModel::Metric(RepresentationModel::from_checkpoint(ck)?)),
            Some("linearcomb") => Ok(FusionModel::LinearComb(LinearCombFusion::from_checkpoint(ck)?)),
            Some("concat") => Ok(FusionModel::Concat(ConcatFusion::from_checkpoint(ck)?)),
            other => Err(Error::Format(format!("unknown estimator kind {other:?} in checkpoint"))),
        }
    }
}

/// Adam state for every parameter block of a [`FusionModel`].
#[derive(Debug, Clone)]
pub struct FusionOptimizer {
    encoders: Vec<AdamState>,
    /// Transition model or fusion head.
    extra: AdamState,
}

impl FusionOptimizer {
    pub fn new(model: &FusionModel, lr: f64) -> Self {
        let cfg = AdamConfig::with_lr(lr);
        let encoders = model
            .encoders()
            .networks()
            .iter()
            .enumerate()
            .map(|(i, e)| AdamState::new(format!("encoder{i}"), e.param_count(), cfg))
            .collect();
        let extra = match model {
            FusionModel::Metric(m) => {
                AdamState::new("transition", m.transition.network().param_count(), cfg)
            }
            other => AdamState::new("fusion_head", other.baseline().expect("baseline").head_params().len(), cfg),
        };
        FusionOptimizer { encoders, extra }
    }

    /// Applies encoder gradients and the transition or head gradient.
    pub fn step(&mut self, model: &mut FusionModel, encoder_grads: &[Vec<f64>], extra: &[f64]) -> Result<()> {
        let (encoders, extra_params): (&mut EncoderSet, &mut [f64]) = match model {
            FusionModel::Metric(m) => (&mut m.encoders, m.transition.network_mut().params_mut()),
            FusionModel::LinearComb(m) => (&mut m.encoders, &mut m.mix),
            FusionModel::Concat(m) => (&mut m.encoders, m.projection.params_mut()),
        };
        for ((opt, net), g) in self
            .encoders
            .iter_mut()
            .zip(encoders.networks_mut())
            .zip(encoder_grads)
        {
            opt.step(net.params_mut(), g)?;
        }
        self.extra.step(extra_params, extra)
    }
}

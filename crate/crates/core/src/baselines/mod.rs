//! Fusion baselines trained only through the reinforcement-learning loss:
//! a learned per-dimension linear combination of the modality encodings, and
//! concatenation followed by a shared projection.
//!
//! Both are stateless per step. They plug into the same
//! [`StateEstimator`] interface as the metric estimator.

use rand::Rng;

use crate::diffcore::{Activation, Matrix, Mlp, MlpCache, MlpSpec};
use crate::envs::MultiModalObservation;
use crate::error::{ensure_len, Error, Result};
use crate::metricmm::{
    read_encoders, write_encoders, Checkpoint, EncoderSet, LatentState, StateEstimator,
};

/// Caches from a batched fusion forward pass.
#[derive(Debug, Clone)]
pub struct FusionCache {
    encoders: Vec<MlpCache>,
    latents: Vec<Matrix>,
    projection: Option<MlpCache>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BaselineGrads {
    pub encoders: Vec<Vec<f64>>,
    pub head: Vec<f64>,
}

/// Shared interface of the learned fusion baselines.
pub trait BaselineFusion: std::fmt::Debug + Send + Sync {
    fn kind_name(&self) -> &'static str;
    fn encoders(&self) -> &EncoderSet;
    fn encoders_mut(&mut self) -> &mut EncoderSet;
    /// Parameters of the fusion head (mixing weights or projection).
    fn head_params(&self) -> &[f64];
    fn head_params_mut(&mut self) -> &mut [f64];
    /// Fused latents for a batch given per-modality encodings.
    fn combine(&self, latents: &[Matrix]) -> Result<(Matrix, Option<MlpCache>)>;
    /// Gradients of the head and of each modality latent.
    fn combine_backward(
        &self,
        latents: &[Matrix],
        projection: Option<&MlpCache>,
        dz: &Matrix,
    ) -> Result<(Vec<f64>, Vec<Matrix>)>;

    fn latent_dim(&self) -> usize {
        self.encoders().latent_dim()
    }

    fn param_count(&self) -> usize {
        self.encoders().param_count() + self.head_params().len()
    }

    fn fuse_batch(&self, obs: &[Matrix]) -> Result<(Matrix, FusionCache)> {
        self.fuse_batch_owned(obs.to_vec())
    }

    /// Same as `fuse_batch` but moves the inputs into the cache.
    fn fuse_batch_owned(&self, obs: Vec<Matrix>) -> Result<(Matrix, FusionCache)> {
        let (latents, encoders) = self.encoders().encode_batch_owned(obs)?;
        let (z, projection) = self.combine(&latents)?;
        Ok((
            z,
            FusionCache {
                encoders,
                latents,
                projection,
            },
        ))
    }

    fn predict_batch(&self, obs: &[Matrix]) -> Result<Matrix> {
        let latents = self.encoders().predict_batch(obs)?;
        Ok(self.combine(&latents)?.0)
    }

    fn backward(&self, cache: &FusionCache, dz: &Matrix) -> Result<BaselineGrads> {
        let (head, dlat) = self.combine_backward(&cache.latents, cache.projection.as_ref(), dz)?;
        let encoders = self.encoders().backward(&cache.encoders, &dlat)?;
        Ok(BaselineGrads { encoders, head })
    }

    fn fuse(&self, obs: &MultiModalObservation) -> Result<LatentState> {
        let latents = self
            .encoders()
            .encode_all(obs)?
            .into_iter()
            .map(|z| Matrix::row_vector(&z.0))
            .collect::<Vec<_>>();
        Ok(LatentState(self.combine(&latents)?.0.into_vec()))
    }

    fn write_into(&self, ck: &mut Checkpoint) {
        ck.set_meta("kind", self.kind_name());
        write_encoders(self.encoders(), ck);
        ck.push_vector("head", self.head_params());
    }
}

fn require_modalities(input_dims: &[usize]) -> Result<()> {
    if input_dims.is_empty() {
        return Err(Error::Config("need at least one modality".into()));
    }
    Ok(())
}

/// `z = Σ_i W_i ⊙ φ_i(o_i)` with one weight per modality and latent dimension.
#[derive(Debug, Clone, PartialEq)]
pub struct LinearCombFusion {
    pub encoders: EncoderSet,
    /// Row-major `N × d_z`.
    pub mix: Vec<f64>,
}

impl LinearCombFusion {
    /// Mixing weights start at `1/N`, so the initial output is the mean encoding.
    pub fn new<R: Rng + ?Sized>(
        input_dims: &[usize],
        hidden: &[usize],
        latent_dim: usize,
        rng: &mut R,
    ) -> Result<Self> {
        require_modalities(input_dims)?;
        let encoders = EncoderSet::new(input_dims, hidden, latent_dim, rng)?;
        let n = encoders.len();
        Self::from_parts(encoders, vec![1.0 / n as f64; n * latent_dim])
    }

    pub fn from_parts(encoders: EncoderSet, mix: Vec<f64>) -> Result<Self> {
        ensure_len("mixing weights", encoders.len() * encoders.latent_dim(), mix.len())?;
        Ok(LinearCombFusion { encoders, mix })
    }

    pub fn from_checkpoint(ck: &Checkpoint) -> Result<Self> {
        Self::from_parts(read_encoders(ck)?, ck.vector("head")?.to_vec())
    }
}

impl BaselineFusion for LinearCombFusion {
    fn kind_name(&self) -> &'static str {
        "linearcomb"
    }

    fn encoders(&self) -> &EncoderSet {
        &self.encoders
    }

    fn encoders_mut(&mut self) -> &mut EncoderSet {
        &mut self.encoders
    }

    fn head_params(&self) -> &[f64] {
        &self.mix
    }

    fn head_params_mut(&mut self) -> &mut [f64] {
        &mut self.mix
    }

    fn combine(&self, latents: &[Matrix]) -> Result<(Matrix, Option<MlpCache>)> {
        let d = self.latent_dim();
        ensure_len("modality latents", self.encoders.len(), latents.len())?;
        let rows = latents[0].rows();
        let mut z = Matrix::zeros(rows, d);
        for (i, li) in latents.iter().enumerate() {
            ensure_len("latent width", d, li.cols())?;
            let w = &self.mix[i * d..(i + 1) * d];
            for r in 0..rows {
                for ((o, &v), &wv) in z.row_mut(r).iter_mut().zip(li.row(r)).zip(w) {
                    *o += wv * v;
                }
            }
        }
        Ok((z, None))
    }

    fn combine_backward(
        &self,
        latents: &[Matrix],
        _projection: Option<&MlpCache>,
        dz: &Matrix,
    ) -> Result<(Vec<f64>, Vec<Matrix>)> {
        let d = self.latent_dim();
        let mut dmix = vec![0.0; self.mix.len()];
        let mut dlat = Vec::with_capacity(latents.len());
        for (i, li) in latents.iter().enumerate() {
            let w = &self.mix[i * d..(i + 1) * d];
            let mut g = Matrix::zeros(li.rows(), d);
            for r in 0..li.rows() {
                for j in 0..d {
                    dmix[i * d + j] += dz.get(r, j) * li.get(r, j);
                    g.set(r, j, w[j] * dz.get(r, j));
                }
            }
            dlat.push(g);
        }
        Ok((dmix, dlat))
    }
}

/// `z = P·concat(φ_1(o_1), …, φ_N(o_N)) + b`.
#[derive(Debug, Clone, PartialEq)]
pub struct ConcatFusion {
    pub encoders: EncoderSet,
    pub projection: Mlp,
}

impl ConcatFusion {
    pub fn new<R: Rng + ?Sized>(
        input_dims: &[usize],
        hidden: &[usize],
        latent_dim: usize,
        rng: &mut R,
    ) -> Result<Self> {
        require_modalities(input_dims)?;
        let encoders = EncoderSet::new(input_dims, hidden, latent_dim, rng)?;
        let spec = MlpSpec::new(&[input_dims.len() * latent_dim, latent_dim], Activation::Identity);
        let projection = Mlp::init_with_rng(&spec, rng)?;
        Self::from_parts(encoders, projection)
    }

    pub fn from_parts(encoders: EncoderSet, projection: Mlp) -> Result<Self> {
        let d = encoders.latent_dim();
        ensure_len("projection input", encoders.len() * d, projection.input_dim())?;
        ensure_len("projection output", d, projection.output_dim())?;
        Ok(ConcatFusion {
            encoders,
            projection,
        })
    }

    pub fn from_checkpoint(ck: &Checkpoint) -> Result<Self> {
        let encoders = read_encoders(ck)?;
        let d = encoders.latent_dim();
        let spec = MlpSpec::new(&[encoders.len() * d, d], Activation::Identity);
        let projection = Mlp::from_params(&spec, ck.vector("head")?.to_vec())?;
        Self::from_parts(encoders, projection)
    }
}

impl BaselineFusion for ConcatFusion {
    fn kind_name(&self) -> &'static str {
        "concat"
    }

    fn encoders(&self) -> &EncoderSet {
        &self.encoders
    }

    fn encoders_mut(&mut self) -> &mut EncoderSet {
        &mut self.encoders
    }

    fn head_params(&self) -> &[f64] {
        self.projection.params()
    }

    fn head_params_mut(&mut self) -> &mut [f64] {
        self.projection.params_mut()
    }

    fn combine(&self, latents: &[Matrix]) -> Result<(Matrix, Option<MlpCache>)> {
        ensure_len("modality latents", self.encoders.len(), latents.len())?;
        let mut cat = latents[0].clone();
        for l in &latents[1..] {
            cat = cat.hstack(l)?;
        }
        let (z, cache) = self.projection.forward_batch(&cat)?;
        Ok((z, Some(cache)))
    }

    fn combine_backward(
        &self,
        _latents: &[Matrix],
        projection: Option<&MlpCache>,
        dz: &Matrix,
    ) -> Result<(Vec<f64>, Vec<Matrix>)> {
        let cache = projection
            .ok_or_else(|| Error::Usage("concat backward needs the projection cache".into()))?;
        let (grads, dcat) = self.projection.backward(cache, dz)?;
        let d = self.latent_dim();
        let dlat = (0..self.encoders.len())
            .map(|i| dcat.slice_cols(i * d, (i + 1) * d))
            .collect();
        Ok((grads, dlat))
    }
}

/// Adapts a baseline to the estimator interface. The previous action is
/// accepted and ignored.
#[derive(Debug, Clone, Copy)]
pub struct BaselineEstimator<'a> {
    model: &'a dyn BaselineFusion,
}

impl<'a> BaselineEstimator<'a> {
    pub fn new(model: &'a dyn BaselineFusion) -> Self {
        BaselineEstimator { model }
    }
}

impl StateEstimator for BaselineEstimator<'_> {
    fn reset(&mut self) {}

    fn estimate(
        &mut self,
        obs: &MultiModalObservation,
        _prev_action: Option<&[f64]>,
    ) -> Result<LatentState> {
        self.model.fuse(obs)
    }
}

/// Loads whichever baseline the checkpoint's `kind` names.
pub fn baseline_from_checkpoint(ck: &Checkpoint) -> Result<Box<dyn BaselineFusion>> {
    match ck.meta("kind") {
        Some("linearcomb") => Ok(Box::new(LinearCombFusion::from_checkpoint(ck)?)),
        Some("concat") => Ok(Box::new(ConcatFusion::from_checkpoint(ck)?)),
        other => Err(Error::Format(format!("checkpoint kind {other:?} is not a baseline"))),
    }
}

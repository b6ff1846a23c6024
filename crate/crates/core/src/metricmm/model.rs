//! Encoders, latent transition model, and the combined representation
//! objective with exact gradients.

use rand::Rng;

use super::checkpoint::Checkpoint;
use super::fusion::FusionConfig;
use super::losses::{LossWeights, LOG_EPS};
use crate::diffcore::{Activation, Matrix, Mlp, MlpCache, MlpSpec};
use crate::envs::MultiModalObservation;
use crate::error::{ensure_len, Error, Result};

/// A point in the learned metric space.
#[derive(Debug, Clone, PartialEq)]
pub struct LatentState(pub Vec<f64>);

impl LatentState {
    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }

    pub fn distance(&self, other: &LatentState) -> f64 {
        super::fusion::euclidean(&self.0, &other.0)
    }

    pub fn is_finite(&self) -> bool {
        self.0.iter().all(|v| v.is_finite())
    }
}

fn network_spec(input: usize, hidden: &[usize], output: usize) -> MlpSpec {
    let mut sizes = Vec::with_capacity(hidden.len() + 2);
    sizes.push(input);
    sizes.extend_from_slice(hidden);
    sizes.push(output);
    MlpSpec::new(&sizes, Activation::Relu)
}

/// One encoder per modality, all mapping into the same latent dimension.
#[derive(Debug, Clone, PartialEq)]
pub struct EncoderSet {
    encoders: Vec<Mlp>,
    latent_dim: usize,
}

impl EncoderSet {
    pub fn new<R: Rng + ?Sized>(
        input_dims: &[usize],
        hidden: &[usize],
        latent_dim: usize,
        rng: &mut R,
    ) -> Result<Self> {
        let encoders = input_dims
            .iter()
            .map(|&d| Mlp::init_with_rng(&network_spec(d, hidden, latent_dim), rng))
            .collect::<Result<Vec<_>>>()?;
        Self::from_networks(encoders)
    }

    pub fn from_networks(encoders: Vec<Mlp>) -> Result<Self> {
        let latent_dim = encoders
            .first()
            .ok_or_else(|| Error::Config("need at least one modality encoder".into()))?
            .output_dim();
        for e in &encoders {
            ensure_len("encoder output dimension", latent_dim, e.output_dim())?;
        }
        Ok(EncoderSet {
            encoders,
            latent_dim,
        })
    }

    pub fn len(&self) -> usize {
        self.encoders.len()
    }

    pub fn is_empty(&self) -> bool {
        self.encoders.is_empty()
    }

    pub fn latent_dim(&self) -> usize {
        self.latent_dim
    }

    pub fn input_dims(&self) -> Vec<usize> {
        self.encoders.iter().map(Mlp::input_dim).collect()
    }

    pub fn networks(&self) -> &[Mlp] {
        &self.encoders
    }

    pub fn networks_mut(&mut self) -> &mut [Mlp] {
        &mut self.encoders
    }

    pub fn param_count(&self) -> usize {
        self.encoders.iter().map(Mlp::param_count).sum()
    }

    pub fn encode_modality(&self, i: usize, obs: &[f64]) -> Result<LatentState> {
        let enc = self.encoders.get(i).ok_or_else(|| {
            Error::Usage(format!("no encoder for modality {i} ({} encoders)", self.len()))
        })?;
        Ok(LatentState(enc.predict_one(obs)?))
    }

    /// Encodes every modality of `obs`.
    pub fn encode_all(&self, obs: &MultiModalObservation) -> Result<Vec<LatentState>> {
        if obs.num_modalities() != self.len() {
            return Err(Error::Usage(format!(
                "observation has {} modalities, model expects {}",
                obs.num_modalities(),
                self.len()
            )));
        }
        (0..self.len())
            .map(|i| self.encode_modality(i, obs.modality(i)))
            .collect()
    }

    /// Average of the per-modality encodings.
    pub fn mean_encode(&self, obs: &MultiModalObservation) -> Result<LatentState> {
        Ok(mean_latent(&self.encode_all(obs)?))
    }

    /// Batched forward pass; `obs[i]` holds one row per sample for modality `i`.
    pub fn encode_batch(&self, obs: &[Matrix]) -> Result<(Vec<Matrix>, Vec<MlpCache>)> {
        self.encode_batch_owned(obs.to_vec())
    }

    /// Same as [`EncoderSet::encode_batch`] but moves the inputs into the caches.
    pub fn encode_batch_owned(&self, obs: Vec<Matrix>) -> Result<(Vec<Matrix>, Vec<MlpCache>)> {
        ensure_len("modality batches", self.len(), obs.len())?;
        let mut latents = Vec::with_capacity(self.len());
        let mut caches = Vec::with_capacity(self.len());
        for (enc, x) in self.encoders.iter().zip(obs) {
            let (z, c) = enc.forward_batch_owned(x)?;
            latents.push(z);
            caches.push(c);
        }
        Ok((latents, caches))
    }

    /// Batched forward pass without caches.
    pub fn predict_batch(&self, obs: &[Matrix]) -> Result<Vec<Matrix>> {
        ensure_len("modality batches", self.len(), obs.len())?;
        self.encoders.iter().zip(obs).map(|(e, x)| e.predict(x)).collect()
    }

    /// Parameter gradients of every encoder given latent gradients.
    pub fn backward(&self, caches: &[MlpCache], d_latents: &[Matrix]) -> Result<Vec<Vec<f64>>> {
        ensure_len("encoder caches", self.len(), caches.len())?;
        ensure_len("latent gradients", self.len(), d_latents.len())?;
        self.encoders
            .iter()
            .zip(caches)
            .zip(d_latents)
            .map(|((enc, c), g)| {
                let mut grads = enc.zero_grads();
                enc.backward_accumulate(c, g, &mut grads, false)?;
                Ok(grads)
            })
            .collect()
    }
}

pub fn mean_latent(latents: &[LatentState]) -> LatentState {
    let d = latents.first().map_or(0, LatentState::dim);
    let mut out = vec![0.0; d];
    for z in latents {
        for (o, v) in out.iter_mut().zip(&z.0) {
            *o += v;
        }
    }
    let n = latents.len().max(1) as f64;
    out.iter_mut().for_each(|v| *v /= n);
    LatentState(out)
}

fn mean_rows(latents: &[Matrix]) -> Matrix {
    let mut out = latents[0].clone();
    for z in &latents[1..] {
        out.add_assign(z).expect("encoders share shapes");
    }
    out.scale(1.0 / latents.len() as f64);
    out
}

/// Latent dynamics `ẑ = φ_T(z, a)`.
#[derive(Debug, Clone, PartialEq)]
pub struct TransitionModel {
    net: Mlp,
    latent_dim: usize,
    action_dim: usize,
}

impl TransitionModel {
    pub fn new<R: Rng + ?Sized>(
        latent_dim: usize,
        action_dim: usize,
        hidden: &[usize],
        rng: &mut R,
    ) -> Result<Self> {
        let net = Mlp::init_with_rng(&network_spec(latent_dim + action_dim, hidden, latent_dim), rng)?;
        Self::from_network(net, latent_dim, action_dim)
    }

    pub fn from_network(net: Mlp, latent_dim: usize, action_dim: usize) -> Result<Self> {
        ensure_len("transition input", latent_dim + action_dim, net.input_dim())?;
        ensure_len("transition output", latent_dim, net.output_dim())?;
        Ok(TransitionModel {
            net,
            latent_dim,
            action_dim,
        })
    }

    pub fn network(&self) -> &Mlp {
        &self.net
    }

    pub fn network_mut(&mut self) -> &mut Mlp {
        &mut self.net
    }

    pub fn latent_dim(&self) -> usize {
        self.latent_dim
    }

    pub fn action_dim(&self) -> usize {
        self.action_dim
    }

    pub fn predict(&self, z: &LatentState, action: &[f64]) -> Result<LatentState> {
        ensure_len("transition latent", self.latent_dim, z.dim())?;
        ensure_len("transition action", self.action_dim, action.len())?;
        let mut input = Vec::with_capacity(self.latent_dim + self.action_dim);
        input.extend_from_slice(&z.0);
        input.extend_from_slice(action);
        Ok(LatentState(self.net.predict_one(&input)?))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RepresentationConfig {
    pub latent_dim: usize,
    pub encoder_hidden: Vec<usize>,
    pub transition_hidden: Vec<usize>,
    pub weights: LossWeights,
    pub fusion: FusionConfig,
}

impl Default for RepresentationConfig {
    fn default() -> Self {
        RepresentationConfig {
            latent_dim: 16,
            encoder_hidden: vec![64, 64],
            transition_hidden: vec![64, 64],
            weights: LossWeights::default(),
            fusion: FusionConfig::default(),
        }
    }
}

/// Encoders plus transition model, trained with the metric objective.
#[derive(Debug, Clone, PartialEq)]
pub struct RepresentationModel {
    pub encoders: EncoderSet,
    pub transition: TransitionModel,
    pub weights: LossWeights,
    pub fusion: FusionConfig,
}

/// Transitions `(o_t, a_t, o_{t+1})`, one row per sample.
#[derive(Debug, Clone)]
pub struct RepresentationBatch {
    pub obs: Vec<Matrix>,
    pub actions: Matrix,
    pub next_obs: Vec<Matrix>,
}

impl RepresentationBatch {
    pub fn len(&self) -> usize {
        self.actions.rows()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

/// Encodings of `o_t` and `o_{t+1}` for a batch, with backprop caches.
/// Rows `0..B` hold time `t`, rows `B..2B` hold time `t+1`.
#[derive(Debug, Clone)]
pub struct EncodedPairs {
    pub latents: Vec<Matrix>,
    caches: Vec<MlpCache>,
    pub mean_t: Matrix,
    pub mean_next: Matrix,
    batch: usize,
}

impl EncodedPairs {
    pub fn batch_size(&self) -> usize {
        self.batch
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct LossReport {
    pub total: f64,
    pub transition: f64,
    pub positive: f64,
    pub negative: f64,
    pub invariance: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RepresentationGrads {
    pub encoders: Vec<Vec<f64>>,
    pub transition: Vec<f64>,
}

impl RepresentationModel {
    pub fn new<R: Rng + ?Sized>(
        input_dims: &[usize],
        action_dim: usize,
        config: &RepresentationConfig,
        rng: &mut R,
    ) -> Result<Self> {
        if config.latent_dim == 0 {
            return Err(Error::Config("latent dimension must be ≥ 1".into()));
        }
        config.weights.validate()?;
        config.fusion.validate()?;
        let encoders = EncoderSet::new(input_dims, &config.encoder_hidden, config.latent_dim, rng)?;
        let transition =
            TransitionModel::new(config.latent_dim, action_dim, &config.transition_hidden, rng)?;
        Ok(RepresentationModel {
            encoders,
            transition,
            weights: config.weights,
            fusion: config.fusion,
        })
    }

    pub fn latent_dim(&self) -> usize {
        self.encoders.latent_dim()
    }

    pub fn num_modalities(&self) -> usize {
        self.encoders.len()
    }

    pub fn encode_pairs(&self, batch: &RepresentationBatch) -> Result<EncodedPairs> {
        let b = batch.len();
        ensure_len("modality batches", self.encoders.len(), batch.obs.len())?;
        ensure_len("next modality batches", self.encoders.len(), batch.next_obs.len())?;
        let stacked = batch
            .obs
            .iter()
            .zip(&batch.next_obs)
            .map(|(o, n)| {
                ensure_len("observation rows", b, o.rows())?;
                ensure_len("next observation rows", b, n.rows())?;
                o.vstack(n)
            })
            .collect::<Result<Vec<_>>>()?;
        self.encode_stacked(stacked)
    }

    /// Like [`RepresentationModel::encode_pairs`] for observations already
    /// stacked per modality: the first half of the rows holds `o_t` and the
    /// second half `o_{t+1}`.
    pub fn encode_stacked(&self, stacked: Vec<Matrix>) -> Result<EncodedPairs> {
        ensure_len("modality batches", self.encoders.len(), stacked.len())?;
        let rows = stacked.first().map_or(0, Matrix::rows);
        for m in &stacked {
            ensure_len("stacked rows", rows, m.rows())?;
        }
        if !rows.is_multiple_of(2) {
            return Err(Error::Usage(format!("stacked batch has an odd row count {rows}")));
        }
        let b = rows / 2;
        let (latents, caches) = self.encoders.encode_batch_owned(stacked)?;
        let mean = mean_rows(&latents);
        Ok(EncodedPairs {
            mean_t: mean.slice_rows(0, b),
            mean_next: mean.slice_rows(b, 2 * b),
            latents,
            caches,
            batch: b,
        })
    }

    /// Combined loss `L_T + λ1·L+ + λ2·L− + λ3·L_inv` averaged over the batch,
    /// with gradients for every encoder and the transition model.
    ///
    /// `negatives[b]` names the in-batch partner of sample `b` for `L−`.
    /// `extra_dmean_t`, when given, is added to the gradient with respect to
    /// the mean encodings of `o_t` (used to route RL gradients into the
    /// encoders).
    pub fn loss_and_grads(
        &self,
        enc: &EncodedPairs,
        actions: &Matrix,
        negatives: &[usize],
        extra_dmean_t: Option<&Matrix>,
    ) -> Result<(LossReport, RepresentationGrads)> {
        let b = enc.batch;
        let d = self.latent_dim();
        let n = self.encoders.len();
        ensure_len("action rows", b, actions.rows())?;
        ensure_len("negative indices", b, negatives.len())?;
        if b == 0 {
            return Err(Error::Usage("empty representation batch".into()));
        }
        let inv_b = 1.0 / b as f64;
        let w = self.weights;

        let mut d_mean_t = Matrix::zeros(b, d);
        let mut d_mean_next = Matrix::zeros(b, d);
        let mut report = LossReport::default();

        // L+ on successive mean encodings
        for r in 0..b {
            let zt = enc.mean_t.row(r);
            let zn = enc.mean_next.row(r);
            let dist = super::fusion::euclidean(zt, zn);
            report.positive += (dist - 1.0) * (dist - 1.0) * inv_b;
            if dist > 0.0 && w.positive != 0.0 {
                let k = w.positive * 2.0 * (dist - 1.0) / dist * inv_b;
                for j in 0..d {
                    let g = k * (zn[j] - zt[j]);
                    d_mean_next.row_mut(r)[j] += g;
                    d_mean_t.row_mut(r)[j] -= g;
                }
            }
        }

        // L− against in-batch partners
        for (r, &partner) in negatives.iter().enumerate() {
            if partner >= b {
                return Err(Error::Usage(format!("negative index {partner} ≥ batch {b}")));
            }
            let zt = enc.mean_t.row(r).to_vec();
            let zr = enc.mean_t.row(partner).to_vec();
            let dist = super::fusion::euclidean(&zt, &zr);
            report.negative += -dist.max(LOG_EPS).ln() * inv_b;
            if dist > LOG_EPS && w.negative != 0.0 {
                let k = w.negative * inv_b / (dist * dist);
                for j in 0..d {
                    let g = k * (zr[j] - zt[j]);
                    d_mean_t.row_mut(partner)[j] -= g;
                    d_mean_t.row_mut(r)[j] += g;
                }
            }
        }

        // L_T through the transition model
        let input = enc.mean_t.hstack(actions)?;
        let tnet = self.transition.network();
        let (pred, tcache) = tnet.forward_batch(&input)?;
        let mut d_pred = Matrix::zeros(b, d);
        let scale = 2.0 / (d as f64) * inv_b;
        for r in 0..b {
            for j in 0..d {
                let diff = pred.get(r, j) - enc.mean_next.get(r, j);
                report.transition += diff * diff / d as f64 * inv_b;
                d_pred.set(r, j, scale * diff);
                d_mean_next.row_mut(r)[j] -= scale * diff;
            }
        }
        let mut transition_grads = tnet.zero_grads();
        let d_input = tnet
            .backward_accumulate(&tcache, &d_pred, &mut transition_grads, true)?
            .expect("input gradient requested");
        for r in 0..b {
            for j in 0..d {
                d_mean_t.row_mut(r)[j] += d_input.get(r, j);
            }
        }

        if let Some(extra) = extra_dmean_t {
            d_mean_t.add_assign(extra)?;
        }

        // Per-modality latent gradients: mean path plus invariance on o_t rows.
        let mut d_latents: Vec<Matrix> = (0..n)
            .map(|_| {
                let mut m = Matrix::zeros(2 * b, d);
                for r in 0..b {
                    for j in 0..d {
                        m.set(r, j, d_mean_t.get(r, j) / n as f64);
                        m.set(b + r, j, d_mean_next.get(r, j) / n as f64);
                    }
                }
                m
            })
            .collect();
        if n >= 2 {
            let pairs = (n * (n - 1) / 2) as f64;
            let k = 2.0 / (d as f64 * pairs) * inv_b;
            for i in 0..n {
                for jm in i + 1..n {
                    for r in 0..b {
                        for j in 0..d {
                            let diff = enc.latents[i].get(r, j) - enc.latents[jm].get(r, j);
                            report.invariance += diff * diff / (d as f64 * pairs) * inv_b;
                            if w.invariance != 0.0 {
                                let g = w.invariance * k * diff;
                                d_latents[i].row_mut(r)[j] += g;
                                d_latents[jm].row_mut(r)[j] -= g;
                            }
                        }
                    }
                }
            }
        }

        let encoder_grads = self.encoders.backward(&enc.caches, &d_latents)?;
        report.total = report.transition
            + w.positive * report.positive
            + w.negative * report.negative
            + w.invariance * report.invariance;
        Ok((
            report,
            RepresentationGrads {
                encoders: encoder_grads,
                transition: transition_grads,
            },
        ))
    }

    pub fn total_representation_loss(
        &self,
        batch: &RepresentationBatch,
        negatives: &[usize],
    ) -> Result<(LossReport, RepresentationGrads)> {
        let enc = self.encode_pairs(batch)?;
        self.loss_and_grads(&enc, &batch.actions, negatives, None)
    }

    pub fn param_count(&self) -> usize {
        self.encoders.param_count() + self.transition.network().param_count()
    }

    /// Stores encoders, transition model and their metadata in `ck`.
    pub fn write_into(&self, ck: &mut Checkpoint) {
        write_encoders(&self.encoders, ck);
        ck.set_meta("action_dim", self.transition.action_dim());
        ck.set_meta("delta", self.fusion.delta);
        ck.set_meta("lambda1", self.weights.positive);
        ck.set_meta("lambda2", self.weights.negative);
        ck.set_meta("lambda3", self.weights.invariance);
        ck.push_net("transition", self.transition.network());
    }

    pub fn from_checkpoint(ck: &Checkpoint) -> Result<Self> {
        let encoders = read_encoders(ck)?;
        let action_dim: usize = ck.meta_parse("action_dim")?;
        let transition = TransitionModel::from_network(
            ck.net("transition")?.clone(),
            encoders.latent_dim(),
            action_dim,
        )?;
        let weights = LossWeights {
            positive: ck.meta_parse("lambda1")?,
            negative: ck.meta_parse("lambda2")?,
            invariance: ck.meta_parse("lambda3")?,
        };
        let fusion = FusionConfig {
            delta: ck.meta_parse("delta")?,
        };
        weights.validate()?;
        fusion.validate()?;
        Ok(RepresentationModel {
            encoders,
            transition,
            weights,
            fusion,
        })
    }
}

/// Stores the encoders as `encoder{i}` plus `n_modalities`, `latent_dim` and
/// `input_dims` metadata.
pub fn write_encoders(encoders: &EncoderSet, ck: &mut Checkpoint) {
    ck.set_meta("n_modalities", encoders.len());
    ck.set_meta("latent_dim", encoders.latent_dim());
    let dims: Vec<String> = encoders.input_dims().iter().map(|d| d.to_string()).collect();
    ck.set_meta("input_dims", dims.join(","));
    for (i, e) in encoders.networks().iter().enumerate() {
        ck.push_net(format!("encoder{i}"), e);
    }
}

pub fn read_encoders(ck: &Checkpoint) -> Result<EncoderSet> {
    let n: usize = ck.meta_parse("n_modalities")?;
    let dims: Vec<usize> = ck.meta_list("input_dims")?;
    ensure_len("checkpoint input_dims", n, dims.len())?;
    let nets = (0..n)
        .map(|i| ck.net(&format!("encoder{i}")).cloned())
        .collect::<Result<Vec<_>>>()?;
    for (net, &d) in nets.iter().zip(&dims) {
        ensure_len("checkpoint encoder input", d, net.input_dim())?;
    }
    let set = EncoderSet::from_networks(nets)?;
    ensure_len("checkpoint latent_dim", ck.meta_parse("latent_dim")?, set.latent_dim())?;
    Ok(set)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::diffcore::{numeric_gradient, relative_error};
    use crate::metricmm::losses::{loss_invariance, loss_negative, loss_positive, loss_transition};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn small_model(seed: u64, weights: LossWeights) -> RepresentationModel {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let cfg = RepresentationConfig {
            latent_dim: 3,
            encoder_hidden: vec![5],
            transition_hidden: vec![6],
            weights,
            fusion: FusionConfig::default(),
        };
        let mut m = RepresentationModel::new(&[4, 2], 2, &cfg, &mut rng).unwrap();
        // Tanh avoids kinks so finite differences are clean
        for e in m.encoders.networks_mut() {
            let spec = MlpSpec::new(&e.spec().layer_sizes, Activation::Tanh);
            *e = Mlp::from_params(&spec, e.params().to_vec()).unwrap();
        }
        let t = m.transition.network().clone();
        *m.transition.network_mut() =
            Mlp::from_params(&MlpSpec::new(&t.spec().layer_sizes, Activation::Tanh), t.params().to_vec()).unwrap();
        m
    }

    fn random_batch(b: usize, seed: u64) -> RepresentationBatch {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut mat = |r: usize, c: usize| {
            Matrix::from_vec(r, c, (0..r * c).map(|_| rng.random_range(-1.0..1.0)).collect()).unwrap()
        };
        RepresentationBatch {
            obs: vec![mat(b, 4), mat(b, 2)],
            actions: mat(b, 2),
            next_obs: vec![mat(b, 4), mat(b, 2)],
        }
    }

    /// Loss recomputed sample by sample from the scalar loss functions.
    fn reference_loss(m: &RepresentationModel, batch: &RepresentationBatch, neg: &[usize]) -> LossReport {
        let b = batch.len();
        let row_obs = |obs: &[Matrix], r: usize| {
            MultiModalObservation::new(obs.iter().map(|o| o.row(r).to_vec()).collect())
        };
        let mut rep = LossReport::default();
        let means: Vec<LatentState> =
            (0..b).map(|r| m.encoders.mean_encode(&row_obs(&batch.obs, r)).unwrap()).collect();
        for r in 0..b {
            let zn = m.encoders.mean_encode(&row_obs(&batch.next_obs, r)).unwrap();
            rep.positive += loss_positive(&means[r].0, &zn.0).unwrap() / b as f64;
            rep.negative += loss_negative(&means[r].0, &means[neg[r]].0).unwrap() / b as f64;
            let pred = m.transition.predict(&means[r], batch.actions.row(r)).unwrap();
            rep.transition += loss_transition(&pred.0, &zn.0).unwrap() / b as f64;
            let each = m.encoders.encode_all(&row_obs(&batch.obs, r)).unwrap();
            let each: Vec<Vec<f64>> = each.into_iter().map(|z| z.0).collect();
            rep.invariance += loss_invariance(&each).unwrap() / b as f64;
        }
        let w = m.weights;
        rep.total = rep.transition + w.positive * rep.positive + w.negative * rep.negative + w.invariance * rep.invariance;
        rep
    }

    #[test]
    fn batched_loss_matches_scalar_definitions() {
        let m = small_model(1, LossWeights { positive: 0.7, negative: 1.3, invariance: 0.4 });
        let batch = random_batch(6, 2);
        let neg = [3, 0, 5, 1, 2, 4];
        let (rep, _) = m.total_representation_loss(&batch, &neg).unwrap();
        let want = reference_loss(&m, &batch, &neg);
        for (a, b) in [
            (rep.total, want.total),
            (rep.transition, want.transition),
            (rep.positive, want.positive),
            (rep.negative, want.negative),
            (rep.invariance, want.invariance),
        ] {
            assert!((a - b).abs() < 1e-12, "{a} vs {b}");
        }
    }

    #[test]
    fn gradients_match_finite_differences() {
        let m = small_model(3, LossWeights { positive: 1.0, negative: 0.5, invariance: 2.0 });
        let batch = random_batch(4, 5);
        let neg = [2, 3, 1, 0];
        let (_, grads) = m.total_representation_loss(&batch, &neg).unwrap();

        let mut worst: f64 = 0.0;
        for i in 0..m.encoders.len() {
            let mut p = m.encoders.networks()[i].params().to_vec();
            let num = numeric_gradient(&mut p, 1e-5, |q| {
                let mut mm = m.clone();
                mm.encoders.networks_mut()[i].params_mut().copy_from_slice(q);
                mm.total_representation_loss(&batch, &neg).unwrap().0.total
            });
            for (a, n) in grads.encoders[i].iter().zip(&num) {
                worst = worst.max(relative_error(*a, *n));
            }
        }
        let mut p = m.transition.network().params().to_vec();
        let num = numeric_gradient(&mut p, 1e-5, |q| {
            let mut mm = m.clone();
            mm.transition.network_mut().params_mut().copy_from_slice(q);
            mm.total_representation_loss(&batch, &neg).unwrap().0.total
        });
        for (a, n) in grads.transition.iter().zip(&num) {
            worst = worst.max(relative_error(*a, *n));
        }
        assert!(worst <= 1e-4, "max relative error {worst}");
    }

    #[test]
    fn zero_weights_leave_transition_loss() {
        let w0 = LossWeights { positive: 0.0, negative: 0.0, invariance: 0.0 };
        let m = small_model(4, w0);
        let batch = random_batch(5, 6);
        let neg = [1, 2, 3, 4, 0];
        let (rep, _) = m.total_representation_loss(&batch, &neg).unwrap();
        assert_eq!(rep.total, rep.transition);
    }

    #[test]
    fn doubling_lambda1_adds_positive_term() {
        let base = small_model(5, LossWeights::default());
        let mut doubled = base.clone();
        doubled.weights.positive = 2.0;
        let batch = random_batch(5, 7);
        let neg = [4, 3, 2, 1, 0];
        let (a, _) = base.total_representation_loss(&batch, &neg).unwrap();
        let (b, _) = doubled.total_representation_loss(&batch, &neg).unwrap();
        assert!((b.total - a.total - a.positive).abs() < 1e-12);
    }

    #[test]
    fn checkpoint_round_trip() {
        let m = small_model(9, LossWeights { positive: 0.0, negative: 0.0, invariance: 1.0 });
        let mut ck = Checkpoint::new();
        m.write_into(&mut ck);
        let mut buf = Vec::new();
        ck.write_to(&mut buf).unwrap();
        let back = RepresentationModel::from_checkpoint(&Checkpoint::read_from(&mut buf.as_slice()).unwrap()).unwrap();
        assert_eq!(back, m);
    }

    #[test]
    fn encoders_and_transition_basics() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let zero = EncoderSet::from_networks(vec![
            Mlp::zeros(&MlpSpec::new(&[3, 4, 2], Activation::Relu)).unwrap(),
        ])
        .unwrap();
        assert_eq!(zero.encode_modality(0, &[1.0, 2.0, 3.0]).unwrap().0, vec![0.0, 0.0]);

        // identity encoder on a 2-d input
        let id = Mlp::from_params(&MlpSpec::new(&[2, 2], Activation::Identity), vec![1.0, 0.0, 0.0, 1.0, 0.0, 0.0]).unwrap();
        let set = EncoderSet::from_networks(vec![id.clone()]).unwrap();
        assert_eq!(set.encode_modality(0, &[1.0, 2.0]).unwrap().0, vec![1.0, 2.0]);
        let obs = MultiModalObservation::new(vec![vec![1.0, 2.0]]);
        assert_eq!(set.mean_encode(&obs).unwrap(), set.encode_modality(0, &[1.0, 2.0]).unwrap());

        // constant encoders (1, 0) and (0, 1) average to (0.5, 0.5)
        let c = |a: f64, b: f64| Mlp::from_params(&MlpSpec::new(&[1, 2], Activation::Identity), vec![0.0, 0.0, a, b]).unwrap();
        let two = EncoderSet::from_networks(vec![c(1.0, 0.0), c(0.0, 1.0)]).unwrap();
        let o = MultiModalObservation::new(vec![vec![3.0], vec![-1.0]]);
        assert_eq!(two.mean_encode(&o).unwrap().0, vec![0.5, 0.5]);
        let swapped = EncoderSet::from_networks(vec![c(0.0, 1.0), c(1.0, 0.0)]).unwrap();
        assert_eq!(swapped.mean_encode(&o).unwrap(), two.mean_encode(&o).unwrap());
        assert!(two.mean_encode(&MultiModalObservation::new(vec![vec![1.0]])).is_err());

        // ẑ = z + a·e₁
        let lin = Mlp::from_params(
            &MlpSpec::new(&[3, 2], Activation::Identity),
            vec![1.0, 0.0, 0.0, 1.0, 1.0, 0.0, 0.0, 0.0],
        )
        .unwrap();
        let t = TransitionModel::from_network(lin, 2, 1).unwrap();
        assert_eq!(t.predict(&LatentState(vec![0.0, 0.0]), &[1.0]).unwrap().0, vec![1.0, 0.0]);
        assert!(t.predict(&LatentState(vec![0.0]), &[1.0]).is_err());

        let zt = TransitionModel::from_network(Mlp::zeros(&MlpSpec::new(&[3, 8, 2], Activation::Relu)).unwrap(), 2, 1).unwrap();
        assert_eq!(zt.predict(&LatentState(vec![4.0, -1.0]), &[0.5]).unwrap().0, vec![0.0, 0.0]);
        let r = TransitionModel::new(2, 1, &[8], &mut rng).unwrap();
        let z = LatentState(vec![0.3, 0.1]);
        assert_eq!(r.predict(&z, &[0.2]).unwrap(), r.predict(&z, &[0.2]).unwrap());
    }
}

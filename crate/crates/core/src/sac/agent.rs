use rand::Rng;
use rand_distr::{Distribution, StandardNormal};

use super::actor::Actor;
use crate::diffcore::{lerp_into, Activation, AdamConfig, AdamState, Matrix, Mlp, MlpSpec};
use crate::error::{ensure_len, Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct SacConfig {
    pub gamma: f64,
    pub tau: f64,
    pub actor_lr: f64,
    pub critic_lr: f64,
    pub alpha_lr: f64,
    pub capacity: usize,
    pub batch_size: usize,
    pub initial_alpha: f64,
    pub num_critics: usize,
    /// Hidden widths shared by actor and critics.
    pub hidden: Vec<usize>,
    /// Defaults to `−action_dim` when unset.
    pub target_entropy: Option<f64>,
}

impl Default for SacConfig {
    fn default() -> Self {
        SacConfig {
            gamma: 0.99,
            tau: 0.005,
            actor_lr: 3e-4,
            critic_lr: 1e-3,
            alpha_lr: 3e-4,
            capacity: 100_000,
            batch_size: 256,
            initial_alpha: 0.1,
            num_critics: 2,
            hidden: vec![64, 64],
            target_entropy: None,
        }
    }
}

impl SacConfig {
    /// Full-size networks (3 × 256).
    pub fn large() -> Self {
        SacConfig {
            hidden: vec![256, 256, 256],
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |f: &str, why: String| Err(Error::Config(format!("sac.{f}: {why}")));
        if !(self.gamma > 0.0 && self.gamma < 1.0) {
            return bad("gamma", format!("{} not in (0, 1)", self.gamma));
        }
        if !(self.tau > 0.0 && self.tau <= 1.0) {
            return bad("tau", format!("{} not in (0, 1]", self.tau));
        }
        for (f, v) in [
            ("actor_lr", self.actor_lr),
            ("critic_lr", self.critic_lr),
            ("alpha_lr", self.alpha_lr),
        ] {
            if !(v >= 0.0 && v.is_finite()) {
                return bad(f, format!("{v} must be ≥ 0"));
            }
        }
        if self.batch_size == 0 {
            return bad("batch_size", "must be ≥ 1".into());
        }
        if self.capacity < self.batch_size {
            return bad(
                "capacity",
                format!("{} below batch size {}", self.capacity, self.batch_size),
            );
        }
        if !(self.initial_alpha > 0.0 && self.initial_alpha.is_finite()) {
            return bad("initial_alpha", format!("{} must be > 0", self.initial_alpha));
        }
        if self.num_critics != 2 {
            return bad("num_critics", format!("{} unsupported, use 2", self.num_critics));
        }
        if self.hidden.contains(&0) {
            return bad("hidden", "widths must be ≥ 1".into());
        }
        Ok(())
    }
}

/// Inputs of one SAC update, already mapped to latents.
#[derive(Debug, Clone)]
pub struct SacBatch {
    pub z: Matrix,
    pub actions: Matrix,
    pub rewards: Vec<f64>,
    pub z_next: Matrix,
    pub dones: Vec<f64>,
}

#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct UpdateReport {
    pub critic_loss: f64,
    pub actor_loss: f64,
    pub alpha: f64,
    /// `−mean log π` of the actor's fresh samples.
    pub entropy: f64,
}

#[derive(Debug, Clone)]
pub struct UpdateOutput {
    pub report: UpdateReport,
    /// Gradient of the critic loss with respect to `batch.z`, when requested.
    pub dz: Option<Matrix>,
}

/// Actor, twin critics with targets, entropy temperature and optimizers.
#[derive(Debug, Clone)]
pub struct SacAgent {
    pub config: SacConfig,
    pub actor: Actor,
    pub critics: [Mlp; 2],
    pub target_critics: [Mlp; 2],
    pub log_alpha: f64,
    pub updates: u64,
    actor_opt: AdamState,
    critic_opts: [AdamState; 2],
    alpha_opt: AdamState,
}

/// `target ← (1−τ)·target + τ·online`.
pub fn soft_update(target: &mut Mlp, online: &Mlp, tau: f64) -> Result<()> {
    ensure_len("soft update layers", online.param_count(), target.param_count())?;
    lerp_into(target.params_mut(), online.params(), tau)
}

impl SacAgent {
    pub fn new<R: Rng + ?Sized>(
        latent_dim: usize,
        action_dim: usize,
        max_action: f64,
        config: SacConfig,
        rng: &mut R,
    ) -> Result<Self> {
        config.validate()?;
        let sizes = |i: usize, o: usize| {
            let mut s = vec![i];
            s.extend_from_slice(&config.hidden);
            s.push(o);
            MlpSpec::new(&s, Activation::Relu)
        };
        let actor = Actor::new(
            Mlp::init_with_rng(&sizes(latent_dim, 2 * action_dim), rng)?,
            max_action,
        )?;
        let q_spec = sizes(latent_dim + action_dim, 1);
        let critics = [Mlp::init_with_rng(&q_spec, rng)?, Mlp::init_with_rng(&q_spec, rng)?];
        Self::from_parts(actor, critics, config.initial_alpha.ln(), config)
    }

    /// Targets start as copies of the online critics.
    pub fn from_parts(actor: Actor, critics: [Mlp; 2], log_alpha: f64, config: SacConfig) -> Result<Self> {
        config.validate()?;
        for c in &critics {
            ensure_len("critic input", actor.latent_dim() + actor.action_dim(), c.input_dim())?;
            ensure_len("critic output", 1, c.output_dim())?;
        }
        let adam = |lr| AdamConfig::with_lr(lr);
        Ok(SacAgent {
            actor_opt: AdamState::new("actor", actor.net.param_count(), adam(config.actor_lr)),
            critic_opts: [
                AdamState::new("critic0", critics[0].param_count(), adam(config.critic_lr)),
                AdamState::new("critic1", critics[1].param_count(), adam(config.critic_lr)),
            ],
            alpha_opt: AdamState::new("log_alpha", 1, adam(config.alpha_lr)),
            target_critics: critics.clone(),
            critics,
            actor,
            log_alpha,
            updates: 0,
            config,
        })
    }

    pub fn alpha(&self) -> f64 {
        self.log_alpha.exp()
    }

    pub fn action_dim(&self) -> usize {
        self.actor.action_dim()
    }

    pub fn latent_dim(&self) -> usize {
        self.actor.latent_dim()
    }

    pub fn target_entropy(&self) -> f64 {
        self.config
            .target_entropy
            .unwrap_or(-(self.action_dim() as f64))
    }

    pub fn act<R: Rng + ?Sized>(&self, z: &[f64], rng: &mut R, deterministic: bool) -> Result<Vec<f64>> {
        Ok(self.actor.sample_action(z, rng, deterministic)?.0)
    }

    fn noise<R: Rng + ?Sized>(&self, rows: usize, rng: &mut R) -> Matrix {
        let d = self.action_dim();
        let data = (0..rows * d).map(|_| StandardNormal.sample(rng)).collect();
        Matrix::from_vec(rows, d, data).expect("sized")
    }

    /// `y = r + γ(1−done)(min_k Q'_k(z', a') − α log π(a'|z'))` with `a'`
    /// freshly sampled.
    pub fn compute_targets<R: Rng + ?Sized>(
        &self,
        z_next: &Matrix,
        rewards: &[f64],
        dones: &[f64],
        rng: &mut R,
    ) -> Result<Vec<f64>> {
        let b = z_next.rows();
        ensure_len("rewards", b, rewards.len())?;
        ensure_len("dones", b, dones.len())?;
        let next = self.actor.sample_with_noise(z_next, &self.noise(b, rng))?;
        let input = z_next.hstack(&next.actions)?;
        let q0 = self.target_critics[0].predict(&input)?;
        let q1 = self.target_critics[1].predict(&input)?;
        let alpha = self.alpha();
        Ok((0..b)
            .map(|r| {
                let soft = q0.get(r, 0).min(q1.get(r, 0)) - alpha * next.log_probs[r];
                rewards[r] + self.config.gamma * (1.0 - dones[r]) * soft
            })
            .collect())
    }

    /// Critic step, actor step, temperature step, then target soft update.
    pub fn update<R: Rng + ?Sized>(&mut self, batch: &SacBatch, rng: &mut R, want_dz: bool) -> Result<UpdateOutput> {
        let step = self.updates;
        let tag = |e: Error| match e {
            Error::Numerical(m) => Error::Numerical(format!("update {step}: {m}")),
            other => other,
        };
        self.update_inner(batch, rng, want_dz).map_err(tag)
    }

    fn update_inner<R: Rng + ?Sized>(&mut self, batch: &SacBatch, rng: &mut R, want_dz: bool) -> Result<UpdateOutput> {
        let b = batch.z.rows();
        if b == 0 {
            return Err(Error::Usage("empty SAC batch".into()));
        }
        ensure_len("batch actions", b, batch.actions.rows())?;
        ensure_len("batch next latents", b, batch.z_next.rows())?;
        let inv_b = 1.0 / b as f64;
        let alpha = self.alpha();
        let lat = self.latent_dim();

        // critics
        let y = self.compute_targets(&batch.z_next, &batch.rewards, &batch.dones, rng)?;
        let input = batch.z.hstack(&batch.actions)?;
        let mut critic_loss = 0.0;
        let mut dz = want_dz.then(|| Matrix::zeros(b, lat));
        for k in 0..2 {
            let (q, cache) = self.critics[k].forward_batch(&input)?;
            let mut g = Matrix::zeros(b, 1);
            for r in 0..b {
                let diff = q.get(r, 0) - y[r];
                critic_loss += diff * diff * inv_b;
                g.set(r, 0, 2.0 * diff * inv_b);
            }
            let mut grads = self.critics[k].zero_grads();
            let dx = self.critics[k].backward_accumulate(&cache, &g, &mut grads, want_dz)?;
            if let (Some(dz), Some(dx)) = (dz.as_mut(), dx) {
                dz.add_assign(&dx.slice_cols(0, lat))?;
            }
            self.critic_opts[k].step(self.critics[k].params_mut(), &grads)?;
        }

        // actor
        let sample = self.actor.sample_with_noise(&batch.z, &self.noise(b, rng))?;
        let pi_input = batch.z.hstack(&sample.actions)?;
        let (q0, c0) = self.critics[0].forward_batch(&pi_input)?;
        let (q1, c1) = self.critics[1].forward_batch(&pi_input)?;
        let mut g0 = Matrix::zeros(b, 1);
        let mut g1 = Matrix::zeros(b, 1);
        let mut actor_loss = 0.0;
        for r in 0..b {
            let (qa, qb) = (q0.get(r, 0), q1.get(r, 0));
            actor_loss += (alpha * sample.log_probs[r] - qa.min(qb)) * inv_b;
            if qa <= qb {
                g0.set(r, 0, -inv_b);
            } else {
                g1.set(r, 0, -inv_b);
            }
        }
        let mut scratch = self.critics[0].zero_grads();
        let da0 = self.critics[0].backward_accumulate(&c0, &g0, &mut scratch, true)?.expect("requested");
        let mut scratch = self.critics[1].zero_grads();
        let da1 = self.critics[1].backward_accumulate(&c1, &g1, &mut scratch, true)?.expect("requested");
        let mut d_actions = da0.slice_cols(lat, pi_input.cols());
        d_actions.add_assign(&da1.slice_cols(lat, pi_input.cols()))?;
        let d_logp = vec![alpha * inv_b; b];
        let actor_grads = self.actor.backward(&sample, &d_actions, &d_logp)?;
        self.actor_opt.step(self.actor.net.params_mut(), &actor_grads)?;

        // temperature
        let mean_logp = sample.log_probs.iter().sum::<f64>() * inv_b;
        let alpha_grad = -(mean_logp + self.target_entropy());
        let mut la = [self.log_alpha];
        self.alpha_opt.step(&mut la, &[alpha_grad])?;
        self.log_alpha = la[0];

        for k in 0..2 {
            soft_update(&mut self.target_critics[k], &self.critics[k], self.config.tau)?;
        }
        self.updates += 1;
        Ok(UpdateOutput {
            report: UpdateReport {
                critic_loss,
                actor_loss,
                alpha: self.alpha(),
                entropy: -mean_logp,
            },
            dz,
        })
    }

    /// One critic-only step on fixed targets; returns the loss before the step.
    pub fn critic_step(&mut self, z: &Matrix, actions: &Matrix, targets: &[f64]) -> Result<f64> {
        let b = z.rows();
        ensure_len("targets", b, targets.len())?;
        let input = z.hstack(actions)?;
        let mut loss = 0.0;
        for k in 0..2 {
            let (q, cache) = self.critics[k].forward_batch(&input)?;
            let mut g = Matrix::zeros(b, 1);
            for r in 0..b {
                let diff = q.get(r, 0) - targets[r];
                loss += diff * diff / b as f64;
                g.set(r, 0, 2.0 * diff / b as f64);
            }
            let mut grads = self.critics[k].zero_grads();
            self.critics[k].backward_accumulate(&cache, &g, &mut grads, false)?;
            self.critic_opts[k].step(self.critics[k].params_mut(), &grads)?;
        }
        Ok(loss)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn random_batch(b: usize, lat: usize, seed: u64) -> SacBatch {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut m = |c: usize, lo: f64, hi: f64| {
            Matrix::from_vec(b, c, (0..b * c).map(|_| rng.random_range(lo..hi)).collect()).unwrap()
        };
        let z = m(lat, -1.0, 1.0);
        let actions = m(1, -2.0, 2.0);
        let z_next = m(lat, -1.0, 1.0);
        let rewards = m(1, -5.0, 0.0).into_vec();
        SacBatch { z, actions, rewards, z_next, dones: vec![0.0; b] }
    }

    fn small_config() -> SacConfig {
        SacConfig { hidden: vec![16, 16], batch_size: 32, capacity: 64, ..SacConfig::default() }
    }

    #[test]
    fn config_validation() {
        assert!(SacConfig::default().validate().is_ok());
        assert!(SacConfig { gamma: 1.0, ..SacConfig::default() }.validate().is_err());
        assert!(SacConfig { tau: 0.0, ..SacConfig::default() }.validate().is_err());
        assert!(SacConfig { capacity: 10, ..SacConfig::default() }.validate().is_err());
        assert!(SacConfig { num_critics: 3, ..SacConfig::default() }.validate().is_err());
        assert_eq!(SacConfig::large().hidden, vec![256, 256, 256]);
    }

    #[test]
    fn soft_update_arithmetic() {
        let spec = MlpSpec::new(&[1, 1], Activation::Identity);
        let online = Mlp::from_params(&spec, vec![1.0, 1.0]).unwrap();
        let mut t = Mlp::zeros(&spec).unwrap();
        soft_update(&mut t, &online, 0.005).unwrap();
        assert_eq!(t.params(), &[0.005, 0.005]);
        let before = t.clone();
        soft_update(&mut t, &online, 0.0).unwrap();
        assert_eq!(t, before);
        soft_update(&mut t, &online, 1.0).unwrap();
        assert_eq!(t, online);
    }

    #[test]
    fn targets_follow_the_backup() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let mut agent = SacAgent::new(3, 1, 2.0, small_config(), &mut rng).unwrap();
        let batch = random_batch(8, 3, 1);
        let done = vec![1.0; 8];
        let y = agent.compute_targets(&batch.z_next, &batch.rewards, &done, &mut rng).unwrap();
        assert_eq!(y, batch.rewards);
        agent.config.gamma = 0.0;
        let y = agent.compute_targets(&batch.z_next, &batch.rewards, &batch.dones, &mut rng).unwrap();
        assert_eq!(y, batch.rewards);

        // constant target critics 3 and 5 with α → 0: bootstrap uses 3
        agent.config.gamma = 0.5;
        agent.log_alpha = f64::NEG_INFINITY;
        let spec = agent.target_critics[0].spec().clone();
        for (k, c) in [3.0, 5.0].into_iter().enumerate() {
            let mut m = Mlp::zeros(&spec).unwrap();
            let last = m.num_layers() - 1;
            m.bias_mut(last)[0] = c;
            agent.target_critics[k] = m;
        }
        let y = agent.compute_targets(&batch.z_next, &batch.rewards, &batch.dones, &mut rng).unwrap();
        for (yy, r) in y.iter().zip(&batch.rewards) {
            assert!((yy - (r + 0.5 * 3.0)).abs() < 1e-12);
        }
    }

    #[test]
    fn zero_learning_rates_freeze_everything() {
        let cfg = SacConfig { actor_lr: 0.0, critic_lr: 0.0, alpha_lr: 0.0, ..small_config() };
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let mut agent = SacAgent::new(3, 1, 2.0, cfg, &mut rng).unwrap();
        let before = agent.clone();
        agent.update(&random_batch(16, 3, 3), &mut rng, false).unwrap();
        assert_eq!(agent.actor, before.actor);
        assert_eq!(agent.critics, before.critics);
        assert_eq!(agent.target_critics, before.target_critics);
        assert_eq!(agent.log_alpha, before.log_alpha);
    }

    #[test]
    fn alpha_rises_when_entropy_is_below_target() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let mut agent = SacAgent::new(3, 1, 2.0, small_config(), &mut rng).unwrap();
        // demand far more entropy than a unit-scale Gaussian has
        agent.config.target_entropy = Some(50.0);
        let a0 = agent.alpha();
        let out = agent.update(&random_batch(16, 3, 5), &mut rng, false).unwrap();
        assert!(out.report.entropy < 50.0);
        assert!(agent.alpha() > a0);
        agent.config.target_entropy = Some(-50.0);
        let a1 = agent.alpha();
        agent.update(&random_batch(16, 3, 6), &mut rng, false).unwrap();
        assert!(agent.alpha() < a1 && agent.alpha() > 0.0);
    }

    #[test]
    fn update_is_deterministic() {
        let run = || {
            let mut rng = ChaCha8Rng::seed_from_u64(7);
            let mut agent = SacAgent::new(3, 1, 2.0, small_config(), &mut rng).unwrap();
            let b = random_batch(16, 3, 8);
            let out = agent.update(&b, &mut rng, true).unwrap();
            (agent.actor.net.params().to_vec(), agent.critics[1].params().to_vec(), out.report, out.dz.unwrap())
        };
        let (a, c, r, d) = run();
        let (a2, c2, r2, d2) = run();
        assert_eq!((a, c, r, d), (a2, c2, r2, d2));
    }

    #[test]
    fn critic_loss_decreases_on_fixed_batch() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let mut agent = SacAgent::new(4, 1, 2.0, small_config(), &mut rng).unwrap();
        let b = random_batch(32, 4, 10);
        let y = agent.compute_targets(&b.z_next, &b.rewards, &b.dones, &mut rng).unwrap();
        let first = agent.critic_step(&b.z, &b.actions, &y).unwrap();
        let mut last = first;
        for _ in 0..49 {
            last = agent.critic_step(&b.z, &b.actions, &y).unwrap();
        }
        assert!(last < first, "{first} -> {last}");
    }

    #[test]
    fn critic_latent_gradient_matches_finite_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let agent = SacAgent::new(3, 1, 2.0, small_config(), &mut rng).unwrap();
        let batch = random_batch(6, 3, 12);
        let y = agent.compute_targets(&batch.z_next, &batch.rewards, &batch.dones, &mut ChaCha8Rng::seed_from_u64(0)).unwrap();
        let loss = |z: &Matrix| -> f64 {
            let input = z.hstack(&batch.actions).unwrap();
            agent.critics.iter().map(|c| {
                let q = c.predict(&input).unwrap();
                (0..6).map(|r| (q.get(r, 0) - y[r]).powi(2) / 6.0).sum::<f64>()
            }).sum()
        };
        let mut probe = agent.clone();
        let out = probe.update(&batch, &mut ChaCha8Rng::seed_from_u64(0), true).unwrap();
        let dz = out.dz.unwrap();
        let mut zs = batch.z.as_slice().to_vec();
        let num = crate::diffcore::numeric_gradient(&mut zs, 1e-6, |q| loss(&Matrix::from_vec(6, 3, q.to_vec()).unwrap()));
        for (a, n) in dz.as_slice().iter().zip(&num) {
            assert!(crate::diffcore::relative_error(*a, *n) < 1e-4, "{a} vs {n}");
        }
    }
}

//! Tanh-squashed Gaussian policy.

use std::f64::consts::PI;

use rand::Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::diffcore::{Matrix, Mlp, MlpCache};
use crate::error::{ensure_len, Error, Result};

pub const LOG_STD_MIN: f64 = -20.0;
pub const LOG_STD_MAX: f64 = 2.0;
/// Added inside `log(1 − tanh² + ε)`.
pub const TANH_EPS: f64 = 1e-6;

/// Policy network emitting `(μ, log σ)` for each action dimension.
#[derive(Debug, Clone, PartialEq)]
pub struct Actor {
    pub net: Mlp,
    pub max_action: f64,
}

/// Intermediate values of a batched reparameterised sample.
#[derive(Debug, Clone)]
pub struct ActorSample {
    pub actions: Matrix,
    pub log_probs: Vec<f64>,
    cache: MlpCache,
    eps: Matrix,
    log_std: Matrix,
    /// 1 where log σ was inside the clamp range.
    clamp_mask: Matrix,
    tanh_u: Matrix,
}

impl Actor {
    pub fn new(net: Mlp, max_action: f64) -> Result<Self> {
        if !net.output_dim().is_multiple_of(2) {
            return Err(Error::Config(format!(
                "actor output {} must hold μ and log σ",
                net.output_dim()
            )));
        }
        if !(max_action > 0.0 && max_action.is_finite()) {
            return Err(Error::Config(format!("max action {max_action} must be positive")));
        }
        Ok(Actor { net, max_action })
    }

    pub fn action_dim(&self) -> usize {
        self.net.output_dim() / 2
    }

    pub fn latent_dim(&self) -> usize {
        self.net.input_dim()
    }

    /// Draws `u ~ N(μ, σ²)`, returns `a = a_max·tanh(u)` and `log π(a|z)`.
    /// With `deterministic` the action is `a_max·tanh(μ)`.
    pub fn sample_action<R: Rng + ?Sized>(
        &self,
        z: &[f64],
        rng: &mut R,
        deterministic: bool,
    ) -> Result<(Vec<f64>, f64)> {
        if z.iter().any(|v| !v.is_finite()) {
            return Err(Error::Numerical("non-finite latent passed to the actor".into()));
        }
        let d = self.action_dim();
        let eps: Vec<f64> = if deterministic {
            vec![0.0; d]
        } else {
            (0..d).map(|_| StandardNormal.sample(rng)).collect()
        };
        let s = self.sample_with_noise(&Matrix::row_vector(z), &Matrix::row_vector(&eps))?;
        Ok((s.actions.row(0).to_vec(), s.log_probs[0]))
    }

    /// Batched sample with externally supplied standard-normal noise.
    pub fn sample_with_noise(&self, z: &Matrix, eps: &Matrix) -> Result<ActorSample> {
        let d = self.action_dim();
        ensure_len("actor noise rows", z.rows(), eps.rows())?;
        ensure_len("actor noise width", d, eps.cols())?;
        let (out, cache) = self.net.forward_batch(z)?;
        if !out.is_finite() {
            return Err(Error::Numerical("actor produced a non-finite output".into()));
        }
        let b = z.rows();
        let mut actions = Matrix::zeros(b, d);
        let mut log_std = Matrix::zeros(b, d);
        let mut clamp_mask = Matrix::zeros(b, d);
        let mut tanh_u = Matrix::zeros(b, d);
        let mut log_probs = vec![0.0; b];
        let log_amax = self.max_action.ln();
        for r in 0..b {
            let row = out.row(r);
            let mut lp = 0.0;
            for j in 0..d {
                let raw = row[d + j];
                let ls = raw.clamp(LOG_STD_MIN, LOG_STD_MAX);
                let e = eps.get(r, j);
                let u = row[j] + ls.exp() * e;
                let t = u.tanh();
                lp += -0.5 * e * e - ls - 0.5 * (2.0 * PI).ln() - (1.0 - t * t + TANH_EPS).ln();
                actions.set(r, j, self.max_action * t);
                log_std.set(r, j, ls);
                clamp_mask.set(r, j, if (LOG_STD_MIN..=LOG_STD_MAX).contains(&raw) { 1.0 } else { 0.0 });
                tanh_u.set(r, j, t);
            }
            log_probs[r] = lp - d as f64 * log_amax;
        }
        Ok(ActorSample {
            actions,
            log_probs,
            cache,
            eps: eps.clone(),
            log_std,
            clamp_mask,
            tanh_u,
        })
    }

    /// Parameter gradients of a loss whose derivatives with respect to the
    /// sampled actions and log-probabilities are `d_actions` and `d_log_probs`.
    pub fn backward(
        &self,
        sample: &ActorSample,
        d_actions: &Matrix,
        d_log_probs: &[f64],
    ) -> Result<Vec<f64>> {
        let d = self.action_dim();
        let b = sample.actions.rows();
        ensure_len("action gradient rows", b, d_actions.rows())?;
        ensure_len("log-prob gradients", b, d_log_probs.len())?;
        let mut d_out = Matrix::zeros(b, 2 * d);
        for r in 0..b {
            let dl = d_log_probs[r];
            for j in 0..d {
                let t = sample.tanh_u.get(r, j);
                let one_m = 1.0 - t * t;
                let du = d_actions.get(r, j) * self.max_action * one_m
                    + dl * 2.0 * t * one_m / (one_m + TANH_EPS);
                let sigma = sample.log_std.get(r, j).exp();
                let dls = (du * sigma * sample.eps.get(r, j) - dl) * sample.clamp_mask.get(r, j);
                d_out.set(r, j, du);
                d_out.set(r, d + j, dls);
            }
        }
        let mut grads = self.net.zero_grads();
        self.net.backward_accumulate(&sample.cache, &d_out, &mut grads, false)?;
        Ok(grads)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::diffcore::{numeric_gradient, relative_error, Activation, MlpSpec};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn zero_output_actor(max_action: f64) -> Actor {
        Actor::new(Mlp::zeros(&MlpSpec::new(&[3, 4, 2], Activation::Relu)).unwrap(), max_action).unwrap()
    }

    #[test]
    fn standard_normal_at_zero_has_known_log_prob() {
        let a = zero_output_actor(1.0);
        let s = a.sample_with_noise(&Matrix::row_vector(&[0.0; 3]), &Matrix::row_vector(&[0.0])).unwrap();
        let want = -0.5 * (2.0 * PI).ln() - (1.0f64 + 1e-6).ln();
        assert!((s.log_probs[0] - want).abs() < 1e-15);
        assert!((want + 0.9189).abs() < 1e-4);
        let (act, _) = a.sample_action(&[1.0, 2.0, 3.0], &mut ChaCha8Rng::seed_from_u64(0), true).unwrap();
        assert_eq!(act, vec![0.0]);
    }

    #[test]
    fn actions_are_bounded_and_non_finite_rejected() {
        let a = Actor::new(Mlp::init(&MlpSpec::new(&[3, 8, 4], Activation::Relu), 1).unwrap(), 2.0).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for i in 0..200 {
            let z = [i as f64 * 0.3 - 30.0, 1.0, -2.0];
            let (act, lp) = a.sample_action(&z, &mut rng, false).unwrap();
            assert!(act.iter().all(|v| v.abs() <= 2.0) && lp.is_finite());
        }
        assert!(matches!(a.sample_action(&[f64::NAN, 0.0, 0.0], &mut rng, false), Err(Error::Numerical(_))));
    }

    #[test]
    fn reparameterised_gradient_matches_finite_differences() {
        let spec = MlpSpec::new(&[3, 6, 4], Activation::Tanh);
        let actor = Actor::new(Mlp::init(&spec, 4).unwrap(), 2.0).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let z = Matrix::from_vec(5, 3, (0..15).map(|_| rng.random_range(-1.0..1.0)).collect()).unwrap();
        let eps = Matrix::from_vec(5, 2, (0..10).map(|_| StandardNormal.sample(&mut rng)).collect()).unwrap();
        let ca: Vec<f64> = (0..10).map(|_| rng.random_range(-1.0..1.0)).collect();
        let cl: Vec<f64> = (0..5).map(|_| rng.random_range(-1.0..1.0)).collect();
        let loss = |a: &Actor| {
            let s = a.sample_with_noise(&z, &eps).unwrap();
            s.actions.as_slice().iter().zip(&ca).map(|(x, c)| x * c).sum::<f64>()
                + s.log_probs.iter().zip(&cl).map(|(x, c)| x * c).sum::<f64>()
        };
        let s = actor.sample_with_noise(&z, &eps).unwrap();
        let grads = actor
            .backward(&s, &Matrix::from_vec(5, 2, ca.clone()).unwrap(), &cl)
            .unwrap();
        let mut p = actor.net.params().to_vec();
        let num = numeric_gradient(&mut p, 1e-6, |q| {
            let mut a = actor.clone();
            a.net.params_mut().copy_from_slice(q);
            loss(&a)
        });
        let worst = grads.iter().zip(&num).map(|(a, n)| relative_error(*a, *n)).fold(0.0, f64::max);
        assert!(worst <= 1e-4, "{worst}");
    }
}

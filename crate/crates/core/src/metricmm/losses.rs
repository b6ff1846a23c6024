//! Representation losses on single latent pairs. Batched versions with
//! gradients live in [`super::model`].

use super::fusion::euclidean;
use crate::error::{ensure_len, Error, Result};

/// Distances below this are clamped inside the log of the negative loss.
pub const LOG_EPS: f64 = 1e-8;

/// Weights of the combined objective `L_T + λ1·L+ + λ2·L− + λ3·L_inv`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LossWeights {
    pub positive: f64,
    pub negative: f64,
    pub invariance: f64,
}

impl Default for LossWeights {
    fn default() -> Self {
        LossWeights {
            positive: 1.0,
            negative: 1.0,
            invariance: 1.0,
        }
    }
}

impl LossWeights {
    pub fn validate(&self) -> Result<()> {
        for (name, v) in [
            ("lambda1", self.positive),
            ("lambda2", self.negative),
            ("lambda3", self.invariance),
        ] {
            if !(v >= 0.0 && v.is_finite()) {
                return Err(Error::Config(format!("{name} must be finite and ≥ 0, got {v}")));
            }
        }
        Ok(())
    }
}

/// `(‖z_{t+1} − z_t‖ − 1)²`: successive states sit one unit apart.
pub fn loss_positive(z_t: &[f64], z_next: &[f64]) -> Result<f64> {
    ensure_len("positive pair", z_t.len(), z_next.len())?;
    let d = euclidean(z_t, z_next) - 1.0;
    Ok(d * d)
}

/// `−log(max(‖z_r − z_t‖, ε))`: random pairs are pushed apart.
pub fn loss_negative(z_t: &[f64], z_random: &[f64]) -> Result<f64> {
    ensure_len("negative pair", z_t.len(), z_random.len())?;
    Ok(-euclidean(z_t, z_random).max(LOG_EPS).ln())
}

/// Per-dimension mean squared error between prediction and target.
pub fn loss_transition(predicted: &[f64], target: &[f64]) -> Result<f64> {
    ensure_len("transition pair", target.len(), predicted.len())?;
    if target.is_empty() {
        return Ok(0.0);
    }
    let sq: f64 = predicted.iter().zip(target).map(|(a, b)| (a - b) * (a - b)).sum();
    Ok(sq / target.len() as f64)
}

/// Mean over unordered modality pairs of the per-dimension squared error.
pub fn loss_invariance<Z: AsRef<[f64]>>(latents: &[Z]) -> Result<f64> {
    if latents.len() < 2 {
        return Err(Error::Config(format!(
            "invariance loss needs at least 2 modalities, got {}",
            latents.len()
        )));
    }
    let mut total = 0.0;
    let mut pairs = 0;
    for i in 0..latents.len() {
        for j in i + 1..latents.len() {
            total += loss_transition(latents[i].as_ref(), latents[j].as_ref())?;
            pairs += 1;
        }
    }
    Ok(total / pairs as f64)
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::E;

    #[test]
    fn positive() {
        assert_eq!(loss_positive(&[0.0, 0.0], &[0.0, 1.0]).unwrap(), 0.0);
        assert_eq!(loss_positive(&[1.0, 1.0], &[1.0, 1.0]).unwrap(), 1.0);
        assert_eq!(loss_positive(&[0.0, 0.0], &[2.0, 0.0]).unwrap(), 1.0);
    }

    #[test]
    fn negative() {
        assert_eq!(loss_negative(&[0.0], &[1.0]).unwrap(), 0.0);
        assert!((loss_negative(&[0.0], &[E]).unwrap() + 1.0).abs() < 1e-15);
        let same = loss_negative(&[0.5, 0.5], &[0.5, 0.5]).unwrap();
        assert!(same.is_finite());
        assert!((same - 18.420680743952367).abs() < 1e-9);
    }

    #[test]
    fn transition() {
        assert_eq!(loss_transition(&[1.0, 2.0], &[1.0, 2.0]).unwrap(), 0.0);
        assert_eq!(loss_transition(&[1.0, 1.0], &[0.0, 0.0]).unwrap(), 1.0);
        assert_eq!(loss_transition(&[2.0, 2.0], &[0.0, 0.0]).unwrap(), 4.0);
    }

    #[test]
    fn invariance() {
        assert_eq!(loss_invariance(&[vec![1.0, 2.0], vec![1.0, 2.0]]).unwrap(), 0.0);
        assert_eq!(loss_invariance(&[vec![0.0], vec![2.0]]).unwrap(), 4.0);
        let a = vec![vec![0.0, 1.0], vec![3.0, -1.0], vec![0.5, 0.5]];
        let b = vec![a[2].clone(), a[0].clone(), a[1].clone()];
        assert!((loss_invariance(&a).unwrap() - loss_invariance(&b).unwrap()).abs() < 1e-15);
        assert!(matches!(loss_invariance(&[vec![0.0]]), Err(Error::Config(_))));
    }

    #[test]
    fn weights_validation() {
        assert!(LossWeights::default().validate().is_ok());
        let bad = LossWeights { positive: -1.0, ..Default::default() };
        assert!(bad.validate().is_err());
    }

    /// Uniformly scaling a unit-edge embedding by `s` makes the edge terms
    /// `λ1 (s − 1)² − λ2 ln s` (plus constants), minimised at
    /// `s* = (1 + √(1 + 2 λ2/λ1)) / 2`. Adjacent distances therefore settle
    /// above 1 whenever `λ2 > 0`.
    #[test]
    fn scale_equilibrium_of_contrastive_terms() {
        let path: Vec<Vec<f64>> = (0..6).map(|i| vec![i as f64, 0.0]).collect();
        for (l1, l2) in [(1.0, 1.0), (1.0, 0.5), (2.0, 1.0)] {
            let total = |s: f64| {
                let z: Vec<Vec<f64>> = path.iter().map(|p| p.iter().map(|v| v * s).collect()).collect();
                let pos: f64 = z.windows(2).map(|w| loss_positive(&w[0], &w[1]).unwrap()).sum::<f64>() / 5.0;
                let neg: f64 = z.windows(2).map(|w| loss_negative(&w[0], &w[1]).unwrap()).sum::<f64>() / 5.0;
                l1 * pos + l2 * neg
            };
            // golden-section search on [0.5, 3]
            let (mut a, mut b) = (0.5, 3.0);
            let g = (5f64.sqrt() - 1.0) / 2.0;
            for _ in 0..200 {
                let (c, d) = (b - g * (b - a), a + g * (b - a));
                if total(c) < total(d) {
                    b = d;
                } else {
                    a = c;
                }
            }
            let expected = (1.0 + (1.0 + 2.0 * l2 / l1).sqrt()) / 2.0;
            assert!(((a + b) / 2.0 - expected).abs() < 1e-6, "λ=({l1},{l2})");
        }
    }
}

//! Inverse-distance-weighted fusion of per-modality latents around the
//! transition model's prediction.

use crate::error::{ensure_len, Error, Result};

pub const DEFAULT_DELTA: f64 = 1e-5;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FusionConfig {
    /// Added to every distance so an exact match cannot divide by zero.
    pub delta: f64,
}

impl Default for FusionConfig {
    fn default() -> Self {
        FusionConfig {
            delta: DEFAULT_DELTA,
        }
    }
}

impl FusionConfig {
    pub fn validate(&self) -> Result<()> {
        if self.delta > 0.0 && self.delta.is_finite() {
            Ok(())
        } else {
            Err(Error::Config(format!("fusion delta must be > 0, got {}", self.delta)))
        }
    }
}

pub fn euclidean(a: &[f64], b: &[f64]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - y) * (x - y))
        .sum::<f64>()
        .sqrt()
}

/// Normalized weights `w_i ∝ 1 / (‖z_i − ẑ‖ + δ)`.
pub fn idw_weights<Z: AsRef<[f64]>>(latents: &[Z], prediction: &[f64], delta: f64) -> Result<Vec<f64>> {
    if latents.is_empty() {
        return Err(Error::Usage("fusion needs at least one latent".into()));
    }
    if !(delta > 0.0) {
        return Err(Error::Config(format!("fusion delta must be > 0, got {delta}")));
    }
    let mut w = Vec::with_capacity(latents.len());
    for z in latents {
        let z = z.as_ref();
        ensure_len("fused latent", prediction.len(), z.len())?;
        w.push(1.0 / (euclidean(z, prediction) + delta));
    }
    let total: f64 = w.iter().sum();
    w.iter_mut().for_each(|v| *v /= total);
    Ok(w)
}

/// `z = Σ w_i z_i / Σ w_i` with `w_i = 1 / (‖z_i − ẑ‖₂ + δ)`.
pub fn fuse_idw<Z: AsRef<[f64]>>(latents: &[Z], prediction: &[f64], delta: f64) -> Result<Vec<f64>> {
    let w = idw_weights(latents, prediction, delta)?;
    let mut out = vec![0.0; prediction.len()];
    for (z, wi) in latents.iter().zip(&w) {
        for (o, v) in out.iter_mut().zip(z.as_ref()) {
            *o += wi * v;
        }
    }
    Ok(out)
}

//! Minimal differentiable computation: MLPs with exact reverse-mode
//! gradients, the Adam optimizer, and a finite-difference oracle.

mod adam;
mod gradcheck;
mod matrix;
mod mlp;
mod snapshot;

pub use adam::{AdamConfig, AdamState};
pub use gradcheck::{
    grad_check, numeric_gradient, relative_error, GradCheckReport, FD_STEP, KINK_MARGIN,
    REL_ERROR_FLOOR,
};
pub use matrix::Matrix;
pub use mlp::{Activation, Mlp, MlpCache, MlpSpec};
pub use snapshot::{read_snapshot, write_snapshot};

/// `target ← (1 − τ)·target + τ·online`, element-wise.
pub fn lerp_into(target: &mut [f64], online: &[f64], tau: f64) -> crate::Result<()> {
    crate::error::ensure_len("soft update", target.len(), online.len())?;
    for (t, &o) in target.iter_mut().zip(online) {
        *t += tau * (o - *t);
    }
    Ok(())
}

//! Central finite-difference oracle for MLP gradients.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::matrix::Matrix;
use super::mlp::{Mlp, MlpSpec};
use crate::error::Result;

/// Finite-difference step.
pub const FD_STEP: f64 = 1e-4;

/// Relative-error denominators are floored here so that gradients that are
/// zero up to roundoff do not blow up the ratio.
pub const REL_ERROR_FLOOR: f64 = 1e-6;

/// Pre-activations closer to zero than this are treated as ReLU kinks and the
/// evaluation point is resampled.
pub const KINK_MARGIN: f64 = 1e-3;

#[derive(Debug, Clone, PartialEq)]
pub struct GradCheckReport {
    pub max_rel_error: f64,
    /// Flat parameter index where the maximum occurred.
    pub worst_param: usize,
    pub params_checked: usize,
    pub passed: bool,
}

pub fn relative_error(analytic: f64, numeric: f64) -> f64 {
    let denom = analytic.abs().max(numeric.abs()).max(REL_ERROR_FLOOR);
    (analytic - numeric).abs() / denom
}

/// Central differences of `loss` with respect to every entry of `params`.
/// `params` is restored before returning.
pub fn numeric_gradient<F>(params: &mut [f64], h: f64, mut loss: F) -> Vec<f64>
where
    F: FnMut(&[f64]) -> f64,
{
    let mut out = Vec::with_capacity(params.len());
    for i in 0..params.len() {
        let orig = params[i];
        params[i] = orig + h;
        let up = loss(params);
        params[i] = orig - h;
        let down = loss(params);
        params[i] = orig;
        out.push((up - down) / (2.0 * h));
    }
    out
}

fn min_abs_preactivation(mlp: &Mlp, input: &[f64]) -> Result<f64> {
    let hidden = mlp.spec().layer_sizes.len() - 2;
    let (_, cache) = mlp.forward(input)?;
    Ok(cache
        .pre_activations()
        .iter()
        .take(hidden)
        .flat_map(|z| z.as_slice().iter())
        .fold(f64::INFINITY, |m, v| m.min(v.abs())))
}

/// Compares [`Mlp::backward`] with central finite differences at a random
/// point and returns the maximum relative error over all parameters.
///
/// The scalar loss is `Σ_k c_k · y_k` with random weights `c`.
pub fn grad_check(spec: &MlpSpec, seed: u64, tolerance: f64) -> Result<GradCheckReport> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut mlp = Mlp::init_with_rng(spec, &mut rng)?;
    for b in mlp.params_mut().iter_mut() {
        // move off the zero-bias init so the bias path is exercised
        *b += rng.random_range(-0.1..0.1);
    }
    let coeffs: Vec<f64> = (0..spec.output_dim())
        .map(|_| rng.random_range(-1.0..1.0))
        .collect();

    let mut input: Vec<f64> = (0..spec.input_dim())
        .map(|_| rng.random_range(-1.0..1.0))
        .collect();
    for _ in 0..1000 {
        if min_abs_preactivation(&mlp, &input)? >= KINK_MARGIN {
            break;
        }
        input = (0..spec.input_dim())
            .map(|_| rng.random_range(-1.0..1.0))
            .collect();
    }

    let (_, cache) = mlp.forward(&input)?;
    let (analytic, _) = mlp.backward(&cache, &Matrix::row_vector(&coeffs))?;

    let spec_c = spec.clone();
    let x = Matrix::row_vector(&input);
    let mut params = mlp.params().to_vec();
    let numeric = numeric_gradient(&mut params, FD_STEP, |p| {
        let m = Mlp::from_params(&spec_c, p.to_vec()).expect("same spec");
        let y = m.predict(&x).expect("same input");
        y.as_slice().iter().zip(&coeffs).map(|(a, b)| a * b).sum()
    });

    let (worst_param, max_rel_error) = analytic
        .iter()
        .zip(&numeric)
        .map(|(&a, &n)| relative_error(a, n))
        .enumerate()
        .fold((0, 0.0f64), |acc, (i, e)| if e > acc.1 { (i, e) } else { acc });

    Ok(GradCheckReport {
        max_rel_error,
        worst_param,
        params_checked: analytic.len(),
        passed: max_rel_error < tolerance,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::diffcore::Activation;

    #[test]
    fn relu_net_passes() {
        let r = grad_check(&MlpSpec::new(&[2, 3, 1], Activation::Relu), 11, 1e-4).unwrap();
        assert!(r.passed, "{r:?}");
        assert!(r.max_rel_error <= 1e-4);
    }

    #[test]
    fn linear_net_is_nearly_exact() {
        let r = grad_check(&MlpSpec::new(&[4, 5, 3], Activation::Identity), 3, 1e-8).unwrap();
        assert!(r.max_rel_error <= 1e-8, "{r:?}");
    }

    #[test]
    fn zero_tolerance_fails() {
        let r = grad_check(&MlpSpec::new(&[2, 3, 1], Activation::Tanh), 0, 0.0).unwrap();
        assert!(!r.passed);
    }
}

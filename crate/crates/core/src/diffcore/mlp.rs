//! Multilayer perceptron with exact reverse-mode gradients.
//!
//! All parameters live in one flat `Vec<f64>`. Layer `l` occupies a weight
//! block of `in_l * out_l` entries stored `(in, out)` row-major, followed by
//! `out_l` biases. Gradients use the same flat layout, so optimizers,
//! soft target updates and serialization all work on plain slices.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::matrix::{affine_forward, affine_input_grad, affine_param_grads, Matrix};
use crate::error::{ensure_len, Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Activation {
    Relu,
    Tanh,
    Identity,
}

impl Activation {
    #[inline]
    fn apply(self, x: f64) -> f64 {
        match self {
            Activation::Relu => x.max(0.0),
            Activation::Tanh => x.tanh(),
            Activation::Identity => x,
        }
    }

    /// Derivative given the pre-activation `x` and the output `y`.
    /// The ReLU subgradient at exactly 0 is 0.
    #[inline]
    fn derivative(self, x: f64, y: f64) -> f64 {
        match self {
            Activation::Relu => {
                if x > 0.0 {
                    1.0
                } else {
                    0.0
                }
            }
            Activation::Tanh => 1.0 - y * y,
            Activation::Identity => 1.0,
        }
    }

    pub(crate) fn code(self) -> u8 {
        match self {
            Activation::Relu => 0,
            Activation::Tanh => 1,
            Activation::Identity => 2,
        }
    }

    pub(crate) fn from_code(c: u8) -> Option<Self> {
        match c {
            0 => Some(Activation::Relu),
            1 => Some(Activation::Tanh),
            2 => Some(Activation::Identity),
            _ => None,
        }
    }
}

/// Layer sizes `(input, hidden..., output)` and one activation per hidden
/// layer. The output layer is always linear.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MlpSpec {
    pub layer_sizes: Vec<usize>,
    pub hidden_activations: Vec<Activation>,
}

impl MlpSpec {
    /// Same activation on every hidden layer.
    pub fn new(layer_sizes: &[usize], activation: Activation) -> Self {
        let hidden = layer_sizes.len().saturating_sub(2);
        MlpSpec {
            layer_sizes: layer_sizes.to_vec(),
            hidden_activations: vec![activation; hidden],
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.layer_sizes.len() < 2 {
            return Err(Error::Config(format!(
                "an MLP needs at least an input and an output size, got {:?}",
                self.layer_sizes
            )));
        }
        if let Some(i) = self.layer_sizes.iter().position(|&s| s == 0) {
            return Err(Error::Config(format!("layer {i} has size 0")));
        }
        if self.hidden_activations.len() != self.layer_sizes.len() - 2 {
            return Err(Error::Config(format!(
                "{} hidden layers but {} activations",
                self.layer_sizes.len() - 2,
                self.hidden_activations.len()
            )));
        }
        Ok(())
    }

    pub fn input_dim(&self) -> usize {
        self.layer_sizes[0]
    }

    pub fn output_dim(&self) -> usize {
        *self.layer_sizes.last().expect("validated spec")
    }

    pub fn param_count(&self) -> usize {
        self.layer_sizes
            .windows(2)
            .map(|w| w[0] * w[1] + w[1])
            .sum()
    }

    fn activation(&self, layer: usize) -> Activation {
        self.hidden_activations
            .get(layer)
            .copied()
            .unwrap_or(Activation::Identity)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
struct LayerShape {
    n_in: usize,
    n_out: usize,
    w_off: usize,
    b_off: usize,
}

/// Network parameters. Shapes are fixed at construction.
#[derive(Debug, Clone, PartialEq)]
pub struct Mlp {
    spec: MlpSpec,
    layers: Vec<LayerShape>,
    params: Vec<f64>,
}

/// Activations recorded by a forward pass, consumed by [`Mlp::backward`].
#[derive(Debug, Clone)]
pub struct MlpCache {
    /// Input to each layer (index 0 is the network input).
    inputs: Vec<Matrix>,
    /// Pre-activation of each layer.
    pre: Vec<Matrix>,
    /// Output of the last layer.
    output: Matrix,
}

impl MlpCache {
    pub fn batch_size(&self) -> usize {
        self.output.rows()
    }

    /// Pre-activation of every layer, input side first.
    pub fn pre_activations(&self) -> &[Matrix] {
        &self.pre
    }
}

fn layer_shapes(spec: &MlpSpec) -> Vec<LayerShape> {
    let mut off = 0;
    spec.layer_sizes
        .windows(2)
        .map(|w| {
            let s = LayerShape {
                n_in: w[0],
                n_out: w[1],
                w_off: off,
                b_off: off + w[0] * w[1],
            };
            off += w[0] * w[1] + w[1];
            s
        })
        .collect()
}

impl Mlp {
    /// Fan-in uniform initialization: weights in `[-1/sqrt(fan_in), 1/sqrt(fan_in)]`,
    /// biases zero.
    pub fn init(spec: &MlpSpec, seed: u64) -> Result<Self> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        Self::init_with_rng(spec, &mut rng)
    }

    pub fn init_with_rng<R: Rng + ?Sized>(spec: &MlpSpec, rng: &mut R) -> Result<Self> {
        let mut mlp = Self::zeros(spec)?;
        for shape in mlp.layers.clone() {
            let bound = 1.0 / (shape.n_in as f64).sqrt();
            for w in &mut mlp.params[shape.w_off..shape.b_off] {
                *w = rng.random_range(-bound..=bound);
            }
        }
        Ok(mlp)
    }

    pub fn zeros(spec: &MlpSpec) -> Result<Self> {
        spec.validate()?;
        Ok(Mlp {
            spec: spec.clone(),
            layers: layer_shapes(spec),
            params: vec![0.0; spec.param_count()],
        })
    }

    pub fn from_params(spec: &MlpSpec, params: Vec<f64>) -> Result<Self> {
        spec.validate()?;
        ensure_len("mlp parameters", spec.param_count(), params.len())?;
        Ok(Mlp {
            spec: spec.clone(),
            layers: layer_shapes(spec),
            params,
        })
    }

    pub fn spec(&self) -> &MlpSpec {
        &self.spec
    }

    pub fn input_dim(&self) -> usize {
        self.spec.input_dim()
    }

    pub fn output_dim(&self) -> usize {
        self.spec.output_dim()
    }

    pub fn num_layers(&self) -> usize {
        self.layers.len()
    }

    pub fn param_count(&self) -> usize {
        self.params.len()
    }

    pub fn params(&self) -> &[f64] {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut [f64] {
        &mut self.params
    }

    /// Zeroed gradient buffer matching this network's parameter layout.
    pub fn zero_grads(&self) -> Vec<f64> {
        vec![0.0; self.params.len()]
    }

    /// Weight block of layer `l`, `(in, out)` row-major.
    pub fn weights(&self, l: usize) -> &[f64] {
        let s = self.layers[l];
        &self.params[s.w_off..s.b_off]
    }

    pub fn weights_mut(&mut self, l: usize) -> &mut [f64] {
        let s = self.layers[l];
        &mut self.params[s.w_off..s.b_off]
    }

    pub fn bias(&self, l: usize) -> &[f64] {
        let s = self.layers[l];
        &self.params[s.b_off..s.b_off + s.n_out]
    }

    pub fn bias_mut(&mut self, l: usize) -> &mut [f64] {
        let s = self.layers[l];
        &mut self.params[s.b_off..s.b_off + s.n_out]
    }

    /// Human-readable name of flat parameter `index`, e.g. `layer1.weight[3,0]`.
    pub fn param_name(&self, index: usize) -> String {
        for (l, s) in self.layers.iter().enumerate() {
            if index < s.b_off {
                let k = index - s.w_off;
                return format!("layer{l}.weight[{},{}]", k / s.n_out, k % s.n_out);
            }
            if index < s.b_off + s.n_out {
                return format!("layer{l}.bias[{}]", index - s.b_off);
            }
        }
        format!("param[{index}]")
    }

    /// Forward pass over a single input vector.
    pub fn forward(&self, input: &[f64]) -> Result<(Vec<f64>, MlpCache)> {
        let (out, cache) = self.forward_batch(&Matrix::row_vector(input))?;
        Ok((out.into_vec(), cache))
    }

    /// Forward pass over a batch (one sample per row), recording activations.
    pub fn forward_batch(&self, input: &Matrix) -> Result<(Matrix, MlpCache)> {
        self.forward_batch_owned(input.clone())
    }

    /// Same as [`Mlp::forward_batch`] but moves the input into the cache.
    pub fn forward_batch_owned(&self, input: Matrix) -> Result<(Matrix, MlpCache)> {
        ensure_len("mlp input width", self.input_dim(), input.cols())?;
        let mut inputs = Vec::with_capacity(self.layers.len());
        let mut pre = Vec::with_capacity(self.layers.len());
        let mut x = input;
        for (l, s) in self.layers.iter().enumerate() {
            let mut z = Matrix::zeros(x.rows(), s.n_out);
            affine_forward(&x, self.weights(l), self.bias(l), &mut z);
            let act = self.spec.activation(l);
            let mut y = z.clone();
            if act != Activation::Identity {
                y.as_mut_slice().iter_mut().for_each(|v| *v = act.apply(*v));
            }
            inputs.push(x);
            pre.push(z);
            x = y;
        }
        let cache = MlpCache {
            inputs,
            pre,
            output: x.clone(),
        };
        Ok((x, cache))
    }

    /// Forward pass without recording a cache.
    pub fn predict(&self, input: &Matrix) -> Result<Matrix> {
        ensure_len("mlp input width", self.input_dim(), input.cols())?;
        let mut x: Option<Matrix> = None;
        for (l, s) in self.layers.iter().enumerate() {
            let src = x.as_ref().unwrap_or(input);
            let mut z = Matrix::zeros(src.rows(), s.n_out);
            affine_forward(src, self.weights(l), self.bias(l), &mut z);
            let act = self.spec.activation(l);
            if act != Activation::Identity {
                z.as_mut_slice().iter_mut().for_each(|v| *v = act.apply(*v));
            }
            x = Some(z);
        }
        Ok(x.expect("at least one layer"))
    }

    pub fn predict_one(&self, input: &[f64]) -> Result<Vec<f64>> {
        Ok(self.predict(&Matrix::row_vector(input))?.into_vec())
    }

    /// Reverse pass. Returns `(parameter gradients, input gradient)` for the
    /// scalar loss whose gradient with respect to the output is `output_grad`.
    pub fn backward(&self, cache: &MlpCache, output_grad: &Matrix) -> Result<(Vec<f64>, Matrix)> {
        let mut grads = self.zero_grads();
        let dx = self.backward_accumulate(cache, output_grad, &mut grads, true)?;
        Ok((grads, dx.expect("input gradient requested")))
    }

    /// Reverse pass that adds parameter gradients into `grads`. The input
    /// gradient is only computed when `want_input_grad` is set.
    pub fn backward_accumulate(
        &self,
        cache: &MlpCache,
        output_grad: &Matrix,
        grads: &mut [f64],
        want_input_grad: bool,
    ) -> Result<Option<Matrix>> {
        ensure_len("cached layers", self.layers.len(), cache.pre.len())?;
        ensure_len("gradient buffer", self.params.len(), grads.len())?;
        ensure_len("output gradient width", self.output_dim(), output_grad.cols())?;
        ensure_len(
            "output gradient rows",
            cache.batch_size(),
            output_grad.rows(),
        )?;
        for (s, z) in self.layers.iter().zip(&cache.pre) {
            ensure_len("cached pre-activation width", s.n_out, z.cols())?;
        }

        let mut g = output_grad.clone();
        for l in (0..self.layers.len()).rev() {
            let s = self.layers[l];
            let act = self.spec.activation(l);
            if act != Activation::Identity {
                let z = &cache.pre[l];
                let y = if l + 1 < self.layers.len() {
                    &cache.inputs[l + 1]
                } else {
                    &cache.output
                };
                for ((gv, &zv), &yv) in g
                    .as_mut_slice()
                    .iter_mut()
                    .zip(z.as_slice())
                    .zip(y.as_slice())
                {
                    *gv *= act.derivative(zv, yv);
                }
            }
            let (head, tail) = grads.split_at_mut(s.b_off);
            affine_param_grads(
                &cache.inputs[l],
                &g,
                &mut head[s.w_off..],
                &mut tail[..s.n_out],
            );
            if l > 0 || want_input_grad {
                g = affine_input_grad(&g, self.weights(l), s.n_in);
            }
        }
        Ok(want_input_grad.then_some(g))
    }
}

//! Hypercomplex dense and convolutional layers plus the real-valued helpers
//! they are stacked with.
//!
//! Hyper layers hold one algebra element per (output unit, input element)
//! pair and compute `y_a = sum_b w_ab * x_b + bias_a` with the weight on the
//! left. The product is realized by expanding every weight into its left
//! multiplication matrix, giving an ordinary real layer with block structure;
//! a layer with `units` outputs over an `n`-dimensional algebra emits
//! `units * n` real features.

mod dense;
mod hyper_conv;
mod hyper_dense;

use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::algebra::StructureConstants;
use crate::error::{Error, Result};
use crate::tensor::Tensor;

pub use dense::{Dense, DenseConfig};
pub use hyper_conv::{HyperConv, HyperConvConfig};
pub use hyper_dense::{HyperDense, HyperDenseConfig};

/// Componentwise nonlinearity applied to every real coordinate.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Activation {
    #[default]
    None,
    Tanh,
    Sigmoid,
}

impl Activation {
    pub fn apply(self, x: &Tensor) -> Tensor {
        match self {
            Activation::None => x.clone(),
            Activation::Tanh => x.tanh(),
            Activation::Sigmoid => x.sigmoid(),
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Activation::None => "linear",
            Activation::Tanh => "tanh",
            Activation::Sigmoid => "sigmoid",
        }
    }
}

/// One stage of a [`Sequential`](crate::model::Sequential) model.
#[derive(Debug)]
pub enum Layer {
    HyperDense(HyperDense),
    HyperConv(HyperConv),
    Dense(Dense),
    Activation(Activation),
    /// Maximum over all spatial axes, keeping batch and channels.
    GlobalMaxPool,
    /// Collapses all non-batch axes.
    Flatten,
}

impl Layer {
    /// Stable identifier used in summaries and model files.
    pub fn kind(&self) -> &'static str {
        match self {
            Layer::HyperDense(_) => "hyper_dense",
            Layer::HyperConv(_) => "hyper_conv",
            Layer::Dense(_) => "dense",
            Layer::Activation(_) => "activation",
            Layer::GlobalMaxPool => "global_max_pool",
            Layer::Flatten => "flatten",
        }
    }

    pub fn is_built(&self) -> bool {
        match self {
            Layer::HyperDense(l) => l.is_built(),
            Layer::HyperConv(l) => l.is_built(),
            Layer::Dense(l) => l.is_built(),
            _ => true,
        }
    }

    /// Output shape (without the batch axis) for a per-sample input shape.
    pub fn output_shape(&self, input: &[usize]) -> Result<Vec<usize>> {
        match self {
            Layer::HyperDense(l) => l.output_shape(input),
            Layer::HyperConv(l) => l.output_shape(input),
            Layer::Dense(l) => l.output_shape(input),
            Layer::Activation(_) => Ok(input.to_vec()),
            Layer::GlobalMaxPool => {
                if input.len() < 2 {
                    return Err(Error::Shape(format!(
                        "global max pooling needs spatial axes and channels, got {input:?}"
                    )));
                }
                Ok(vec![input[input.len() - 1]])
            }
            Layer::Flatten => Ok(vec![input.iter().product()]),
        }
    }

    /// Infers input sizes and initializes parameters on first use; afterwards
    /// only checks that `input` is compatible.
    pub fn build(&mut self, input: &[usize], rng: &mut ChaCha8Rng) -> Result<Vec<usize>> {
        match self {
            Layer::HyperDense(l) => l.build(input, rng),
            Layer::HyperConv(l) => l.build(input, rng),
            Layer::Dense(l) => l.build(input, rng),
            _ => self.output_shape(input),
        }
    }

    /// Forward pass on a batched input. The layer must be built.
    pub fn forward(&self, x: &Tensor) -> Result<Tensor> {
        match self {
            Layer::HyperDense(l) => l.forward(x),
            Layer::HyperConv(l) => l.forward(x),
            Layer::Dense(l) => l.forward(x),
            Layer::Activation(a) => Ok(a.apply(x)),
            Layer::GlobalMaxPool => x.global_max_pool(),
            Layer::Flatten => x.flatten(),
        }
    }

    /// Trainable tensors, weights before bias.
    pub fn parameters(&self) -> Vec<Tensor> {
        match self {
            Layer::HyperDense(l) => l.parameters(),
            Layer::HyperConv(l) => l.parameters(),
            Layer::Dense(l) => l.parameters(),
            _ => Vec::new(),
        }
    }

    pub fn param_count(&self) -> usize {
        self.parameters().iter().map(Tensor::numel).sum()
    }

    pub fn algebra(&self) -> Option<&Arc<StructureConstants>> {
        match self {
            Layer::HyperDense(l) => Some(l.algebra()),
            Layer::HyperConv(l) => Some(l.algebra()),
            _ => None,
        }
    }
}

impl From<HyperDense> for Layer {
    fn from(l: HyperDense) -> Self {
        Layer::HyperDense(l)
    }
}

impl From<HyperConv> for Layer {
    fn from(l: HyperConv) -> Self {
        Layer::HyperConv(l)
    }
}

impl From<Dense> for Layer {
    fn from(l: Dense) -> Self {
        Layer::Dense(l)
    }
}

impl From<Activation> for Layer {
    fn from(a: Activation) -> Self {
        Layer::Activation(a)
    }
}

/// Uniform samples on `[-limit, limit]` with
/// `limit = sqrt(6 / (fan_in + fan_out))`, fans counted in real scalars.
pub fn glorot_uniform(len: usize, fan_in: usize, fan_out: usize, rng: &mut impl Rng) -> Vec<f64> {
    let limit = glorot_limit(fan_in, fan_out);
    (0..len).map(|_| rng.random_range(-limit..=limit)).collect()
}

pub fn glorot_limit(fan_in: usize, fan_out: usize) -> f64 {
    (6.0 / (fan_in + fan_out) as f64).sqrt()
}

/// A deterministic generator for layer initialization.
pub fn init_rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Constant `[n, n * n]` tensor with entry `(i, k * n + j) = A_ijk`, so that a
/// row of algebra elements times it yields the entries of their left
/// multiplication matrices, row-major.
pub(crate) fn left_matrix_basis(alg: &StructureConstants) -> Tensor {
    let n = alg.dim();
    let mut data = vec![0.0; n * n * n];
    for i in 0..n {
        for j in 0..n {
            for k in 0..n {
                data[i * n * n + k * n + j] = alg.get(i, j, k);
            }
        }
    }
    Tensor::new(&[n, n * n], data).expect("shape matches buffer")
}

pub(crate) fn positive(value: usize, what: &str) -> Result<()> {
    if value == 0 {
        return Err(Error::Build(format!("{what} must be positive")));
    }
    Ok(())
}

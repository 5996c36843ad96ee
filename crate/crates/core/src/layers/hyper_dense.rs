use std::sync::Arc;

use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{glorot_uniform, left_matrix_basis, positive, Activation};
use crate::algebra::{Matrix, StructureConstants};
use crate::error::{Error, Result};
use crate::tensor::Tensor;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct HyperDenseConfig {
    pub units: usize,
    /// Algebra elements per input row; inferred on first build when `None`.
    pub in_elems: Option<usize>,
    #[serde(default)]
    pub activation: Activation,
}

/// Dense layer with algebra-valued weights.
///
/// Weights have shape `[units, in_elems, n]`, bias `[units * n]`. An input row
/// of width `in_elems * n` is read as `in_elems` algebra elements; the output
/// row has width `units * n`.
#[derive(Debug)]
pub struct HyperDense {
    algebra: Arc<StructureConstants>,
    units: usize,
    in_elems: Option<usize>,
    activation: Activation,
    weights: Option<Tensor>,
    bias: Option<Tensor>,
}

impl HyperDense {
    pub fn new(units: usize, algebra: impl Into<Arc<StructureConstants>>) -> Result<Self> {
        positive(units, "hyper dense units")?;
        Ok(Self {
            algebra: algebra.into(),
            units,
            in_elems: None,
            activation: Activation::None,
            weights: None,
            bias: None,
        })
    }

    pub fn with_activation(mut self, activation: Activation) -> Self {
        self.activation = activation;
        self
    }

    /// Fixes the real input width up front instead of inferring it.
    pub fn with_input_width(mut self, width: usize) -> Result<Self> {
        self.in_elems = Some(self.elems_for_width(width)?);
        Ok(self)
    }

    /// A built layer with explicit parameters. `weights` is `[units, in_elems, n]`
    /// row-major, `bias` has `units * n` entries.
    pub fn from_parts(
        algebra: impl Into<Arc<StructureConstants>>,
        units: usize,
        in_elems: usize,
        weights: Vec<f64>,
        bias: Vec<f64>,
    ) -> Result<Self> {
        let mut layer = Self::new(units, algebra)?;
        positive(in_elems, "hyper dense input elements")?;
        let n = layer.algebra.dim();
        layer.in_elems = Some(in_elems);
        layer.weights = Some(Tensor::param(&[units, in_elems, n], weights)?);
        layer.bias = Some(Tensor::param(&[units * n], bias)?);
        Ok(layer)
    }

    pub fn config(&self) -> HyperDenseConfig {
        HyperDenseConfig {
            units: self.units,
            in_elems: self.in_elems,
            activation: self.activation,
        }
    }

    /// Rebuilds a layer from its configuration. When the input size is known
    /// the parameters are allocated as zeros, ready to be overwritten.
    pub fn from_config(
        config: &HyperDenseConfig,
        algebra: Arc<StructureConstants>,
    ) -> Result<Self> {
        let layer = Self::new(config.units, algebra)?.with_activation(config.activation);
        match config.in_elems {
            Some(m) => {
                let n = layer.algebra.dim();
                let u = config.units;
                Self::from_parts(layer.algebra, u, m, vec![0.0; u * m * n], vec![0.0; u * n])
                    .map(|l| l.with_activation(config.activation))
            }
            None => Ok(layer),
        }
    }

    pub fn algebra(&self) -> &Arc<StructureConstants> {
        &self.algebra
    }

    pub fn units(&self) -> usize {
        self.units
    }

    pub fn in_elems(&self) -> Option<usize> {
        self.in_elems
    }

    pub fn activation(&self) -> Activation {
        self.activation
    }

    pub fn weights(&self) -> Option<&Tensor> {
        self.weights.as_ref()
    }

    pub fn bias(&self) -> Option<&Tensor> {
        self.bias.as_ref()
    }

    pub fn is_built(&self) -> bool {
        self.weights.is_some()
    }

    fn elems_for_width(&self, width: usize) -> Result<usize> {
        let n = self.algebra.dim();
        if width == 0 || !width.is_multiple_of(n) {
            return Err(Error::Shape(format!(
                "hyper dense input width {width} is not a positive multiple of the algebra dimension {n}"
            )));
        }
        let m = width / n;
        match self.in_elems {
            Some(expected) if expected != m => Err(Error::Shape(format!(
                "hyper dense expects input width {}, got {width}",
                expected * n
            ))),
            _ => Ok(m),
        }
    }

    pub fn output_shape(&self, input: &[usize]) -> Result<Vec<usize>> {
        let [width] = input else {
            return Err(Error::Shape(format!(
                "hyper dense expects flat rows, got per-sample shape {input:?}"
            )));
        };
        self.elems_for_width(*width)?;
        Ok(vec![self.units * self.algebra.dim()])
    }

    pub fn build(&mut self, input: &[usize], rng: &mut ChaCha8Rng) -> Result<Vec<usize>> {
        let out = self.output_shape(input)?;
        if self.weights.is_none() {
            let (n, u) = (self.algebra.dim(), self.units);
            let m = input[0] / n;
            let w = glorot_uniform(u * m * n, m * n, u * n, rng);
            self.in_elems = Some(m);
            self.weights = Some(Tensor::param(&[u, m, n], w)?);
            self.bias = Some(Tensor::param(&[u * n], vec![0.0; u * n])?);
        }
        Ok(out)
    }

    fn built(&self) -> Result<(&Tensor, &Tensor, usize)> {
        match (&self.weights, &self.bias, self.in_elems) {
            (Some(w), Some(b), Some(m)) => Ok((w, b, m)),
            _ => Err(Error::Build(
                "hyper dense layer used before it was built".into(),
            )),
        }
    }

    /// The real `[in_elems * n, units * n]` matrix `W` with `y = x W`, built
    /// differentiably from the algebra-valued weights.
    pub fn real_weight(&self) -> Result<Tensor> {
        let (w, _, m) = self.built()?;
        let (n, u) = (self.algebra.dim(), self.units);
        // [u*m, n] x [n, n*n] -> entry (a, b, k, j) = L(w_ab)[k][j]
        w.reshape(&[u * m, n])?
            .matmul(&left_matrix_basis(&self.algebra))?
            .reshape(&[u, m, n, n])?
            .permute(&[1, 3, 0, 2])?
            .reshape(&[m * n, u * n])
    }

    /// The `[units * n, in_elems * n]` block matrix whose block `(a, b)` is the
    /// left multiplication matrix of weight `w_ab`; `forward(x) = W x + bias`.
    pub fn assemble_block_matrix(&self) -> Result<Matrix> {
        let (w, _, m) = self.built()?;
        let (n, u) = (self.algebra.dim(), self.units);
        let w = w.data();
        let mut out = Matrix::zeros(u * n, m * n);
        for a in 0..u {
            for b in 0..m {
                let start = (a * m + b) * n;
                let block = self.algebra.left_matrix_slice(&w[start..start + n])?;
                for k in 0..n {
                    for j in 0..n {
                        out.set(a * n + k, b * n + j, block.get(k, j));
                    }
                }
            }
        }
        Ok(out)
    }

    /// `[batch, in_elems * n] -> [batch, units * n]`.
    pub fn forward(&self, x: &Tensor) -> Result<Tensor> {
        let (_, bias, m) = self.built()?;
        let n = self.algebra.dim();
        match x.shape() {
            [_, width] if *width == m * n => {}
            [_, width] if !width.is_multiple_of(n) => {
                return Err(Error::Shape(format!(
                    "hyper dense input width {width} is not a multiple of the algebra dimension {n}"
                )))
            }
            other => {
                return Err(Error::Shape(format!(
                    "hyper dense expects [batch, {}], got {other:?}",
                    m * n
                )))
            }
        }
        let y = x.matmul(&self.real_weight()?)?.bias_add(bias)?;
        Ok(self.activation.apply(&y))
    }

    pub fn parameters(&self) -> Vec<Tensor> {
        self.weights.iter().chain(&self.bias).cloned().collect()
    }

    /// Weight scalars held by this layer: `units * in_elems * n`.
    pub fn weight_count(&self) -> Option<usize> {
        self.in_elems.map(|m| self.units * m * self.algebra.dim())
    }

    /// Weight scalars of a real dense layer with the same real input and
    /// output widths: `(in_elems * n) * (units * n)`.
    pub fn real_weight_count(&self) -> Option<usize> {
        let n = self.algebra.dim();
        self.in_elems.map(|m| m * n * self.units * n)
    }
}

use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{glorot_uniform, positive, Activation};
use crate::error::{Error, Result};
use crate::tensor::Tensor;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DenseConfig {
    pub units: usize,
    pub in_features: Option<usize>,
    #[serde(default)]
    pub activation: Activation,
}

/// Ordinary real fully connected layer, `y = x W + b` with `W: [in, units]`.
#[derive(Debug)]
pub struct Dense {
    units: usize,
    in_features: Option<usize>,
    activation: Activation,
    weights: Option<Tensor>,
    bias: Option<Tensor>,
}

impl Dense {
    pub fn new(units: usize) -> Result<Self> {
        positive(units, "dense units")?;
        Ok(Self {
            units,
            in_features: None,
            activation: Activation::None,
            weights: None,
            bias: None,
        })
    }

    pub fn with_activation(mut self, activation: Activation) -> Self {
        self.activation = activation;
        self
    }

    pub fn from_parts(
        in_features: usize,
        units: usize,
        weights: Vec<f64>,
        bias: Vec<f64>,
    ) -> Result<Self> {
        let mut layer = Self::new(units)?;
        positive(in_features, "dense input features")?;
        layer.in_features = Some(in_features);
        layer.weights = Some(Tensor::param(&[in_features, units], weights)?);
        layer.bias = Some(Tensor::param(&[units], bias)?);
        Ok(layer)
    }

    pub fn config(&self) -> DenseConfig {
        DenseConfig {
            units: self.units,
            in_features: self.in_features,
            activation: self.activation,
        }
    }

    pub fn from_config(config: &DenseConfig) -> Result<Self> {
        let layer = match config.in_features {
            Some(i) => Self::from_parts(
                i,
                config.units,
                vec![0.0; i * config.units],
                vec![0.0; config.units],
            )?,
            None => Self::new(config.units)?,
        };
        Ok(layer.with_activation(config.activation))
    }

    pub fn units(&self) -> usize {
        self.units
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

    pub fn output_shape(&self, input: &[usize]) -> Result<Vec<usize>> {
        match (input, self.in_features) {
            ([width], Some(expected)) if *width != expected => Err(Error::Shape(format!(
                "dense expects input width {expected}, got {width}"
            ))),
            ([_], _) => Ok(vec![self.units]),
            _ => Err(Error::Shape(format!(
                "dense expects flat rows, got per-sample shape {input:?}"
            ))),
        }
    }

    pub fn build(&mut self, input: &[usize], rng: &mut ChaCha8Rng) -> Result<Vec<usize>> {
        let out = self.output_shape(input)?;
        if self.weights.is_none() {
            let (i, u) = (input[0], self.units);
            self.in_features = Some(i);
            self.weights = Some(Tensor::param(&[i, u], glorot_uniform(i * u, i, u, rng))?);
            self.bias = Some(Tensor::param(&[u], vec![0.0; u])?);
        }
        Ok(out)
    }

    pub fn forward(&self, x: &Tensor) -> Result<Tensor> {
        let (Some(w), Some(b)) = (&self.weights, &self.bias) else {
            return Err(Error::Build("dense layer used before it was built".into()));
        };
        if x.rank() != 2 || x.shape()[1] != w.shape()[0] {
            return Err(Error::Shape(format!(
                "dense expects [batch, {}], got {:?}",
                w.shape()[0],
                x.shape()
            )));
        }
        let y = x.matmul(w)?.bias_add(b)?;
        Ok(self.activation.apply(&y))
    }

    pub fn parameters(&self) -> Vec<Tensor> {
        self.weights.iter().chain(&self.bias).cloned().collect()
    }
}

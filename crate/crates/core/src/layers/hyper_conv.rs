use std::sync::Arc;

use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{glorot_uniform, left_matrix_basis, positive, Activation};
use crate::algebra::StructureConstants;
use crate::error::{Error, Result};
use crate::tensor::{conv_output_len, Padding, Tensor};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct HyperConvConfig {
    pub filters: usize,
    pub kernel_size: Vec<usize>,
    pub stride: Vec<usize>,
    #[serde(default)]
    pub padding: Padding,
    /// Input channel groups (`C_in / n`); inferred on first build when `None`.
    pub in_groups: Option<usize>,
    #[serde(default)]
    pub activation: Activation,
}

/// 1D, 2D or 3D channels-last convolution with algebra-valued kernels.
///
/// The input's `C_in` channels are read as `G = C_in / n` algebra elements per
/// position. Weights have shape `[K.., G, filters, n]` and the output has
/// `filters * n` channels: at each position, filter `f` produces
/// `sum_{offset, g} w[offset, g, f] * x[offset, g] + bias_f`.
#[derive(Debug)]
pub struct HyperConv {
    algebra: Arc<StructureConstants>,
    filters: usize,
    kernel_size: Vec<usize>,
    stride: Vec<usize>,
    padding: Padding,
    in_groups: Option<usize>,
    activation: Activation,
    weights: Option<Tensor>,
    bias: Option<Tensor>,
}

impl HyperConv {
    /// The number of spatial axes is the length of `kernel_size` (1 to 3).
    /// Stride defaults to 1 and padding to valid.
    pub fn new(
        filters: usize,
        kernel_size: &[usize],
        algebra: impl Into<Arc<StructureConstants>>,
    ) -> Result<Self> {
        positive(filters, "hyper conv filters")?;
        if !(1..=3).contains(&kernel_size.len()) {
            return Err(Error::Build(format!(
                "hyper conv supports 1 to 3 spatial axes, got kernel {kernel_size:?}"
            )));
        }
        if kernel_size.contains(&0) {
            return Err(Error::Build(format!(
                "kernel extents must be positive, got {kernel_size:?}"
            )));
        }
        Ok(Self {
            algebra: algebra.into(),
            filters,
            kernel_size: kernel_size.to_vec(),
            stride: vec![1; kernel_size.len()],
            padding: Padding::Valid,
            in_groups: None,
            activation: Activation::None,
            weights: None,
            bias: None,
        })
    }

    pub fn with_stride(mut self, stride: &[usize]) -> Result<Self> {
        if stride.len() != self.kernel_size.len() || stride.contains(&0) {
            return Err(Error::Build(format!(
                "stride {stride:?} must have {} positive entries",
                self.kernel_size.len()
            )));
        }
        self.stride = stride.to_vec();
        Ok(self)
    }

    pub fn with_padding(mut self, padding: Padding) -> Self {
        self.padding = padding;
        self
    }

    pub fn with_activation(mut self, activation: Activation) -> Self {
        self.activation = activation;
        self
    }

    /// A built layer with explicit parameters. `weights` is
    /// `[K.., in_groups, filters, n]` row-major, `bias` has `filters * n` entries.
    pub fn from_parts(
        algebra: impl Into<Arc<StructureConstants>>,
        filters: usize,
        kernel_size: &[usize],
        in_groups: usize,
        weights: Vec<f64>,
        bias: Vec<f64>,
    ) -> Result<Self> {
        let mut layer = Self::new(filters, kernel_size, algebra)?;
        positive(in_groups, "hyper conv input groups")?;
        let n = layer.algebra.dim();
        let mut shape = layer.kernel_size.clone();
        shape.extend([in_groups, filters, n]);
        layer.in_groups = Some(in_groups);
        layer.weights = Some(Tensor::param(&shape, weights)?);
        layer.bias = Some(Tensor::param(&[filters * n], bias)?);
        Ok(layer)
    }

    pub fn config(&self) -> HyperConvConfig {
        HyperConvConfig {
            filters: self.filters,
            kernel_size: self.kernel_size.clone(),
            stride: self.stride.clone(),
            padding: self.padding,
            in_groups: self.in_groups,
            activation: self.activation,
        }
    }

    pub fn from_config(config: &HyperConvConfig, algebra: Arc<StructureConstants>) -> Result<Self> {
        let n = algebra.dim();
        let layer = match config.in_groups {
            Some(g) => {
                let k: usize = config.kernel_size.iter().product();
                let f = config.filters;
                Self::from_parts(
                    algebra,
                    f,
                    &config.kernel_size,
                    g,
                    vec![0.0; k * g * f * n],
                    vec![0.0; f * n],
                )?
            }
            None => Self::new(config.filters, &config.kernel_size, algebra)?,
        };
        Ok(layer
            .with_stride(&config.stride)?
            .with_padding(config.padding)
            .with_activation(config.activation))
    }

    pub fn algebra(&self) -> &Arc<StructureConstants> {
        &self.algebra
    }

    pub fn filters(&self) -> usize {
        self.filters
    }

    pub fn kernel_size(&self) -> &[usize] {
        &self.kernel_size
    }

    pub fn in_groups(&self) -> Option<usize> {
        self.in_groups
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

    fn groups_for_channels(&self, channels: usize) -> Result<usize> {
        let n = self.algebra.dim();
        if channels == 0 || !channels.is_multiple_of(n) {
            return Err(Error::Shape(format!(
                "hyper conv input has C_in = {channels} channels, not a multiple of the algebra dimension n = {n}"
            )));
        }
        let g = channels / n;
        match self.in_groups {
            Some(expected) if expected != g => Err(Error::Shape(format!(
                "hyper conv expects {} input channels, got {channels}",
                expected * n
            ))),
            _ => Ok(g),
        }
    }

    pub fn output_shape(&self, input: &[usize]) -> Result<Vec<usize>> {
        let d = self.kernel_size.len();
        if input.len() != d + 1 {
            return Err(Error::Shape(format!(
                "{d}D hyper conv expects per-sample shape [{d} spatial axes, channels], got {input:?}"
            )));
        }
        self.groups_for_channels(input[d])?;
        let mut out = Vec::with_capacity(d + 1);
        for (axis, &s) in input[..d].iter().enumerate() {
            let k = self.kernel_size[axis];
            let len = conv_output_len(s, k, self.stride[axis], self.padding).ok_or_else(|| {
                Error::Shape(format!(
                    "kernel extent {k} exceeds input extent {s} on axis {axis}"
                ))
            })?;
            out.push(len);
        }
        out.push(self.filters * self.algebra.dim());
        Ok(out)
    }

    pub fn build(&mut self, input: &[usize], rng: &mut ChaCha8Rng) -> Result<Vec<usize>> {
        let out = self.output_shape(input)?;
        if self.weights.is_none() {
            let n = self.algebra.dim();
            let g = input[input.len() - 1] / n;
            let f = self.filters;
            let taps: usize = self.kernel_size.iter().product();
            let w = glorot_uniform(taps * g * f * n, taps * g * n, taps * f * n, rng);
            let mut shape = self.kernel_size.clone();
            shape.extend([g, f, n]);
            self.in_groups = Some(g);
            self.weights = Some(Tensor::param(&shape, w)?);
            self.bias = Some(Tensor::param(&[f * n], vec![0.0; f * n])?);
        }
        Ok(out)
    }

    fn built(&self) -> Result<(&Tensor, &Tensor, usize)> {
        match (&self.weights, &self.bias, self.in_groups) {
            (Some(w), Some(b), Some(g)) => Ok((w, b, g)),
            _ => Err(Error::Build(
                "hyper conv layer used before it was built".into(),
            )),
        }
    }

    /// The real kernel `[K.., G * n, filters * n]`. At each offset, channel
    /// block `(g, f)` holds the left multiplication matrix of `w[offset, g, f]`
    /// (transposed into input-major layout). Differentiable in the weights.
    pub fn assemble_conv_kernel(&self) -> Result<Tensor> {
        let (w, _, g) = self.built()?;
        let n = self.algebra.dim();
        let f = self.filters;
        let taps: usize = self.kernel_size.iter().product();
        let mut shape = self.kernel_size.clone();
        shape.extend([g * n, f * n]);
        // entry (tap, g, f, k, j) = L(w)[k][j]; reorder to (tap, g, j, f, k)
        w.reshape(&[taps * g * f, n])?
            .matmul(&left_matrix_basis(&self.algebra))?
            .reshape(&[taps, g, f, n, n])?
            .permute(&[0, 1, 4, 2, 3])?
            .reshape(&shape)
    }

    /// `[batch, S.., G * n] -> [batch, S'.., filters * n]`.
    pub fn forward(&self, x: &Tensor) -> Result<Tensor> {
        let (_, bias, _) = self.built()?;
        if x.rank() != self.kernel_size.len() + 2 {
            return Err(Error::Shape(format!(
                "{}D hyper conv expects [batch, spatial.., channels], got {:?}",
                self.kernel_size.len(),
                x.shape()
            )));
        }
        self.groups_for_channels(x.shape()[x.rank() - 1])?;
        let kernel = self.assemble_conv_kernel()?;
        let y = x
            .conv_nd(&kernel, &self.stride, self.padding)?
            .bias_add(bias)?;
        Ok(self.activation.apply(&y))
    }

    pub fn parameters(&self) -> Vec<Tensor> {
        self.weights.iter().chain(&self.bias).cloned().collect()
    }

    /// Kernel scalars held by this layer: `taps * G * filters * n`.
    pub fn weight_count(&self) -> Option<usize> {
        let taps: usize = self.kernel_size.iter().product();
        self.in_groups
            .map(|g| taps * g * self.filters * self.algebra.dim())
    }

    /// Kernel scalars of a real convolution with the same real channel counts:
    /// `taps * (G * n) * (filters * n)`.
    pub fn real_weight_count(&self) -> Option<usize> {
        let taps: usize = self.kernel_size.iter().product();
        let n = self.algebra.dim();
        self.in_groups.map(|g| taps * g * n * self.filters * n)
    }
}

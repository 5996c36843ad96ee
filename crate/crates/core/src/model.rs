//! Sequential layer stacks, summaries and the JSON model file.
//!
//! Model file layout:
//!
//! ```json
//! {
//!   "format_version": 1,
//!   "input_shape": [4],
//!   "layers": [{"kind": "hyper_dense", "config": {...}, "algebra": {...} | null}, ...],
//!   "weights": ["<base64 of little-endian f64>", ...]
//! }
//! ```
//!
//! Algebra tables are embedded so a file never depends on the registry.
//! `weights` holds one entry per parameter in enumeration order.

use std::fmt;
use std::path::Path;
use std::sync::Arc;

use base64::engine::general_purpose::STANDARD as BASE64;
use base64::Engine as _;
use serde::{Deserialize, Serialize};

use crate::algebra::AlgebraFile;
use crate::error::{Error, Result};
use crate::fsutil::write_atomic;
use crate::layers::{
    init_rng, Activation, Dense, DenseConfig, HyperConv, HyperConvConfig, HyperDense,
    HyperDenseConfig, Layer,
};
use crate::tensor::{no_grad, Tensor};

pub const FORMAT_VERSION: u64 = 1;

/// An ordered stack of layers. Parameters are created on the first forward
/// pass (or [`build`](Self::build)) from the input shape and the model seed.
#[derive(Debug, Default)]
pub struct Sequential {
    layers: Vec<Layer>,
    input_shape: Option<Vec<usize>>,
    seed: u64,
}

impl Sequential {
    pub fn new() -> Self {
        Self::default()
    }

    /// Seed for parameter initialization.
    pub fn with_seed(seed: u64) -> Self {
        Self {
            seed,
            ..Self::default()
        }
    }

    pub fn add(&mut self, layer: impl Into<Layer>) -> &mut Self {
        self.layers.push(layer.into());
        self.input_shape = None;
        self
    }

    pub fn layers(&self) -> &[Layer] {
        &self.layers
    }

    pub fn len(&self) -> usize {
        self.layers.len()
    }

    pub fn is_empty(&self) -> bool {
        self.layers.is_empty()
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    /// Per-sample input shape the model was built for.
    pub fn input_shape(&self) -> Option<&[usize]> {
        self.input_shape.as_deref()
    }

    pub fn is_built(&self) -> bool {
        self.input_shape.is_some()
    }

    /// Infers shapes and initializes parameters for a per-sample input shape
    /// (no batch axis). Returns the per-sample output shape.
    pub fn build(&mut self, input_shape: &[usize]) -> Result<Vec<usize>> {
        if self.layers.is_empty() {
            return Err(Error::Build("model has no layers".into()));
        }
        let mut rng = init_rng(self.seed);
        let mut shape = input_shape.to_vec();
        for i in 0..self.layers.len() {
            let source = match i {
                0 => "the model input".to_string(),
                _ => format!("layer {} ({})", i - 1, self.layers[i - 1].kind()),
            };
            let layer = &mut self.layers[i];
            let kind = layer.kind();
            shape = layer.build(&shape, &mut rng).map_err(|e| {
                Error::Build(format!(
                    "layer {i} ({kind}) cannot take shape {shape:?} from {source}: {e}"
                ))
            })?;
        }
        self.input_shape = Some(input_shape.to_vec());
        Ok(shape)
    }

    /// Builds for `x` if needed, then runs every layer, recording gradients.
    pub fn forward(&mut self, x: &Tensor) -> Result<Tensor> {
        let sample = sample_shape(x)?;
        if self.input_shape.as_deref() != Some(sample) {
            self.build(sample)?;
        }
        self.call(x)
    }

    /// Like [`forward`](Self::forward) without gradient recording.
    pub fn predict(&mut self, x: &Tensor) -> Result<Tensor> {
        let sample = sample_shape(x)?;
        if self.input_shape.as_deref() != Some(sample) {
            self.build(sample)?;
        }
        no_grad(|| self.call(x))
    }

    /// Runs an already built model. Read-only, so a built model can serve
    /// several threads.
    pub fn call(&self, x: &Tensor) -> Result<Tensor> {
        if self.layers.is_empty() {
            return Err(Error::Build("model has no layers".into()));
        }
        if !self.layers.iter().all(Layer::is_built) {
            return Err(Error::Build(
                "model must be built before it is called".into(),
            ));
        }
        let mut h = x.clone();
        for layer in &self.layers {
            h = layer.forward(&h)?;
        }
        Ok(h)
    }

    /// All trainable tensors: layer order, weights before bias.
    pub fn parameters(&self) -> Vec<Tensor> {
        self.layers.iter().flat_map(Layer::parameters).collect()
    }

    pub fn param_count(&self) -> usize {
        self.layers.iter().map(Layer::param_count).sum()
    }

    pub fn zero_grad(&self) {
        self.parameters().iter().for_each(Tensor::zero_grad);
    }

    /// All parameter values concatenated in enumeration order.
    pub fn flat_parameters(&self) -> Vec<f64> {
        self.parameters().iter().flat_map(|p| p.to_vec()).collect()
    }

    pub fn summary(&self) -> Result<Summary> {
        let Some(input) = &self.input_shape else {
            return Err(Error::Build("summary requires a built model".into()));
        };
        let mut shape = input.clone();
        let mut rows = Vec::with_capacity(self.layers.len());
        for layer in &self.layers {
            shape = layer.output_shape(&shape)?;
            rows.push(SummaryRow {
                name: layer_label(layer),
                output_shape: shape.clone(),
                params: layer.param_count(),
            });
        }
        let total = rows.iter().map(|r| r.params).sum();
        Ok(Summary { rows, total })
    }

    pub fn to_json(&self) -> Result<String> {
        let layers = self
            .layers
            .iter()
            .map(|layer| {
                let config = match layer {
                    Layer::HyperDense(l) => serde_json::to_value(l.config()),
                    Layer::HyperConv(l) => serde_json::to_value(l.config()),
                    Layer::Dense(l) => serde_json::to_value(l.config()),
                    Layer::Activation(a) => {
                        serde_json::to_value(ActivationConfig { activation: *a })
                    }
                    Layer::GlobalMaxPool | Layer::Flatten => Ok(serde_json::json!({})),
                }
                .expect("layer configs serialize");
                LayerRecord {
                    kind: layer.kind().to_string(),
                    config,
                    algebra: layer.algebra().map(|a| AlgebraFile::from_algebra(a)),
                }
            })
            .collect();
        let weights = self
            .parameters()
            .iter()
            .map(|p| {
                let bytes: Vec<u8> = p.data().iter().flat_map(|v| v.to_le_bytes()).collect();
                BASE64.encode(bytes)
            })
            .collect();
        let file = ModelFile {
            format_version: FORMAT_VERSION,
            input_shape: self.input_shape.clone(),
            seed: self.seed,
            layers,
            weights,
        };
        Ok(serde_json::to_string_pretty(&file).expect("model file serializes"))
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let value: serde_json::Value =
            serde_json::from_str(text).map_err(|e| Error::Corrupt(format!("model file: {e}")))?;
        let version = value
            .get("format_version")
            .and_then(serde_json::Value::as_u64)
            .ok_or_else(|| Error::Corrupt("model file has no format_version".into()))?;
        if version != FORMAT_VERSION {
            return Err(Error::VersionMismatch {
                found: version,
                expected: FORMAT_VERSION,
            });
        }
        let file: ModelFile = serde_json::from_value(value)
            .map_err(|e| Error::Corrupt(format!("model file: {e}")))?;

        let mut model = Sequential::with_seed(file.seed);
        for (i, record) in file.layers.iter().enumerate() {
            model.layers.push(
                record
                    .to_layer()
                    .map_err(|e| Error::Corrupt(format!("layer {i} ({}): {e}", record.kind)))?,
            );
        }
        let params = model.parameters();
        if params.len() != file.weights.len() {
            return Err(Error::Corrupt(format!(
                "model has {} parameter tensors but the file stores {}",
                params.len(),
                file.weights.len()
            )));
        }
        for (i, (param, encoded)) in params.iter().zip(&file.weights).enumerate() {
            let bytes = BASE64
                .decode(encoded)
                .map_err(|e| Error::Corrupt(format!("weights[{i}]: {e}")))?;
            if bytes.len() != param.numel() * 8 {
                return Err(Error::Corrupt(format!(
                    "weights[{i}] holds {} bytes, expected {}",
                    bytes.len(),
                    param.numel() * 8
                )));
            }
            let mut data = param.data_mut();
            for (dst, chunk) in data.iter_mut().zip(bytes.chunks_exact(8)) {
                *dst = f64::from_le_bytes(chunk.try_into().expect("chunk of eight bytes"));
            }
        }
        if let Some(shape) = file.input_shape {
            model
                .build(&shape)
                .map_err(|e| Error::Corrupt(format!("stored input shape: {e}")))?;
        }
        Ok(model)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        write_atomic(path.as_ref(), self.to_json()?.as_bytes())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }
}

fn sample_shape(x: &Tensor) -> Result<&[usize]> {
    match x.shape() {
        [] => Err(Error::Shape("model input needs a batch axis".into())),
        [_, rest @ ..] => Ok(rest),
    }
}

fn layer_label(layer: &Layer) -> String {
    match layer {
        Layer::HyperDense(l) => format!(
            "hyper_dense[{}]({})",
            l.algebra().name().unwrap_or("custom"),
            l.units()
        ),
        Layer::HyperConv(l) => format!(
            "hyper_conv{}d[{}]({})",
            l.kernel_size().len(),
            l.algebra().name().unwrap_or("custom"),
            l.filters()
        ),
        Layer::Dense(l) => format!("dense({})", l.units()),
        Layer::Activation(a) => format!("activation({})", a.name()),
        other => other.kind().to_string(),
    }
}

#[derive(Serialize, Deserialize)]
struct ModelFile {
    format_version: u64,
    #[serde(default)]
    input_shape: Option<Vec<usize>>,
    #[serde(default)]
    seed: u64,
    layers: Vec<LayerRecord>,
    weights: Vec<String>,
}

#[derive(Serialize, Deserialize)]
struct LayerRecord {
    kind: String,
    config: serde_json::Value,
    algebra: Option<AlgebraFile>,
}

#[derive(Serialize, Deserialize)]
struct ActivationConfig {
    activation: Activation,
}

impl LayerRecord {
    fn to_layer(&self) -> Result<Layer> {
        let config = |v: &serde_json::Value| v.clone();
        let algebra = || -> Result<Arc<_>> {
            let file = self
                .algebra
                .clone()
                .ok_or_else(|| Error::Corrupt("missing embedded algebra".into()))?;
            Ok(Arc::new(file.into_algebra()?))
        };
        let bad = |e: serde_json::Error| Error::Corrupt(format!("config: {e}"));
        Ok(match self.kind.as_str() {
            "hyper_dense" => {
                let c: HyperDenseConfig =
                    serde_json::from_value(config(&self.config)).map_err(bad)?;
                Layer::HyperDense(HyperDense::from_config(&c, algebra()?)?)
            }
            "hyper_conv" => {
                let c: HyperConvConfig =
                    serde_json::from_value(config(&self.config)).map_err(bad)?;
                Layer::HyperConv(HyperConv::from_config(&c, algebra()?)?)
            }
            "dense" => {
                let c: DenseConfig = serde_json::from_value(config(&self.config)).map_err(bad)?;
                Layer::Dense(Dense::from_config(&c)?)
            }
            "activation" => {
                let c: ActivationConfig =
                    serde_json::from_value(config(&self.config)).map_err(bad)?;
                Layer::Activation(c.activation)
            }
            "global_max_pool" => Layer::GlobalMaxPool,
            "flatten" => Layer::Flatten,
            other => return Err(Error::Corrupt(format!("unknown layer kind `{other}`"))),
        })
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct SummaryRow {
    pub name: String,
    /// Per-sample output shape (batch axis omitted).
    pub output_shape: Vec<usize>,
    pub params: usize,
}

/// Per-layer output shapes and parameter counts.
#[derive(Clone, Debug, PartialEq)]
pub struct Summary {
    pub rows: Vec<SummaryRow>,
    pub total: usize,
}

impl fmt::Display for Summary {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let shape = |s: &[usize]| {
            let dims: Vec<String> = std::iter::once("None".to_string())
                .chain(s.iter().map(usize::to_string))
                .collect();
            format!("({})", dims.join(", "))
        };
        let header = ("Layer", "Output shape", "Params");
        let name_w = self
            .rows
            .iter()
            .map(|r| r.name.len())
            .chain([header.0.len()])
            .max()
            .unwrap_or(0);
        let shape_w = self
            .rows
            .iter()
            .map(|r| shape(&r.output_shape).len())
            .chain([header.1.len()])
            .max()
            .unwrap_or(0);
        let params_w = self
            .rows
            .iter()
            .map(|r| r.params.to_string().len())
            .chain([header.2.len(), self.total.to_string().len()])
            .max()
            .unwrap_or(0);
        let rule = "-".repeat(name_w + shape_w + params_w + 4);
        writeln!(
            f,
            "{:<name_w$}  {:<shape_w$}  {:>params_w$}",
            header.0, header.1, header.2
        )?;
        writeln!(f, "{rule}")?;
        for r in &self.rows {
            writeln!(
                f,
                "{:<name_w$}  {:<shape_w$}  {:>params_w$}",
                r.name,
                shape(&r.output_shape),
                r.params
            )?;
        }
        writeln!(f, "{rule}")?;
        writeln!(f, "Total params: {}", self.total)
    }
}

//! Binary cross-entropy, optimizers, metrics and the epoch loop.

mod history;
mod loss;
mod optim;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::model::Sequential;
use crate::tensor::Tensor;

pub use history::{format_g, EpochRecord, TrainHistory};
pub use loss::{accuracy, bce_loss, BCE_EPS};
pub use optim::{Optimizer, OptimizerKind};

#[derive(Clone, Debug)]
pub struct FitConfig {
    pub epochs: usize,
    /// `None` trains on the whole set in one step per epoch.
    pub batch_size: Option<usize>,
    /// Seeds the per-epoch shuffle when mini-batching.
    pub seed: u64,
    /// Evaluated after every epoch.
    pub validation: Option<(Tensor, Tensor)>,
}

impl FitConfig {
    pub fn new(epochs: usize) -> Self {
        Self {
            epochs,
            batch_size: None,
            seed: 0,
            validation: None,
        }
    }

    pub fn with_batch_size(mut self, batch_size: usize) -> Self {
        self.batch_size = Some(batch_size);
        self
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    pub fn with_validation(mut self, x: Tensor, y: Tensor) -> Self {
        self.validation = Some((x, y));
        self
    }
}

/// Trains `model` on `(x, y)` with binary cross-entropy. Each step runs
/// forward, loss, backward, the optimizer update and clears gradients.
///
/// The recorded epoch loss and accuracy average the per-step values over
/// the epoch, weighted by batch size, each measured before its update.
pub fn fit(
    model: &mut Sequential,
    x: &Tensor,
    y: &Tensor,
    optimizer: &mut Optimizer,
    config: &FitConfig,
) -> Result<TrainHistory> {
    if config.epochs == 0 {
        return Err(Error::Validation("epochs must be at least 1".into()));
    }
    let n = *x.shape().first().unwrap_or(&0);
    if y.shape().first() != Some(&n) {
        return Err(Error::Shape(format!(
            "inputs {:?} and targets {:?} hold different sample counts",
            x.shape(),
            y.shape()
        )));
    }
    let batch = match config.batch_size {
        Some(0) => return Err(Error::Validation("batch size must be positive".into())),
        Some(b) if b < n => Some(b),
        _ => None,
    };
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut order: Vec<usize> = (0..n).collect();
    let mut history = TrainHistory::default();

    for epoch in 1..=config.epochs {
        let (mut loss_sum, mut correct) = (0.0, 0);
        let batches: Vec<&[usize]> = match batch {
            None => vec![&order[..]],
            Some(b) => {
                order.shuffle(&mut rng);
                order.chunks(b).collect()
            }
        };
        for idx in batches {
            let (xb, yb) = match batch {
                None => (x.clone(), y.clone()),
                Some(_) => (x.select_rows(idx)?, y.select_rows(idx)?),
            };
            let pred = model.forward(&xb)?;
            let loss = bce_loss(&pred, &yb)?;
            let value = loss.item()?;
            if !value.is_finite() {
                return Err(Error::Divergence { epoch, loss: value });
            }
            loss.backward()?;
            let params = model.parameters();
            optimizer.step(&params)?;
            params.iter().for_each(Tensor::zero_grad);
            loss_sum += value * idx.len() as f64;
            correct += loss::correct_count(&pred.data(), &yb.data());
        }
        let mut record = EpochRecord {
            epoch,
            loss: loss_sum / n as f64,
            accuracy: correct as f64 / y.numel() as f64,
            val_loss: None,
            val_accuracy: None,
        };
        if let Some((vx, vy)) = &config.validation {
            let (l, a) = evaluate(model, vx, vy)?;
            record.val_loss = Some(l);
            record.val_accuracy = Some(a);
        }
        history.records.push(record);
    }
    Ok(history)
}

/// Loss and accuracy of the model on `(x, y)` without recording gradients.
pub fn evaluate(model: &mut Sequential, x: &Tensor, y: &Tensor) -> Result<(f64, f64)> {
    let pred = model.predict(x)?;
    Ok((bce_loss(&pred, y)?.item()?, accuracy(&pred, y)?))
}

use crate::error::{Error, Result};
use crate::tensor::Tensor;

/// Predictions are clamped to `[BCE_EPS, 1 - BCE_EPS]` before the logarithm.
pub const BCE_EPS: f64 = 1e-7;

/// Mean binary cross-entropy `-[y ln p + (1 - y) ln(1 - p)]` over all entries.
pub fn bce_loss(pred: &Tensor, target: &Tensor) -> Result<Tensor> {
    check_targets(pred, target)?;
    let p = pred.clamp(BCE_EPS, 1.0 - BCE_EPS);
    let y = target.detach();
    let not_y = y.neg().add_scalar(1.0);
    let pos = y.mul(&p.log())?;
    let neg = not_y.mul(&p.neg().add_scalar(1.0).log())?;
    Ok(pos.add(&neg)?.mean().neg())
}

/// Fraction of entries where `pred >= 0.5` agrees with the binary target.
pub fn accuracy(pred: &Tensor, target: &Tensor) -> Result<f64> {
    check_targets(pred, target)?;
    Ok(correct_count(&pred.data(), &target.data()) as f64 / pred.numel() as f64)
}

pub(crate) fn correct_count(pred: &[f64], target: &[f64]) -> usize {
    pred.iter()
        .zip(target)
        .filter(|(&p, &y)| (p >= 0.5) == (y == 1.0))
        .count()
}

fn check_targets(pred: &Tensor, target: &Tensor) -> Result<()> {
    if pred.shape() != target.shape() {
        return Err(Error::Shape(format!(
            "predictions {:?} and targets {:?} differ in shape",
            pred.shape(),
            target.shape()
        )));
    }
    if let Some(bad) = target.data().iter().find(|&&y| y != 0.0 && y != 1.0) {
        return Err(Error::Validation(format!(
            "binary targets must be 0 or 1, found {bad}"
        )));
    }
    Ok(())
}

use super::{no_grad, Tensor};
use crate::error::{Error, Result};

/// Relative disagreement between the recorded gradient of `f(t)` with
/// respect to `t` and central differences
/// `(f(t + eps e_i) - f(t - eps e_i)) / (2 eps)`, measured on the whole
/// gradient: `|analytic - numeric| / max(|analytic|, |numeric|, 1e-12)` in the
/// Euclidean norm. A per-coordinate ratio is not used because coordinates
/// with (near) zero gradient carry pure rounding noise.
///
/// `t` must require gradients; its gradient is reset before and after.
/// `f` is re-evaluated with `t` perturbed in place and must be pure.
pub fn finite_diff_check<F>(f: F, t: &Tensor, eps: f64) -> Result<f64>
where
    F: Fn(&Tensor) -> Result<Tensor>,
{
    if !t.requires_grad() {
        return Err(Error::Contract(
            "finite_diff_check needs a tensor that requires gradients".into(),
        ));
    }
    if eps.is_nan() || eps <= 0.0 {
        return Err(Error::Contract(format!("step must be positive, got {eps}")));
    }
    t.zero_grad();
    f(t)?.backward()?;
    let analytic = t.grad().unwrap_or_else(|| vec![0.0; t.numel()]);
    t.zero_grad();

    let eval = |i: usize, value: f64| -> Result<f64> {
        t.data_mut()[i] = value;
        no_grad(|| f(t))?.item()
    };
    let (mut diff, mut norm_a, mut norm_n) = (0.0f64, 0.0f64, 0.0f64);
    for (i, &a) in analytic.iter().enumerate() {
        let original = t.data()[i];
        let plus = eval(i, original + eps);
        let minus = eval(i, original - eps);
        t.data_mut()[i] = original;
        let numeric = (plus? - minus?) / (2.0 * eps);
        diff += (a - numeric).powi(2);
        norm_a += a * a;
        norm_n += numeric * numeric;
    }
    Ok(diff.sqrt() / norm_a.sqrt().max(norm_n.sqrt()).max(1e-12))
}

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::tensor::Tensor;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum OptimizerKind {
    Sgd,
    Adam,
}

impl std::str::FromStr for OptimizerKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "sgd" => Ok(Self::Sgd),
            "adam" => Ok(Self::Adam),
            _ => Err(Error::Validation(format!(
                "unknown optimizer `{s}` (expected sgd or adam)"
            ))),
        }
    }
}

/// Plain SGD or Adam with bias-corrected moments. Adam keeps one pair of
/// moment buffers per parameter, matched by position in the slice passed to
/// [`step`](Self::step).
#[derive(Clone, Debug)]
pub struct Optimizer {
    kind: OptimizerKind,
    lr: f64,
    beta1: f64,
    beta2: f64,
    eps: f64,
    t: u64,
    m: Vec<Vec<f64>>,
    v: Vec<Vec<f64>>,
}

impl Optimizer {
    pub const ADAM_LR: f64 = 0.001;
    pub const ADAM_BETA1: f64 = 0.9;
    pub const ADAM_BETA2: f64 = 0.999;
    pub const ADAM_EPS: f64 = 1e-7;

    pub fn sgd(lr: f64) -> Self {
        Self::new(OptimizerKind::Sgd, lr)
    }

    pub fn adam() -> Self {
        Self::new(OptimizerKind::Adam, Self::ADAM_LR)
    }

    pub fn new(kind: OptimizerKind, lr: f64) -> Self {
        Self {
            kind,
            lr,
            beta1: Self::ADAM_BETA1,
            beta2: Self::ADAM_BETA2,
            eps: Self::ADAM_EPS,
            t: 0,
            m: Vec::new(),
            v: Vec::new(),
        }
    }

    pub fn with_betas(mut self, beta1: f64, beta2: f64) -> Self {
        self.beta1 = beta1;
        self.beta2 = beta2;
        self
    }

    pub fn with_epsilon(mut self, eps: f64) -> Self {
        self.eps = eps;
        self
    }

    pub fn kind(&self) -> OptimizerKind {
        self.kind
    }

    pub fn learning_rate(&self) -> f64 {
        self.lr
    }

    /// Number of updates applied so far.
    pub fn steps(&self) -> u64 {
        self.t
    }

    /// Updates every parameter in place from its accumulated gradient.
    pub fn step(&mut self, params: &[Tensor]) -> Result<()> {
        let grads = params
            .iter()
            .enumerate()
            .map(|(i, p)| {
                p.grad().ok_or_else(|| {
                    Error::Contract(format!(
                        "parameter {i} has no gradient; call backward first"
                    ))
                })
            })
            .collect::<Result<Vec<_>>>()?;
        if self.kind == OptimizerKind::Adam {
            self.ensure_state(params)?;
        }
        self.t += 1;
        match self.kind {
            OptimizerKind::Sgd => {
                for (p, g) in params.iter().zip(&grads) {
                    let mut w = p.data_mut();
                    w.iter_mut().zip(g).for_each(|(w, g)| *w -= self.lr * g);
                }
            }
            OptimizerKind::Adam => {
                let (b1, b2) = (self.beta1, self.beta2);
                let c1 = 1.0 - b1.powf(self.t as f64);
                let c2 = 1.0 - b2.powf(self.t as f64);
                for (i, (p, g)) in params.iter().zip(&grads).enumerate() {
                    let mut w = p.data_mut();
                    let (m, v) = (&mut self.m[i], &mut self.v[i]);
                    for j in 0..g.len() {
                        m[j] = b1 * m[j] + (1.0 - b1) * g[j];
                        v[j] = b2 * v[j] + (1.0 - b2) * g[j] * g[j];
                        let m_hat = m[j] / c1;
                        let v_hat = v[j] / c2;
                        w[j] -= self.lr * m_hat / (v_hat.sqrt() + self.eps);
                    }
                }
            }
        }
        Ok(())
    }

    fn ensure_state(&mut self, params: &[Tensor]) -> Result<()> {
        if self.m.is_empty() {
            self.m = params.iter().map(|p| vec![0.0; p.numel()]).collect();
            self.v = self.m.clone();
            return Ok(());
        }
        let matches = self.m.len() == params.len()
            && self.m.iter().zip(params).all(|(m, p)| m.len() == p.numel());
        if !matches {
            return Err(Error::Contract(
                "parameter set changed since the optimizer's first step".into(),
            ));
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn with_grad(w: f64, g: f64) -> Tensor {
        let p = Tensor::param(&[1], vec![w]).unwrap();
        p.mul_scalar(g).sum().backward().unwrap();
        p
    }

    #[test]
    fn sgd_step() {
        let p = with_grad(1.0, 2.0);
        Optimizer::sgd(0.015)
            .step(std::slice::from_ref(&p))
            .unwrap();
        assert!((p.item().unwrap() - 0.97).abs() < 1e-15);
    }

    #[test]
    fn zero_gradient_is_a_no_op() {
        for mut opt in [Optimizer::sgd(0.5), Optimizer::adam()] {
            let p = with_grad(1.25, 0.0);
            opt.step(std::slice::from_ref(&p)).unwrap();
            assert_eq!(p.item().unwrap(), 1.25);
        }
    }

    #[test]
    fn adam_first_step_is_about_lr() {
        // At t = 1, m_hat = g and v_hat = g^2, so the step is lr * |g| / (|g| + eps).
        for g in [1e-3, 0.5, 40.0] {
            let p = with_grad(0.0, g);
            Optimizer::adam().step(std::slice::from_ref(&p)).unwrap();
            let step = -p.item().unwrap();
            assert!((step - 0.001 * g / (g + 1e-7)).abs() < 1e-15, "g = {g}");
            assert!((step - 0.001).abs() < 1e-6);
        }
    }

    #[test]
    fn missing_gradient_is_contract_error() {
        let p = Tensor::param(&[2], vec![1.0, 2.0]).unwrap();
        for mut opt in [Optimizer::sgd(0.1), Optimizer::adam()] {
            assert!(matches!(
                opt.step(std::slice::from_ref(&p)),
                Err(Error::Contract(_))
            ));
            assert_eq!(opt.steps(), 0);
        }
    }

    #[test]
    fn adam_rejects_changed_parameter_set() {
        let mut opt = Optimizer::adam();
        opt.step(&[with_grad(0.0, 1.0)]).unwrap();
        let other = Tensor::param(&[3], vec![0.0; 3]).unwrap();
        other.sum().backward().unwrap();
        assert!(opt.step(&[other]).is_err());
    }

    #[test]
    fn parses_kind() {
        assert_eq!(
            "ADAM".parse::<OptimizerKind>().unwrap(),
            OptimizerKind::Adam
        );
        assert!("rmsprop".parse::<OptimizerKind>().is_err());
    }
}

use crate::error::{Error, Result};
use crate::rng::Rng;
use crate::tensor::Tensor;
use crate::Mode;

/// Inverted dropout: survivors are scaled by `1/(1 − p)` at train time so the
/// eval-mode forward is the identity.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Dropout {
    p: f64,
}

/// Per-element multiplier applied by a train-mode forward (0 or `1/(1 − p)`).
#[derive(Debug, Clone, PartialEq)]
pub enum DropoutMask {
    Identity,
    Scale(Vec<f64>),
}

impl DropoutMask {
    /// Fraction of elements kept (1.0 for the identity mask).
    pub fn keep_fraction(&self) -> f64 {
        match self {
            DropoutMask::Identity => 1.0,
            DropoutMask::Scale(s) => s.iter().filter(|&&v| v != 0.0).count() as f64 / s.len() as f64,
        }
    }
}

impl Dropout {
    pub fn new(p: f64) -> Result<Self> {
        if !(0.0..1.0).contains(&p) {
            return Err(Error::InvalidProbability(p));
        }
        Ok(Self { p })
    }

    pub fn p(&self) -> f64 {
        self.p
    }

    pub fn forward(&self, x: &Tensor, mode: Mode, rng: &mut Rng) -> Result<(Tensor, DropoutMask)> {
        if mode == Mode::Eval {
            return Ok((x.clone(), DropoutMask::Identity));
        }
        let keep = 1.0 / (1.0 - self.p);
        let scale: Vec<f64> = (0..x.len())
            .map(|_| if rng.bernoulli(self.p) { 0.0 } else { keep })
            .collect();
        let data = x.data().iter().zip(&scale).map(|(v, s)| v * s).collect();
        Ok((Tensor::from_vec(x.shape(), data)?, DropoutMask::Scale(scale)))
    }
}

/// Applies the forward mask to the upstream gradient.
pub fn dropout_backward(mask: &DropoutMask, grad_out: &Tensor) -> Result<Tensor> {
    match mask {
        DropoutMask::Identity => Ok(grad_out.clone()),
        DropoutMask::Scale(s) if s.len() == grad_out.len() => {
            let data = grad_out.data().iter().zip(s).map(|(g, s)| g * s).collect();
            Tensor::from_vec(grad_out.shape(), data)
        }
        DropoutMask::Scale(s) => Err(Error::ShapeMismatch(format!(
            "dropout mask of {} elements vs gradient of {}",
            s.len(),
            grad_out.len()
        ))),
    }
}

impl Dropout {
    pub fn backward(&self, mask: &DropoutMask, grad_out: &Tensor) -> Result<Tensor> {
        dropout_backward(mask, grad_out)
    }
}

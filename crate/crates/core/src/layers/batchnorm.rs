use crate::error::{Error, Result};
use crate::tensor::Tensor;
use crate::Mode;

pub const BN_EPS: f64 = 1e-5;
pub const BN_MOMENTUM: f64 = 0.1;

/// Per-channel batch normalization over `[N, C, H, W]`.
///
/// Train mode normalizes with the biased batch variance and folds the batch
/// statistics into the running estimates as
/// `running = (1 − momentum)·running + momentum·batch`
/// (the running variance receives the unbiased estimate). Eval mode uses the
/// running estimates only.
#[derive(Debug, Clone, PartialEq)]
pub struct BatchNorm2d {
    pub gamma: Tensor,
    pub beta: Tensor,
    pub running_mean: Tensor,
    pub running_var: Tensor,
    pub eps: f64,
    pub momentum: f64,
}

#[derive(Debug, Clone)]
pub struct BnCache {
    mode: Mode,
    x_hat: Option<Tensor>,
    inv_std: Vec<f64>,
}

impl BnCache {
    /// Normalized activations; present only for train-mode caches.
    pub fn x_hat(&self) -> Option<&Tensor> {
        self.x_hat.as_ref()
    }
}

#[derive(Debug, Clone)]
pub struct BnGrads {
    pub input: Tensor,
    pub gamma: Tensor,
    pub beta: Tensor,
}

impl BatchNorm2d {
    /// γ = 1, β = 0, running mean 0, running variance 1.
    pub fn new(channels: usize) -> Result<Self> {
        Ok(Self {
            gamma: Tensor::new(&[channels], 1.0)?,
            beta: Tensor::zeros(&[channels])?,
            running_mean: Tensor::zeros(&[channels])?,
            running_var: Tensor::new(&[channels], 1.0)?,
            eps: BN_EPS,
            momentum: BN_MOMENTUM,
        })
    }

    pub fn channels(&self) -> usize {
        self.gamma.len()
    }

    fn check_input(&self, x: &Tensor) -> Result<(usize, usize, usize)> {
        let (n, c, h, w) = x.dims4()?;
        if c != self.channels() {
            return Err(Error::ShapeMismatch(format!(
                "batch norm has {} channels, input has {c}",
                self.channels()
            )));
        }
        Ok((n, c, h * w))
    }

    pub fn forward(&mut self, x: &Tensor, mode: Mode) -> Result<(Tensor, BnCache)> {
        match mode {
            Mode::Eval => self.forward_eval(x),
            Mode::Train => self.forward_train(x),
        }
    }

    /// Normalizes with the running statistics; never mutates the layer.
    pub fn forward_eval(&self, x: &Tensor) -> Result<(Tensor, BnCache)> {
        let (_, c, hw) = self.check_input(x)?;
        let inv_std: Vec<f64> = self
            .running_var
            .data()
            .iter()
            .map(|v| 1.0 / (v + self.eps).sqrt())
            .collect();
        let mut y = x.clone();
        for (i, block) in y.data_mut().chunks_mut(hw).enumerate() {
            let ch = i % c;
            let (mean, s) = (self.running_mean.data()[ch], inv_std[ch]);
            let (g, b) = (self.gamma.data()[ch], self.beta.data()[ch]);
            block.iter_mut().for_each(|v| *v = g * (*v - mean) * s + b);
        }
        Ok((
            y,
            BnCache {
                mode: Mode::Eval,
                x_hat: None,
                inv_std,
            },
        ))
    }

    fn forward_train(&mut self, x: &Tensor) -> Result<(Tensor, BnCache)> {
        let (n, c, hw) = self.check_input(x)?;
        let count = n * hw;
        if count < 2 {
            return Err(Error::DegenerateBatch(count));
        }
        let mut mean = vec![0.0; c];
        for (i, block) in x.data().chunks(hw).enumerate() {
            mean[i % c] += block.iter().sum::<f64>();
        }
        mean.iter_mut().for_each(|m| *m /= count as f64);
        let mut var = vec![0.0; c];
        for (i, block) in x.data().chunks(hw).enumerate() {
            let m = mean[i % c];
            var[i % c] += block.iter().map(|v| (v - m) * (v - m)).sum::<f64>();
        }
        var.iter_mut().for_each(|v| *v /= count as f64);
        let inv_std: Vec<f64> = var.iter().map(|v| 1.0 / (v + self.eps).sqrt()).collect();

        let mut x_hat = x.clone();
        let mut y = x.clone();
        for (i, (xh, yb)) in x_hat.data_mut().chunks_mut(hw).zip(y.data_mut().chunks_mut(hw)).enumerate() {
            let ch = i % c;
            let (m, s) = (mean[ch], inv_std[ch]);
            let (g, b) = (self.gamma.data()[ch], self.beta.data()[ch]);
            for (h, o) in xh.iter_mut().zip(yb.iter_mut()) {
                *h = (*h - m) * s;
                *o = g * *h + b;
            }
        }

        let unbias = count as f64 / (count - 1) as f64;
        let mom = self.momentum;
        for ch in 0..c {
            let rm = &mut self.running_mean.data_mut()[ch];
            *rm = (1.0 - mom) * *rm + mom * mean[ch];
            let rv = &mut self.running_var.data_mut()[ch];
            *rv = (1.0 - mom) * *rv + mom * var[ch] * unbias;
        }
        Ok((
            y,
            BnCache {
                mode: Mode::Train,
                x_hat: Some(x_hat),
                inv_std,
            },
        ))
    }

    /// Exact gradients of the train-mode map, including the terms flowing
    /// through the batch mean and variance.
    pub fn backward(&self, cache: &BnCache, grad_out: &Tensor) -> Result<BnGrads> {
        let x_hat = match (cache.mode, cache.x_hat.as_ref()) {
            (Mode::Train, Some(x_hat)) => x_hat,
            _ => {
                return Err(Error::InvalidMode(
                    "batch norm backward needs a train-mode forward cache".into(),
                ))
            }
        };
        if grad_out.shape() != x_hat.shape() {
            return Err(Error::ShapeMismatch(format!(
                "batch norm grad {:?} vs cached {:?}",
                grad_out.shape(),
                x_hat.shape()
            )));
        }
        let (n, c, hw) = self.check_input(x_hat)?;
        let count = (n * hw) as f64;
        let mut sum_g = vec![0.0; c];
        let mut sum_gx = vec![0.0; c];
        for (i, (g, xh)) in grad_out.data().chunks(hw).zip(x_hat.data().chunks(hw)).enumerate() {
            sum_g[i % c] += g.iter().sum::<f64>();
            sum_gx[i % c] += g.iter().zip(xh).map(|(a, b)| a * b).sum::<f64>();
        }
        let mut grad_x = grad_out.clone();
        for (i, (gx, xh)) in grad_x.data_mut().chunks_mut(hw).zip(x_hat.data().chunks(hw)).enumerate() {
            let ch = i % c;
            let k = self.gamma.data()[ch] * cache.inv_std[ch] / count;
            let (sg, sgx) = (sum_g[ch], sum_gx[ch]);
            for (v, h) in gx.iter_mut().zip(xh) {
                *v = k * (count * *v - sg - h * sgx);
            }
        }
        Ok(BnGrads {
            input: grad_x,
            gamma: Tensor::from_vec(&[c], sum_gx)?,
            beta: Tensor::from_vec(&[c], sum_g)?,
        })
    }
}

//! Forward and backward passes for every layer of the classifier.

mod activation;
mod batchnorm;
mod conv;
mod dropout;
mod linear;
mod loss;
mod pool;

pub use activation::{relu, relu_backward};
pub use batchnorm::{BatchNorm2d, BnCache, BnGrads};
pub use conv::{Conv2d, ConvCache, ConvGrads};
pub use dropout::{dropout_backward, Dropout, DropoutMask};
pub use linear::{Linear, LinearCache, LinearGrads};
pub use loss::{cross_entropy_loss, softmax, softmax_cross_entropy, LossOutput};
pub use pool::{maxpool2d_backward, maxpool2d_forward, PoolCache};

use crate::error::Result;
use crate::tensor::Tensor;

/// `[N, C, H, W]` → `[N, C·H·W]`, row-major.
pub fn flatten(x: &Tensor) -> Result<Tensor> {
    let (n, c, h, w) = x.dims4()?;
    x.clone().reshape(&[n, c * h * w])
}

/// Inverse of [`flatten`].
pub fn unflatten(x: &Tensor, c: usize, h: usize, w: usize) -> Result<Tensor> {
    let (n, _) = x.dims2()?;
    x.clone().reshape(&[n, c, h, w])
}

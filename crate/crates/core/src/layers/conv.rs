//! 3×3 convolution (cross-correlation), stride 1, zero padding 1, lowered to a
//! GEMM per sample through an im2col buffer.

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::linalg::{gemm, Mat};
use crate::tensor::Tensor;

const K: usize = 3;
const KK: usize = K * K;

#[derive(Debug, Clone, PartialEq)]
pub struct Conv2d {
    /// `[out_ch, in_ch, 3, 3]`
    pub weight: Tensor,
    /// `[out_ch]`
    pub bias: Tensor,
}

/// Forward input retained for the backward pass.
#[derive(Debug, Clone)]
pub struct ConvCache {
    input: Tensor,
}

#[derive(Debug, Clone)]
pub struct ConvGrads {
    pub input: Option<Tensor>,
    pub weight: Tensor,
    pub bias: Tensor,
}

/// Lays out the 3×3 neighborhoods of one `[c, h, w]` sample as a
/// `[c·9, h·w]` matrix; row `ci·9 + ky·3 + kx`, column `y·w + x`.
fn im2col(x: &[f64], c: usize, h: usize, w: usize, cols: &mut [f64]) {
    let hw = h * w;
    for ci in 0..c {
        let plane = &x[ci * hw..(ci + 1) * hw];
        for ky in 0..K {
            for kx in 0..K {
                let row = &mut cols[(ci * KK + ky * K + kx) * hw..][..hw];
                for y in 0..h {
                    let dst = &mut row[y * w..(y + 1) * w];
                    let sy = y + ky;
                    if sy < 1 || sy > h {
                        dst.fill(0.0);
                        continue;
                    }
                    let src = &plane[(sy - 1) * w..sy * w];
                    match kx {
                        0 => {
                            dst[0] = 0.0;
                            dst[1..].copy_from_slice(&src[..w - 1]);
                        }
                        1 => dst.copy_from_slice(src),
                        _ => {
                            dst[..w - 1].copy_from_slice(&src[1..]);
                            dst[w - 1] = 0.0;
                        }
                    }
                }
            }
        }
    }
}

/// Adjoint of [`im2col`]: scatters columns back onto a zeroed `[c, h, w]` sample.
fn col2im(cols: &[f64], c: usize, h: usize, w: usize, x: &mut [f64]) {
    let hw = h * w;
    x.fill(0.0);
    for ci in 0..c {
        let plane = &mut x[ci * hw..(ci + 1) * hw];
        for ky in 0..K {
            for kx in 0..K {
                let row = &cols[(ci * KK + ky * K + kx) * hw..][..hw];
                for y in 0..h {
                    let sy = y + ky;
                    if sy < 1 || sy > h {
                        continue;
                    }
                    let src = &row[y * w..(y + 1) * w];
                    let dst = &mut plane[(sy - 1) * w..sy * w];
                    match kx {
                        0 => dst[..w - 1].iter_mut().zip(&src[1..]).for_each(|(d, s)| *d += s),
                        1 => dst.iter_mut().zip(src).for_each(|(d, s)| *d += s),
                        _ => dst[1..].iter_mut().zip(&src[..w - 1]).for_each(|(d, s)| *d += s),
                    }
                }
            }
        }
    }
}

impl Conv2d {
    pub fn new(weight: Tensor, bias: Tensor) -> Result<Self> {
        match (weight.shape(), bias.shape()) {
            ([o, _, K, K], [ob]) if o == ob => Ok(Self { weight, bias }),
            (ws, bs) => Err(Error::ShapeMismatch(format!(
                "conv weight {ws:?} / bias {bs:?}: expected [out, in, 3, 3] and [out]"
            ))),
        }
    }

    /// All-zero layer.
    pub fn zeros(in_ch: usize, out_ch: usize) -> Result<Self> {
        Self::new(Tensor::zeros(&[out_ch, in_ch, K, K])?, Tensor::zeros(&[out_ch])?)
    }

    pub fn in_channels(&self) -> usize {
        self.weight.shape()[1]
    }

    pub fn out_channels(&self) -> usize {
        self.weight.shape()[0]
    }

    pub fn forward(&self, x: &Tensor) -> Result<(Tensor, ConvCache)> {
        let (n, c, h, w) = x.dims4()?;
        if c != self.in_channels() {
            return Err(Error::ShapeMismatch(format!(
                "conv expects {} input channels, got {c}",
                self.in_channels()
            )));
        }
        let o = self.out_channels();
        let (hw, ckk) = (h * w, c * KK);
        let mut out = Tensor::zeros(&[n, o, h, w])?;
        let weight = Mat::new(self.weight.data(), o, ckk);
        let bias = self.bias.data();
        out.data_mut()
            .par_chunks_mut(o * hw)
            .zip(x.data().par_chunks(c * hw))
            .for_each_init(
                || vec![0.0; ckk * hw],
                |cols, (dst, src)| {
                    im2col(src, c, h, w, cols);
                    for (row, &b) in dst.chunks_mut(hw).zip(bias) {
                        row.fill(b);
                    }
                    gemm(weight, Mat::new(cols, ckk, hw), 1.0, dst);
                },
            );
        Ok((out, ConvCache { input: x.clone() }))
    }

    /// Gradients with respect to the input, weights and bias.
    pub fn backward(&self, cache: &ConvCache, grad_out: &Tensor) -> Result<ConvGrads> {
        self.backward_impl(cache, grad_out, true)
    }

    /// Like [`Conv2d::backward`] but skips the input gradient (first layer).
    pub fn backward_params(&self, cache: &ConvCache, grad_out: &Tensor) -> Result<ConvGrads> {
        self.backward_impl(cache, grad_out, false)
    }

    fn backward_impl(&self, cache: &ConvCache, grad_out: &Tensor, want_input: bool) -> Result<ConvGrads> {
        let x = &cache.input;
        let (n, c, h, w) = x.dims4()?;
        let o = self.out_channels();
        if grad_out.shape() != [n, o, h, w] {
            return Err(Error::ShapeMismatch(format!(
                "conv grad {:?} does not match output [{n}, {o}, {h}, {w}]",
                grad_out.shape()
            )));
        }
        let (hw, ckk) = (h * w, c * KK);
        let weight = Mat::new(self.weight.data(), o, ckk);
        let mut grad_x = if want_input {
            Some(Tensor::zeros(x.shape())?)
        } else {
            None
        };

        let per_sample = |src: &[f64], g: &[f64], dx: Option<&mut [f64]>| {
            let mut cols = vec![0.0; ckk * hw];
            im2col(src, c, h, w, &mut cols);
            let mut gw = vec![0.0; o * ckk];
            gemm(Mat::new(g, o, hw), Mat::new(&cols, ckk, hw).t(), 0.0, &mut gw);
            let gb: Vec<f64> = g.chunks(hw).map(|row| row.iter().sum()).collect();
            if let Some(dx) = dx {
                gemm(weight.t(), Mat::new(g, o, hw), 0.0, &mut cols);
                col2im(&cols, c, h, w, dx);
            }
            (gw, gb)
        };

        let partials: Vec<(Vec<f64>, Vec<f64>)> = match grad_x.as_mut() {
            Some(gx) => gx
                .data_mut()
                .par_chunks_mut(c * hw)
                .zip(x.data().par_chunks(c * hw))
                .zip(grad_out.data().par_chunks(o * hw))
                .map(|((dx, src), g)| per_sample(src, g, Some(dx)))
                .collect(),
            None => x
                .data()
                .par_chunks(c * hw)
                .zip(grad_out.data().par_chunks(o * hw))
                .map(|(src, g)| per_sample(src, g, None))
                .collect(),
        };

        // sequential reduction keeps the sum order independent of scheduling
        let mut grad_w = self.weight.zeros_like();
        let mut grad_b = self.bias.zeros_like();
        for (gw, gb) in &partials {
            grad_w.data_mut().iter_mut().zip(gw).for_each(|(a, b)| *a += b);
            grad_b.data_mut().iter_mut().zip(gb).for_each(|(a, b)| *a += b);
        }
        Ok(ConvGrads {
            input: grad_x,
            weight: grad_w,
            bias: grad_b,
        })
    }
}

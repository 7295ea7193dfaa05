//! The customized CNN: three conv → batch-norm → ReLU → max-pool blocks,
//! flatten, a ReLU hidden layer with dropout, and a softmax head.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::layers::{
    flatten, maxpool2d_backward, maxpool2d_forward, relu, relu_backward, softmax, unflatten, BatchNorm2d,
    BnCache, Conv2d, ConvCache, Dropout, DropoutMask, Linear, LinearCache, PoolCache,
};
use crate::rng::Rng;
use crate::tensor::Tensor;
use crate::Mode;

/// Output classes in their fixed index order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum ClassLabel {
    Los = 0,
    Nlos100 = 1,
    Nlos75 = 2,
}

impl ClassLabel {
    pub const ALL: [ClassLabel; 3] = [ClassLabel::Los, ClassLabel::Nlos100, ClassLabel::Nlos75];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn from_index(i: usize) -> Option<Self> {
        Self::ALL.get(i).copied()
    }

    pub fn name(self) -> &'static str {
        match self {
            ClassLabel::Los => "LOS",
            ClassLabel::Nlos100 => "NLOS-1.00m",
            ClassLabel::Nlos75 => "NLOS-0.75m",
        }
    }

    /// Lower-case token used in file names and on the command line.
    pub fn slug(self) -> &'static str {
        match self {
            ClassLabel::Los => "los",
            ClassLabel::Nlos100 => "nlos100",
            ClassLabel::Nlos75 => "nlos75",
        }
    }
}

/// Network hyper-shape. [`Architecture::ccnn`] is the production network;
/// [`Architecture::reduced`] keeps the same topology at toy size for
/// finite-difference checks.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Architecture {
    pub in_channels: usize,
    pub input_size: usize,
    pub filters: [usize; 3],
    pub hidden: usize,
    pub classes: usize,
    pub dropout: f64,
}

impl Default for Architecture {
    fn default() -> Self {
        Self::ccnn()
    }
}

impl Architecture {
    /// 3×224×224 input, 32/64/128 filters, 256 hidden units, 3 classes, p = 0.5.
    pub fn ccnn() -> Self {
        Self {
            in_channels: 3,
            input_size: 224,
            filters: [32, 64, 128],
            hidden: 256,
            classes: 3,
            dropout: 0.5,
        }
    }

    /// 3×8×8 input, 2/2/2 filters, 4 hidden units.
    pub fn reduced() -> Self {
        Self {
            in_channels: 3,
            input_size: 8,
            filters: [2, 2, 2],
            hidden: 4,
            classes: 3,
            dropout: 0.5,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let dims_ok = self.in_channels > 0
            && self.input_size > 0
            && self.input_size % 8 == 0
            && self.filters.iter().all(|&f| f > 0)
            && self.hidden > 0
            && self.classes > 0;
        if !dims_ok {
            return Err(Error::ShapeMismatch(format!("invalid architecture {self:?}")));
        }
        Dropout::new(self.dropout).map(|_| ())
    }

    /// `(channels, side)` after each pooled block.
    pub fn block_outputs(&self) -> [(usize, usize); 3] {
        let s = self.input_size;
        [
            (self.filters[0], s / 2),
            (self.filters[1], s / 4),
            (self.filters[2], s / 8),
        ]
    }

    pub fn flatten_dim(&self) -> usize {
        let (c, s) = self.block_outputs()[2];
        c * s * s
    }

    /// Learnable values: conv weights and biases, BN γ/β, both linear layers.
    pub fn parameter_count(&self) -> usize {
        let mut in_ch = self.in_channels;
        let mut total = 0;
        for &f in &self.filters {
            total += f * in_ch * 9 + f + 2 * f;
            in_ch = f;
        }
        total + self.hidden * self.flatten_dim() + self.hidden + self.classes * self.hidden + self.classes
    }

    /// Values stored in a checkpoint: learnable values plus BN running stats.
    pub fn stored_value_count(&self) -> usize {
        self.parameter_count() + 2 * self.filters.iter().sum::<usize>()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CcnnModel {
    arch: Architecture,
    pub convs: [Conv2d; 3],
    pub norms: [BatchNorm2d; 3],
    pub fc1: Linear,
    pub fc2: Linear,
    pub dropout: Dropout,
    mode: Mode,
}

/// Gradients for every learnable tensor, in [`CcnnModel::params`] order.
#[derive(Debug, Clone, PartialEq)]
pub struct ParamGrads {
    pub tensors: Vec<Tensor>,
}

impl ParamGrads {
    pub fn max_abs(&self) -> f64 {
        self.tensors.iter().map(Tensor::max_abs).fold(0.0, f64::max)
    }
}

#[derive(Debug, Clone)]
struct BlockCache {
    conv: ConvCache,
    bn: BnCache,
    relu_in: Tensor,
    pool: PoolCache,
}

#[derive(Debug, Clone)]
struct TrainCache {
    blocks: Vec<BlockCache>,
    fc1: LinearCache,
    fc1_pre: Tensor,
    dropout: DropoutMask,
    fc2: LinearCache,
}

/// State captured by a forward pass for [`CcnnModel::backward`].
#[derive(Debug, Clone)]
pub struct ForwardCache {
    mode: Mode,
    train: Option<TrainCache>,
}

impl ForwardCache {
    pub fn mode(&self) -> Mode {
        self.mode
    }
}

#[derive(Debug, Clone)]
pub struct Forward {
    pub logits: Tensor,
    pub probs: Tensor,
    pub cache: ForwardCache,
}

fn glorot(rng: &mut Rng, shape: &[usize], fan_in: usize, fan_out: usize) -> Result<Tensor> {
    let bound = glorot_bound(fan_in, fan_out);
    crate::rng::rng_uniform(rng, shape, -bound, bound)
}

/// `√(6 / (fan_in + fan_out))`.
pub fn glorot_bound(fan_in: usize, fan_out: usize) -> f64 {
    (6.0 / (fan_in + fan_out) as f64).sqrt()
}

impl CcnnModel {
    /// Every weight zero, BN at its identity initialization.
    pub fn zeros(arch: Architecture) -> Result<Self> {
        arch.validate()?;
        let [f1, f2, f3] = arch.filters;
        Ok(Self {
            convs: [
                Conv2d::zeros(arch.in_channels, f1)?,
                Conv2d::zeros(f1, f2)?,
                Conv2d::zeros(f2, f3)?,
            ],
            norms: [BatchNorm2d::new(f1)?, BatchNorm2d::new(f2)?, BatchNorm2d::new(f3)?],
            fc1: Linear::zeros(arch.flatten_dim(), arch.hidden)?,
            fc2: Linear::zeros(arch.hidden, arch.classes)?,
            dropout: Dropout::new(arch.dropout)?,
            mode: Mode::Train,
            arch,
        })
    }

    /// Glorot-uniform weights drawn in layer order (conv1..3, fc1, fc2),
    /// zero biases, BN γ = 1, β = 0, running mean 0, running variance 1.
    pub fn init(arch: Architecture, rng: &mut Rng) -> Result<Self> {
        let mut model = Self::zeros(arch)?;
        for conv in &mut model.convs {
            let (o, i) = (conv.out_channels(), conv.in_channels());
            conv.weight = glorot(rng, &[o, i, 3, 3], i * 9, o * 9)?;
        }
        for fc in [&mut model.fc1, &mut model.fc2] {
            let (o, i) = (fc.outputs(), fc.inputs());
            fc.weight = glorot(rng, &[o, i], i, o)?;
        }
        Ok(model)
    }

    pub fn architecture(&self) -> &Architecture {
        &self.arch
    }

    pub fn mode(&self) -> Mode {
        self.mode
    }

    pub fn set_mode(&mut self, mode: Mode) {
        self.mode = mode;
    }

    /// Learnable tensors in canonical order.
    pub fn params(&self) -> Vec<&Tensor> {
        let mut out = Vec::with_capacity(16);
        for (conv, bn) in self.convs.iter().zip(&self.norms) {
            out.extend([&conv.weight, &conv.bias, &bn.gamma, &bn.beta]);
        }
        out.extend([&self.fc1.weight, &self.fc1.bias, &self.fc2.weight, &self.fc2.bias]);
        out
    }

    pub fn params_mut(&mut self) -> Vec<&mut Tensor> {
        let mut out = Vec::with_capacity(16);
        for (conv, bn) in self.convs.iter_mut().zip(self.norms.iter_mut()) {
            out.extend([&mut conv.weight, &mut conv.bias, &mut bn.gamma, &mut bn.beta]);
        }
        out.extend([
            &mut self.fc1.weight,
            &mut self.fc1.bias,
            &mut self.fc2.weight,
            &mut self.fc2.bias,
        ]);
        out
    }

    pub fn param_names() -> Vec<String> {
        let mut names = Vec::with_capacity(16);
        for b in 1..=3 {
            for p in ["conv{b}.weight", "conv{b}.bias", "bn{b}.gamma", "bn{b}.beta"] {
                names.push(p.replace("{b}", &b.to_string()));
            }
        }
        names.extend(["fc1.weight", "fc1.bias", "fc2.weight", "fc2.bias"].map(String::from));
        names
    }

    pub fn parameter_count(&self) -> usize {
        self.params().iter().map(|t| t.len()).sum()
    }

    fn check_input(&self, x: &Tensor) -> Result<()> {
        let (_, c, h, w) = x.dims4()?;
        let s = self.arch.input_size;
        if c != self.arch.in_channels || h != s || w != s {
            return Err(Error::ShapeMismatch(format!(
                "model expects [N, {}, {s}, {s}] input, got {:?}",
                self.arch.in_channels,
                x.shape()
            )));
        }
        Ok(())
    }

    /// Forward pass in the model's current mode. Train mode updates BN running
    /// statistics, samples a dropout mask from `rng`, and keeps the caches
    /// [`CcnnModel::backward`] needs.
    pub fn forward(&mut self, x: &Tensor, rng: &mut Rng) -> Result<Forward> {
        match self.mode {
            Mode::Eval => {
                let logits = self.logits_eval(x, None)?;
                let probs = softmax(&logits)?;
                Ok(Forward {
                    logits,
                    probs,
                    cache: ForwardCache {
                        mode: Mode::Eval,
                        train: None,
                    },
                })
            }
            Mode::Train => self.forward_train(x, rng),
        }
    }

    /// Eval-mode class probabilities; never mutates the model.
    pub fn predict(&self, x: &Tensor) -> Result<Tensor> {
        softmax(&self.logits_eval(x, None)?)
    }

    /// Shapes after input, each pooled block, flatten, fc1 and the output.
    pub fn trace_shapes(&self, x: &Tensor) -> Result<Vec<Vec<usize>>> {
        let mut trace = vec![x.shape().to_vec()];
        let logits = self.logits_eval(x, Some(&mut trace))?;
        trace.push(softmax(&logits)?.shape().to_vec());
        Ok(trace)
    }

    fn logits_eval(&self, x: &Tensor, mut trace: Option<&mut Vec<Vec<usize>>>) -> Result<Tensor> {
        self.check_input(x)?;
        let mut h = x.clone();
        for (conv, bn) in self.convs.iter().zip(&self.norms) {
            let (y, _) = conv.forward(&h)?;
            let (z, _) = bn.forward_eval(&y)?;
            h = maxpool2d_forward(&relu(&z))?.0;
            if let Some(t) = trace.as_deref_mut() {
                t.push(h.shape().to_vec());
            }
        }
        let flat = flatten(&h)?;
        if let Some(t) = trace.as_deref_mut() {
            t.push(flat.shape().to_vec());
        }
        let hidden = relu(&self.fc1.forward(&flat)?.0);
        if let Some(t) = trace.as_deref_mut() {
            t.push(hidden.shape().to_vec());
        }
        let logits = self.fc2.forward(&hidden)?.0;
        logits.ensure_finite("logits")?;
        Ok(logits)
    }

    fn forward_train(&mut self, x: &Tensor, rng: &mut Rng) -> Result<Forward> {
        self.check_input(x)?;
        let mut blocks = Vec::with_capacity(3);
        let mut h = x.clone();
        for (conv, bn) in self.convs.iter().zip(self.norms.iter_mut()) {
            let (y, conv_cache) = conv.forward(&h)?;
            let (z, bn_cache) = bn.forward(&y, Mode::Train)?;
            drop(y);
            let (p, pool_cache) = maxpool2d_forward(&relu(&z))?;
            blocks.push(BlockCache {
                conv: conv_cache,
                bn: bn_cache,
                relu_in: z,
                pool: pool_cache,
            });
            h = p;
        }
        let flat = flatten(&h)?;
        let (fc1_pre, fc1_cache) = self.fc1.forward(&flat)?;
        let (dropped, mask) = self.dropout.forward(&relu(&fc1_pre), Mode::Train, rng)?;
        let (logits, fc2_cache) = self.fc2.forward(&dropped)?;
        logits.ensure_finite("logits")?;
        let probs = softmax(&logits)?;
        Ok(Forward {
            logits,
            probs,
            cache: ForwardCache {
                mode: Mode::Train,
                train: Some(TrainCache {
                    blocks,
                    fc1: fc1_cache,
                    fc1_pre,
                    dropout: mask,
                    fc2: fc2_cache,
                }),
            },
        })
    }

    /// Gradients of every learnable tensor given the loss gradient with
    /// respect to the logits.
    pub fn backward(&self, cache: &ForwardCache, grad_logits: &Tensor) -> Result<ParamGrads> {
        let tc = match (cache.mode, cache.train.as_ref()) {
            (Mode::Train, Some(tc)) => tc,
            _ => {
                return Err(Error::InvalidMode(
                    "model backward needs a train-mode forward cache".into(),
                ))
            }
        };
        let fc2 = self.fc2.backward(&tc.fc2, grad_logits)?;
        let g = self.dropout.backward(&tc.dropout, &fc2.input)?;
        let g = relu_backward(&tc.fc1_pre, &g)?;
        let fc1 = self.fc1.backward(&tc.fc1, &g)?;
        let (c, s) = self.arch.block_outputs()[2];
        let mut g = unflatten(&fc1.input, c, s, s)?;

        let mut block_grads: Vec<[Tensor; 4]> = Vec::with_capacity(3);
        for (i, block) in tc.blocks.iter().enumerate().rev() {
            let gp = maxpool2d_backward(&block.pool, &g)?;
            let gr = relu_backward(&block.relu_in, &gp)?;
            let bn = self.norms[i].backward(&block.bn, &gr)?;
            let conv = if i == 0 {
                self.convs[i].backward_params(&block.conv, &bn.input)?
            } else {
                self.convs[i].backward(&block.conv, &bn.input)?
            };
            if let Some(gx) = conv.input {
                g = gx;
            }
            block_grads.push([conv.weight, conv.bias, bn.gamma, bn.beta]);
        }
        let mut tensors: Vec<Tensor> = block_grads.into_iter().rev().flatten().collect();
        tensors.extend([fc1.weight, fc1.bias, fc2.weight, fc2.bias]);
        Ok(ParamGrads { tensors })
    }
}

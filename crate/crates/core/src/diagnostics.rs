//! Gradient-check suite: every hand-written backward pass against central
//! finite differences on small random problems.
//!
//! Layer checks report the normwise relative error
//! (see [`relative_error`]); the full-model check compares each parameter
//! tensor against the largest gradient component of the whole model, since
//! conv biases ahead of a train-mode batch norm have an exactly zero gradient.

use std::str::FromStr;

use crate::error::Result;
use crate::gradcheck::{finite_diff_grad, relative_error, relative_error_masked, scaled_error};
use crate::layers::{
    maxpool2d_backward, maxpool2d_forward, relu, relu_backward, softmax_cross_entropy, BatchNorm2d, Conv2d, Linear,
};
use crate::model::{Architecture, CcnnModel};
use crate::rng::{rng_uniform, Rng};
use crate::tensor::Tensor;
use crate::Mode;

pub const LAYER_TOLERANCE: f64 = 1e-6;
pub const MODEL_TOLERANCE: f64 = 1e-5;
const STEP: f64 = 1e-5;

#[derive(Debug, Clone, PartialEq)]
pub struct CheckResult {
    pub name: String,
    pub max_rel_error: f64,
    pub tolerance: f64,
}

impl CheckResult {
    pub fn passed(&self) -> bool {
        self.max_rel_error <= self.tolerance
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CheckTarget {
    All,
    Conv,
    Bn,
    Relu,
    Pool,
    Linear,
    Softmax,
    Model,
}

impl FromStr for CheckTarget {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        Ok(match s {
            "all" => CheckTarget::All,
            "conv" => CheckTarget::Conv,
            "bn" => CheckTarget::Bn,
            "relu" => CheckTarget::Relu,
            "pool" => CheckTarget::Pool,
            "linear" => CheckTarget::Linear,
            "softmax" => CheckTarget::Softmax,
            "model" => CheckTarget::Model,
            other => return Err(format!("unknown gradient-check module {other:?}")),
        })
    }
}

fn dot(a: &Tensor, b: &Tensor) -> f64 {
    a.data().iter().zip(b.data()).map(|(x, y)| x * y).sum()
}

fn result(name: &str, errors: &[f64], tolerance: f64) -> CheckResult {
    CheckResult {
        name: name.to_string(),
        max_rel_error: errors.iter().cloned().fold(0.0, f64::max),
        tolerance,
    }
}

pub fn check_conv(seed: u64) -> Result<CheckResult> {
    let mut rng = Rng::new(seed);
    let layer = Conv2d::new(rng_uniform(&mut rng, &[3, 2, 3, 3], -1.0, 1.0)?, rng_uniform(&mut rng, &[3], -1.0, 1.0)?)?;
    let x = rng_uniform(&mut rng, &[2, 2, 6, 6], -1.0, 1.0)?;
    let up = rng_uniform(&mut rng, &[2, 3, 6, 6], -1.0, 1.0)?;
    let (_, cache) = layer.forward(&x)?;
    let g = layer.backward(&cache, &up)?;
    let gx = finite_diff_grad(|t| Ok(dot(&layer.forward(t)?.0, &up)), &x, STEP)?;
    let gw = finite_diff_grad(
        |t| Ok(dot(&Conv2d::new(t.clone(), layer.bias.clone())?.forward(&x)?.0, &up)),
        &layer.weight,
        STEP,
    )?;
    let gb = finite_diff_grad(
        |t| Ok(dot(&Conv2d::new(layer.weight.clone(), t.clone())?.forward(&x)?.0, &up)),
        &layer.bias,
        STEP,
    )?;
    let errs = [
        relative_error(g.input.as_ref().expect("input grad requested"), &gx),
        relative_error(&g.weight, &gw),
        relative_error(&g.bias, &gb),
    ];
    Ok(result("conv", &errs, LAYER_TOLERANCE))
}

pub fn check_bn(seed: u64) -> Result<CheckResult> {
    let mut rng = Rng::new(seed);
    let mut bn = BatchNorm2d::new(3)?;
    bn.gamma = rng_uniform(&mut rng, &[3], 0.5, 1.5)?;
    bn.beta = rng_uniform(&mut rng, &[3], -0.5, 0.5)?;
    let x = rng_uniform(&mut rng, &[2, 3, 4, 4], -1.0, 1.0)?;
    let up = rng_uniform(&mut rng, &[2, 3, 4, 4], -1.0, 1.0)?;
    let (_, cache) = bn.clone().forward(&x, Mode::Train)?;
    let g = bn.backward(&cache, &up)?;
    let loss = |layer: &BatchNorm2d, input: &Tensor| -> Result<f64> {
        Ok(dot(&layer.clone().forward(input, Mode::Train)?.0, &up))
    };
    let gx = finite_diff_grad(|t| loss(&bn, t), &x, STEP)?;
    let gg = finite_diff_grad(
        |t| {
            let mut l = bn.clone();
            l.gamma = t.clone();
            loss(&l, &x)
        },
        &bn.gamma,
        STEP,
    )?;
    let gbeta = finite_diff_grad(
        |t| {
            let mut l = bn.clone();
            l.beta = t.clone();
            loss(&l, &x)
        },
        &bn.beta,
        STEP,
    )?;
    let errs = [
        relative_error(&g.input, &gx),
        relative_error(&g.gamma, &gg),
        relative_error(&g.beta, &gbeta),
    ];
    Ok(result("bn", &errs, LAYER_TOLERANCE))
}

pub fn check_relu(seed: u64) -> Result<CheckResult> {
    let mut rng = Rng::new(seed);
    let x = rng_uniform(&mut rng, &[2, 3, 8, 8], -1.0, 1.0)?;
    let up = rng_uniform(&mut rng, &[2, 3, 8, 8], -1.0, 1.0)?;
    let numeric = finite_diff_grad(|t| Ok(dot(&relu(t), &up)), &x, STEP)?;
    let analytic = relu_backward(&x, &up)?;
    // the kink at 0 is excluded
    let err = relative_error_masked(&analytic, &numeric, |k| x.data()[k].abs() >= 1e-3);
    Ok(result("relu", &[err], LAYER_TOLERANCE))
}

pub fn check_pool(seed: u64) -> Result<CheckResult> {
    let mut rng = Rng::new(seed);
    let x = rng_uniform(&mut rng, &[2, 3, 8, 8], -1.0, 1.0)?;
    let up = rng_uniform(&mut rng, &[2, 3, 4, 4], -1.0, 1.0)?;
    let (_, cache) = maxpool2d_forward(&x)?;
    let analytic = maxpool2d_backward(&cache, &up)?;
    let numeric = finite_diff_grad(|t| Ok(dot(&maxpool2d_forward(t)?.0, &up)), &x, STEP)?;
    // windows whose runner-up is within 1e-3 of the max are excluded
    let near_tie = |k: usize| {
        let (plane, p) = (k / 64, k % 64);
        let top = plane * 64 + ((p / 8) & !1) * 8 + ((p % 8) & !1);
        let window = [top, top + 1, top + 8, top + 9];
        let mut vals: Vec<f64> = window.iter().map(|&i| x.data()[i]).collect();
        vals.sort_by(|a, b| b.partial_cmp(a).unwrap());
        vals[0] - vals[1] < 1e-3
    };
    let err = relative_error_masked(&analytic, &numeric, |k| !near_tie(k));
    Ok(result("pool", &[err], LAYER_TOLERANCE))
}

pub fn check_linear(seed: u64) -> Result<CheckResult> {
    let mut rng = Rng::new(seed);
    let layer = Linear::new(rng_uniform(&mut rng, &[2, 5], -1.0, 1.0)?, rng_uniform(&mut rng, &[2], -1.0, 1.0)?)?;
    let x = rng_uniform(&mut rng, &[3, 5], -1.0, 1.0)?;
    let up = rng_uniform(&mut rng, &[3, 2], -1.0, 1.0)?;
    let (_, cache) = layer.forward(&x)?;
    let g = layer.backward(&cache, &up)?;
    let gx = finite_diff_grad(|t| Ok(dot(&layer.forward(t)?.0, &up)), &x, STEP)?;
    let gw = finite_diff_grad(
        |t| Ok(dot(&Linear::new(t.clone(), layer.bias.clone())?.forward(&x)?.0, &up)),
        &layer.weight,
        STEP,
    )?;
    let gb = finite_diff_grad(
        |t| Ok(dot(&Linear::new(layer.weight.clone(), t.clone())?.forward(&x)?.0, &up)),
        &layer.bias,
        STEP,
    )?;
    let errs = [
        relative_error(&g.input, &gx),
        relative_error(&g.weight, &gw),
        relative_error(&g.bias, &gb),
    ];
    Ok(result("linear", &errs, LAYER_TOLERANCE))
}

pub fn check_softmax(seed: u64) -> Result<CheckResult> {
    let logits = rng_uniform(&mut Rng::new(seed), &[4, 3], -3.0, 3.0)?;
    let labels = [2, 0, 1, 1];
    let out = softmax_cross_entropy(&logits, &labels)?;
    let numeric = finite_diff_grad(|t| Ok(softmax_cross_entropy(t, &labels)?.loss), &logits, STEP)?;
    Ok(result("softmax", &[relative_error(&out.grad_logits, &numeric)], LAYER_TOLERANCE))
}

/// Full forward/backward of the reduced architecture (train mode, fixed
/// dropout mask) against finite differences of the cross-entropy loss.
pub fn check_model(seed: u64) -> Result<CheckResult> {
    let mut model = CcnnModel::init(Architecture::reduced(), &mut Rng::derived(seed, &[0]))?;
    let x = rng_uniform(&mut Rng::derived(seed, &[1]), &[2, 3, 8, 8], 0.0, 1.0)?;
    let labels = [1, 2];
    let dropout_seed = crate::rng::derive_seed(seed, &[2]);
    let loss_of = |m: &CcnnModel| -> Result<f64> {
        let mut m = m.clone();
        let f = m.forward(&x, &mut Rng::new(dropout_seed))?;
        Ok(softmax_cross_entropy(&f.logits, &labels)?.loss)
    };
    let f = model.clone().forward(&x, &mut Rng::new(dropout_seed))?;
    let out = softmax_cross_entropy(&f.logits, &labels)?;
    let grads = model.backward(&f.cache, &out.grad_logits)?;

    let mut numeric = Vec::with_capacity(grads.tensors.len());
    for k in 0..grads.tensors.len() {
        let base = model.params()[k].clone();
        let g = finite_diff_grad(
            |t| {
                *model.params_mut()[k] = t.clone();
                loss_of(&model)
            },
            &base,
            STEP,
        );
        *model.params_mut()[k] = base;
        numeric.push(g?);
    }
    let scale = grads
        .tensors
        .iter()
        .chain(&numeric)
        .map(Tensor::max_abs)
        .fold(0.0, f64::max);
    let errs: Vec<f64> = grads
        .tensors
        .iter()
        .zip(&numeric)
        .map(|(a, n)| scaled_error(a, n, scale))
        .collect();
    Ok(result("model", &errs, MODEL_TOLERANCE))
}

pub const DEFAULT_CHECK_SEED: u64 = 2024;

/// Runs the requested checks with fixed seeds.
pub fn run_checks(target: CheckTarget) -> Result<Vec<CheckResult>> {
    let s = DEFAULT_CHECK_SEED;
    let all = target == CheckTarget::All;
    let mut out = Vec::new();
    if all || target == CheckTarget::Conv {
        out.push(check_conv(s)?);
    }
    if all || target == CheckTarget::Bn {
        out.push(check_bn(s)?);
    }
    if all || target == CheckTarget::Relu {
        out.push(check_relu(s)?);
    }
    if all || target == CheckTarget::Pool {
        out.push(check_pool(s)?);
    }
    if all || target == CheckTarget::Linear {
        out.push(check_linear(s)?);
    }
    if all || target == CheckTarget::Softmax {
        out.push(check_softmax(s)?);
    }
    if all || target == CheckTarget::Model {
        out.push(check_model(s)?);
    }
    Ok(out)
}

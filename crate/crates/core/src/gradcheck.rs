//! Central finite-difference gradients, the oracle every hand-written backward
//! pass is checked against.

use crate::error::{Error, Result};
use crate::tensor::Tensor;

/// Element `k` is `(f(x + step·e_k) − f(x − step·e_k)) / (2·step)`.
pub fn finite_diff_grad<F>(mut f: F, x: &Tensor, step: f64) -> Result<Tensor>
where
    F: FnMut(&Tensor) -> Result<f64>,
{
    if !(step > 0.0) {
        return Err(Error::Numeric(format!("finite-difference step {step} must be positive")));
    }
    let mut probe = x.clone();
    let mut grad = x.zeros_like();
    for k in 0..x.len() {
        let orig = x.data()[k];
        probe.data_mut()[k] = orig + step;
        let plus = f(&probe)?;
        probe.data_mut()[k] = orig - step;
        let minus = f(&probe)?;
        probe.data_mut()[k] = orig;
        if !plus.is_finite() || !minus.is_finite() {
            return Err(Error::Numeric(format!(
                "function evaluated to a non-finite value near element {k}"
            )));
        }
        grad.data_mut()[k] = (plus - minus) / (2.0 * step);
    }
    Ok(grad)
}

/// Normwise relative error `max_k |a_k − b_k| / max(max_k |a_k|, max_k |b_k|)`.
///
/// Both tensors being exactly zero gives 0.
pub fn relative_error(analytic: &Tensor, numeric: &Tensor) -> f64 {
    relative_error_masked(analytic, numeric, |_| true)
}

/// `max_k |a_k − b_k| / scale`, for comparing one tensor of a larger gradient
/// set against the set-wide magnitude (some tensors, such as conv biases
/// feeding a train-mode batch norm, have an exactly zero gradient).
pub fn scaled_error(analytic: &Tensor, numeric: &Tensor, scale: f64) -> f64 {
    assert_eq!(analytic.shape(), numeric.shape(), "gradient shapes differ");
    let diff = analytic
        .data()
        .iter()
        .zip(numeric.data())
        .fold(0.0f64, |m, (a, n)| m.max((a - n).abs()));
    if diff == 0.0 {
        0.0
    } else {
        diff / scale
    }
}

/// [`relative_error`] restricted to the elements for which `keep(k)` holds;
/// used to exclude non-smooth neighborhoods such as ReLU kinks.
pub fn relative_error_masked(analytic: &Tensor, numeric: &Tensor, keep: impl Fn(usize) -> bool) -> f64 {
    assert_eq!(analytic.shape(), numeric.shape(), "gradient shapes differ");
    let mut diff: f64 = 0.0;
    let mut scale: f64 = 0.0;
    for (k, (a, n)) in analytic.data().iter().zip(numeric.data()).enumerate() {
        if !keep(k) {
            continue;
        }
        diff = diff.max((a - n).abs());
        scale = scale.max(a.abs()).max(n.abs());
    }
    if scale == 0.0 {
        0.0
    } else {
        diff / scale
    }
}

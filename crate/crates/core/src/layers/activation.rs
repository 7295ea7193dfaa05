use crate::error::{Error, Result};
use crate::tensor::Tensor;

/// Elementwise `max(0, x)`.
pub fn relu(x: &Tensor) -> Tensor {
    x.map(|v| if v > 0.0 { v } else { 0.0 })
}

/// Passes `grad_out` where `x > 0`; the subgradient at 0 is taken as 0.
///
/// `x` may be either the ReLU input or its output, both have the same sign
/// pattern.
pub fn relu_backward(x: &Tensor, grad_out: &Tensor) -> Result<Tensor> {
    if x.shape() != grad_out.shape() {
        return Err(Error::ShapeMismatch(format!(
            "relu grad {:?} vs input {:?}",
            grad_out.shape(),
            x.shape()
        )));
    }
    let data = x
        .data()
        .iter()
        .zip(grad_out.data())
        .map(|(&v, &g)| if v > 0.0 { g } else { 0.0 })
        .collect();
    Tensor::from_vec(x.shape(), data)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gradcheck::{finite_diff_grad, relative_error_masked};
    use crate::rng::{rng_uniform, Rng};

    #[test]
    fn clamps_negatives() {
        let x = Tensor::from_vec(&[3], vec![-1.0, 0.0, 2.0]).unwrap();
        assert_eq!(relu(&x).data(), &[0.0, 0.0, 2.0]);
    }

    #[test]
    fn all_negative_input_gives_zero_forward_and_backward() {
        let x = Tensor::new(&[2, 3], -0.5).unwrap();
        assert_eq!(relu(&x).max_abs(), 0.0);
        let g = relu_backward(&x, &Tensor::new(&[2, 3], 1.0).unwrap()).unwrap();
        assert_eq!(g.max_abs(), 0.0);
    }

    #[test]
    fn backward_matches_finite_differences_away_from_kink() {
        let mut rng = Rng::new(11);
        let x = rng_uniform(&mut rng, &[2, 3, 4, 4], -1.0, 1.0).unwrap();
        let upstream = rng_uniform(&mut rng, &[2, 3, 4, 4], -1.0, 1.0).unwrap();
        let loss = |t: &Tensor| Ok(relu(t).data().iter().zip(upstream.data()).map(|(a, b)| a * b).sum());
        let numeric = finite_diff_grad(loss, &x, 1e-6).unwrap();
        let analytic = relu_backward(&x, &upstream).unwrap();
        let err = relative_error_masked(&analytic, &numeric, |k| x.data()[k].abs() >= 1e-3);
        assert!(err <= 1e-6, "relu rel err {err}");
    }
}

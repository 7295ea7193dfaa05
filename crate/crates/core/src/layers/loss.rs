use crate::error::{Error, Result};
use crate::tensor::Tensor;

/// Row-wise softmax with the row maximum subtracted before exponentiation.
pub fn softmax(x: &Tensor) -> Result<Tensor> {
    let (_, k) = x.dims2()?;
    let mut out = x.clone();
    for row in out.data_mut().chunks_mut(k) {
        let max = row.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        row.iter_mut().for_each(|v| *v = (*v - max).exp());
        let sum: f64 = row.iter().sum();
        row.iter_mut().for_each(|v| *v /= sum);
    }
    out.ensure_finite("softmax output")?;
    Ok(out)
}

fn check_labels(labels: &[usize], n: usize, k: usize) -> Result<()> {
    if labels.len() != n {
        return Err(Error::ShapeMismatch(format!("{} labels for batch of {n}", labels.len())));
    }
    match labels.iter().find(|&&l| l >= k) {
        Some(&label) => Err(Error::Label { label, classes: k }),
        None => Ok(()),
    }
}

fn grad_from_probs(probs: &Tensor, labels: &[usize]) -> Tensor {
    let (n, k) = (probs.shape()[0], probs.shape()[1]);
    let mut grad = probs.clone();
    for (row, &l) in grad.data_mut().chunks_mut(k).zip(labels) {
        row[l] -= 1.0;
        row.iter_mut().for_each(|v| *v /= n as f64);
    }
    grad
}

/// Mean negative log-likelihood of `labels` under `probs`, with the gradient
/// `(probs − onehot)/N` with respect to the logits that produced `probs`.
pub fn cross_entropy_loss(probs: &Tensor, labels: &[usize]) -> Result<(f64, Tensor)> {
    let (n, k) = probs.dims2()?;
    check_labels(labels, n, k)?;
    let loss = probs
        .data()
        .chunks(k)
        .zip(labels)
        .map(|(row, &l)| -row[l].max(f64::MIN_POSITIVE).ln())
        .sum::<f64>()
        / n as f64;
    Ok((loss, grad_from_probs(probs, labels)))
}

#[derive(Debug, Clone)]
pub struct LossOutput {
    pub loss: f64,
    pub probs: Tensor,
    pub grad_logits: Tensor,
}

/// Softmax and cross-entropy fused on the logits; the loss uses log-sum-exp so
/// large logits stay finite.
pub fn softmax_cross_entropy(logits: &Tensor, labels: &[usize]) -> Result<LossOutput> {
    let (n, k) = logits.dims2()?;
    check_labels(labels, n, k)?;
    let mut loss = 0.0;
    for (row, &l) in logits.data().chunks(k).zip(labels) {
        let max = row.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let lse = max + row.iter().map(|v| (v - max).exp()).sum::<f64>().ln();
        loss += lse - row[l];
    }
    loss /= n as f64;
    if !loss.is_finite() {
        return Err(Error::Numeric("cross-entropy loss is not finite".into()));
    }
    let probs = softmax(logits)?;
    let grad_logits = grad_from_probs(&probs, labels);
    Ok(LossOutput {
        loss,
        probs,
        grad_logits,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gradcheck::{finite_diff_grad, relative_error};
    use crate::rng::{rng_uniform, Rng};

    #[test]
    fn softmax_examples() {
        let p = softmax(&Tensor::from_vec(&[1, 3], vec![0.0, 0.0, 0.0]).unwrap()).unwrap();
        p.data().iter().for_each(|v| assert!((v - 1.0 / 3.0).abs() < 1e-15));
        let p = softmax(&Tensor::from_vec(&[1, 3], vec![1000.0, 0.0, 0.0]).unwrap()).unwrap();
        assert!((p.data()[0] - 1.0).abs() < 1e-15 && p.data()[1] < 1e-300);
        // e^k / (e + e^2 + e^3), hand-evaluated
        let p = softmax(&Tensor::from_vec(&[1, 3], vec![1.0, 2.0, 3.0]).unwrap()).unwrap();
        for (got, want) in p.data().iter().zip([0.090_030_573_170_380_46, 0.244_728_471_054_797_64, 0.665_240_955_774_821_9]) {
            assert!((got - want).abs() < 1e-12);
        }
    }

    #[test]
    fn softmax_rows_sum_to_one() {
        let x = rng_uniform(&mut Rng::new(6), &[50, 3], -1e4, 1e4).unwrap();
        let p = softmax(&x).unwrap();
        for row in p.data().chunks(3) {
            assert!((row.iter().sum::<f64>() - 1.0).abs() <= 1e-9);
            assert!(row.iter().all(|&v| (0.0..=1.0).contains(&v)));
        }
    }

    #[test]
    fn cross_entropy_known_values() {
        let onehot = Tensor::from_vec(&[2, 3], vec![1.0, 0.0, 0.0, 0.0, 0.0, 1.0]).unwrap();
        assert_eq!(cross_entropy_loss(&onehot, &[0, 2]).unwrap().0, 0.0);
        let uniform = Tensor::new(&[4, 3], 1.0 / 3.0).unwrap();
        let (loss, _) = cross_entropy_loss(&uniform, &[0, 1, 2, 1]).unwrap();
        assert!((loss - 3f64.ln()).abs() < 1e-12);
        assert!((3f64.ln() - 1.0986).abs() < 1e-4);
        assert_eq!(
            cross_entropy_loss(&uniform, &[0, 1, 3, 1]).unwrap_err(),
            Error::Label { label: 3, classes: 3 }
        );
    }

    #[test]
    fn fused_gradient_matches_finite_differences() {
        let logits = rng_uniform(&mut Rng::new(12), &[4, 3], -3.0, 3.0).unwrap();
        let labels = [2, 0, 1, 1];
        let out = softmax_cross_entropy(&logits, &labels).unwrap();
        let numeric = finite_diff_grad(|t| Ok(softmax_cross_entropy(t, &labels)?.loss), &logits, 1e-5).unwrap();
        assert!(relative_error(&out.grad_logits, &numeric) <= 1e-6);
        let (loss, grad) = cross_entropy_loss(&out.probs, &labels).unwrap();
        assert!((loss - out.loss).abs() < 1e-12);
        assert_eq!(grad, out.grad_logits);
    }
}

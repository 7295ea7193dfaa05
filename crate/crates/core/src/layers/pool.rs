use crate::error::{Error, Result};
use crate::tensor::Tensor;

/// Flat input offset of each window's maximum, plus the input shape.
#[derive(Debug, Clone)]
pub struct PoolCache {
    argmax: Vec<u32>,
    input_shape: Vec<usize>,
}

impl PoolCache {
    pub fn argmax(&self) -> &[u32] {
        &self.argmax
    }
}

/// 2×2 max pooling, stride 2. Ties go to the first element of the window in
/// row-major order.
pub fn maxpool2d_forward(x: &Tensor) -> Result<(Tensor, PoolCache)> {
    let (n, c, h, w) = x.dims4()?;
    if h % 2 != 0 || w % 2 != 0 {
        return Err(Error::ShapeMismatch(format!(
            "max pool needs even spatial dims, got {h}x{w}"
        )));
    }
    if x.len() > u32::MAX as usize {
        return Err(Error::ShapeMismatch("tensor too large for pool indices".into()));
    }
    let (oh, ow) = (h / 2, w / 2);
    let mut out = Tensor::zeros(&[n, c, oh, ow])?;
    let mut argmax = Vec::with_capacity(out.len());
    let src = x.data();
    let dst = out.data_mut();
    let mut o = 0;
    for plane in 0..n * c {
        let base = plane * h * w;
        for y in 0..oh {
            for xx in 0..ow {
                let top = base + 2 * y * w + 2 * xx;
                let mut best = top;
                for cand in [top + 1, top + w, top + w + 1] {
                    if src[cand] > src[best] {
                        best = cand;
                    }
                }
                dst[o] = src[best];
                argmax.push(best as u32);
                o += 1;
            }
        }
    }
    Ok((
        out,
        PoolCache {
            argmax,
            input_shape: x.shape().to_vec(),
        },
    ))
}

/// Routes each output gradient to the input position that won its window.
pub fn maxpool2d_backward(cache: &PoolCache, grad_out: &Tensor) -> Result<Tensor> {
    if grad_out.len() != cache.argmax.len() {
        return Err(Error::ShapeMismatch(format!(
            "pool grad has {} elements, cache has {}",
            grad_out.len(),
            cache.argmax.len()
        )));
    }
    let mut grad_x = Tensor::zeros(&cache.input_shape)?;
    let len = grad_x.len();
    let gx = grad_x.data_mut();
    for (&idx, &g) in cache.argmax.iter().zip(grad_out.data()) {
        let idx = idx as usize;
        if idx >= len {
            return Err(Error::CorruptCache(format!(
                "pool index {idx} outside input of {len} elements"
            )));
        }
        gx[idx] += g;
    }
    Ok(grad_x)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gradcheck::{finite_diff_grad, relative_error};
    use crate::rng::{rng_uniform, Rng};

    #[test]
    fn picks_window_max() {
        let x = Tensor::from_vec(&[1, 1, 2, 2], vec![1.0, 2.0, 3.0, 4.0]).unwrap();
        let (y, _) = maxpool2d_forward(&x).unwrap();
        assert_eq!(y.data(), &[4.0]);
    }

    #[test]
    fn halves_spatial_dims() {
        let (y, _) = maxpool2d_forward(&Tensor::zeros(&[1, 32, 224, 224]).unwrap()).unwrap();
        assert_eq!(y.shape(), &[1, 32, 112, 112]);
    }

    #[test]
    fn odd_dims_are_rejected() {
        assert!(maxpool2d_forward(&Tensor::zeros(&[1, 1, 3, 4]).unwrap()).is_err());
    }

    #[test]
    fn ties_route_to_first_window_element() {
        let x = Tensor::new(&[1, 1, 4, 4], 2.0).unwrap();
        let (y, cache) = maxpool2d_forward(&x).unwrap();
        assert_eq!(y, Tensor::new(&[1, 1, 2, 2], 2.0).unwrap());
        let g = maxpool2d_backward(&cache, &Tensor::new(&[1, 1, 2, 2], 1.0).unwrap()).unwrap();
        let hot: Vec<usize> = (0..16).filter(|&k| g.data()[k] != 0.0).collect();
        assert_eq!(hot, vec![0, 2, 8, 10]);
    }

    #[test]
    fn distinct_values_give_one_gradient_per_window() {
        let x = Tensor::from_vec(&[1, 1, 4, 4], (0..16).map(|v| ((v * 7) % 16) as f64).collect()).unwrap();
        let (_, cache) = maxpool2d_forward(&x).unwrap();
        let g = maxpool2d_backward(&cache, &Tensor::new(&[1, 1, 2, 2], 1.0).unwrap()).unwrap();
        assert_eq!(g.data().iter().filter(|&&v| v != 0.0).count(), 4);
        let z = maxpool2d_backward(&cache, &Tensor::zeros(&[1, 1, 2, 2]).unwrap()).unwrap();
        assert_eq!(z.max_abs(), 0.0);
    }

    #[test]
    fn corrupt_cache_is_reported() {
        let (_, mut cache) = maxpool2d_forward(&Tensor::zeros(&[1, 1, 2, 2]).unwrap()).unwrap();
        cache.argmax[0] = 99;
        let r = maxpool2d_backward(&cache, &Tensor::zeros(&[1, 1, 1, 1]).unwrap());
        assert!(matches!(r, Err(Error::CorruptCache(_))));
    }

    #[test]
    fn backward_matches_finite_differences_without_near_ties() {
        let mut rng = Rng::new(77);
        let x = rng_uniform(&mut rng, &[2, 3, 8, 8], -1.0, 1.0).unwrap();
        let upstream = rng_uniform(&mut rng, &[2, 3, 4, 4], -1.0, 1.0).unwrap();
        // skip windows whose two largest entries are within 1e-3 of each other
        let (_, cache) = maxpool2d_forward(&x).unwrap();
        let mut near_tie = false;
        for &best in cache.argmax() {
            let best = best as usize;
            let p = best % 64;
            let top = best - p + ((p / 8) & !1) * 8 + ((p % 8) & !1);
            for cand in [top, top + 1, top + 8, top + 9] {
                if cand != best && (x.data()[best] - x.data()[cand]).abs() < 1e-3 {
                    near_tie = true;
                }
            }
        }
        assert!(!near_tie, "pick another seed");
        let analytic = maxpool2d_backward(&cache, &upstream).unwrap();
        let numeric = finite_diff_grad(
            |t| Ok(maxpool2d_forward(t)?.0.data().iter().zip(upstream.data()).map(|(a, b)| a * b).sum()),
            &x,
            1e-6,
        )
        .unwrap();
        assert!(relative_error(&analytic, &numeric) <= 1e-6);
    }
}

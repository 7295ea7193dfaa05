use crate::error::{Error, Result};
use crate::linalg::{gemm, Mat};
use crate::tensor::Tensor;

/// Affine map `y = x·Wᵀ + b` on `[N, in]` batches.
#[derive(Debug, Clone, PartialEq)]
pub struct Linear {
    /// `[out, in]`
    pub weight: Tensor,
    /// `[out]`
    pub bias: Tensor,
}

#[derive(Debug, Clone)]
pub struct LinearCache {
    input: Tensor,
}

#[derive(Debug, Clone)]
pub struct LinearGrads {
    pub input: Tensor,
    pub weight: Tensor,
    pub bias: Tensor,
}

impl Linear {
    pub fn new(weight: Tensor, bias: Tensor) -> Result<Self> {
        match (weight.shape(), bias.shape()) {
            ([o, _], [ob]) if o == ob => Ok(Self { weight, bias }),
            (ws, bs) => Err(Error::ShapeMismatch(format!(
                "linear weight {ws:?} / bias {bs:?}: expected [out, in] and [out]"
            ))),
        }
    }

    pub fn zeros(inputs: usize, outputs: usize) -> Result<Self> {
        Self::new(Tensor::zeros(&[outputs, inputs])?, Tensor::zeros(&[outputs])?)
    }

    pub fn inputs(&self) -> usize {
        self.weight.shape()[1]
    }

    pub fn outputs(&self) -> usize {
        self.weight.shape()[0]
    }

    pub fn forward(&self, x: &Tensor) -> Result<(Tensor, LinearCache)> {
        let (n, i) = x.dims2()?;
        if i != self.inputs() {
            return Err(Error::ShapeMismatch(format!(
                "linear expects {} inputs, got {i}",
                self.inputs()
            )));
        }
        let o = self.outputs();
        let mut y = Tensor::zeros(&[n, o])?;
        for row in y.data_mut().chunks_mut(o) {
            row.copy_from_slice(self.bias.data());
        }
        gemm(
            Mat::new(x.data(), n, i),
            Mat::new(self.weight.data(), o, i).t(),
            1.0,
            y.data_mut(),
        );
        Ok((y, LinearCache { input: x.clone() }))
    }

    pub fn backward(&self, cache: &LinearCache, grad_out: &Tensor) -> Result<LinearGrads> {
        let (n, i) = cache.input.dims2()?;
        let o = self.outputs();
        if grad_out.shape() != [n, o] {
            return Err(Error::ShapeMismatch(format!(
                "linear grad {:?} does not match output [{n}, {o}]",
                grad_out.shape()
            )));
        }
        let g = Mat::new(grad_out.data(), n, o);
        let mut gx = Tensor::zeros(&[n, i])?;
        gemm(g, Mat::new(self.weight.data(), o, i), 0.0, gx.data_mut());
        let mut gw = self.weight.zeros_like();
        gemm(g.t(), Mat::new(cache.input.data(), n, i), 0.0, gw.data_mut());
        let mut gb = self.bias.zeros_like();
        for row in grad_out.data().chunks(o) {
            gb.data_mut().iter_mut().zip(row).for_each(|(a, b)| *a += b);
        }
        Ok(LinearGrads {
            input: gx,
            weight: gw,
            bias: gb,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gradcheck::{finite_diff_grad, relative_error};
    use crate::rng::{rng_uniform, Rng};

    #[test]
    fn identity_weights_pass_input_through() {
        let layer = Linear::new(
            Tensor::from_vec(&[2, 2], vec![1.0, 0.0, 0.0, 1.0]).unwrap(),
            Tensor::zeros(&[2]).unwrap(),
        )
        .unwrap();
        let x = Tensor::from_vec(&[1, 2], vec![3.5, -2.0]).unwrap();
        assert_eq!(layer.forward(&x).unwrap().0, x);
    }

    #[test]
    fn fc1_dimensions() {
        let layer = Linear::zeros(100_352, 256).unwrap();
        let (y, _) = layer.forward(&Tensor::zeros(&[1, 100_352]).unwrap()).unwrap();
        assert_eq!(y.shape(), &[1, 256]);
        assert!(layer.forward(&Tensor::zeros(&[1, 100]).unwrap()).is_err());
    }

    #[test]
    fn backward_matches_finite_differences() {
        let mut rng = Rng::new(5);
        let layer = Linear::new(
            rng_uniform(&mut rng, &[2, 5], -1.0, 1.0).unwrap(),
            rng_uniform(&mut rng, &[2], -1.0, 1.0).unwrap(),
        )
        .unwrap();
        let x = rng_uniform(&mut rng, &[3, 5], -1.0, 1.0).unwrap();
        let upstream = rng_uniform(&mut rng, &[3, 2], -1.0, 1.0).unwrap();
        let dot = |t: &Tensor| -> f64 { t.data().iter().zip(upstream.data()).map(|(a, b)| a * b).sum() };
        let (_, cache) = layer.forward(&x).unwrap();
        let g = layer.backward(&cache, &upstream).unwrap();

        let gx = finite_diff_grad(|t| Ok(dot(&layer.forward(t)?.0)), &x, 1e-5).unwrap();
        assert!(relative_error(&g.input, &gx) <= 1e-6);
        let gw = finite_diff_grad(
            |t| Ok(dot(&Linear::new(t.clone(), layer.bias.clone())?.forward(&x)?.0)),
            &layer.weight,
            1e-5,
        )
        .unwrap();
        assert!(relative_error(&g.weight, &gw) <= 1e-6);
        let gb = finite_diff_grad(
            |t| Ok(dot(&Linear::new(layer.weight.clone(), t.clone())?.forward(&x)?.0)),
            &layer.bias,
            1e-5,
        )
        .unwrap();
        assert!(relative_error(&g.bias, &gb) <= 1e-6);
    }
}

use crate::error::{Error, Result};
use crate::init::{init_tensor, FanInfo, InitializerKind};
use crate::rng::Rng;
use crate::tensor::{Scalar, Tensor};

use super::LayerGradients;

/// Fully connected layer, `y = x · w + b` over rows of `x`.
#[derive(Debug, Clone, PartialEq)]
pub struct DenseLayer<T: Scalar = f32> {
    /// `(n_in, n_out)`
    pub weights: Tensor<T>,
    pub bias: Tensor<T>,
}

impl<T: Scalar> DenseLayer<T> {
    pub fn new(weights: Tensor<T>, bias: Tensor<T>) -> Result<Self> {
        let [_, n_out] = *weights.shape() else {
            return Err(Error::mismatch("DenseLayer::new", "(n_in, n_out)", weights.shape()));
        };
        if bias.shape() != [n_out] {
            return Err(Error::mismatch("DenseLayer::new", [n_out], bias.shape()));
        }
        Ok(Self { weights, bias })
    }

    pub fn init(n_in: usize, n_out: usize, init: InitializerKind, rng: &mut Rng) -> Result<Self> {
        let fan = FanInfo::dense(n_in, n_out)?;
        let weights = init_tensor(init, &[n_in, n_out], Some(fan), rng)?;
        Self::new(weights, Tensor::zeros(&[n_out])?)
    }

    pub fn n_in(&self) -> usize {
        self.weights.shape()[0]
    }

    pub fn n_out(&self) -> usize {
        self.weights.shape()[1]
    }

    pub fn param_count(&self) -> usize {
        self.weights.len() + self.bias.len()
    }

    fn as_rows(&self, x: &Tensor<T>, op: &'static str) -> Result<Tensor<T>> {
        if x.last_dim() != self.n_in() {
            return Err(Error::mismatch(op, format!("last dim {}", self.n_in()), x.shape()));
        }
        x.clone().reshape(&[x.rows(), self.n_in()])
    }

    fn output_shape(&self, x: &Tensor<T>) -> Vec<usize> {
        let mut shape = x.shape().to_vec();
        *shape.last_mut().expect("rank >= 1") = self.n_out();
        shape
    }

    pub fn forward(&self, x: &Tensor<T>) -> Result<Tensor<T>> {
        let rows = self.as_rows(x, "dense_forward")?;
        let mut y = rows.matmul(&self.weights)?;
        let bias = self.bias.data();
        for row in y.data_mut().chunks_exact_mut(self.n_out()) {
            for (v, &b) in row.iter_mut().zip(bias) {
                *v += b;
            }
        }
        y.reshape(&self.output_shape(x))
    }

    /// Gradients are `[weights, bias]` plus the input gradient.
    pub fn backward(&self, x: &Tensor<T>, upstream: &Tensor<T>) -> Result<LayerGradients<T>> {
        let rows = self.as_rows(x, "dense_backward")?;
        let expected = self.output_shape(x);
        if upstream.shape() != expected.as_slice() {
            return Err(Error::mismatch("dense_backward", expected, upstream.shape()));
        }
        let dy = upstream.clone().reshape(&[rows.rows(), self.n_out()])?;
        let d_weights = rows.matmul_tn(&dy)?;
        let mut d_bias = Tensor::zeros(&[self.n_out()])?;
        for row in dy.data().chunks_exact(self.n_out()) {
            for (acc, &v) in d_bias.data_mut().iter_mut().zip(row) {
                *acc += v;
            }
        }
        let d_input = dy.matmul_nt(&self.weights)?.reshape(x.shape())?;
        Ok(LayerGradients {
            params: vec![d_weights, d_bias],
            input: d_input,
        })
    }
}

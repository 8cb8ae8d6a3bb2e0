//! Forward and backward passes for the layer kinds the network uses.

mod activation;
mod conv;
mod dense;
mod pool;

pub use activation::{relu_backward, relu_forward, softmax};
pub use conv::ConvLayer;
pub use dense::DenseLayer;
pub use pool::{PoolLayer, PoolRecord};

use crate::tensor::{Scalar, Tensor};

/// Parameter gradients (in the layer's parameter order) and the gradient
/// with respect to the layer input.
#[derive(Debug, Clone, PartialEq)]
pub struct LayerGradients<T: Scalar = f32> {
    pub params: Vec<Tensor<T>>,
    pub input: Tensor<T>,
}

//! A small from-scratch CNN stack: tensors, layers, the reference network,
//! training with Adam and class reweighting, an image pipeline for NetPBM
//! data, classification metrics and numerical verification oracles.

mod container;
pub mod data;
pub mod error;
pub mod init;
pub mod layers;
pub mod metrics;
pub mod model;
pub mod oracle;
pub mod rng;
pub mod tensor;
pub mod train;

pub use error::{Error, Result};
pub use model::{Model, ModelSpec};
pub use rng::{Rng, Stream};
pub use tensor::Tensor;

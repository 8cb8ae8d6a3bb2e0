use crate::error::{Error, Result};
use crate::tensor::{Scalar, Tensor};

use super::conv::Nhwc;

/// 2x2 max pooling with stride 2. A trailing odd row or column is dropped.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct PoolLayer;

/// Which input element won each output window, kept for the backward pass.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PoolRecord {
    input_shape: Vec<usize>,
    output_shape: Vec<usize>,
    argmax: Vec<usize>,
}

impl PoolRecord {
    pub fn input_shape(&self) -> &[usize] {
        &self.input_shape
    }

    pub fn output_shape(&self) -> &[usize] {
        &self.output_shape
    }

    /// Flat input index selected by each output element.
    pub fn argmax(&self) -> &[usize] {
        &self.argmax
    }
}

impl PoolLayer {
    pub const SIZE: usize = 2;
    pub const STRIDE: usize = 2;

    pub fn output_dim(input: usize) -> usize {
        input / Self::STRIDE
    }

    pub fn forward<T: Scalar>(&self, x: &Tensor<T>) -> Result<(Tensor<T>, PoolRecord)> {
        let g = Nhwc::of(x, "maxpool_forward")?;
        if g.h < Self::SIZE || g.w < Self::SIZE {
            return Err(Error::mismatch("maxpool_forward", "spatial dims >= 2", x.shape()));
        }
        let (oh, ow) = (Self::output_dim(g.h), Self::output_dim(g.w));
        let mut out = Vec::with_capacity(g.n * oh * ow * g.c);
        let mut argmax = Vec::with_capacity(out.capacity());
        let src = x.data();
        for n in 0..g.n {
            for oy in 0..oh {
                for ox in 0..ow {
                    for c in 0..g.c {
                        let mut best_idx = usize::MAX;
                        let mut best = T::neg_infinity();
                        // row-major window order; strict `>` keeps the first maximum
                        for dy in 0..Self::SIZE {
                            for dx in 0..Self::SIZE {
                                let idx = ((n * g.h + oy * Self::STRIDE + dy) * g.w + ox * Self::STRIDE + dx) * g.c + c;
                                if best_idx == usize::MAX || src[idx] > best {
                                    best = src[idx];
                                    best_idx = idx;
                                }
                            }
                        }
                        out.push(best);
                        argmax.push(best_idx);
                    }
                }
            }
        }
        let output_shape = vec![g.n, oh, ow, g.c];
        let record = PoolRecord {
            input_shape: x.shape().to_vec(),
            output_shape: output_shape.clone(),
            argmax,
        };
        Ok((Tensor::new(&output_shape, out)?, record))
    }

    pub fn backward<T: Scalar>(&self, record: &PoolRecord, upstream: &Tensor<T>) -> Result<Tensor<T>> {
        if upstream.shape() != record.output_shape.as_slice() {
            return Err(Error::Contract(format!(
                "pool record is for output {:?}, upstream has shape {:?}",
                record.output_shape,
                upstream.shape()
            )));
        }
        let mut dx = Tensor::zeros(&record.input_shape)?;
        let d = dx.data_mut();
        for (&idx, &g) in record.argmax.iter().zip(upstream.data()) {
            d[idx] += g;
        }
        Ok(dx)
    }
}

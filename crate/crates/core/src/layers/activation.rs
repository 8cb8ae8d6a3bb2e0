use crate::error::{Error, Result};
use crate::tensor::{Scalar, Tensor};

/// NaN passes through so a poisoned activation surfaces downstream instead
/// of being silently zeroed.
pub fn relu_forward<T: Scalar>(x: &Tensor<T>) -> Tensor<T> {
    x.map(|v| if v <= T::zero() { T::zero() } else { v })
}

/// Passes `upstream` where `x > 0`; the subgradient at exactly zero is zero.
pub fn relu_backward<T: Scalar>(x: &Tensor<T>, upstream: &Tensor<T>) -> Result<Tensor<T>> {
    x.zip_map(upstream, "relu_backward", |v, g| if v > T::zero() { g } else { T::zero() })
}

/// Row-wise softmax over the last axis, stabilised by subtracting the row max.
pub fn softmax<T: Scalar>(logits: &Tensor<T>) -> Result<Tensor<T>> {
    if !logits.all_finite() {
        return Err(Error::NonFinite("softmax input".into()));
    }
    let k = logits.last_dim();
    let mut out = logits.clone();
    for row in out.data_mut().chunks_exact_mut(k) {
        let max = row.iter().copied().fold(T::neg_infinity(), T::max);
        let mut total = T::zero();
        for v in row.iter_mut() {
            *v = (*v - max).exp();
            total += *v;
        }
        for v in row.iter_mut() {
            *v = *v / total;
        }
    }
    Ok(out)
}

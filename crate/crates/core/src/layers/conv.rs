//! 2-D convolution, Same padding, stride 1, lowered onto GEMM via im2col.
//!
//! This is cross-correlation (no kernel flip). Kernels are stored as
//! `(kh, kw, in_ch, out_ch)`, so viewed as a matrix they are
//! `(kh * kw * in_ch, out_ch)` with rows in the same `(ky, kx, c)` order
//! that im2col uses for its columns.

use crate::error::{Error, Result};
use crate::init::{init_tensor, FanInfo, InitializerKind};
use crate::rng::Rng;
use crate::tensor::{Scalar, Tensor};

use super::LayerGradients;

#[derive(Debug, Clone, PartialEq)]
pub struct ConvLayer<T: Scalar = f32> {
    pub kernel: Tensor<T>,
    pub bias: Tensor<T>,
}

/// Geometry of an NHWC batch.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub(crate) struct Nhwc {
    pub n: usize,
    pub h: usize,
    pub w: usize,
    pub c: usize,
}

impl Nhwc {
    pub fn of<T: Scalar>(x: &Tensor<T>, op: &'static str) -> Result<Self> {
        match *x.shape() {
            [n, h, w, c] => Ok(Self { n, h, w, c }),
            _ => Err(Error::mismatch(op, "NHWC tensor", x.shape())),
        }
    }
}

impl<T: Scalar> ConvLayer<T> {
    pub fn new(kernel: Tensor<T>, bias: Tensor<T>) -> Result<Self> {
        let [kh, kw, _, out_ch] = *kernel.shape() else {
            return Err(Error::mismatch("ConvLayer::new", "(kh, kw, in, out)", kernel.shape()));
        };
        if kh % 2 == 0 || kw % 2 == 0 {
            return Err(Error::InvalidShape(kernel.shape().to_vec(), "Same padding needs odd kernel sizes"));
        }
        if bias.shape() != [out_ch] {
            return Err(Error::mismatch("ConvLayer::new", [out_ch], bias.shape()));
        }
        Ok(Self { kernel, bias })
    }

    /// 3x3 layer with weights from `init` and zero bias.
    pub fn init(in_ch: usize, out_ch: usize, init: InitializerKind, rng: &mut Rng) -> Result<Self> {
        let fan = FanInfo::conv(3, 3, in_ch, out_ch)?;
        let kernel = init_tensor(init, &[3, 3, in_ch, out_ch], Some(fan), rng)?;
        Self::new(kernel, Tensor::zeros(&[out_ch])?)
    }

    pub fn kh(&self) -> usize {
        self.kernel.shape()[0]
    }

    pub fn kw(&self) -> usize {
        self.kernel.shape()[1]
    }

    pub fn in_ch(&self) -> usize {
        self.kernel.shape()[2]
    }

    pub fn out_ch(&self) -> usize {
        self.kernel.shape()[3]
    }

    pub fn param_count(&self) -> usize {
        self.kernel.len() + self.bias.len()
    }

    fn kernel_matrix(&self) -> Tensor<T> {
        let rows = self.kh() * self.kw() * self.in_ch();
        self.kernel.clone().reshape(&[rows, self.out_ch()]).expect("kernel reshape")
    }

    fn geometry(&self, x: &Tensor<T>, op: &'static str) -> Result<Nhwc> {
        let g = Nhwc::of(x, op)?;
        if g.c != self.in_ch() {
            return Err(Error::mismatch(op, format!("{} input channels", self.in_ch()), g.c));
        }
        Ok(g)
    }

    /// Pre-activation output `sum_c K * x + b`, shape `(N, H, W, out_ch)`.
    pub fn forward(&self, x: &Tensor<T>) -> Result<Tensor<T>> {
        let g = self.geometry(x, "conv_forward")?;
        let cols = im2col(x, g, self.kh(), self.kw());
        let mut out = cols.matmul(&self.kernel_matrix())?;
        let bias = self.bias.data();
        for row in out.data_mut().chunks_exact_mut(self.out_ch()) {
            for (o, &b) in row.iter_mut().zip(bias) {
                *o += b;
            }
        }
        out.reshape(&[g.n, g.h, g.w, self.out_ch()])
    }

    /// Gradients are `[kernel, bias]` plus the input gradient.
    pub fn backward(&self, x: &Tensor<T>, upstream: &Tensor<T>) -> Result<LayerGradients<T>> {
        let g = self.geometry(x, "conv_backward")?;
        let expected = [g.n, g.h, g.w, self.out_ch()];
        if upstream.shape() != expected {
            return Err(Error::mismatch("conv_backward", expected, upstream.shape()));
        }
        let rows = g.n * g.h * g.w;
        let dy = upstream.clone().reshape(&[rows, self.out_ch()])?;
        let cols = im2col(x, g, self.kh(), self.kw());

        let d_kernel = cols.matmul_tn(&dy)?.reshape(self.kernel.shape())?;
        let mut d_bias = Tensor::zeros(&[self.out_ch()])?;
        for row in dy.data().chunks_exact(self.out_ch()) {
            for (acc, &v) in d_bias.data_mut().iter_mut().zip(row) {
                *acc += v;
            }
        }
        let d_cols = dy.matmul_nt(&self.kernel_matrix())?;
        let d_input = col2im(&d_cols, g, self.kh(), self.kw())?;

        Ok(LayerGradients {
            params: vec![d_kernel, d_bias],
            input: d_input,
        })
    }
}

/// Unfolds every output site's receptive field into one row of
/// `(N * H * W, kh * kw * C)`; out-of-image taps read zero.
pub(crate) fn im2col<T: Scalar>(x: &Tensor<T>, g: Nhwc, kh: usize, kw: usize) -> Tensor<T> {
    let (ph, pw) = (kh / 2, kw / 2);
    let width = kh * kw * g.c;
    let mut cols = vec![T::zero(); g.n * g.h * g.w * width];
    let src = x.data();
    let mut rows = cols.chunks_exact_mut(width);
    for n in 0..g.n {
        let image = &src[n * g.h * g.w * g.c..(n + 1) * g.h * g.w * g.c];
        for oy in 0..g.h {
            for ox in 0..g.w {
                let row = rows.next().expect("row count");
                for ky in 0..kh {
                    let Some(iy) = (oy + ky).checked_sub(ph).filter(|&iy| iy < g.h) else {
                        continue;
                    };
                    for kx in 0..kw {
                        let Some(ix) = (ox + kx).checked_sub(pw).filter(|&ix| ix < g.w) else {
                            continue;
                        };
                        let at = (iy * g.w + ix) * g.c;
                        let dst = (ky * kw + kx) * g.c;
                        row[dst..dst + g.c].copy_from_slice(&image[at..at + g.c]);
                    }
                }
            }
        }
    }
    Tensor::new(&[g.n * g.h * g.w, width], cols).expect("im2col shape")
}

/// Adjoint of [`im2col`]: scatters column gradients back onto the input.
pub(crate) fn col2im<T: Scalar>(cols: &Tensor<T>, g: Nhwc, kh: usize, kw: usize) -> Result<Tensor<T>> {
    let (ph, pw) = (kh / 2, kw / 2);
    let width = kh * kw * g.c;
    let mut dx = Tensor::zeros(&[g.n, g.h, g.w, g.c])?;
    let out = dx.data_mut();
    let mut rows = cols.data().chunks_exact(width);
    for n in 0..g.n {
        let image = &mut out[n * g.h * g.w * g.c..(n + 1) * g.h * g.w * g.c];
        for oy in 0..g.h {
            for ox in 0..g.w {
                let row = rows.next().expect("row count");
                for ky in 0..kh {
                    let Some(iy) = (oy + ky).checked_sub(ph).filter(|&iy| iy < g.h) else {
                        continue;
                    };
                    for kx in 0..kw {
                        let Some(ix) = (ox + kx).checked_sub(pw).filter(|&ix| ix < g.w) else {
                            continue;
                        };
                        let at = (iy * g.w + ix) * g.c;
                        let src = (ky * kw + kx) * g.c;
                        for (d, &s) in image[at..at + g.c].iter_mut().zip(&row[src..src + g.c]) {
                            *d += s;
                        }
                    }
                }
            }
        }
    }
    Ok(dx)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn centre_kernel() -> ConvLayer {
        let mut k = Tensor::zeros(&[3, 3, 1, 1]).unwrap();
        k.data_mut()[4] = 1.0;
        ConvLayer::new(k, Tensor::zeros(&[1]).unwrap()).unwrap()
    }

    #[test]
    fn identity_kernel_on_single_pixel() {
        let x = Tensor::new(&[1, 1, 1, 1], vec![5.0]).unwrap();
        assert_eq!(centre_kernel().forward(&x).unwrap().data(), &[5.0]);
    }

    #[test]
    fn same_padding_preserves_spatial_dims() {
        let layer = ConvLayer::<f32>::init(3, 16, InitializerKind::Xavier, &mut Rng::new(1)).unwrap();
        let x = Tensor::zeros(&[1, 150, 150, 3]).unwrap();
        assert_eq!(layer.forward(&x).unwrap().shape(), &[1, 150, 150, 16]);
    }

    #[test]
    fn channel_mismatch_is_shape_error() {
        let layer = ConvLayer::<f32>::init(2, 4, InitializerKind::Xavier, &mut Rng::new(1)).unwrap();
        let x = Tensor::zeros(&[1, 4, 4, 3]).unwrap();
        assert!(matches!(layer.forward(&x), Err(Error::ShapeMismatch { .. })));
    }

    #[test]
    fn zero_upstream_gives_zero_gradients() {
        let layer = ConvLayer::<f32>::init(2, 3, InitializerKind::Xavier, &mut Rng::new(2)).unwrap();
        let x = Tensor::full(&[2, 5, 4, 2], 0.7).unwrap();
        let up = Tensor::zeros(&[2, 5, 4, 3]).unwrap();
        let grads = layer.backward(&x, &up).unwrap();
        assert!(grads.params.iter().all(|g| g.data().iter().all(|&v| v == 0.0)));
        assert!(grads.input.data().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn bias_gradient_is_channel_sum() {
        let layer = ConvLayer::<f32>::init(1, 2, InitializerKind::Xavier, &mut Rng::new(3)).unwrap();
        let x = Tensor::full(&[2, 3, 3, 1], 1.0).unwrap();
        let mut rng = Rng::new(4);
        let up = Tensor::from_fn(&[2, 3, 3, 2], |_| rng.uniform(-1.0, 1.0) as f32).unwrap();
        let grads = layer.backward(&x, &up).unwrap();
        for c in 0..2 {
            let expected: f32 = up.data().iter().skip(c).step_by(2).sum();
            assert!((grads.params[1].data()[c] - expected).abs() < 1e-5);
        }
    }

    #[test]
    fn upstream_shape_checked() {
        let layer = ConvLayer::<f32>::init(1, 2, InitializerKind::Xavier, &mut Rng::new(3)).unwrap();
        let x = Tensor::zeros(&[1, 3, 3, 1]).unwrap();
        let up = Tensor::zeros(&[1, 3, 3, 1]).unwrap();
        assert!(layer.backward(&x, &up).is_err());
    }
}

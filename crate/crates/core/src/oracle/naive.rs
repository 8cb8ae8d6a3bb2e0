//! Direct transcriptions used as references for the optimized kernels.

use crate::error::{Error, Result};
use crate::model::{LayerSpec, ModelSpec};
use crate::tensor::Tensor;

/// Same-padded, stride-1 cross-correlation by direct summation per output
/// site. `kernel` is `(kh, kw, in, out)`.
pub fn naive_conv(x: &Tensor<f64>, kernel: &Tensor<f64>, bias: &Tensor<f64>) -> Result<Tensor<f64>> {
    let [n, h, w, c] = *x.shape() else {
        return Err(Error::mismatch("naive_conv", "NHWC input", x.shape()));
    };
    let [kh, kw, kc, out] = *kernel.shape() else {
        return Err(Error::mismatch("naive_conv", "(kh, kw, in, out) kernel", kernel.shape()));
    };
    if kc != c || bias.shape() != [out] || kh % 2 == 0 || kw % 2 == 0 {
        return Err(Error::mismatch(
            "naive_conv",
            format!("odd kernel over {c} channels with {out} biases"),
            (kernel.shape(), bias.shape()),
        ));
    }
    let (py, px) = (kh / 2, kw / 2);
    let xd = x.data();
    let kd = kernel.data();
    let mut y = vec![0.0; n * h * w * out];
    for b in 0..n {
        for i in 0..h {
            for j in 0..w {
                for o in 0..out {
                    let mut acc = bias.data()[o];
                    for ky in 0..kh {
                        for kx in 0..kw {
                            let (yy, xx) = ((i + ky) as isize - py as isize, (j + kx) as isize - px as isize);
                            if yy < 0 || xx < 0 || yy >= h as isize || xx >= w as isize {
                                continue;
                            }
                            for ch in 0..c {
                                let xv = xd[((b * h + yy as usize) * w + xx as usize) * c + ch];
                                acc += kd[((ky * kw + kx) * c + ch) * out + o] * xv;
                            }
                        }
                    }
                    y[((b * h + i) * w + j) * out + o] = acc;
                }
            }
        }
    }
    Tensor::new(&[n, h, w, out], y)
}

/// Counts parameters by walking the layer list on its own, without building
/// a model or asking the spec for its shapes.
pub fn param_count_oracle(spec: &ModelSpec) -> usize {
    let [mut h, mut w, mut c] = spec.input;
    let mut flat = None;
    let mut total = 0;
    for layer in &spec.layers {
        match *layer {
            LayerSpec::Conv { filters } => {
                total += 3 * 3 * c * filters + filters;
                c = filters;
            }
            LayerSpec::MaxPool => {
                h /= 2;
                w /= 2;
            }
            LayerSpec::Flatten => flat = Some(h * w * c),
            LayerSpec::Dense { units } => {
                let n_in = flat.unwrap_or(c);
                total += n_in * units + units;
                flat = Some(units);
            }
            LayerSpec::Relu | LayerSpec::Softmax => {}
        }
    }
    total
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::init::InitializerKind;

    #[test]
    fn identity_kernel_reproduces_input() {
        let x = Tensor::from_fn(&[1, 3, 4, 2], |i| i as f64 * 0.5 - 3.0).unwrap();
        let mut k = Tensor::zeros(&[3, 3, 2, 2]).unwrap();
        // centre tap, channel c -> output c
        for ch in 0..2 {
            k.data_mut()[((3 + 1) * 2 + ch) * 2 + ch] = 1.0;
        }
        let y = naive_conv(&x, &k, &Tensor::zeros(&[2]).unwrap()).unwrap();
        assert_eq!(y, x);
    }

    #[test]
    fn ones_kernel_sums_interior() {
        let x = Tensor::full(&[1, 5, 5, 1], 2.5).unwrap();
        let k = Tensor::full(&[3, 3, 1, 1], 1.0).unwrap();
        let y = naive_conv(&x, &k, &Tensor::zeros(&[1]).unwrap()).unwrap();
        assert_eq!(y.data()[2 * 5 + 2], 22.5);
        // corner sees four taps
        assert_eq!(y.data()[0], 10.0);
    }

    #[test]
    fn param_counts() {
        let conv = ModelSpec {
            input: [8, 8, 3],
            layers: vec![LayerSpec::Conv { filters: 16 }],
            init: InitializerKind::Xavier,
            classes: 2,
        };
        assert_eq!(param_count_oracle(&conv), 448);
        let dense = ModelSpec {
            input: [1, 1, 10],
            layers: vec![LayerSpec::Flatten, LayerSpec::Dense { units: 5 }],
            init: InitializerKind::Xavier,
            classes: 5,
        };
        assert_eq!(param_count_oracle(&dense), 55);
    }
}

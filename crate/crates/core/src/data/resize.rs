use crate::error::{Error, Result};
use crate::tensor::Tensor;

/// Bilinear resize of an `(H, W, C)` image using half-pixel centres
/// (no corner alignment). Source coordinates are clamped to the image.
pub fn resize_bilinear(img: &Tensor, out_h: usize, out_w: usize) -> Result<Tensor> {
    let [h, w, c] = *img.shape() else {
        return Err(Error::mismatch("resize_bilinear", "(H, W, C)", img.shape()));
    };
    if h == out_h && w == out_w {
        return Ok(img.clone());
    }
    let ys: Vec<_> = (0..out_h).map(|o| taps(o, h, out_h)).collect();
    let xs: Vec<_> = (0..out_w).map(|o| taps(o, w, out_w)).collect();
    let src = img.data();
    let mut out = Vec::with_capacity(out_h * out_w * c);
    for &(y0, y1, fy) in &ys {
        for &(x0, x1, fx) in &xs {
            for ch in 0..c {
                let at = |y: usize, x: usize| src[(y * w + x) * c + ch] as f64;
                let top = at(y0, x0) * (1.0 - fx) + at(y0, x1) * fx;
                let bottom = at(y1, x0) * (1.0 - fx) + at(y1, x1) * fx;
                out.push((top * (1.0 - fy) + bottom * fy) as f32);
            }
        }
    }
    Tensor::new(&[out_h, out_w, c], out)
}

/// Neighbouring source indices and the weight of the second one.
fn taps(o: usize, src: usize, dst: usize) -> (usize, usize, f64) {
    let s = ((o as f64 + 0.5) * src as f64 / dst as f64 - 0.5).clamp(0.0, (src - 1) as f64);
    let i0 = s.floor() as usize;
    let i1 = (i0 + 1).min(src - 1);
    (i0, i1, s - i0 as f64)
}

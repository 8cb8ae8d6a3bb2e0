//! Train-time augmentation: horizontal flip, rotation, scaling, zoom,
//! additive intensity shift and multiplicative lighting. Never a vertical flip.

use serde::{Deserialize, Serialize};

use crate::rng::Rng;
use crate::tensor::Tensor;

use super::ImageSample;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct AugmentConfig {
    pub enabled: bool,
    pub flip_probability: f64,
    /// Rotation drawn from `U(-max, max)` degrees.
    pub rotation_degrees: f64,
    /// Scale factor range; the scaled image is centre-cropped or zero-padded back to size.
    pub scale: (f64, f64),
    /// Zoom factor range; a centre crop resized back to size, edges replicated.
    pub zoom: (f64, f64),
    /// Additive shift drawn from `U(-max, max)` in normalized units.
    pub intensity_shift: f64,
    /// Multiplicative brightness range.
    pub lighting: (f64, f64),
}

impl Default for AugmentConfig {
    fn default() -> Self {
        Self {
            enabled: true,
            flip_probability: 0.5,
            rotation_degrees: 10.0,
            scale: (0.9, 1.1),
            zoom: (0.9, 1.1),
            intensity_shift: 0.1,
            lighting: (0.9, 1.1),
        }
    }
}

impl AugmentConfig {
    pub fn disabled() -> Self {
        Self {
            enabled: false,
            ..Self::default()
        }
    }

    /// Every draw is the identity.
    pub fn identity() -> Self {
        Self {
            enabled: true,
            flip_probability: 0.0,
            rotation_degrees: 0.0,
            scale: (1.0, 1.0),
            zoom: (1.0, 1.0),
            intensity_shift: 0.0,
            lighting: (1.0, 1.0),
        }
    }
}

/// The random parameters of one augmentation.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AugmentDraw {
    pub flip: bool,
    pub rotation_degrees: f64,
    pub scale: f64,
    pub zoom: f64,
    pub intensity_shift: f64,
    pub lighting: f64,
}

impl AugmentDraw {
    pub fn sample(cfg: &AugmentConfig, rng: &mut Rng) -> Self {
        Self {
            flip: rng.bernoulli(cfg.flip_probability),
            rotation_degrees: rng.uniform(-cfg.rotation_degrees, cfg.rotation_degrees),
            scale: rng.uniform(cfg.scale.0, cfg.scale.1),
            zoom: rng.uniform(cfg.zoom.0, cfg.zoom.1),
            intensity_shift: rng.uniform(-cfg.intensity_shift, cfg.intensity_shift),
            lighting: rng.uniform(cfg.lighting.0, cfg.lighting.1),
        }
    }

    pub fn apply(&self, img: &Tensor) -> Tensor {
        let mut out = if self.flip { flip_horizontal(img) } else { img.clone() };
        if self.rotation_degrees != 0.0 {
            let (sin, cos) = (-self.rotation_degrees.to_radians()).sin_cos();
            out = warp(&out, Border::Zero, |dx, dy| (cos * dx - sin * dy, sin * dx + cos * dy));
        }
        if self.scale != 1.0 {
            let s = self.scale;
            out = warp(&out, Border::Zero, |dx, dy| (dx / s, dy / s));
        }
        if self.zoom != 1.0 {
            let z = self.zoom;
            out = warp(&out, Border::Clamp, |dx, dy| (dx / z, dy / z));
        }
        let (shift, gain) = (self.intensity_shift as f32, self.lighting as f32);
        for v in out.data_mut() {
            *v = ((*v + shift) * gain).clamp(0.0, 1.0);
        }
        out
    }
}

/// Applies one freshly drawn augmentation. The label is untouched.
pub fn augment(sample: &ImageSample, cfg: &AugmentConfig, rng: &mut Rng) -> ImageSample {
    if !cfg.enabled {
        return sample.clone();
    }
    ImageSample {
        pixels: AugmentDraw::sample(cfg, rng).apply(&sample.pixels),
        label: sample.label,
    }
}

/// Mirrors an `(H, W, C)` image left to right.
pub fn flip_horizontal(img: &Tensor) -> Tensor {
    let [h, w, c] = *img.shape() else {
        panic!("flip_horizontal expects (H, W, C), got {:?}", img.shape());
    };
    let src = img.data();
    let mut out = Vec::with_capacity(src.len());
    for y in 0..h {
        for x in (0..w).rev() {
            let at = (y * w + x) * c;
            out.extend_from_slice(&src[at..at + c]);
        }
    }
    Tensor::new(img.shape(), out).expect("same shape")
}

#[derive(Clone, Copy)]
enum Border {
    Zero,
    Clamp,
}

/// Inverse-maps every output pixel through `map` (offsets from the image
/// centre, in pixels) and samples the source bilinearly.
fn warp(img: &Tensor, border: Border, map: impl Fn(f64, f64) -> (f64, f64)) -> Tensor {
    let [h, w, c] = *img.shape() else {
        panic!("warp expects (H, W, C)");
    };
    let (cy, cx) = ((h as f64 - 1.0) / 2.0, (w as f64 - 1.0) / 2.0);
    let src = img.data();
    let fetch = |y: i64, x: i64, ch: usize| -> f64 {
        let (y, x) = match border {
            Border::Zero if y < 0 || x < 0 || y >= h as i64 || x >= w as i64 => return 0.0,
            Border::Zero => (y, x),
            Border::Clamp => (y.clamp(0, h as i64 - 1), x.clamp(0, w as i64 - 1)),
        };
        src[(y as usize * w + x as usize) * c + ch] as f64
    };
    let mut out = Vec::with_capacity(src.len());
    for y in 0..h {
        for x in 0..w {
            let (sx, sy) = map(x as f64 - cx, y as f64 - cy);
            let (sx, sy) = (sx + cx, sy + cy);
            let (x0, y0) = (sx.floor(), sy.floor());
            let (fx, fy) = (sx - x0, sy - y0);
            let (x0, y0) = (x0 as i64, y0 as i64);
            for ch in 0..c {
                let top = fetch(y0, x0, ch) * (1.0 - fx) + fetch(y0, x0 + 1, ch) * fx;
                let bottom = fetch(y0 + 1, x0, ch) * (1.0 - fx) + fetch(y0 + 1, x0 + 1, ch) * fx;
                out.push((top * (1.0 - fy) + bottom * fy) as f32);
            }
        }
    }
    Tensor::new(img.shape(), out).expect("same shape")
}

#[cfg(test)]
mod tests {
    use super::*;

    fn random_image(seed: u64) -> Tensor {
        let mut rng = Rng::new(seed);
        Tensor::from_fn(&[9, 12, 3], |_| rng.unit() as f32).unwrap()
    }

    #[test]
    fn identity_config_is_identity() {
        let sample = ImageSample {
            pixels: random_image(1),
            label: 2,
        };
        let out = augment(&sample, &AugmentConfig::identity(), &mut Rng::new(5));
        assert_eq!(out, sample);
    }

    #[test]
    fn flip_is_an_involution() {
        let img = random_image(2);
        assert_ne!(flip_horizontal(&img), img);
        assert_eq!(flip_horizontal(&flip_horizontal(&img)), img);
    }

    #[test]
    fn flip_mirrors_columns_only() {
        let img = Tensor::from_fn(&[2, 3, 1], |i| i as f32).unwrap();
        assert_eq!(flip_horizontal(&img).data(), &[2.0, 1.0, 0.0, 5.0, 4.0, 3.0]);
    }

    #[test]
    fn small_warps_keep_constant_centre() {
        let img = Tensor::full(&[8, 8, 3], 0.5f32).unwrap();
        let draw = AugmentDraw {
            flip: false,
            rotation_degrees: 7.0,
            scale: 1.0,
            zoom: 1.05,
            intensity_shift: 0.0,
            lighting: 1.0,
        };
        let out = draw.apply(&img);
        // centre pixels stay inside the image under a small rotation
        let centre = (4 * 8 + 4) * 3;
        assert!((out.data()[centre] - 0.5).abs() < 1e-6);
    }

    #[test]
    fn outputs_stay_in_unit_range() {
        let cfg = AugmentConfig::default();
        let mut rng = Rng::new(9);
        for i in 0..200 {
            let s = ImageSample {
                pixels: random_image(i),
                label: 1,
            };
            let out = augment(&s, &cfg, &mut rng);
            assert_eq!(out.pixels.shape(), s.pixels.shape());
            assert_eq!(out.label, 1);
            assert!(out.pixels.data().iter().all(|&v| (0.0..=1.0).contains(&v)));
        }
    }
}

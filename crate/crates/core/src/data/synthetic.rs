//! Procedural grey-level patterns, one family per class, for fixtures and
//! smoke runs where no real corpus is at hand.

use std::fs;
use std::path::Path;

use crate::error::{Error, Result};
use crate::rng::{Rng, Stream};

use super::{encode_pnm, preprocess, Dataset, ImageSample, RawImage, Split};

/// Class names in label order; they also sort in label order, so a written
/// tree loads back with the same labels.
pub const PATTERN_NAMES: [&str; 5] = ["c0-disc", "c1-hstripes", "c2-vstripes", "c3-checker", "c4-diagonal"];

fn check_classes(k: usize) -> Result<()> {
    if k == 0 || k > PATTERN_NAMES.len() {
        return Err(Error::Contract(format!(
            "synthetic patterns support 1..={} classes, got {k}",
            PATTERN_NAMES.len()
        )));
    }
    Ok(())
}

pub fn pattern_names(k: usize) -> Result<Vec<String>> {
    check_classes(k)?;
    Ok(PATTERN_NAMES[..k].iter().map(|s| s.to_string()).collect())
}

/// One 8-bit `size x size` graymap of the given class family with random
/// period, phase, contrast and pixel noise.
pub fn pattern_image(class: usize, size: usize, rng: &mut Rng) -> Result<RawImage> {
    check_classes(class + 1)?;
    let period = rng.uniform(4.0, 8.0);
    let phase = rng.uniform(0.0, period);
    let lo = rng.uniform(0.05, 0.25);
    let hi = rng.uniform(0.75, 0.95);
    let radius = rng.uniform(0.25, 0.4) * size as f64;
    let (cy, cx) = (
        size as f64 / 2.0 + rng.uniform(-2.0, 2.0),
        size as f64 / 2.0 + rng.uniform(-2.0, 2.0),
    );
    let band = |t: f64| ((t + phase) / period).floor() as i64 % 2 == 0;
    let mut data = Vec::with_capacity(size * size);
    for y in 0..size {
        for x in 0..size {
            let (fy, fx) = (y as f64 + 0.5, x as f64 + 0.5);
            let on = match class {
                0 => (fy - cy).hypot(fx - cx) < radius,
                1 => band(fy),
                2 => band(fx),
                3 => band(fy) == band(fx),
                _ => band(fy + fx),
            };
            let v = if on { hi } else { lo } + rng.uniform(-0.05, 0.05);
            data.push((v.clamp(0.0, 1.0) * 255.0).round() as u8);
        }
    }
    Ok(RawImage {
        width: size,
        height: size,
        channels: 1,
        maxval: 255,
        data,
    })
}

fn image_rng(seed: u64, class: usize, i: usize) -> Rng {
    Rng::stream(seed, Stream::Fixture, class as u64, i as u64)
}

/// In-memory dataset with `per_class[c]` images of class `c`, all tagged
/// `split`, preprocessed exactly as files on disk would be.
pub fn pattern_dataset(per_class: &[usize], size: usize, seed: u64, split: Split) -> Result<Dataset> {
    let names = pattern_names(per_class.len())?;
    let mut images = Vec::new();
    for (class, &n) in per_class.iter().enumerate() {
        for i in 0..n {
            let raw = pattern_image(class, size, &mut image_rng(seed, class, i))?;
            images.push(ImageSample {
                pixels: preprocess(&raw, size)?,
                label: class,
            });
        }
    }
    Dataset::from_samples(names, images, split)
}

/// Writes the same images as [`pattern_dataset`] as a class-per-directory
/// tree of `.pgm` files under `root`.
pub fn write_pattern_tree(root: &Path, per_class: &[usize], size: usize, seed: u64) -> Result<()> {
    let names = pattern_names(per_class.len())?;
    for (class, (&n, name)) in per_class.iter().zip(&names).enumerate() {
        let dir = root.join(name);
        fs::create_dir_all(&dir)?;
        for i in 0..n {
            let raw = pattern_image(class, size, &mut image_rng(seed, class, i))?;
            fs::write(dir.join(format!("{i:04}.pgm")), encode_pnm(&raw))?;
        }
    }
    Ok(())
}

#![allow(dead_code)]

use rndcnn::data::synthetic::pattern_dataset;
use rndcnn::data::{stratified_split, AugmentConfig, Dataset, Split};
use rndcnn::train::TrainConfig;
use rndcnn::{Rng, Tensor};

/// The given train set followed by a copy of itself tagged as validation.
pub fn with_val_copy(train: Dataset) -> Dataset {
    let n = train.len();
    let mut images = train.images.clone();
    images.extend(train.images);
    let mut data = Dataset::from_samples(train.index.class_names, images, Split::Train).unwrap();
    data.index.splits[n..].fill(Split::Val);
    data
}

/// Small 32x32 three-class set split 80/20.
pub fn split_patterns(per_class: &[usize], seed: u64) -> Dataset {
    let mut data = pattern_dataset(per_class, 32, seed, Split::Train).unwrap();
    data.index = stratified_split(data.index, 0.8, seed).unwrap();
    data
}

pub fn quick_config(seed: u64, epochs: usize) -> TrainConfig {
    TrainConfig {
        epochs,
        batch_size: 4,
        seed,
        augment: AugmentConfig::default(),
        ..Default::default()
    }
}

pub fn random64(shape: &[usize], seed: u64) -> Tensor<f64> {
    let mut rng = Rng::new(seed);
    Tensor::from_fn(shape, |_| rng.uniform(-1.0, 1.0)).unwrap()
}

/// Distinct values with magnitude >= 0.1, spaced 0.013 apart, random signs.
pub fn tie_free(shape: &[usize], seed: u64) -> Tensor<f64> {
    let n: usize = shape.iter().product();
    let mut vals: Vec<f64> = (0..n).map(|i| 0.1 + 0.013 * i as f64).collect();
    Rng::new(seed).shuffle(&mut vals);
    let mut rng = Rng::new(seed + 1);
    Tensor::new(shape, vals.into_iter().map(|v| if rng.bernoulli(0.5) { -v } else { v }).collect()).unwrap()
}

use crate::rng::{Rng, Stream};
use crate::tensor::Tensor;
use crate::train::loss::one_hot;

use super::{augment, AugmentConfig, Dataset, Split};

/// One mini-batch: NHWC images, one-hot targets and the dataset positions
/// they came from.
#[derive(Debug, Clone)]
pub struct Batch {
    pub images: Tensor,
    pub targets: Tensor,
    pub labels: Vec<usize>,
    pub indices: Vec<usize>,
}

pub struct BatchIter<'a> {
    data: &'a Dataset,
    order: Vec<usize>,
    pos: usize,
    batch_size: usize,
    augment: Option<AugmentConfig>,
    seed: u64,
    epoch: u64,
}

/// Mini-batches over one split. The train split is reshuffled per epoch and
/// augmented when `augment` is enabled; validation and test samples come in
/// index order and are never augmented.
pub fn batch_iter<'a>(
    data: &'a Dataset,
    split: Split,
    batch_size: usize,
    augment: Option<&AugmentConfig>,
    seed: u64,
    epoch: u64,
) -> BatchIter<'a> {
    assert!(batch_size > 0, "batch size must be positive");
    let mut order = data.index.indices(split);
    let augment = match split {
        Split::Train => {
            Rng::stream(seed, Stream::Shuffle, epoch, 0).shuffle(&mut order);
            augment.filter(|c| c.enabled).copied()
        }
        Split::Val | Split::Test => None,
    };
    BatchIter {
        data,
        order,
        pos: 0,
        batch_size,
        augment,
        seed,
        epoch,
    }
}

impl BatchIter<'_> {
    pub fn remaining_samples(&self) -> usize {
        self.order.len() - self.pos
    }
}

impl Iterator for BatchIter<'_> {
    type Item = Batch;

    fn next(&mut self) -> Option<Batch> {
        if self.pos >= self.order.len() {
            return None;
        }
        let end = (self.pos + self.batch_size).min(self.order.len());
        let indices = self.order[self.pos..end].to_vec();
        self.pos = end;

        let size = self.data.size;
        let mut pixels = Vec::with_capacity(indices.len() * size * size * 3);
        let mut labels = Vec::with_capacity(indices.len());
        for &i in &indices {
            let sample = &self.data.images[i];
            match &self.augment {
                Some(cfg) => {
                    let mut rng = Rng::stream(self.seed, Stream::Augment, self.epoch, i as u64);
                    pixels.extend_from_slice(augment(sample, cfg, &mut rng).pixels.data());
                }
                None => pixels.extend_from_slice(sample.pixels.data()),
            }
            labels.push(sample.label);
        }
        let images = Tensor::new(&[indices.len(), size, size, 3], pixels).expect("batch shape");
        let targets = one_hot(&labels, self.data.classes()).expect("labels validated by index");
        Some(Batch {
            images,
            targets,
            labels,
            indices,
        })
    }
}

use crate::error::{Error, Result};
use crate::rng::{Rng, Stream};

use super::{DatasetIndex, Split};

/// Per class: seeded shuffle, the first `ceil(fraction * n)` samples go to
/// train and the rest to validation. Every class keeps at least one sample
/// on each side.
pub fn stratified_split(mut index: DatasetIndex, train_fraction: f64, seed: u64) -> Result<DatasetIndex> {
    if !(train_fraction > 0.0 && train_fraction < 1.0) {
        return Err(Error::Split(format!("train fraction must be in (0, 1), got {train_fraction}")));
    }
    for class in 0..index.classes() {
        let mut members: Vec<usize> = (0..index.len()).filter(|&i| index.samples[i].label == class).collect();
        if members.len() < 2 {
            return Err(Error::Split(format!(
                "class `{}` has {} sample(s), need at least 2",
                index.class_names[class],
                members.len()
            )));
        }
        Rng::stream(seed, Stream::Split, class as u64, 0).shuffle(&mut members);
        let n_train = train_count(members.len(), train_fraction);
        for (pos, &i) in members.iter().enumerate() {
            index.splits[i] = if pos < n_train { Split::Train } else { Split::Val };
        }
    }
    Ok(index)
}

fn train_count(n: usize, fraction: f64) -> usize {
    // the epsilon keeps exact products like 0.8 * 100 from rounding up
    ((n as f64 * fraction - 1e-9).ceil() as usize).clamp(1, n - 1)
}

//! Preprocessed-image cache in the `RNDD` container.

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::container::{layout, read_frame, write_frame, TensorEntry};
use crate::error::{Error, Result};

use super::{Dataset, DatasetIndex, ImageSample, SampleRef, Split};

pub const MAGIC: &[u8; 4] = b"RNDD";
pub const VERSION: u32 = 1;

#[derive(Serialize, Deserialize)]
struct Header {
    class_names: Vec<String>,
    size: usize,
    samples: Vec<SampleRef>,
    splits: Vec<Split>,
    tensors: Vec<TensorEntry>,
}

pub fn save_cache(data: &Dataset, path: &Path) -> Result<()> {
    let header = Header {
        class_names: data.index.class_names.clone(),
        size: data.size,
        samples: data.index.samples.clone(),
        splits: data.index.splits.clone(),
        tensors: layout(data.images.iter().enumerate().map(|(i, s)| (format!("image{i}"), &s.pixels))),
    };
    let mut out = Vec::new();
    write_frame(&mut out, MAGIC, VERSION, &header, data.images.iter().map(|s| &s.pixels))?;
    fs::write(path, out)?;
    Ok(())
}

pub fn load_cache(path: &Path) -> Result<Dataset> {
    let bytes = fs::read(path)?;
    let frame = read_frame(&bytes, MAGIC, VERSION)?;
    let header: Header = frame.parse_header()?;
    let images = frame.tensors(&header.tensors)?;
    if images.len() != header.samples.len() || header.splits.len() != header.samples.len() {
        return Err(Error::format(frame.payload_offset, "sample, split and image counts disagree"));
    }
    let index = DatasetIndex {
        class_names: header.class_names,
        samples: header.samples,
        splits: header.splits,
    };
    let images = images
        .into_iter()
        .zip(&index.samples)
        .map(|(pixels, s)| ImageSample { pixels, label: s.label })
        .collect();
    Ok(Dataset {
        index,
        images,
        size: header.size,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::tensor::Tensor;

    #[test]
    fn cache_round_trip() {
        let images = (0..3)
            .map(|i| ImageSample {
                pixels: Tensor::full(&[2, 2, 3], 0.25 * i as f32).unwrap(),
                label: i % 2,
            })
            .collect();
        let data = Dataset::from_samples(vec!["x".into(), "y".into()], images, Split::Val).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("cache.rndd");
        save_cache(&data, &path).unwrap();
        assert_eq!(load_cache(&path).unwrap(), data);
    }
}

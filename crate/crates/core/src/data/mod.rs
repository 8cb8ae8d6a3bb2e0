//! Dataset ingestion, preprocessing, splitting, augmentation and batching.
//!
//! A dataset is either a directory with one sub-directory per class holding
//! `.pgm`/`.ppm` files, or a manifest CSV with a `path,label` header whose
//! paths are relative to the manifest's directory.

mod augment;
mod batch;
mod cache;
mod pnm;
mod resize;
mod split;
pub mod synthetic;

pub use augment::{augment, flip_horizontal, AugmentConfig, AugmentDraw};
pub use batch::{batch_iter, Batch, BatchIter};
pub use cache::{load_cache, save_cache};
pub use pnm::{decode_pnm, encode_pnm, RawImage};
pub use resize::resize_bilinear;
pub use split::stratified_split;

use std::collections::BTreeSet;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, IngestReport, Result};
use crate::tensor::Tensor;

pub const DEFAULT_IMAGE_SIZE: usize = 150;
pub const MANIFEST_NAME: &str = "manifest.csv";
const EXTENSIONS: [&str; 3] = ["pgm", "ppm", "pnm"];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Split {
    Train,
    Val,
    Test,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SampleRef {
    pub path: PathBuf,
    pub label: usize,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DatasetIndex {
    pub class_names: Vec<String>,
    pub samples: Vec<SampleRef>,
    /// One tag per sample.
    pub splits: Vec<Split>,
}

impl DatasetIndex {
    pub fn new(class_names: Vec<String>, samples: Vec<SampleRef>, split: Split) -> Result<Self> {
        if let Some(s) = samples.iter().find(|s| s.label >= class_names.len()) {
            return Err(Error::Contract(format!("label {} out of range for {}", s.label, s.path.display())));
        }
        let splits = vec![split; samples.len()];
        Ok(Self {
            class_names,
            samples,
            splits,
        })
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn classes(&self) -> usize {
        self.class_names.len()
    }

    /// Samples per class over the whole index.
    pub fn counts(&self) -> Vec<usize> {
        let mut counts = vec![0; self.classes()];
        for s in &self.samples {
            counts[s.label] += 1;
        }
        counts
    }

    pub fn counts_in(&self, split: Split) -> Vec<usize> {
        let mut counts = vec![0; self.classes()];
        for i in self.indices(split) {
            counts[self.samples[i].label] += 1;
        }
        counts
    }

    pub fn indices(&self, split: Split) -> Vec<usize> {
        (0..self.len()).filter(|&i| self.splits[i] == split).collect()
    }

    pub fn with_split(mut self, split: Split) -> Self {
        self.splits.fill(split);
        self
    }
}

fn has_image_ext(path: &Path) -> bool {
    path.extension()
        .and_then(|e| e.to_str())
        .is_some_and(|e| EXTENSIONS.contains(&e.to_ascii_lowercase().as_str()))
}

/// Indexes a class-per-directory tree or a manifest CSV. Class names are
/// sorted lexicographically to fix label indices; samples are ordered by
/// path. Every sample starts tagged [`Split::Train`].
pub fn load_dataset(root: &Path) -> Result<DatasetIndex> {
    if root.is_file() {
        return load_manifest(root, None);
    }
    let manifest = root.join(MANIFEST_NAME);
    if manifest.is_file() {
        return load_manifest(&manifest, None);
    }
    let mut report = IngestReport::default();
    let entries = fs::read_dir(root).map_err(|e| {
        report.push(root.display().to_string(), e.to_string());
        Error::Ingest(report.clone())
    })?;
    let mut class_dirs: Vec<(String, PathBuf)> = Vec::new();
    for entry in entries {
        let entry = entry?;
        if entry.file_type()?.is_dir() {
            class_dirs.push((entry.file_name().to_string_lossy().into_owned(), entry.path()));
        }
    }
    class_dirs.sort();
    if class_dirs.is_empty() {
        report.push(root.display().to_string(), "no class directories found");
        return Err(Error::Ingest(report));
    }
    let mut samples = Vec::new();
    for (label, (_, dir)) in class_dirs.iter().enumerate() {
        let mut files: Vec<PathBuf> = match fs::read_dir(dir) {
            Ok(rd) => rd
                .filter_map(|e| e.ok().map(|e| e.path()))
                .filter(|p| p.is_file() && has_image_ext(p))
                .collect(),
            Err(e) => {
                report.push(dir.display().to_string(), e.to_string());
                continue;
            }
        };
        files.sort();
        samples.extend(files.into_iter().map(|path| SampleRef { path, label }));
    }
    if !report.is_empty() {
        return Err(Error::Ingest(report));
    }
    if samples.is_empty() {
        report.push(root.display().to_string(), "no .pgm/.ppm files found");
        return Err(Error::Ingest(report));
    }
    DatasetIndex::new(class_dirs.into_iter().map(|(n, _)| n).collect(), samples, Split::Train)
}

#[derive(Debug, Deserialize)]
struct ManifestRow {
    path: String,
    label: String,
}

/// Reads a `path,label` manifest. With `classes` given, any other label is
/// an error naming its row; otherwise the classes are the sorted distinct labels.
pub fn load_manifest(path: &Path, classes: Option<&[String]>) -> Result<DatasetIndex> {
    let mut report = IngestReport::default();
    let base = path.parent().unwrap_or(Path::new("."));
    let mut reader = csv::Reader::from_path(path).map_err(|e| {
        report.push(path.display().to_string(), e.to_string());
        Error::Ingest(report.clone())
    })?;
    let headers = reader.headers().map_err(|e| {
        report.push(path.display().to_string(), e.to_string());
        Error::Ingest(report.clone())
    })?;
    if headers != vec!["path", "label"] {
        report.push(path.display().to_string(), format!("expected header `path,label`, found {headers:?}"));
        return Err(Error::Ingest(report));
    }
    let mut rows = Vec::new();
    for (i, row) in reader.deserialize::<ManifestRow>().enumerate() {
        // row 1 is the header
        let line = i + 2;
        match row {
            Ok(r) => rows.push((line, r)),
            Err(e) => report.push(format!("{}:{line}", path.display()), e.to_string()),
        }
    }
    let class_names: Vec<String> = match classes {
        Some(c) => c.to_vec(),
        None => rows
            .iter()
            .map(|(_, r)| r.label.clone())
            .collect::<BTreeSet<_>>()
            .into_iter()
            .collect(),
    };
    let mut samples = Vec::new();
    for (line, row) in rows {
        let Some(label) = class_names.iter().position(|c| *c == row.label) else {
            report.push(
                format!("{}:{line}", path.display()),
                format!("unknown label `{}` (classes: {})", row.label, class_names.join(", ")),
            );
            continue;
        };
        let file = base.join(&row.path);
        if !file.is_file() {
            report.push(format!("{}:{line}", path.display()), format!("cannot read {}", file.display()));
            continue;
        }
        samples.push(SampleRef { path: file, label });
    }
    if !report.is_empty() {
        return Err(Error::Ingest(report));
    }
    if samples.is_empty() {
        report.push(path.display().to_string(), "manifest lists no samples");
        return Err(Error::Ingest(report));
    }
    samples.sort_by(|a, b| a.path.cmp(&b.path));
    DatasetIndex::new(class_names, samples, Split::Train)
}

/// A preprocessed image: `(H, W, 3)` with values in `[0, 1]`.
#[derive(Debug, Clone, PartialEq)]
pub struct ImageSample {
    pub pixels: Tensor,
    pub label: usize,
}

/// Decoded raw image to a `(size, size, 3)` tensor in `[0, 1]`.
pub fn preprocess(raw: &RawImage, size: usize) -> Result<Tensor> {
    let scale = raw.maxval as f32;
    let mut rgb = Vec::with_capacity(raw.width * raw.height * 3);
    for px in raw.data.chunks_exact(raw.channels) {
        if raw.channels == 1 {
            let v = px[0] as f32 / scale;
            rgb.extend([v, v, v]);
        } else {
            rgb.extend(px.iter().map(|&b| b as f32 / scale));
        }
    }
    let img = Tensor::new(&[raw.height, raw.width, 3], rgb)?;
    let mut out = resize_bilinear(&img, size, size)?;
    // maxval below the largest sample would push values past 1
    for v in out.data_mut() {
        *v = v.clamp(0.0, 1.0);
    }
    Ok(out)
}

pub fn decode_and_preprocess(path: &Path, size: usize) -> Result<Tensor> {
    let bytes = fs::read(path).map_err(|e| Error::Decode {
        path: path.to_path_buf(),
        offset: 0,
        message: e.to_string(),
    })?;
    preprocess(&decode_pnm(&bytes, path)?, size)
}

/// An index together with its preprocessed images, aligned by position.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub index: DatasetIndex,
    pub images: Vec<ImageSample>,
    pub size: usize,
}

impl Dataset {
    /// Decodes and preprocesses every sample; all failures are collected
    /// into one ingest report.
    pub fn load(index: DatasetIndex, size: usize) -> Result<Self> {
        let mut report = IngestReport::default();
        let mut images = Vec::with_capacity(index.len());
        for s in &index.samples {
            match decode_and_preprocess(&s.path, size) {
                Ok(pixels) => images.push(ImageSample { pixels, label: s.label }),
                Err(e) => report.push(s.path.display().to_string(), e.to_string()),
            }
        }
        if !report.is_empty() {
            return Err(Error::Ingest(report));
        }
        Ok(Self { index, images, size })
    }

    /// In-memory dataset; samples get synthetic `memory/<i>` paths.
    pub fn from_samples(class_names: Vec<String>, images: Vec<ImageSample>, split: Split) -> Result<Self> {
        let size = match images.first().map(|s| s.pixels.shape().to_vec()).as_deref() {
            Some(&[h, w, 3]) if h == w => h,
            other => return Err(Error::mismatch("Dataset::from_samples", "square (S, S, 3) images", other)),
        };
        if let Some(bad) = images.iter().find(|s| s.pixels.shape() != [size, size, 3]) {
            return Err(Error::mismatch("Dataset::from_samples", [size, size, 3], bad.pixels.shape()));
        }
        let samples = images
            .iter()
            .enumerate()
            .map(|(i, s)| SampleRef {
                path: PathBuf::from(format!("memory/{i}")),
                label: s.label,
            })
            .collect();
        Ok(Self {
            index: DatasetIndex::new(class_names, samples, split)?,
            images,
            size,
        })
    }

    pub fn len(&self) -> usize {
        self.images.len()
    }

    pub fn is_empty(&self) -> bool {
        self.images.is_empty()
    }

    pub fn classes(&self) -> usize {
        self.index.classes()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn grey_is_replicated_and_scaled() {
        let raw = RawImage {
            width: 3,
            height: 2,
            channels: 1,
            maxval: 255,
            data: vec![51; 6],
        };
        let t = preprocess(&raw, 150).unwrap();
        assert_eq!(t.shape(), &[150, 150, 3]);
        assert!(t.data().iter().all(|&v| v == 51.0 / 255.0));
    }

    #[test]
    fn single_white_pixel() {
        let raw = RawImage {
            width: 1,
            height: 1,
            channels: 1,
            maxval: 255,
            data: vec![255],
        };
        let t = preprocess(&raw, 150).unwrap();
        assert!(t.data().iter().all(|&v| v == 1.0));
    }

    #[test]
    fn counts_and_indices() {
        let samples = (0..5)
            .map(|i| SampleRef {
                path: format!("{i}").into(),
                label: i % 2,
            })
            .collect();
        let idx = DatasetIndex::new(vec!["a".into(), "b".into()], samples, Split::Test).unwrap();
        assert_eq!(idx.counts(), vec![3, 2]);
        assert_eq!(idx.indices(Split::Test).len(), 5);
        assert!(idx.indices(Split::Train).is_empty());
    }
}

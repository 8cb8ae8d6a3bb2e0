//! Flat TOML run configuration. Every key is optional; an empty file gives
//! the reference setup (Xavier, Adam at 1e-4, weighted cross-entropy,
//! 100 epochs, 150x150 inputs).

use std::fs;
use std::path::{Path, PathBuf};

use rndcnn::data::{AugmentConfig, DEFAULT_IMAGE_SIZE};
use rndcnn::init::{InitializerKind, DEFAULT_UNIFORM_RANGE};
use rndcnn::train::adam::AdamConfig;
use rndcnn::train::TrainConfig;
use serde::{Deserialize, Serialize};

use crate::exit::Failure;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    /// Class-per-directory tree, a directory holding `manifest.csv`, or a manifest file.
    pub data: Option<PathBuf>,
    pub out: PathBuf,
    /// Expected class names, in label order. Empty means "take them from the data".
    pub classes: Vec<String>,
    /// Decoded-image cache; written on first use, read afterwards.
    pub cache: Option<PathBuf>,
    pub input_size: usize,
    pub train_fraction: f64,
    pub seed: u64,
    pub epochs: usize,
    pub batch_size: usize,
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
    /// `xavier`, `zero` or `uniform`.
    pub init: String,
    pub uniform_low: f64,
    pub uniform_high: f64,
    pub augment: bool,
    pub class_weighting: bool,
}

impl Default for RunConfig {
    fn default() -> Self {
        let adam = AdamConfig::default();
        let train = TrainConfig::default();
        Self {
            data: None,
            out: PathBuf::from("out"),
            classes: Vec::new(),
            cache: None,
            input_size: DEFAULT_IMAGE_SIZE,
            train_fraction: 0.8,
            seed: train.seed,
            epochs: train.epochs,
            batch_size: train.batch_size,
            learning_rate: adam.learning_rate,
            beta1: adam.beta1,
            beta2: adam.beta2,
            epsilon: adam.epsilon,
            init: "xavier".into(),
            uniform_low: DEFAULT_UNIFORM_RANGE.0,
            uniform_high: DEFAULT_UNIFORM_RANGE.1,
            augment: true,
            class_weighting: train.class_weighting,
        }
    }
}

/// Command-line values that take precedence over the file.
#[derive(Debug, Default, Clone)]
pub struct Overrides {
    pub data: Option<PathBuf>,
    pub out: Option<PathBuf>,
    pub seed: Option<u64>,
    pub input_size: Option<usize>,
    pub init: Option<String>,
    pub no_augment: bool,
    pub no_class_weights: bool,
}

impl RunConfig {
    /// Reads `path` (if any); relative paths inside the file are taken
    /// relative to the file's directory.
    pub fn load(path: Option<&Path>) -> Result<Self, Failure> {
        let Some(path) = path else { return Ok(Self::default()) };
        let text = fs::read_to_string(path).map_err(|e| Failure::config(format!("{}: {e}", path.display())))?;
        let mut cfg: Self = toml::from_str(&text).map_err(|e| Failure::config(format!("{}: {e}", path.display())))?;
        let base = path.parent().unwrap_or(Path::new(""));
        let rebase = |p: &mut PathBuf| {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        };
        cfg.data.as_mut().map(rebase);
        cfg.cache.as_mut().map(rebase);
        rebase(&mut cfg.out);
        Ok(cfg)
    }

    pub fn apply(mut self, o: Overrides) -> Self {
        self.data = o.data.or(self.data);
        self.out = o.out.unwrap_or(self.out);
        self.seed = o.seed.unwrap_or(self.seed);
        self.input_size = o.input_size.unwrap_or(self.input_size);
        self.init = o.init.unwrap_or(self.init);
        self.augment &= !o.no_augment;
        self.class_weighting &= !o.no_class_weights;
        self
    }

    pub fn initializer(&self) -> Result<InitializerKind, Failure> {
        match self.init.as_str() {
            "xavier" => Ok(InitializerKind::Xavier),
            "zero" => Ok(InitializerKind::Zero),
            "uniform" => Ok(InitializerKind::uniform(self.uniform_low, self.uniform_high)?),
            other => Err(Failure::config(format!("unknown initializer `{other}` (xavier, zero, uniform)"))),
        }
    }

    /// Everything checkable without touching the data.
    pub fn train_config(&self) -> Result<TrainConfig, Failure> {
        if !(self.train_fraction > 0.0 && self.train_fraction < 1.0) {
            return Err(Failure::config(format!("train_fraction must lie in (0, 1), got {}", self.train_fraction)));
        }
        if self.input_size < 16 {
            return Err(Failure::config(format!("input_size must be at least 16, got {}", self.input_size)));
        }
        let augment = if self.augment { AugmentConfig::default() } else { AugmentConfig::disabled() };
        let cfg = TrainConfig {
            epochs: self.epochs,
            batch_size: self.batch_size,
            seed: self.seed,
            adam: AdamConfig {
                learning_rate: self.learning_rate,
                beta1: self.beta1,
                beta2: self.beta2,
                epsilon: self.epsilon,
            },
            init: self.initializer()?,
            augment,
            class_weighting: self.class_weighting,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn data_path(&self) -> Result<&Path, Failure> {
        self.data.as_deref().ok_or_else(|| Failure::config("no dataset given (--data or `data` in the config)"))
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).unwrap_or_default()
    }
}

//! Loss, optimizer, the epoch loop with best-weights tracking, and checkpoints.

pub mod adam;
pub mod checkpoint;
pub mod loss;

use std::fmt::Write as _;

use crate::data::{batch_iter, AugmentConfig, Dataset, Split};
use crate::error::{Error, Result};
use crate::init::InitializerKind;
use crate::model::{Model, ModelSpec};
use crate::rng::{Rng, Stream};
use crate::tensor::{argmax, Tensor};

use adam::{AdamConfig, AdamState};
use checkpoint::{BestRecord, Checkpoint};
use loss::{labels_of, ClassWeights, LOG_CLAMP};

#[derive(Debug, Clone, PartialEq)]
pub struct TrainConfig {
    pub epochs: usize,
    pub batch_size: usize,
    pub seed: u64,
    pub adam: AdamConfig,
    pub init: InitializerKind,
    pub augment: AugmentConfig,
    pub class_weighting: bool,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            epochs: 100,
            batch_size: 32,
            seed: 0,
            adam: AdamConfig::default(),
            init: InitializerKind::Xavier,
            augment: AugmentConfig::default(),
            class_weighting: true,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.epochs == 0 {
            return Err(Error::Config("epochs must be at least 1".into()));
        }
        if self.batch_size == 0 {
            return Err(Error::Config("batch size must be at least 1".into()));
        }
        self.init.validate()?;
        self.adam.validate()
    }

    /// The reference network for `size x size x 3` inputs, initialized with
    /// this config's initializer from the seed's init stream.
    pub fn build_model(&self, size: usize, classes: usize) -> Result<Model> {
        let spec = ModelSpec::rnd_cnn([size, size, 3], classes, self.init)?;
        Model::build(spec, &mut Rng::stream(self.seed, Stream::Init, 0, 0))
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EpochRecord {
    pub epoch: usize,
    pub train_loss: f64,
    pub train_accuracy: f64,
    pub val_loss: f64,
    pub val_accuracy: f64,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct History {
    pub epochs: Vec<EpochRecord>,
}

impl History {
    pub const CSV_HEADER: &'static str = "epoch,train_loss,train_acc,val_loss,val_acc";

    pub fn to_csv(&self) -> String {
        let mut out = String::from(Self::CSV_HEADER);
        out.push('\n');
        for r in &self.epochs {
            writeln!(
                out,
                "{},{},{},{},{}",
                r.epoch, r.train_loss, r.train_accuracy, r.val_loss, r.val_accuracy
            )
            .expect("write to string");
        }
        out
    }

    pub fn best_val_accuracy(&self) -> Option<f64> {
        self.epochs.iter().map(|r| r.val_accuracy).reduce(f64::max)
    }
}

/// Predictions and losses of a frozen model over one split.
#[derive(Debug, Clone)]
pub struct Evaluation {
    pub probs: Tensor,
    pub labels: Vec<usize>,
    /// Unweighted per-sample cross-entropy.
    pub losses: Vec<f64>,
}

impl Evaluation {
    pub fn predictions(&self) -> Vec<usize> {
        self.probs.argmax_rows()
    }

    pub fn accuracy(&self) -> f64 {
        let correct = self.predictions().iter().zip(&self.labels).filter(|(p, l)| p == l).count();
        correct as f64 / self.labels.len().max(1) as f64
    }

    pub fn mean_loss(&self) -> f64 {
        self.losses.iter().sum::<f64>() / self.losses.len().max(1) as f64
    }
}

pub fn evaluate(model: &Model, data: &Dataset, split: Split, batch_size: usize) -> Result<Evaluation> {
    let k = model.classes();
    if data.classes() != k {
        return Err(Error::Config(format!(
            "model has {k} classes, dataset has {}",
            data.classes()
        )));
    }
    let mut probs = Vec::new();
    let mut labels = Vec::new();
    let mut losses = Vec::new();
    for batch in batch_iter(data, split, batch_size, None, 0, 0) {
        let p = model.forward(&batch.images)?;
        for (r, &label) in batch.labels.iter().enumerate() {
            losses.push(-(p.row(r)[label] as f64).max(LOG_CLAMP).ln());
        }
        probs.extend_from_slice(p.data());
        labels.extend(batch.labels);
    }
    if labels.is_empty() {
        return Err(Error::Config(format!("split {split:?} is empty")));
    }
    Ok(Evaluation {
        probs: Tensor::new(&[labels.len(), k], probs)?,
        labels,
        losses,
    })
}

/// Epoch-by-epoch training over the train split of a dataset, validating on
/// its val split after every epoch.
pub struct Trainer<'a> {
    model: Model,
    adam: AdamState,
    config: TrainConfig,
    data: &'a Dataset,
    weights: ClassWeights,
    history: History,
    best: Option<Checkpoint>,
}

impl<'a> Trainer<'a> {
    pub fn new(model: Model, data: &'a Dataset, config: TrainConfig) -> Result<Self> {
        config.validate()?;
        if model.classes() != data.classes() {
            return Err(Error::Config(format!(
                "model has {} classes, dataset has {}",
                model.classes(),
                data.classes()
            )));
        }
        if model.spec().input != [data.size, data.size, 3] {
            return Err(Error::Config(format!(
                "model input {:?} does not match image size {}",
                model.spec().input,
                data.size
            )));
        }
        for split in [Split::Train, Split::Val] {
            if data.index.indices(split).is_empty() {
                return Err(Error::Config(format!("{split:?} split is empty")));
            }
        }
        let weights = if config.class_weighting {
            ClassWeights::from_counts(&data.index.counts_in(Split::Train))?
        } else {
            ClassWeights::uniform(data.classes())
        };
        let adam = AdamState::new(config.adam, &model.params())?;
        Ok(Self {
            model,
            adam,
            config,
            data,
            weights,
            history: History::default(),
            best: None,
        })
    }

    pub fn model(&self) -> &Model {
        &self.model
    }

    pub fn history(&self) -> &History {
        &self.history
    }

    pub fn class_weights(&self) -> &ClassWeights {
        &self.weights
    }

    /// Snapshot taken at the epoch with the highest validation accuracy so far.
    pub fn best(&self) -> Option<&Checkpoint> {
        self.best.as_ref()
    }

    pub fn checkpoint(&self) -> Checkpoint {
        Checkpoint::new(
            &self.model,
            &self.adam,
            self.data.index.class_names.clone(),
            self.best.as_ref().and_then(|b| b.best),
            self.config.seed,
        )
    }

    /// One optimizer step on a single batch; returns the batch loss output.
    pub fn step(&mut self, images: &Tensor, targets: &Tensor) -> Result<(f64, Tensor)> {
        let out = self.model.backward(images, targets, &self.weights)?;
        if !out.grads.iter().all(Tensor::all_finite) {
            return Err(Error::NonFinite(format!("gradient at step {}", self.adam.t + 1)));
        }
        self.adam.step(self.model.params_mut(), &out.grads)?;
        Ok((out.loss.loss, out.probs))
    }

    pub fn run_epoch(&mut self) -> Result<EpochRecord> {
        let epoch = self.history.epochs.len() + 1;
        let cfg = self.config.clone();
        let augment = cfg.augment.enabled.then_some(&cfg.augment);
        let (mut loss_sum, mut correct, mut seen) = (0.0, 0usize, 0usize);
        for batch in batch_iter(self.data, Split::Train, cfg.batch_size, augment, cfg.seed, epoch as u64) {
            let (loss, probs) = self.step(&batch.images, &batch.targets).map_err(|e| match e {
                Error::NonFinite(what) => Error::NonFinite(format!("{what} in epoch {epoch}")),
                other => other,
            })?;
            let labels = labels_of(&batch.targets)?;
            correct += (0..labels.len()).filter(|&r| argmax(probs.row(r)) == labels[r]).count();
            loss_sum += loss * labels.len() as f64;
            seen += labels.len();
        }
        let val = evaluate(&self.model, self.data, Split::Val, cfg.batch_size)?;
        let record = EpochRecord {
            epoch,
            train_loss: loss_sum / seen as f64,
            train_accuracy: correct as f64 / seen as f64,
            val_loss: val.mean_loss(),
            val_accuracy: val.accuracy(),
        };
        self.history.epochs.push(record);

        let improved = self
            .best
            .as_ref()
            .and_then(|b| b.best)
            .is_none_or(|b| record.val_accuracy > b.accuracy);
        if improved {
            let best = BestRecord {
                accuracy: record.val_accuracy,
                epoch,
            };
            let mut ckpt = self.checkpoint();
            ckpt.best = Some(best);
            self.best = Some(ckpt);
        }
        Ok(record)
    }

    pub fn finish(self) -> TrainOutcome {
        let final_checkpoint = self.checkpoint();
        TrainOutcome {
            model: self.model,
            history: self.history,
            best: self.best,
            final_checkpoint,
        }
    }
}

#[derive(Debug, Clone)]
pub struct TrainOutcome {
    pub model: Model,
    pub history: History,
    pub best: Option<Checkpoint>,
    pub final_checkpoint: Checkpoint,
}

/// Runs `config.epochs` epochs.
pub fn train(model: Model, data: &Dataset, config: TrainConfig) -> Result<TrainOutcome> {
    let epochs = config.epochs;
    let mut trainer = Trainer::new(model, data, config)?;
    for _ in 0..epochs {
        trainer.run_epoch()?;
    }
    Ok(trainer.finish())
}

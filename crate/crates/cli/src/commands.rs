use std::fs;
use std::io;
use std::path::{Path, PathBuf};
use std::time::Instant;

use rndcnn::data::{
    decode_and_preprocess, load_cache, load_dataset, load_manifest, save_cache, stratified_split, Dataset, DatasetIndex,
    Split, MANIFEST_NAME,
};
use rndcnn::metrics::report;
use rndcnn::oracle::{layer_suite, model_suite, GradCheckConfig, MODEL_BUDGET};
use rndcnn::train::checkpoint::Checkpoint;
use rndcnn::train::{evaluate, Trainer};
use rndcnn::Tensor;

use crate::config::RunConfig;
use crate::exit::{self, Failure};

type Outcome = Result<(), Failure>;

/// A manifest (file, or `manifest.csv` inside a directory) is indexed
/// against `classes` when given; a class tree must match them exactly.
fn index_for(data: &Path, classes: &[String]) -> Result<DatasetIndex, Failure> {
    let manifest = if data.is_file() { Some(data.to_path_buf()) } else { Some(data.join(MANIFEST_NAME)).filter(|m| m.is_file()) };
    let index = match (&manifest, classes.is_empty()) {
        (Some(m), false) => load_manifest(m, Some(classes))?,
        _ => load_dataset(data)?,
    };
    if !classes.is_empty() && index.class_names != classes {
        return Err(Failure::config(format!(
            "dataset classes {:?} do not match expected {:?}",
            index.class_names, classes
        )));
    }
    Ok(index)
}

fn load_images(cfg: &RunConfig) -> Result<Dataset, Failure> {
    if let Some(cache) = cfg.cache.as_deref().filter(|c| c.is_file()) {
        let data = load_cache(cache)?;
        if data.size != cfg.input_size {
            return Err(Failure::config(format!(
                "cache {} holds {}x{} images, input_size is {}",
                cache.display(),
                data.size,
                data.size,
                cfg.input_size
            )));
        }
        if !cfg.classes.is_empty() && data.index.class_names != cfg.classes {
            return Err(Failure::config(format!("cache {} has classes {:?}", cache.display(), data.index.class_names)));
        }
        return Ok(data);
    }
    let data = Dataset::load(index_for(cfg.data_path()?, &cfg.classes)?, cfg.input_size)?;
    if let Some(cache) = &cfg.cache {
        save_cache(&data, cache)?;
    }
    Ok(data)
}

fn write(dir: &Path, name: &str, contents: impl AsRef<[u8]>) -> Result<PathBuf, Failure> {
    let path = dir.join(name);
    fs::write(&path, contents).map_err(|e| Failure::new(exit::IO, format!("{}: {e}", path.display())))?;
    Ok(path)
}

fn create_out(dir: &Path) -> Outcome {
    fs::create_dir_all(dir).map_err(|e| Failure::new(exit::IO, format!("{}: {e}", dir.display())))
}

pub fn train(cfg: RunConfig) -> Outcome {
    let started = Instant::now();
    let train_cfg = cfg.train_config()?;
    let mut data = load_images(&cfg)?;
    data.index = stratified_split(data.index, cfg.train_fraction, cfg.seed)?;
    let names = data.index.class_names.clone();
    let (n_train, n_val) = (data.index.counts_in(Split::Train), data.index.counts_in(Split::Val));
    println!("classes: {}", names.join(", "));
    println!("train {n_train:?}, val {n_val:?}");

    let model = train_cfg.build_model(cfg.input_size, names.len())?;
    let params = model.param_count();
    let epochs = train_cfg.epochs;
    let mut trainer = Trainer::new(model, &data, train_cfg)?;
    let weights = trainer.class_weights().values().to_vec();
    for _ in 0..epochs {
        let r = trainer.run_epoch()?;
        println!(
            "epoch {:>3}/{epochs}  train loss {:.4} acc {:.4}  val loss {:.4} acc {:.4}",
            r.epoch, r.train_loss, r.train_accuracy, r.val_loss, r.val_accuracy
        );
    }
    let outcome = trainer.finish();
    let best = outcome.best.as_ref().unwrap_or(&outcome.final_checkpoint);

    // nothing is written until the run has succeeded
    create_out(&cfg.out)?;
    best.save(&cfg.out.join("best.ckpt"))?;
    outcome.final_checkpoint.save(&cfg.out.join("final.ckpt"))?;
    write(&cfg.out, "history.csv", outcome.history.to_csv())?;
    let best_line = match best.best {
        Some(b) => format!("best val accuracy {:.4} at epoch {}", b.accuracy, b.epoch),
        None => "best val accuracy n/a".into(),
    };
    let summary = format!(
        "seed {}\nclasses {}\ntrain counts {n_train:?}\nval counts {n_val:?}\nclass weights {weights:?}\n\
         parameters {params}\n{best_line}\nwall time {:.2?}\n\n[config]\n{}",
        cfg.seed,
        names.join(", "),
        started.elapsed(),
        cfg.to_toml()
    );
    write(&cfg.out, "summary.txt", summary)?;
    println!("{best_line}");
    println!("wrote {}", cfg.out.display());
    Ok(())
}

pub fn evaluate_cmd(cfg: RunConfig, checkpoint: &Path) -> Outcome {
    let ckpt = Checkpoint::load(checkpoint)?;
    let model = ckpt.model()?;
    let data_path = cfg.data_path()?;
    let manifest = data_path.is_file() || data_path.join(MANIFEST_NAME).is_file();
    let index = if manifest {
        index_for(data_path, &ckpt.class_names)?
    } else {
        let index = load_dataset(data_path)?;
        if index.classes() != ckpt.class_names.len() {
            return Err(Failure::config(format!(
                "checkpoint has {} classes, dataset has {}",
                ckpt.class_names.len(),
                index.classes()
            )));
        }
        if index.class_names != ckpt.class_names {
            return Err(Failure::config(format!(
                "dataset classes {:?} differ from checkpoint classes {:?}",
                index.class_names, ckpt.class_names
            )));
        }
        index
    };
    let data = Dataset::load(index.with_split(Split::Test), ckpt.spec.input[0])?;
    let eval = evaluate(&model, &data, Split::Test, cfg.batch_size)?;
    let rep = report(&eval.probs, &eval.labels, &eval.losses, &ckpt.class_names)?;
    create_out(&cfg.out)?;
    write(&cfg.out, "report.txt", rep.to_text())?;
    write(&cfg.out, "report.csv", rep.to_csv())?;
    write(&cfg.out, "roc.csv", rep.roc_csv())?;
    print!("{}", rep.to_text());
    println!("wrote {}", cfg.out.display());
    Ok(())
}

pub fn predict(checkpoint: &Path, images: &[PathBuf]) -> Outcome {
    let ckpt = Checkpoint::load(checkpoint)?;
    let model = ckpt.model()?;
    let size = ckpt.spec.input[0];
    let stdout = io::stdout();
    let mut out = csv::Writer::from_writer(stdout.lock());
    let mut header = vec!["path".to_string(), "class".to_string()];
    header.extend(ckpt.class_names.iter().cloned());
    let csv_err = |e: csv::Error| Failure::new(exit::IO, e.to_string());
    out.write_record(&header).map_err(csv_err)?;
    let mut failed = 0;
    for path in images {
        let pixels = match decode_and_preprocess(path, size) {
            Ok(p) => p,
            Err(e) => {
                eprintln!("error: {e}");
                failed += 1;
                continue;
            }
        };
        let batch = Tensor::new(&[1, size, size, 3], pixels.data().to_vec())?;
        let probs = model.forward(&batch)?;
        let row = probs.row(0);
        let class = &ckpt.class_names[probs.argmax_rows()[0]];
        let mut record = vec![path.display().to_string(), class.clone()];
        record.extend(row.iter().map(|p| format!("{p:.6}")));
        out.write_record(&record).map_err(csv_err)?;
    }
    out.flush()?;
    if failed > 0 {
        return Err(Failure::new(exit::INGEST, format!("{failed} of {} images could not be read", images.len())));
    }
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum Scope {
    Layer,
    Model,
}

pub fn gradcheck(scope: Scope, seed: u64, size: usize, corrupt: bool) -> Outcome {
    let started = Instant::now();
    let mut failed = Vec::new();
    match scope {
        Scope::Layer => {
            let cfg = GradCheckConfig {
                seed,
                corrupt_conv: corrupt,
                ..Default::default()
            };
            for (name, rep) in layer_suite(&cfg)? {
                println!("[{name}]\n{rep}\n");
                if !rep.passed() {
                    failed.push(name.to_string());
                }
            }
        }
        Scope::Model => {
            let cfg = GradCheckConfig {
                seed,
                corrupt_conv: corrupt,
                ..GradCheckConfig::model()
            };
            let rep = model_suite(size, &cfg)?;
            println!("[model {size}x{size}]\n{rep}\n");
            failed.extend(rep.failures().map(|t| t.name.clone()));
        }
    }
    let took = started.elapsed();
    println!("elapsed {took:.1?}");
    if scope == Scope::Model && size == 32 && took > MODEL_BUDGET {
        eprintln!("warning: exceeded the {MODEL_BUDGET:?} budget for the 32x32 model");
    }
    if failed.is_empty() {
        println!("gradient check passed");
        Ok(())
    } else {
        Err(Failure::new(exit::VERIFICATION, format!("gradient check failed in: {}", failed.join(", "))))
    }
}

use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};
use std::time::{Duration, Instant};

use rndcnn::data::synthetic::{pattern_dataset, write_pattern_tree};
use rndcnn::data::{AugmentConfig, Split};
use rndcnn::init::InitializerKind;
use rndcnn::train::adam::{AdamConfig, AdamState};
use rndcnn::train::checkpoint::Checkpoint;
use rndcnn::train::{TrainConfig, Trainer};

fn rndcnn(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_rndcnn")).args(args).output().unwrap()
}

fn code(out: &Output) -> i32 {
    out.status.code().unwrap()
}

fn stdout(out: &Output) -> String {
    String::from_utf8_lossy(&out.stdout).into_owned()
}

fn stderr(out: &Output) -> String {
    String::from_utf8_lossy(&out.stderr).into_owned()
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

struct Fixture {
    dir: tempfile::TempDir,
}

impl Fixture {
    /// A 32x32 pattern tree and a matching short-run config.
    fn new(per_class: &[usize], seed: u64) -> Self {
        let dir = tempfile::tempdir().unwrap();
        write_pattern_tree(&dir.path().join("data"), per_class, 32, seed).unwrap();
        fs::write(
            dir.path().join("run.toml"),
            "data = \"data\"\ninput_size = 32\nepochs = 2\nbatch_size = 4\nseed = 3\n",
        )
        .unwrap();
        Self { dir }
    }

    fn path(&self, name: &str) -> PathBuf {
        self.dir.path().join(name)
    }

    fn train(&self, out: &str, extra: &[&str]) -> Output {
        let (config, out) = (self.path("run.toml"), self.path(out));
        let mut args = vec!["train", "--config", s(&config), "--out", s(&out)];
        args.extend_from_slice(extra);
        rndcnn(&args)
    }
}

#[test]
fn train_writes_every_artifact_and_is_deterministic() {
    let fx = Fixture::new(&[4, 4, 4], 1);
    let a = fx.train("a", &[]);
    assert_eq!(code(&a), 0, "{}", stderr(&a));
    for name in ["best.ckpt", "final.ckpt", "history.csv", "summary.txt"] {
        assert!(fx.path("a").join(name).is_file(), "{name} missing");
    }
    let history = fs::read_to_string(fx.path("a/history.csv")).unwrap();
    assert_eq!(history.lines().count(), 3);
    assert!(history.starts_with("epoch,train_loss,train_acc,val_loss,val_acc\n"));
    let summary = fs::read_to_string(fx.path("a/summary.txt")).unwrap();
    assert!(summary.contains("seed 3") && summary.contains("wall time") && summary.contains("input_size = 32"));

    let b = fx.train("b", &[]);
    assert_eq!(code(&b), 0);
    assert_eq!(fs::read(fx.path("a/history.csv")).unwrap(), fs::read(fx.path("b/history.csv")).unwrap());
    assert_eq!(fs::read(fx.path("a/final.ckpt")).unwrap(), fs::read(fx.path("b/final.ckpt")).unwrap());

    let c = fx.train("c", &["--seed", "4"]);
    assert_eq!(code(&c), 0);
    assert_ne!(fs::read(fx.path("a/history.csv")).unwrap(), fs::read(fx.path("c/history.csv")).unwrap());
}

#[test]
fn missing_dataset_is_an_ingest_failure_without_outputs() {
    let fx = Fixture::new(&[2, 2], 2);
    let out = fx.path("out");
    let r = rndcnn(&["train", "--data", s(&fx.path("nope")), "--out", s(&out), "--input-size", "32"]);
    assert_eq!(code(&r), 4, "{}", stderr(&r));
    assert!(!out.exists());
}

#[test]
fn configuration_errors_exit_with_config_status() {
    let fx = Fixture::new(&[2, 2], 2);
    let bad = fx.path("bad.toml");
    fs::write(&bad, "epoch = 3\n").unwrap();
    let r = rndcnn(&["train", "--config", s(&bad), "--out", s(&fx.path("o"))]);
    assert_eq!(code(&r), 3);
    assert!(stderr(&r).contains("epoch"));
    // no data anywhere
    assert_eq!(code(&rndcnn(&["train", "--out", s(&fx.path("o"))])), 3);
    assert_eq!(code(&rndcnn(&["train", "--init", "he"])), 2);
    assert!(!fx.path("o").exists());
}

/// Trains to zero training error in process, as the overfit acceptance run
/// does, and saves the checkpoint.
fn overfit_checkpoint(path: &Path, per_class: &[usize], seed: u64) {
    let train = pattern_dataset(per_class, 32, seed, Split::Train).unwrap();
    let n = train.len();
    let mut images = train.images.clone();
    images.extend(train.images.clone());
    let mut data = rndcnn::data::Dataset::from_samples(train.index.class_names.clone(), images, Split::Train).unwrap();
    data.index.splits[n..].fill(Split::Val);
    let config = TrainConfig {
        epochs: 300,
        batch_size: 10,
        seed: 7,
        augment: AugmentConfig::disabled(),
        ..Default::default()
    };
    let model = config.build_model(32, per_class.len()).unwrap();
    let mut trainer = Trainer::new(model, &data, config).unwrap();
    for _ in 0..300 {
        if trainer.run_epoch().unwrap().val_accuracy == 1.0 {
            break;
        }
    }
    trainer.checkpoint().save(path).unwrap();
}

#[test]
fn evaluate_overfit_checkpoint_on_its_training_images() {
    let fx = Fixture::new(&[10, 10, 10], 9);
    let ckpt = fx.path("overfit.ckpt");
    overfit_checkpoint(&ckpt, &[10, 10, 10], 9);
    let before = fs::read(&ckpt).unwrap();

    let r = rndcnn(&["evaluate", "--checkpoint", s(&ckpt), "--data", s(&fx.path("data")), "--out", s(&fx.path("eval"))]);
    assert_eq!(code(&r), 0, "{}", stderr(&r));
    assert!(stdout(&r).contains("accuracy 1.0000"), "{}", stdout(&r));
    let csv = fs::read_to_string(fx.path("eval/report.csv")).unwrap();
    assert!(csv.starts_with("class,precision,sensitivity,specificity,f1,support\n"));
    assert_eq!(csv.lines().count(), 5);
    let roc = fs::read_to_string(fx.path("eval/roc.csv")).unwrap();
    assert!(roc.starts_with("class,threshold,fpr,tpr\n"));
    assert!(fx.path("eval/report.txt").is_file());

    // stable across runs, inputs untouched
    let again = rndcnn(&["evaluate", "--checkpoint", s(&ckpt), "--data", s(&fx.path("data")), "--out", s(&fx.path("eval2"))]);
    assert_eq!(code(&again), 0);
    for name in ["report.csv", "report.txt", "roc.csv"] {
        assert_eq!(fs::read(fx.path("eval").join(name)).unwrap(), fs::read(fx.path("eval2").join(name)).unwrap());
    }
    assert_eq!(fs::read(&ckpt).unwrap(), before);
}

fn zero_checkpoint(path: &Path, classes: usize) {
    let config = TrainConfig {
        init: InitializerKind::Zero,
        ..Default::default()
    };
    let model = config.build_model(32, classes).unwrap();
    let adam = AdamState::new(AdamConfig::default(), &model.params()).unwrap();
    let names = (0..classes).map(|c| format!("class{c}")).collect();
    Checkpoint::new(&model, &adam, names, None, 0).save(path).unwrap();
}

#[test]
fn evaluate_rejects_empty_and_mismatched_sets() {
    let fx = Fixture::new(&[2, 2], 4);
    let ckpt = fx.path("zero.ckpt");
    zero_checkpoint(&ckpt, 3);
    let empty = fx.path("empty");
    fs::create_dir(&empty).unwrap();
    let r = rndcnn(&["evaluate", "--checkpoint", s(&ckpt), "--data", s(&empty), "--out", s(&fx.path("e"))]);
    assert_eq!(code(&r), 4);
    let r = rndcnn(&["evaluate", "--checkpoint", s(&ckpt), "--data", s(&fx.path("data")), "--out", s(&fx.path("e"))]);
    assert_eq!(code(&r), 3, "{}", stderr(&r));
    assert!(stderr(&r).contains("3 classes"));
    assert!(!fx.path("e").exists());
}

#[test]
fn predict_prints_probability_rows() {
    let fx = Fixture::new(&[1, 1, 1], 5);
    let ckpt = fx.path("zero.ckpt");
    zero_checkpoint(&ckpt, 3);
    let img = fx.path("data/c1-hstripes/0000.pgm");
    let broken = fx.path("broken.pgm");
    fs::write(&broken, b"P5\n2 2\n").unwrap();
    let r = rndcnn(&["predict", "--checkpoint", s(&ckpt), s(&img), s(&broken), s(&img)]);
    assert_eq!(code(&r), 4);
    assert!(stderr(&r).contains("broken.pgm"));
    let text = stdout(&r);
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines[0], "path,class,class0,class1,class2");
    assert_eq!(lines.len(), 3);
    assert_eq!(lines[1], lines[2]);
    let probs: Vec<f64> = lines[1].split(',').skip(2).map(|v| v.parse().unwrap()).collect();
    assert!(probs.iter().all(|&p| (p - 1.0 / 3.0).abs() < 1e-6));
    assert!((probs.iter().sum::<f64>() - 1.0).abs() < 1e-5);
}

#[test]
fn gradcheck_layer_scope_and_negative_control() {
    let ok = rndcnn(&["gradcheck"]);
    assert_eq!(code(&ok), 0, "{}", stdout(&ok));
    assert!(stdout(&ok).contains("gradient check passed"));

    let bad = rndcnn(&["gradcheck", "--corrupt-backward"]);
    assert_eq!(code(&bad), 6);
    assert!(stderr(&bad).contains("failed in: conv"), "{}", stderr(&bad));
}

#[test]
fn gradcheck_model_scope_within_budget() {
    let start = Instant::now();
    let r = rndcnn(&["gradcheck", "--scope", "model"]);
    let took = start.elapsed();
    assert_eq!(code(&r), 0, "{}", stdout(&r));
    assert!(took < Duration::from_secs(60), "{took:?}");
}

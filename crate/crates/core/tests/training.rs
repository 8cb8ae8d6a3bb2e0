mod common;

use rndcnn::data::synthetic::pattern_dataset;
use rndcnn::data::{batch_iter, AugmentConfig, Split};
use rndcnn::init::{init_tensor, FanInfo, InitializerKind};
use rndcnn::model::ModelSpec;
use rndcnn::oracle::param_count_oracle;
use rndcnn::train::{train, TrainConfig, Trainer};
use rndcnn::{Error, Model, Rng, Tensor};

use common::{quick_config, split_patterns, with_val_copy};

#[test]
fn xavier_mean_is_centred() {
    let fan = FanInfo::new(100, 50).unwrap();
    let t: Tensor<f64> = init_tensor(InitializerKind::Xavier, &[1000, 1000], Some(fan), &mut Rng::new(2)).unwrap();
    let mean = t.data().iter().sum::<f64>() / t.len() as f64;
    assert!(mean.abs() < 1e-3, "{mean}");
}

#[test]
fn full_size_parameter_count_is_frozen() {
    let spec = ModelSpec::rnd_cnn([150, 150, 3], 3, InitializerKind::Zero).unwrap();
    assert_eq!(param_count_oracle(&spec), 43_107_011);
}

#[test]
fn forward_is_bit_stable_for_a_seed() {
    let data = pattern_dataset(&[2, 2, 2], 32, 1, Split::Val).unwrap();
    let batch = batch_iter(&data, Split::Val, 6, None, 0, 0).next().unwrap();
    let run = || {
        let model = TrainConfig::default().build_model(32, 3).unwrap();
        model.forward(&batch.images).unwrap().data().iter().map(|v| v.to_bits()).collect::<Vec<_>>()
    };
    assert_eq!(run(), run());
}

#[test]
fn zero_init_accuracy_is_pinned_at_majority_rate() {
    // class 0 is the majority, so the tie-broken argmax of uniform rows
    // already names it before the first update
    let data = with_val_copy(pattern_dataset(&[6, 3, 3], 32, 2, Split::Train).unwrap());
    let config = TrainConfig {
        epochs: 3,
        batch_size: 12,
        init: InitializerKind::Zero,
        augment: AugmentConfig::disabled(),
        class_weighting: false,
        ..Default::default()
    };
    let model = config.build_model(32, 3).unwrap();
    let mut trainer = Trainer::new(model, &data, config).unwrap();
    for _ in 0..3 {
        let record = trainer.run_epoch().unwrap();
        assert_eq!(record.train_accuracy, 0.5);
        let batch = batch_iter(&data, Split::Train, 12, None, 0, 0).next().unwrap();
        let p = trainer.model().forward(&batch.images).unwrap();
        assert!((1..p.rows()).all(|r| p.row(r) == p.row(0)));
        assert!(p.row(0)[0] > p.row(0)[1]);
    }
}

#[test]
fn best_checkpoint_follows_validation_accuracy() {
    let data = split_patterns(&[5, 5, 5], 3);
    let config = quick_config(5, 4);
    let model = config.build_model(32, 3).unwrap();
    let outcome = train(model, &data, config).unwrap();
    assert_eq!(outcome.history.epochs.len(), 4);
    let best = outcome.best.expect("at least one epoch");
    let record = best.best.unwrap();
    assert_eq!(Some(record.accuracy), outcome.history.best_val_accuracy());
    // the first epoch reaching the maximum wins
    let first = outcome.history.epochs.iter().find(|r| r.val_accuracy == record.accuracy).unwrap();
    assert_eq!(first.epoch, record.epoch);
    assert_eq!(outcome.final_checkpoint.adam.t, 4 * 3);
}

#[test]
fn trainer_rejects_mismatched_inputs() {
    let data = pattern_dataset(&[3, 3, 3], 32, 4, Split::Train).unwrap();
    let config = quick_config(0, 1);
    // no validation samples
    let model = config.build_model(32, 3).unwrap();
    assert!(matches!(Trainer::new(model, &data, config.clone()), Err(Error::Config(_))));
    let data = with_val_copy(data);
    let model = config.build_model(16, 3).unwrap();
    assert!(matches!(Trainer::new(model, &data, config), Err(Error::Config(_))));
}

#[test]
fn non_finite_weights_abort_training() {
    let data = with_val_copy(pattern_dataset(&[2, 2, 2], 32, 5, Split::Train).unwrap());
    let config = quick_config(0, 1);
    let mut model: Model = config.build_model(32, 3).unwrap();
    model.params_mut()[0].data_mut()[0] = f32::NAN;
    let mut trainer = Trainer::new(model, &data, config).unwrap();
    assert!(matches!(trainer.run_epoch(), Err(Error::NonFinite(_))));
}

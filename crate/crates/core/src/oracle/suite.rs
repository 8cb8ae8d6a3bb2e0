//! The standard fixture set behind `rndcnn gradcheck`: every layer kind on
//! small random inputs, and the whole network on one amplified image.

use std::time::Duration;

use crate::error::Result;
use crate::init::InitializerKind;
use crate::layers::{ConvLayer, DenseLayer};
use crate::model::{Model, ModelSpec};
use crate::rng::{Rng, Stream};
use crate::tensor::Tensor;
use crate::train::loss::{one_hot, ClassWeights};

use super::gradcheck::{
    check_conv, check_dense, check_model, check_pool, check_relu, check_softmax_cce, GradCheckConfig, GradCheckReport,
};

/// Wall-clock budget documented for the model-scope run on 32x32 inputs.
pub const MODEL_BUDGET: Duration = Duration::from_secs(60);

fn fixture_rng(seed: u64, which: u64) -> Rng {
    Rng::stream(seed, Stream::GradCheck, 1000 + which, 0)
}

fn uniform(shape: &[usize], seed: u64, which: u64) -> Result<Tensor<f64>> {
    let mut rng = fixture_rng(seed, which);
    Tensor::from_fn(shape, |_| rng.uniform(-1.0, 1.0))
}

/// Distinct values of magnitude >= 0.1 spaced far beyond the probe step,
/// so neither ReLU nor pooling sees a kink under perturbation.
fn tie_free(shape: &[usize], seed: u64, which: u64) -> Result<Tensor<f64>> {
    let n: usize = shape.iter().product();
    let mut rng = fixture_rng(seed, which);
    let mut vals: Vec<f64> = (0..n).map(|i| 0.1 + 0.013 * i as f64).collect();
    rng.shuffle(&mut vals);
    Tensor::new(shape, vals.into_iter().map(|v| if rng.bernoulli(0.5) { -v } else { v }).collect())
}

/// Checks conv, dense, ReLU, max pooling and softmax + cross-entropy at
/// `cfg`'s tolerance. `corrupt_conv` in `cfg` only affects the conv check.
pub fn layer_suite(cfg: &GradCheckConfig) -> Result<Vec<(&'static str, GradCheckReport)>> {
    let seed = cfg.seed;
    let mut rng = fixture_rng(seed, 0);
    let conv: ConvLayer<f64> = ConvLayer::init(3, 4, InitializerKind::Xavier, &mut rng)?;
    let dense: DenseLayer<f64> = DenseLayer::init(8, 4, InitializerKind::Xavier, &mut rng)?;
    let weights = ClassWeights::explicit(vec![0.5, 1.5, 3.0])?;
    Ok(vec![
        ("conv", check_conv(&conv, &uniform(&[2, 5, 6, 3], seed, 1)?, cfg)?),
        ("dense", check_dense(&dense, &uniform(&[8, 8], seed, 2)?, cfg)?),
        ("relu", check_relu(&tie_free(&[2, 4, 4, 3], seed, 3)?, cfg)?),
        ("maxpool", check_pool(&tie_free(&[2, 6, 5, 2], seed, 4)?, cfg)?),
        (
            "softmax+cce",
            check_softmax_cce(&uniform(&[4, 3], seed, 5)?.scale(3.0), &one_hot(&[0, 2, 1, 2], 3)?, &weights, cfg)?,
        ),
    ])
}

/// End-to-end check of the reference network on one `size x size` image.
/// Pixels are scaled by 20 so that activations in the untrained net are
/// large enough for the bias probes to rise above round-off.
pub fn model_suite(size: usize, cfg: &GradCheckConfig) -> Result<GradCheckReport> {
    let spec = ModelSpec::rnd_cnn([size, size, 3], 3, InitializerKind::Xavier)?;
    let model: Model<f64> = Model::build(spec, &mut fixture_rng(cfg.seed, 10))?;
    let mut rng = fixture_rng(cfg.seed, 11);
    let x = Tensor::from_fn(&[1, size, size, 3], |_| 20.0 * rng.unit())?;
    check_model(&model, &x, &one_hot(&[1], 3)?, &ClassWeights::uniform(3), cfg)
}

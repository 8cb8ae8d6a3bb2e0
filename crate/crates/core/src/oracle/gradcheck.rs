//! Central-difference gradient checking in 64-bit.
//!
//! Layer checks use a probe loss `sum(r * y)` with fixed random weights `r`,
//! so the upstream gradient handed to `backward` is exactly `r`. The model
//! check uses the real weighted cross-entropy. Coordinates whose `+h` and
//! `-h` evaluations land on different ReLU masks or pooling winners sit on a
//! kink, where no finite difference is meaningful; those are skipped and
//! counted rather than failed.

use std::collections::hash_map::DefaultHasher;
use std::collections::BTreeSet;
use std::fmt;
use std::hash::{Hash, Hasher};

use crate::error::{Error, Result};
use crate::layers::{relu_backward, relu_forward, softmax, ConvLayer, DenseLayer, LayerGradients, PoolLayer};
use crate::model::{Layer, LayerCache, Model};
use crate::rng::{Rng, Stream};
use crate::tensor::Tensor;
use crate::train::loss::{weighted_cce_loss, ClassWeights};

pub const LAYER_TOLERANCE: f64 = 1e-4;
pub const MODEL_TOLERANCE: f64 = 1e-3;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GradCheckConfig {
    pub step: f64,
    pub tolerance: f64,
    /// Coordinates sampled per tensor; smaller tensors are checked in full.
    pub samples: usize,
    pub seed: u64,
    /// Negative control: negate conv kernel gradients before comparing.
    pub corrupt_conv: bool,
}

impl Default for GradCheckConfig {
    fn default() -> Self {
        Self {
            step: 1e-5,
            tolerance: LAYER_TOLERANCE,
            samples: 200,
            seed: 0,
            corrupt_conv: false,
        }
    }
}

impl GradCheckConfig {
    pub fn model() -> Self {
        Self {
            tolerance: MODEL_TOLERANCE,
            ..Self::default()
        }
    }
}

pub fn relative_error(analytic: f64, numeric: f64) -> f64 {
    (analytic - numeric).abs() / analytic.abs().max(numeric.abs()).max(1e-8)
}

#[derive(Debug, Clone, PartialEq)]
pub struct Offender {
    pub coordinate: Vec<usize>,
    pub analytic: f64,
    pub numeric: f64,
    pub rel_error: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TensorCheck {
    pub name: String,
    pub shape: Vec<usize>,
    pub checked: usize,
    pub skipped_kinks: usize,
    pub max_rel_error: f64,
    /// Coordinate with the largest relative error.
    pub worst: Option<Offender>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct GradCheckReport {
    pub tolerance: f64,
    pub tensors: Vec<TensorCheck>,
}

impl GradCheckReport {
    pub fn passed(&self) -> bool {
        self.tensors.iter().all(|t| t.max_rel_error < self.tolerance)
    }

    pub fn max_rel_error(&self) -> f64 {
        self.tensors.iter().map(|t| t.max_rel_error).fold(0.0, f64::max)
    }

    pub fn failures(&self) -> impl Iterator<Item = &TensorCheck> {
        self.tensors.iter().filter(|t| t.max_rel_error >= self.tolerance)
    }

}

impl fmt::Display for GradCheckReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let width = self.tensors.iter().map(|t| t.name.len()).max().unwrap_or(0);
        for t in &self.tensors {
            let ok = if t.max_rel_error < self.tolerance { "ok" } else { "FAIL" };
            write!(
                f,
                "{:<width$}  checked {:>4}  kinks skipped {:>3}  max rel {:.3e}  {ok}",
                t.name, t.checked, t.skipped_kinks, t.max_rel_error
            )?;
            if let (Some(w), "FAIL") = (&t.worst, ok) {
                write!(
                    f,
                    "  at {:?}: analytic {:.6e} numeric {:.6e}",
                    w.coordinate, w.analytic, w.numeric
                )?;
            }
            writeln!(f)?;
        }
        write!(
            f,
            "{} (max rel error {:.3e}, tolerance {:.0e})",
            if self.passed() { "PASS" } else { "FAIL" },
            self.max_rel_error(),
            self.tolerance
        )
    }
}

/// Probe value plus a fingerprint of every piecewise branch taken.
struct Probe {
    value: f64,
    signature: u64,
}

fn unravel(mut index: usize, shape: &[usize]) -> Vec<usize> {
    let mut coord = vec![0; shape.len()];
    for (c, &d) in coord.iter_mut().zip(shape).rev() {
        *c = index % d;
        index /= d;
    }
    coord
}

/// Draws up to this many candidates per wanted comparison before giving up
/// on a tensor whose coordinates mostly sit on kinks.
const ATTEMPTS_PER_SAMPLE: usize = 4;

/// Compares `analytic` against central differences of `eval`, which must
/// evaluate the probe with coordinate `i` displaced by `delta` (and leave
/// no trace of the displacement behind).
fn check_tensor(
    name: &str,
    analytic: &Tensor<f64>,
    cfg: &GradCheckConfig,
    rng: &mut Rng,
    mut eval: impl FnMut(usize, f64) -> Result<Probe>,
) -> Result<TensorCheck> {
    let shape = analytic.shape().to_vec();
    let mut out = TensorCheck {
        name: name.to_string(),
        shape: shape.clone(),
        checked: 0,
        skipped_kinks: 0,
        max_rel_error: 0.0,
        worst: None,
    };
    let len = analytic.len();
    let exhaustive = len <= cfg.samples;
    let budget = len.min(cfg.samples * ATTEMPTS_PER_SAMPLE);
    let mut drawn = BTreeSet::new();
    for attempt in 0..budget {
        if !exhaustive && out.checked == cfg.samples {
            break;
        }
        let i = if exhaustive {
            attempt
        } else {
            loop {
                let i = rng.below(len);
                if drawn.insert(i) {
                    break i;
                }
            }
        };
        let plus = eval(i, cfg.step)?;
        let minus = eval(i, -cfg.step)?;
        if !plus.value.is_finite() || !minus.value.is_finite() {
            return Err(Error::NonFinite(format!(
                "probe of {name} at {:?}",
                unravel(i, &shape)
            )));
        }
        if plus.signature != minus.signature {
            out.skipped_kinks += 1;
            continue;
        }
        let numeric = (plus.value - minus.value) / (2.0 * cfg.step);
        let a = analytic.data()[i];
        let err = relative_error(a, numeric);
        out.checked += 1;
        if out.worst.is_none() || err > out.max_rel_error {
            out.max_rel_error = err;
            out.worst = Some(Offender {
                coordinate: unravel(i, &shape),
                analytic: a,
                numeric,
                rel_error: err,
            });
        }
    }
    Ok(out)
}

fn random_like(shape: &[usize], rng: &mut Rng) -> Result<Tensor<f64>> {
    Tensor::from_fn(shape, |_| rng.uniform(-1.0, 1.0))
}

fn weighted_sum(r: &Tensor<f64>, y: &Tensor<f64>) -> f64 {
    r.data().iter().zip(y.data()).map(|(a, b)| a * b).sum()
}

fn fingerprint<H: Hash>(value: H) -> u64 {
    let mut h = DefaultHasher::new();
    value.hash(&mut h);
    h.finish()
}

fn with_displaced<R>(t: &mut Tensor<f64>, i: usize, delta: f64, f: impl FnOnce(&Tensor<f64>) -> R) -> R {
    let orig = t.data()[i];
    t.data_mut()[i] = orig + delta;
    let out = f(t);
    t.data_mut()[i] = orig;
    out
}

fn rng_for(cfg: &GradCheckConfig, case: u64) -> Rng {
    Rng::stream(cfg.seed, Stream::GradCheck, case, 0)
}

/// Probe closure that displaces one coordinate of the tensor `slot` picks
/// out of a private copy of `owner`.
fn param_probe<'a, L>(
    owner: &L,
    slot: fn(&mut L) -> &mut Tensor<f64>,
    probe: impl Fn(&L) -> Result<Probe> + 'a,
) -> impl FnMut(usize, f64) -> Result<Probe> + 'a
where
    L: Clone + 'a,
{
    let mut copy = owner.clone();
    move |i, d| {
        let t = slot(&mut copy);
        let orig = t.data()[i];
        t.data_mut()[i] = orig + d;
        let out = probe(&copy);
        slot(&mut copy).data_mut()[i] = orig;
        out
    }
}

fn plain(value: f64) -> Probe {
    Probe { value, signature: 0 }
}

/// Parameter (`kernel`, `bias`) and input gradients of a convolution.
pub fn check_conv(layer: &ConvLayer<f64>, x: &Tensor<f64>, cfg: &GradCheckConfig) -> Result<GradCheckReport> {
    let mut rng = rng_for(cfg, 1);
    let r = random_like(layer.forward(x)?.shape(), &mut rng)?;
    let LayerGradients { params, input } = layer.backward(x, &r)?;
    let kernel_grad = if cfg.corrupt_conv { params[0].scale(-1.0) } else { params[0].clone() };

    let probe = |l: &ConvLayer<f64>| Ok(plain(weighted_sum(&r, &l.forward(x)?)));
    let tensors = vec![
        check_tensor("kernel", &kernel_grad, cfg, &mut rng, param_probe(layer, |l| &mut l.kernel, probe))?,
        check_tensor("bias", &params[1], cfg, &mut rng, param_probe(layer, |l| &mut l.bias, probe))?,
        check_tensor("input", &input, cfg, &mut rng, {
            let mut xp = x.clone();
            move |i, d| with_displaced(&mut xp, i, d, |xp| Ok(plain(weighted_sum(&r, &layer.forward(xp)?))))
        })?,
    ];
    Ok(GradCheckReport {
        tolerance: cfg.tolerance,
        tensors,
    })
}

/// Parameter (`weights`, `bias`) and input gradients of a dense layer.
pub fn check_dense(layer: &DenseLayer<f64>, x: &Tensor<f64>, cfg: &GradCheckConfig) -> Result<GradCheckReport> {
    let mut rng = rng_for(cfg, 2);
    let r = random_like(layer.forward(x)?.shape(), &mut rng)?;
    let LayerGradients { params, input } = layer.backward(x, &r)?;

    let probe = |l: &DenseLayer<f64>| Ok(plain(weighted_sum(&r, &l.forward(x)?)));
    let tensors = vec![
        check_tensor("weights", &params[0], cfg, &mut rng, param_probe(layer, |l| &mut l.weights, probe))?,
        check_tensor("bias", &params[1], cfg, &mut rng, param_probe(layer, |l| &mut l.bias, probe))?,
        check_tensor("input", &input, cfg, &mut rng, {
            let mut xp = x.clone();
            move |i, d| with_displaced(&mut xp, i, d, |xp| Ok(plain(weighted_sum(&r, &layer.forward(xp)?))))
        })?,
    ];
    Ok(GradCheckReport {
        tolerance: cfg.tolerance,
        tensors,
    })
}

fn relu_mask(x: &Tensor<f64>) -> u64 {
    fingerprint(x.data().iter().map(|&v| v > 0.0).collect::<Vec<_>>())
}

pub fn check_relu(x: &Tensor<f64>, cfg: &GradCheckConfig) -> Result<GradCheckReport> {
    let mut rng = rng_for(cfg, 3);
    let r = random_like(x.shape(), &mut rng)?;
    let analytic = relu_backward(x, &r)?;
    let mut xp = x.clone();
    let check = check_tensor("input", &analytic, cfg, &mut rng, |i, d| {
        with_displaced(&mut xp, i, d, |xp| {
            Ok(Probe {
                value: weighted_sum(&r, &relu_forward(xp)),
                signature: relu_mask(xp),
            })
        })
    })?;
    Ok(GradCheckReport {
        tolerance: cfg.tolerance,
        tensors: vec![check],
    })
}

pub fn check_pool(x: &Tensor<f64>, cfg: &GradCheckConfig) -> Result<GradCheckReport> {
    let mut rng = rng_for(cfg, 4);
    let (y, record) = PoolLayer.forward(x)?;
    let r = random_like(y.shape(), &mut rng)?;
    let analytic = PoolLayer.backward(&record, &r)?;
    let mut xp = x.clone();
    let check = check_tensor("input", &analytic, cfg, &mut rng, |i, d| {
        with_displaced(&mut xp, i, d, |xp| {
            let (y, rec) = PoolLayer.forward(xp)?;
            Ok(Probe {
                value: weighted_sum(&r, &y),
                signature: fingerprint(rec.argmax()),
            })
        })
    })?;
    Ok(GradCheckReport {
        tolerance: cfg.tolerance,
        tensors: vec![check],
    })
}

/// Gradient of the weighted cross-entropy of `softmax(logits)` with respect
/// to the logits, i.e. the fused `w * (p - t) / N` shortcut.
pub fn check_softmax_cce(
    logits: &Tensor<f64>,
    targets: &Tensor<f64>,
    weights: &ClassWeights,
    cfg: &GradCheckConfig,
) -> Result<GradCheckReport> {
    let mut rng = rng_for(cfg, 5);
    let analytic = weighted_cce_loss(&softmax(logits)?, targets, weights)?.grad_logits;
    let mut zp = logits.clone();
    let check = check_tensor("logits", &analytic, cfg, &mut rng, |i, d| {
        with_displaced(&mut zp, i, d, |zp| {
            Ok(plain(weighted_cce_loss(&softmax(zp)?, targets, weights)?.loss))
        })
    })?;
    Ok(GradCheckReport {
        tolerance: cfg.tolerance,
        tensors: vec![check],
    })
}

/// Loss of the model when layer `start` is replaced by `first` and fed its
/// cached input `x`, fingerprinting every ReLU mask and pooling choice on
/// the way.
fn suffix_loss(
    model: &Model<f64>,
    start: usize,
    first: &Layer<f64>,
    x: &Tensor<f64>,
    targets: &Tensor<f64>,
    weights: &ClassWeights,
) -> Result<Probe> {
    let mut branches = Vec::new();
    let mut act = x.clone();
    let layers = std::iter::once(first).chain(&model.layers()[start + 1..]);
    for layer in layers {
        if layer.is_softmax() {
            break;
        }
        let (y, cache) = layer.forward(&act)?;
        match (layer, &cache) {
            (Layer::Relu, _) => branches.push(relu_mask(&act)),
            (_, LayerCache::Pool(rec)) => branches.push(fingerprint(rec.argmax())),
            _ => {}
        }
        act = y;
    }
    Ok(Probe {
        value: weighted_cce_loss(&softmax(&act)?, targets, weights)?.loss,
        signature: fingerprint(branches),
    })
}

/// Adds `delta` to (or, given `restore`, resets) one coordinate of a layer
/// parameter; returns the value it held before.
fn set_param(layer: &mut Layer<f64>, slot: usize, i: usize, restore: Option<f64>, delta: f64) -> f64 {
    let mut params = layer.params_mut();
    let data = params[slot].data_mut();
    let before = data[i];
    data[i] = restore.unwrap_or(before + delta);
    before
}

/// End-to-end check of every parameter tensor against the real loss.
pub fn check_model(
    model: &Model<f64>,
    batch: &Tensor<f64>,
    targets: &Tensor<f64>,
    weights: &ClassWeights,
    cfg: &GradCheckConfig,
) -> Result<GradCheckReport> {
    let mut rng = rng_for(cfg, 6);
    let mut grads = model.backward(batch, targets, weights)?.grads;
    if cfg.corrupt_conv {
        for (g, name) in grads.iter_mut().zip(model.param_names()) {
            if name.starts_with("conv") && name.ends_with(".kernel") {
                *g = g.scale(-1.0);
            }
        }
    }

    // input of every layer, computed once
    let mut inputs = Vec::with_capacity(model.layers().len());
    let mut act = batch.clone();
    for layer in model.layers() {
        let y = layer.forward(&act)?.0;
        inputs.push(std::mem::replace(&mut act, y));
    }

    let mut report = GradCheckReport {
        tolerance: cfg.tolerance,
        tensors: Vec::new(),
    };
    let owners = model.param_layers();
    let names = model.param_names();
    let mut slot_in_layer = 0;
    for (p, (grad, &li)) in grads.iter().zip(&owners).enumerate() {
        slot_in_layer = if p > 0 && owners[p - 1] == li { slot_in_layer + 1 } else { 0 };
        let mut layer = model.layers()[li].clone();
        let x = &inputs[li];
        let check = check_tensor(&names[p], grad, cfg, &mut rng, |i, d| {
            let orig = set_param(&mut layer, slot_in_layer, i, None, d);
            let out = suffix_loss(model, li, &layer, x, targets, weights);
            set_param(&mut layer, slot_in_layer, i, Some(orig), 0.0);
            out
        })?;
        report.tensors.push(check);
    }
    Ok(report)
}

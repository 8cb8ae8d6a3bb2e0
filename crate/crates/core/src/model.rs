//! Network descriptions and the realized, parameterized model.
//!
//! The reference network has four hidden blocks of 3x3 Same convolutions
//! (16, 32x2, 64x3, 128x4 filters, each followed by ReLU) with a 2x2 max
//! pool closing every block, then flatten, a 4096-unit ReLU dense layer and
//! a softmax classifier.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::init::InitializerKind;
use crate::layers::{relu_backward, relu_forward, softmax, ConvLayer, DenseLayer, PoolLayer, PoolRecord};
use crate::rng::Rng;
use crate::tensor::{Scalar, Tensor};
use crate::train::loss::{weighted_cce_loss, ClassWeights, LossOutput};

pub const HIDDEN_UNITS: usize = 4096;
const BLOCKS: [(usize, usize); 4] = [(16, 1), (32, 2), (64, 3), (128, 4)];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum LayerSpec {
    /// 3x3 Same convolution, stride 1.
    Conv { filters: usize },
    Relu,
    MaxPool,
    Flatten,
    Dense { units: usize },
    /// Terminal softmax over the class axis.
    Softmax,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelSpec {
    /// `(H, W, C)`
    pub input: [usize; 3],
    pub layers: Vec<LayerSpec>,
    pub init: InitializerKind,
    pub classes: usize,
}

impl ModelSpec {
    pub fn rnd_cnn(input: [usize; 3], classes: usize, init: InitializerKind) -> Result<Self> {
        let [h, w, c] = input;
        if h < 16 || w < 16 || c == 0 {
            return Err(Error::InvalidShape(
                input.to_vec(),
                "input must be at least 16x16 to survive four 2x2 poolings",
            ));
        }
        let mut layers = Vec::new();
        for (filters, convs) in BLOCKS {
            for _ in 0..convs {
                layers.push(LayerSpec::Conv { filters });
                layers.push(LayerSpec::Relu);
            }
            layers.push(LayerSpec::MaxPool);
        }
        layers.extend([
            LayerSpec::Flatten,
            LayerSpec::Dense { units: HIDDEN_UNITS },
            LayerSpec::Relu,
            LayerSpec::Dense { units: classes },
            LayerSpec::Softmax,
        ]);
        let spec = Self {
            input,
            layers,
            init,
            classes,
        };
        spec.validate()?;
        Ok(spec)
    }

    /// Walks the layer list and returns the activation shape (without the
    /// batch axis) after every layer.
    pub fn shapes(&self) -> Result<Vec<Vec<usize>>> {
        let mut shape = self.input.to_vec();
        let mut out = Vec::with_capacity(self.layers.len());
        for (i, layer) in self.layers.iter().enumerate() {
            shape = match (*layer, shape.as_slice()) {
                (LayerSpec::Conv { filters }, &[h, w, _]) if filters > 0 => vec![h, w, filters],
                (LayerSpec::MaxPool, &[h, w, c]) if h >= 2 && w >= 2 => {
                    vec![PoolLayer::output_dim(h), PoolLayer::output_dim(w), c]
                }
                (LayerSpec::Flatten, &[h, w, c]) => vec![h * w * c],
                (LayerSpec::Dense { units }, &[_]) if units > 0 => vec![units],
                (LayerSpec::Relu, s) => s.to_vec(),
                (LayerSpec::Softmax, s @ &[k]) if i + 1 == self.layers.len() && k == self.classes => s.to_vec(),
                (layer, s) => {
                    return Err(Error::InvalidShape(
                        s.to_vec(),
                        match layer {
                            LayerSpec::Conv { .. } => "conv expects (H, W, C) and filters > 0",
                            LayerSpec::MaxPool => "max pool expects (H, W, C) with H, W >= 2",
                            LayerSpec::Flatten => "flatten expects (H, W, C)",
                            LayerSpec::Dense { .. } => "dense expects a flat input and units > 0",
                            _ => "softmax must be last and match the class count",
                        },
                    ))
                }
            };
            out.push(shape.clone());
        }
        Ok(out)
    }

    pub fn validate(&self) -> Result<()> {
        if self.classes < 2 {
            return Err(Error::Config(format!("need at least 2 classes, got {}", self.classes)));
        }
        self.init.validate()?;
        if self.layers.last() != Some(&LayerSpec::Softmax) {
            return Err(Error::Config("model must end with a softmax layer".into()));
        }
        self.shapes().map(|_| ())
    }

    /// Names like `conv3.kernel` or `dense2.bias`, in parameter order.
    pub fn param_names(&self) -> Vec<String> {
        let (mut convs, mut denses) = (0, 0);
        let mut names = Vec::new();
        for layer in &self.layers {
            match layer {
                LayerSpec::Conv { .. } => {
                    convs += 1;
                    names.push(format!("conv{convs}.kernel"));
                    names.push(format!("conv{convs}.bias"));
                }
                LayerSpec::Dense { .. } => {
                    denses += 1;
                    names.push(format!("dense{denses}.weights"));
                    names.push(format!("dense{denses}.bias"));
                }
                _ => {}
            }
        }
        names
    }

    pub fn conv_count(&self) -> usize {
        self.layers.iter().filter(|l| matches!(l, LayerSpec::Conv { .. })).count()
    }

    pub fn pool_count(&self) -> usize {
        self.layers.iter().filter(|l| matches!(l, LayerSpec::MaxPool)).count()
    }

    pub fn flatten_width(&self) -> Result<usize> {
        let shapes = self.shapes()?;
        self.layers
            .iter()
            .position(|l| *l == LayerSpec::Flatten)
            .map(|i| shapes[i][0])
            .ok_or_else(|| Error::Config("model has no flatten layer".into()))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Layer<T: Scalar = f32> {
    Conv(ConvLayer<T>),
    Relu,
    MaxPool(PoolLayer),
    Flatten,
    Dense(DenseLayer<T>),
    Softmax,
}

/// Per-layer state a forward pass leaves behind for the backward pass.
#[derive(Debug, Clone)]
pub enum LayerCache<T: Scalar> {
    Input(Tensor<T>),
    Pool(PoolRecord),
    Shape(Vec<usize>),
    None,
}

impl<T: Scalar> Layer<T> {
    pub fn params(&self) -> Vec<&Tensor<T>> {
        match self {
            Layer::Conv(c) => vec![&c.kernel, &c.bias],
            Layer::Dense(d) => vec![&d.weights, &d.bias],
            _ => vec![],
        }
    }

    pub fn params_mut(&mut self) -> Vec<&mut Tensor<T>> {
        match self {
            Layer::Conv(c) => vec![&mut c.kernel, &mut c.bias],
            Layer::Dense(d) => vec![&mut d.weights, &mut d.bias],
            _ => vec![],
        }
    }

    pub fn is_softmax(&self) -> bool {
        matches!(self, Layer::Softmax)
    }

    /// Forward through one layer. Softmax is the identity here: the model
    /// applies it to the logits separately.
    pub fn forward(&self, x: &Tensor<T>) -> Result<(Tensor<T>, LayerCache<T>)> {
        Ok(match self {
            Layer::Conv(c) => (c.forward(x)?, LayerCache::Input(x.clone())),
            Layer::Dense(d) => (d.forward(x)?, LayerCache::Input(x.clone())),
            Layer::Relu => (relu_forward(x), LayerCache::Input(x.clone())),
            Layer::MaxPool(p) => {
                let (y, rec) = p.forward(x)?;
                (y, LayerCache::Pool(rec))
            }
            Layer::Flatten => {
                let n = x.shape()[0];
                let width = x.len() / n;
                (x.clone().reshape(&[n, width])?, LayerCache::Shape(x.shape().to_vec()))
            }
            Layer::Softmax => (x.clone(), LayerCache::None),
        })
    }

    /// Returns `(parameter gradients, input gradient)`.
    pub fn backward(&self, cache: &LayerCache<T>, upstream: &Tensor<T>) -> Result<(Vec<Tensor<T>>, Tensor<T>)> {
        let stale = || Error::Contract("layer cache does not match layer kind".into());
        Ok(match (self, cache) {
            (Layer::Conv(c), LayerCache::Input(x)) => {
                let g = c.backward(x, upstream)?;
                (g.params, g.input)
            }
            (Layer::Dense(d), LayerCache::Input(x)) => {
                let g = d.backward(x, upstream)?;
                (g.params, g.input)
            }
            (Layer::Relu, LayerCache::Input(x)) => (vec![], relu_backward(x, upstream)?),
            (Layer::MaxPool(p), LayerCache::Pool(rec)) => (vec![], p.backward(rec, upstream)?),
            (Layer::Flatten, LayerCache::Shape(shape)) => (vec![], upstream.clone().reshape(shape)?),
            (Layer::Softmax, LayerCache::None) => (vec![], upstream.clone()),
            _ => return Err(stale()),
        })
    }

    fn cast<U: Scalar>(&self) -> Layer<U> {
        match self {
            Layer::Conv(c) => Layer::Conv(ConvLayer {
                kernel: c.kernel.cast(),
                bias: c.bias.cast(),
            }),
            Layer::Dense(d) => Layer::Dense(DenseLayer {
                weights: d.weights.cast(),
                bias: d.bias.cast(),
            }),
            Layer::Relu => Layer::Relu,
            Layer::MaxPool(p) => Layer::MaxPool(*p),
            Layer::Flatten => Layer::Flatten,
            Layer::Softmax => Layer::Softmax,
        }
    }
}

/// Activations cached by [`Model::forward_train`].
#[derive(Debug, Clone)]
pub struct Trace<T: Scalar> {
    caches: Vec<LayerCache<T>>,
    pub logits: Tensor<T>,
    pub probs: Tensor<T>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Model<T: Scalar = f32> {
    spec: ModelSpec,
    layers: Vec<Layer<T>>,
}

/// Gradients for every parameter tensor (in [`Model::params`] order) and the loss.
#[derive(Debug, Clone)]
pub struct Backward<T: Scalar> {
    pub grads: Vec<Tensor<T>>,
    pub loss: LossOutput<T>,
    pub probs: Tensor<T>,
}

impl<T: Scalar> Model<T> {
    pub fn build(spec: ModelSpec, rng: &mut Rng) -> Result<Self> {
        let shapes = spec.shapes()?;
        spec.validate()?;
        let mut layers = Vec::with_capacity(spec.layers.len());
        let mut in_shape = spec.input.to_vec();
        for (layer, out_shape) in spec.layers.iter().zip(&shapes) {
            layers.push(match *layer {
                LayerSpec::Conv { filters } => Layer::Conv(ConvLayer::init(in_shape[2], filters, spec.init, rng)?),
                LayerSpec::Dense { units } => Layer::Dense(DenseLayer::init(in_shape[0], units, spec.init, rng)?),
                LayerSpec::Relu => Layer::Relu,
                LayerSpec::MaxPool => Layer::MaxPool(PoolLayer),
                LayerSpec::Flatten => Layer::Flatten,
                LayerSpec::Softmax => Layer::Softmax,
            });
            in_shape = out_shape.clone();
        }
        Ok(Self { spec, layers })
    }

    /// Reassembles a model from a spec and parameter tensors in
    /// [`Model::params`] order.
    pub fn from_params(spec: ModelSpec, params: Vec<Tensor<T>>) -> Result<Self> {
        let mut model = Self::build(
            ModelSpec {
                init: InitializerKind::Zero,
                ..spec.clone()
            },
            &mut Rng::new(0),
        )?;
        model.spec = spec;
        let slots = model.params_mut();
        if slots.len() != params.len() {
            return Err(Error::mismatch("Model::from_params", slots.len(), params.len()));
        }
        for (slot, p) in slots.into_iter().zip(params) {
            if slot.shape() != p.shape() {
                return Err(Error::mismatch("Model::from_params", slot.shape(), p.shape()));
            }
            *slot = p;
        }
        Ok(model)
    }

    pub fn spec(&self) -> &ModelSpec {
        &self.spec
    }

    pub fn layers(&self) -> &[Layer<T>] {
        &self.layers
    }

    pub fn layers_mut(&mut self) -> &mut [Layer<T>] {
        &mut self.layers
    }

    pub fn classes(&self) -> usize {
        self.spec.classes
    }

    pub fn params(&self) -> Vec<&Tensor<T>> {
        self.layers.iter().flat_map(Layer::params).collect()
    }

    pub fn params_mut(&mut self) -> Vec<&mut Tensor<T>> {
        self.layers.iter_mut().flat_map(Layer::params_mut).collect()
    }

    /// Names like `conv3.kernel` or `dense2.bias`, aligned with [`Model::params`].
    pub fn param_names(&self) -> Vec<String> {
        self.spec.param_names()
    }

    /// Index of the layer owning each parameter tensor.
    pub fn param_layers(&self) -> Vec<usize> {
        self.layers
            .iter()
            .enumerate()
            .flat_map(|(i, l)| std::iter::repeat_n(i, l.params().len()))
            .collect()
    }

    pub fn param_count(&self) -> usize {
        self.params().iter().map(|p| p.len()).sum()
    }

    pub fn flatten_width(&self) -> usize {
        self.spec.flatten_width().expect("validated at build")
    }

    pub fn conv_count(&self) -> usize {
        self.layers.iter().filter(|l| matches!(l, Layer::Conv(_))).count()
    }

    pub fn pool_count(&self) -> usize {
        self.layers.iter().filter(|l| matches!(l, Layer::MaxPool(_))).count()
    }

    pub fn cast<U: Scalar>(&self) -> Model<U> {
        Model {
            spec: self.spec.clone(),
            layers: self.layers.iter().map(Layer::cast).collect(),
        }
    }

    fn check_batch(&self, batch: &Tensor<T>) -> Result<()> {
        let [h, w, c] = self.spec.input;
        match *batch.shape() {
            [_, bh, bw, bc] if [bh, bw, bc] == [h, w, c] => Ok(()),
            _ => Err(Error::mismatch("model forward", ["N", &h.to_string(), &w.to_string(), &c.to_string()], batch.shape())),
        }
    }

    /// Runs layers `start..` on `x` (the input of layer `start`) and returns logits.
    pub fn logits_from(&self, start: usize, x: &Tensor<T>) -> Result<Tensor<T>> {
        let mut act = x.clone();
        for layer in &self.layers[start..] {
            if layer.is_softmax() {
                break;
            }
            act = layer.forward(&act)?.0;
        }
        Ok(act)
    }

    pub fn logits(&self, batch: &Tensor<T>) -> Result<Tensor<T>> {
        self.check_batch(batch)?;
        self.logits_from(0, batch)
    }

    /// Class probabilities `(N, k)`.
    pub fn forward(&self, batch: &Tensor<T>) -> Result<Tensor<T>> {
        softmax(&self.logits(batch)?)
    }

    /// Predicted classes (argmax, lowest index on ties).
    pub fn predict(&self, batch: &Tensor<T>) -> Result<Vec<usize>> {
        Ok(self.forward(batch)?.argmax_rows())
    }

    pub fn forward_train(&self, batch: &Tensor<T>) -> Result<Trace<T>> {
        self.check_batch(batch)?;
        let mut caches = Vec::with_capacity(self.layers.len());
        let mut act = batch.clone();
        for layer in &self.layers {
            let (y, cache) = layer.forward(&act)?;
            caches.push(cache);
            act = y;
        }
        let probs = softmax(&act)?;
        Ok(Trace {
            caches,
            logits: act,
            probs,
        })
    }

    /// Backpropagates a logit gradient through the cached trace.
    pub fn backward_from_logits(&self, trace: &Trace<T>, grad_logits: &Tensor<T>) -> Result<Vec<Tensor<T>>> {
        if trace.caches.len() != self.layers.len() {
            return Err(Error::Contract("trace does not belong to this model".into()));
        }
        let mut upstream = grad_logits.clone();
        let mut grads_rev: Vec<Tensor<T>> = Vec::new();
        for (layer, cache) in self.layers.iter().zip(&trace.caches).rev() {
            let (mut params, input) = layer.backward(cache, &upstream)?;
            params.reverse();
            grads_rev.extend(params);
            upstream = input;
        }
        grads_rev.reverse();
        Ok(grads_rev)
    }

    /// Forward, weighted cross-entropy, and gradients for every parameter.
    pub fn backward(&self, batch: &Tensor<T>, targets: &Tensor<T>, weights: &ClassWeights) -> Result<Backward<T>> {
        let trace = self.forward_train(batch)?;
        let loss = weighted_cce_loss(&trace.probs, targets, weights)?;
        let grads = self.backward_from_logits(&trace, &loss.grad_logits)?;
        Ok(Backward {
            grads,
            loss,
            probs: trace.probs,
        })
    }
}

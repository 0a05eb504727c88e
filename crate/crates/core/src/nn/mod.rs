//! Minimal deterministic network engine: sequential layers, softmax
//! cross-entropy (plus an optional constraint term) and SGD with momentum.

mod engine;
pub mod layer;
pub mod loss;
mod ops;
pub mod optim;
pub mod train;

use std::collections::BTreeMap;

pub use engine::{activations_at, forward, forward_chunked, forward_layers, WeightMap};
pub use layer::{LayerKind, LayerSpec, ParamRole, ParamSpec};
pub use loss::{softmax, softmax_rows, LossSpec};
pub use optim::Sgd;
pub use train::{train_epochs, EpochStats, TrainOptions};

use crate::error::Result;
use crate::store::Model;
use crate::tensor::Tensor;

/// Gradient per trainable parameter, same shapes as the parameters.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Gradients(BTreeMap<String, Tensor>);

impl Gradients {
    pub fn get(&self, name: &str) -> Option<&Tensor> {
        self.0.get(name)
    }

    pub fn iter(&self) -> impl Iterator<Item = (&String, &Tensor)> {
        self.0.iter()
    }

    pub fn names(&self) -> impl Iterator<Item = &String> {
        self.0.keys()
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn into_inner(self) -> BTreeMap<String, Tensor> {
        self.0
    }
}

/// Mean batch loss and gradients for every trainable (non-frozen) parameter.
pub fn loss_and_grads(
    model: &Model,
    batch: &Tensor,
    labels: &[usize],
    loss: &LossSpec,
) -> Result<(f64, Gradients)> {
    let (value, mut all) = loss_and_all_grads(model, batch, labels, loss)?;
    all.retain(|name, _| !model.frozen.contains(name));
    Ok((value, Gradients(all)))
}

/// Like [`loss_and_grads`] but ignores the frozen set.
pub(crate) fn loss_and_all_grads(
    model: &Model,
    batch: &Tensor,
    labels: &[usize],
    loss: &LossSpec,
) -> Result<(f64, BTreeMap<String, Tensor>)> {
    let trace = engine::run(&model.layers, &model.weights, &model.input_shape, batch, true)?;
    let (value, dlogits) = loss::loss_and_dlogits(&trace.output, labels, loss)?;
    let grads = engine::backward(&model.layers, &model.weights, trace, dlogits)?;
    Ok((value, grads))
}

/// Loss and gradients for a bare layer slice fed with `input` (leading batch
/// dimension), restricted to parameters accepted by `keep`.
pub(crate) fn slice_loss_and_grads(
    layers: &[LayerSpec],
    weights: &WeightMap,
    input: &Tensor,
    labels: &[usize],
    loss: &LossSpec,
    keep: impl Fn(&str) -> bool,
) -> Result<(f64, Gradients)> {
    let in_shape = input.shape()[1..].to_vec();
    let trace = engine::run(layers, weights, &in_shape, input, true)?;
    let (value, dlogits) = loss::loss_and_dlogits(&trace.output, labels, loss)?;
    let mut grads = engine::backward(layers, weights, trace, dlogits)?;
    grads.retain(|name, _| keep(name));
    Ok((value, Gradients(grads)))
}

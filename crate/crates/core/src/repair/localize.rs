//! Ranking individual weights by their estimated share of the failing-set
//! loss.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::data::LabeledDataset;
use crate::error::{Error, Result};
use crate::nn::{activations_at, loss_and_all_grads, LayerKind, LossSpec, ParamRole};
use crate::store::Model;
use crate::tensor::Tensor;

const GRAD_CHUNK: usize = 256;

/// One scalar inside a named parameter tensor.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct WeightCoord {
    pub param: String,
    /// Row-major offset into the tensor.
    pub index: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoredCoord {
    pub coord: WeightCoord,
    pub score: f64,
}

/// The last two parameterized layers.
pub fn default_scope(model: &Model) -> Vec<String> {
    let idx = model.parameterized_layers();
    idx[idx.len().saturating_sub(2)..]
        .iter()
        .map(|&i| model.layers[i].name.clone())
        .collect()
}

/// Mean cross-entropy gradient over `data`, accumulated in chunks.
pub(crate) fn mean_gradients(model: &Model, data: &LabeledDataset) -> Result<BTreeMap<String, Tensor>> {
    let n = data.len();
    let mut acc: BTreeMap<String, Vec<f64>> = BTreeMap::new();
    let all: Vec<usize> = (0..n).collect();
    for chunk in all.chunks(GRAD_CHUNK) {
        let (x, y) = data.batch(chunk);
        let (_, grads) = loss_and_all_grads(model, &x, &y, &LossSpec::cross_entropy())?;
        let w = chunk.len() as f64 / n as f64;
        for (name, g) in grads {
            let slot = acc.entry(name).or_insert_with(|| vec![0.0; g.len()]);
            for (a, v) in slot.iter_mut().zip(g.data()) {
                *a += w * *v as f64;
            }
        }
    }
    acc.into_iter()
        .map(|(name, v)| {
            let shape = model.weights[&name].shape().to_vec();
            Ok((name, Tensor::new(shape, v.into_iter().map(|x| x as f32).collect())?))
        })
        .collect()
}

/// Per-feature (dense) or per-channel (conv) mean of a layer's input over
/// `data`.
fn mean_source_activation(model: &Model, data: &LabeledDataset, layer: usize) -> Result<Vec<f64>> {
    let acts = activations_at(model, data.images(), layer)?;
    let n = acts.rows();
    let shape = &acts.shape()[1..];
    let groups = shape[0];
    let plane: usize = shape[1..].iter().product();
    let mut mean = vec![0.0; groups];
    for s in 0..n {
        for (g, chunk) in acts.row(s).chunks(plane).enumerate() {
            mean[g] += chunk.iter().map(|v| *v as f64).sum::<f64>();
        }
    }
    let denom = (n * plane) as f64;
    Ok(mean.into_iter().map(|m| m / denom).collect())
}

/// Scores every coordinate of the scoped layers by
/// `|dL_failing/dw| * |w * a|`, where `a` is the mean activation feeding the
/// weight over the failing set (1 for biases and for weights inside
/// composite layers), and returns the best `top_k` in descending order.
/// Equal scores keep coordinate order (layer order, then offset).
pub fn localize_faulty_weights(
    model: &Model,
    failing: &LabeledDataset,
    top_k: usize,
    scope: &[String],
) -> Result<Vec<ScoredCoord>> {
    if failing.is_empty() {
        return Err(Error::EmptyFailingSet);
    }
    let scope = if scope.is_empty() { default_scope(model) } else { scope.to_vec() };
    let grads = mean_gradients(model, failing)?;
    let mut scored = Vec::new();
    for name in &scope {
        let li = model.layer_index(name).ok_or_else(|| Error::UnknownLayer(name.clone()))?;
        let layer = &model.layers[li];
        let source = match layer.kind {
            LayerKind::Dense { .. } | LayerKind::Conv2d { .. } => Some(mean_source_activation(model, failing, li)?),
            _ => None,
        };
        for p in layer.params() {
            let w = model.weights[&p.name].data();
            let g = grads[&p.name].data();
            // Offsets of one source feature/channel inside a weight row.
            let per_source: usize = p.shape.iter().skip(2).product();
            let row: usize = p.shape.iter().skip(1).product();
            for (index, (wv, gv)) in w.iter().zip(g).enumerate() {
                let a = match (&source, p.role) {
                    (Some(src), ParamRole::Weight { .. }) => src[(index % row) / per_source],
                    _ => 1.0,
                };
                scored.push(ScoredCoord {
                    coord: WeightCoord {
                        param: p.name.clone(),
                        index,
                    },
                    score: (*gv as f64).abs() * (*wv as f64 * a).abs(),
                });
            }
        }
    }
    if top_k > scored.len() {
        log::warn!(
            "top_k {top_k} exceeds the {} coordinates in scope; using all of them",
            scored.len()
        );
    }
    scored.sort_by(|a, b| b.score.total_cmp(&a.score));
    scored.truncate(top_k);
    Ok(scored)
}

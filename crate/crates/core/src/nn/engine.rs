use std::collections::BTreeMap;

use rayon::prelude::*;

use super::layer::{has_projection, LayerKind, LayerSpec};
use super::ops::{self, ConvGeom};
use crate::error::{Error, Result};
use crate::store::Model;
use crate::tensor::Tensor;

pub type WeightMap = BTreeMap<String, Tensor>;

/// Per-layer state kept for the backward pass.
enum Cache {
    Dense { input: Vec<f32> },
    Conv { input: Vec<f32> },
    Pool { argmax: Vec<usize>, in_len: usize },
    Relu { output: Vec<f32> },
    Reshape,
    Gap { plane: usize },
    Residual { input: Vec<f32>, hidden: Vec<f32>, output: Vec<f32> },
    Correction { input: Vec<f32>, hidden: Vec<f32> },
}

/// Forward activations and caches for one batch.
pub(crate) struct Trace {
    n: usize,
    /// Per-sample input shape of each layer, plus the output shape last.
    shapes: Vec<Vec<usize>>,
    caches: Vec<Cache>,
    pub output: Tensor,
}

fn param<'a>(weights: &'a WeightMap, layer: &LayerSpec, suffix: &str) -> Result<&'a [f32]> {
    let name = format!("{}.{suffix}", layer.name);
    weights
        .get(&name)
        .map(|t| t.data())
        .ok_or_else(|| Error::InvalidModel(format!("missing parameter `{name}`")))
}

fn spatial(shape: &[usize]) -> [usize; 3] {
    [shape[0], shape[1], shape[2]]
}

fn check_input(layers: &[LayerSpec], expected: &[usize], batch: &Tensor) -> Result<()> {
    if batch.shape().len() != expected.len() + 1 || &batch.shape()[1..] != expected {
        let name = layers
            .first()
            .map(|l| l.name.clone())
            .unwrap_or_else(|| "input".into());
        let mut exp = vec![batch.rows()];
        exp.extend_from_slice(expected);
        return Err(Error::ShapeMismatch {
            layer: name,
            expected: exp,
            actual: batch.shape().to_vec(),
        });
    }
    Ok(())
}

fn conv_geom(n: usize, input: &[usize], cout: usize, k: usize, stride: usize, pad: usize) -> ConvGeom {
    ConvGeom::new(n, spatial(input), cout, k, stride, pad)
}

/// Runs `layers` over `input` (per-sample shape `in_shape`), optionally
/// keeping what backward needs.
pub(crate) fn run(
    layers: &[LayerSpec],
    weights: &WeightMap,
    in_shape: &[usize],
    input: &Tensor,
    keep: bool,
) -> Result<Trace> {
    check_input(layers, in_shape, input)?;
    let n = input.rows();
    let mut shapes = vec![in_shape.to_vec()];
    let mut caches = Vec::with_capacity(if keep { layers.len() } else { 0 });
    let mut x = input.data().to_vec();
    for layer in layers {
        let cur = shapes.last().unwrap().clone();
        let out_shape = layer.output_shape(&cur)?;
        let (y, cache) = match layer.kind {
            LayerKind::Dense {
                in_features,
                out_features,
            } => {
                let y = ops::dense_forward(
                    &x,
                    n,
                    in_features,
                    param(weights, layer, "weight")?,
                    param(weights, layer, "bias")?,
                    out_features,
                );
                (y, Cache::Dense { input: x })
            }
            LayerKind::Conv2d {
                out_channels,
                kernel_size,
                stride,
                padding,
                ..
            } => {
                let g = conv_geom(n, &cur, out_channels, kernel_size, stride, padding);
                let y = ops::conv2d_forward(
                    &x,
                    &g,
                    param(weights, layer, "weight")?,
                    param(weights, layer, "bias")?,
                );
                (y, Cache::Conv { input: x })
            }
            LayerKind::MaxPool2d {
                kernel_size,
                stride,
            } => {
                let (y, argmax) = ops::maxpool_forward(&x, n, spatial(&cur), kernel_size, stride);
                let in_len = x.len();
                (y, Cache::Pool { argmax, in_len })
            }
            LayerKind::Relu => {
                let y = ops::relu_forward(&x);
                let output = if keep { y.clone() } else { Vec::new() };
                (y, Cache::Relu { output })
            }
            LayerKind::Flatten => (x, Cache::Reshape),
            LayerKind::GlobalAvgPool => {
                let plane = cur[1] * cur[2];
                (ops::gap_forward(&x, n, cur[0], plane), Cache::Gap { plane })
            }
            LayerKind::ResidualBlock {
                in_channels,
                out_channels,
                stride,
            } => {
                let g1 = conv_geom(n, &cur, out_channels, 3, stride, 1);
                let z1 = ops::conv2d_forward(
                    &x,
                    &g1,
                    param(weights, layer, "conv1.weight")?,
                    param(weights, layer, "conv1.bias")?,
                );
                let hidden = ops::relu_forward(&z1);
                let g2 = conv_geom(n, &out_shape, out_channels, 3, 1, 1);
                let mut z = ops::conv2d_forward(
                    &hidden,
                    &g2,
                    param(weights, layer, "conv2.weight")?,
                    param(weights, layer, "conv2.bias")?,
                );
                if has_projection(in_channels, out_channels, stride) {
                    let gs = conv_geom(n, &cur, out_channels, 1, stride, 0);
                    let sc = ops::conv2d_forward(
                        &x,
                        &gs,
                        param(weights, layer, "shortcut.weight")?,
                        param(weights, layer, "shortcut.bias")?,
                    );
                    ops::add_into(&mut z, &sc);
                } else {
                    ops::add_into(&mut z, &x);
                }
                let y = ops::relu_forward(&z);
                let output = if keep { y.clone() } else { Vec::new() };
                (
                    y,
                    Cache::Residual {
                        input: x,
                        hidden,
                        output,
                    },
                )
            }
            LayerKind::CorrectionUnit {
                features,
                width,
                spatial: is_spatial,
            } => {
                let (hidden, u) = if is_spatial {
                    let gd = conv_geom(n, &cur, width, 1, 1, 0);
                    let h = ops::relu_forward(&ops::conv2d_forward(
                        &x,
                        &gd,
                        param(weights, layer, "down.weight")?,
                        param(weights, layer, "down.bias")?,
                    ));
                    let gu = conv_geom(n, &[width, cur[1], cur[2]], features, 1, 1, 0);
                    let u = ops::conv2d_forward(
                        &h,
                        &gu,
                        param(weights, layer, "up.weight")?,
                        param(weights, layer, "up.bias")?,
                    );
                    (h, u)
                } else {
                    let h = ops::relu_forward(&ops::dense_forward(
                        &x,
                        n,
                        features,
                        param(weights, layer, "down.weight")?,
                        param(weights, layer, "down.bias")?,
                        width,
                    ));
                    let u = ops::dense_forward(
                        &h,
                        n,
                        width,
                        param(weights, layer, "up.weight")?,
                        param(weights, layer, "up.bias")?,
                        features,
                    );
                    (h, u)
                };
                let mut y = x.clone();
                ops::add_into(&mut y, &u);
                (y, Cache::Correction { input: x, hidden })
            }
        };
        if keep {
            caches.push(cache);
        }
        x = y;
        shapes.push(out_shape);
    }
    let mut out_shape = vec![n];
    out_shape.extend_from_slice(shapes.last().unwrap());
    let output = Tensor::new(out_shape, x)?;
    if !output.is_finite() {
        return Err(Error::InvalidTensor("non-finite activation in forward pass".into()));
    }
    Ok(Trace {
        n,
        shapes,
        caches,
        output,
    })
}

/// Backpropagates `dout` (gradient w.r.t. the trace output) and returns the
/// gradient of every parameter touched by the layers.
pub(crate) fn backward(
    layers: &[LayerSpec],
    weights: &WeightMap,
    trace: Trace,
    dout: Vec<f32>,
) -> Result<WeightMap> {
    let n = trace.n;
    let mut grads = WeightMap::new();
    let mut dy = dout;
    let mut put = |layer: &LayerSpec, suffix: &str, data: Vec<f32>| -> Result<()> {
        let name = format!("{}.{suffix}", layer.name);
        let shape = weights
            .get(&name)
            .ok_or_else(|| Error::InvalidModel(format!("missing parameter `{name}`")))?
            .shape()
            .to_vec();
        grads.insert(name, Tensor::new(shape, data)?);
        Ok(())
    };
    for (idx, (layer, cache)) in layers.iter().zip(trace.caches).enumerate().rev() {
        let need_dx = idx > 0;
        let cur = &trace.shapes[idx];
        let out = &trace.shapes[idx + 1];
        dy = match (&layer.kind, cache) {
            (
                LayerKind::Dense {
                    in_features,
                    out_features,
                },
                Cache::Dense { input },
            ) => {
                let (dx, dw, db) = ops::dense_backward(
                    &input,
                    n,
                    *in_features,
                    param(weights, layer, "weight")?,
                    *out_features,
                    &dy,
                    need_dx,
                );
                put(layer, "weight", dw)?;
                put(layer, "bias", db)?;
                dx
            }
            (
                LayerKind::Conv2d {
                    out_channels,
                    kernel_size,
                    stride,
                    padding,
                    ..
                },
                Cache::Conv { input },
            ) => {
                let g = conv_geom(n, cur, *out_channels, *kernel_size, *stride, *padding);
                let (dx, dw, db) =
                    ops::conv2d_backward(&input, &g, param(weights, layer, "weight")?, &dy, need_dx);
                put(layer, "weight", dw)?;
                put(layer, "bias", db)?;
                dx
            }
            (LayerKind::MaxPool2d { .. }, Cache::Pool { argmax, in_len }) => {
                ops::maxpool_backward(&dy, &argmax, in_len)
            }
            (LayerKind::Relu, Cache::Relu { output }) => ops::relu_backward(&output, &dy),
            (LayerKind::Flatten, Cache::Reshape) => dy,
            (LayerKind::GlobalAvgPool, Cache::Gap { plane }) => ops::gap_backward(&dy, plane),
            (
                LayerKind::ResidualBlock {
                    in_channels,
                    out_channels,
                    stride,
                },
                Cache::Residual {
                    input,
                    hidden,
                    output,
                },
            ) => {
                let dz = ops::relu_backward(&output, &dy);
                let g2 = conv_geom(n, out, *out_channels, 3, 1, 1);
                let (dh, dw2, db2) =
                    ops::conv2d_backward(&hidden, &g2, param(weights, layer, "conv2.weight")?, &dz, true);
                put(layer, "conv2.weight", dw2)?;
                put(layer, "conv2.bias", db2)?;
                let dz1 = ops::relu_backward(&hidden, &dh);
                let g1 = conv_geom(n, cur, *out_channels, 3, *stride, 1);
                let (mut dx, dw1, db1) =
                    ops::conv2d_backward(&input, &g1, param(weights, layer, "conv1.weight")?, &dz1, true);
                put(layer, "conv1.weight", dw1)?;
                put(layer, "conv1.bias", db1)?;
                if has_projection(*in_channels, *out_channels, *stride) {
                    let gs = conv_geom(n, cur, *out_channels, 1, *stride, 0);
                    let (dxs, dws, dbs) = ops::conv2d_backward(
                        &input,
                        &gs,
                        param(weights, layer, "shortcut.weight")?,
                        &dz,
                        true,
                    );
                    put(layer, "shortcut.weight", dws)?;
                    put(layer, "shortcut.bias", dbs)?;
                    ops::add_into(&mut dx, &dxs);
                } else {
                    ops::add_into(&mut dx, &dz);
                }
                dx
            }
            (
                LayerKind::CorrectionUnit {
                    features,
                    width,
                    spatial: is_spatial,
                },
                Cache::Correction { input, hidden },
            ) => {
                let (dh, dwu, dbu) = if *is_spatial {
                    let gu = conv_geom(n, &[*width, cur[1], cur[2]], *features, 1, 1, 0);
                    ops::conv2d_backward(&hidden, &gu, param(weights, layer, "up.weight")?, &dy, true)
                } else {
                    ops::dense_backward(
                        &hidden,
                        n,
                        *width,
                        param(weights, layer, "up.weight")?,
                        *features,
                        &dy,
                        true,
                    )
                };
                put(layer, "up.weight", dwu)?;
                put(layer, "up.bias", dbu)?;
                let dhz = ops::relu_backward(&hidden, &dh);
                let (dxd, dwd, dbd) = if *is_spatial {
                    let gd = conv_geom(n, cur, *width, 1, 1, 0);
                    ops::conv2d_backward(&input, &gd, param(weights, layer, "down.weight")?, &dhz, need_dx)
                } else {
                    ops::dense_backward(
                        &input,
                        n,
                        *features,
                        param(weights, layer, "down.weight")?,
                        *width,
                        &dhz,
                        need_dx,
                    )
                };
                put(layer, "down.weight", dwd)?;
                put(layer, "down.bias", dbd)?;
                let mut dx = dy;
                if need_dx {
                    ops::add_into(&mut dx, &dxd);
                }
                dx
            }
            _ => unreachable!("cache kind always follows layer kind"),
        };
    }
    Ok(grads)
}

/// Logits for a batch shaped `[n, c, h, w]` (leading batch dimension plus
/// the model's input shape).
pub fn forward(model: &Model, batch: &Tensor) -> Result<Tensor> {
    Ok(run(&model.layers, &model.weights, &model.input_shape, batch, false)?.output)
}

/// Output of the first `upto` layers, i.e. the input to layer `upto`.
pub fn activations_at(model: &Model, batch: &Tensor, upto: usize) -> Result<Tensor> {
    Ok(run(&model.layers[..upto], &model.weights, &model.input_shape, batch, false)?.output)
}

/// Runs an arbitrary slice of layers. `input` carries a leading batch
/// dimension; the per-sample shape is taken from it.
pub fn forward_layers(layers: &[LayerSpec], weights: &WeightMap, input: &Tensor) -> Result<Tensor> {
    let in_shape = input.shape()[1..].to_vec();
    Ok(run(layers, weights, &in_shape, input, false)?.output)
}

/// Forward in fixed-size chunks, evaluated in parallel and stitched back in
/// order. Bit-identical to one big [`forward`] since samples never interact.
pub fn forward_chunked(model: &Model, batch: &Tensor, chunk: usize) -> Result<Tensor> {
    let n = batch.rows();
    if n <= chunk {
        return forward(model, batch);
    }
    let starts: Vec<usize> = (0..n).step_by(chunk).collect();
    let parts = starts
        .par_iter()
        .map(|&s| {
            let idx: Vec<usize> = (s..(s + chunk).min(n)).collect();
            forward(model, &batch.select_rows(&idx))
        })
        .collect::<Result<Vec<_>>>()?;
    let refs: Vec<&Tensor> = parts.iter().collect();
    Tensor::concat_rows(&refs)
}

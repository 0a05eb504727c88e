//! Independent f64 oracles shared by the integration tests. Nothing in here
//! calls into the engine's kernels.
#![allow(dead_code)]

use std::collections::BTreeMap;

use netrepair::nn::{LayerKind, LayerSpec, LossSpec};
use netrepair::store::Model;
use netrepair::{ConstraintSpec, LabeledDataset, Split, Tensor};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub type RefWeights = BTreeMap<String, Vec<f64>>;

pub fn ref_weights(model: &Model) -> RefWeights {
    model
        .weights
        .iter()
        .map(|(k, t)| (k.clone(), t.data().iter().map(|&v| v as f64).collect()))
        .collect()
}

/// Zero-padded NCHW convolution, one sample.
fn conv(x: &[f64], [c, h, w]: [usize; 3], wt: &[f64], b: &[f64], cout: usize, k: usize, s: usize, p: usize) -> (Vec<f64>, [usize; 3]) {
    let oh = (h + 2 * p - k) / s + 1;
    let ow = (w + 2 * p - k) / s + 1;
    let mut y = vec![0.0; cout * oh * ow];
    for o in 0..cout {
        for oy in 0..oh {
            for ox in 0..ow {
                let mut acc = b[o];
                for ci in 0..c {
                    for ky in 0..k {
                        for kx in 0..k {
                            let iy = (oy * s + ky) as isize - p as isize;
                            let ix = (ox * s + kx) as isize - p as isize;
                            if iy < 0 || ix < 0 || iy >= h as isize || ix >= w as isize {
                                continue;
                            }
                            acc += wt[((o * c + ci) * k + ky) * k + kx] * x[(ci * h + iy as usize) * w + ix as usize];
                        }
                    }
                }
                y[(o * oh + oy) * ow + ox] = acc;
            }
        }
    }
    (y, [cout, oh, ow])
}

fn dense(x: &[f64], wt: &[f64], b: &[f64], out: usize) -> Vec<f64> {
    let inp = x.len();
    (0..out).map(|o| b[o] + (0..inp).map(|i| wt[o * inp + i] * x[i]).sum::<f64>()).collect()
}

fn relu(v: Vec<f64>) -> Vec<f64> {
    v.into_iter().map(|x| x.max(0.0)).collect()
}

/// Forward pass of one sample through `layers`, everything in f64.
pub fn ref_forward_one(layers: &[LayerSpec], w: &RefWeights, shape: &[usize], x: &[f64]) -> Vec<f64> {
    let mut x = x.to_vec();
    let mut shape: Vec<usize> = shape.to_vec();
    let get = |layer: &LayerSpec, s: &str| w[&format!("{}.{s}", layer.name)].clone();
    for layer in layers {
        match layer.kind {
            LayerKind::Dense { out_features, .. } => {
                x = dense(&x, &get(layer, "weight"), &get(layer, "bias"), out_features);
                shape = vec![out_features];
            }
            LayerKind::Conv2d {
                out_channels,
                kernel_size,
                stride,
                padding,
                ..
            } => {
                let (y, s) = conv(&x, sh3(&shape), &get(layer, "weight"), &get(layer, "bias"), out_channels, kernel_size, stride, padding);
                x = y;
                shape = s.to_vec();
            }
            LayerKind::MaxPool2d { kernel_size: k, stride } => {
                let [c, h, wd] = sh3(&shape);
                let oh = (h - k) / stride + 1;
                let ow = (wd - k) / stride + 1;
                let mut y = Vec::new();
                for ci in 0..c {
                    for oy in 0..oh {
                        for ox in 0..ow {
                            let mut m = f64::NEG_INFINITY;
                            for ky in 0..k {
                                for kx in 0..k {
                                    m = m.max(x[(ci * h + oy * stride + ky) * wd + ox * stride + kx]);
                                }
                            }
                            y.push(m);
                        }
                    }
                }
                x = y;
                shape = vec![c, oh, ow];
            }
            LayerKind::Relu => x = relu(x),
            LayerKind::Flatten => shape = vec![x.len()],
            LayerKind::GlobalAvgPool => {
                let c = shape[0];
                let plane = x.len() / c;
                x = x.chunks(plane).map(|p| p.iter().sum::<f64>() / plane as f64).collect();
                shape = vec![c];
            }
            LayerKind::ResidualBlock {
                in_channels,
                out_channels,
                stride,
            } => {
                let s = sh3(&shape);
                let (z1, s1) = conv(&x, s, &get(layer, "conv1.weight"), &get(layer, "conv1.bias"), out_channels, 3, stride, 1);
                let (z2, s2) = conv(&relu(z1), s1, &get(layer, "conv2.weight"), &get(layer, "conv2.bias"), out_channels, 3, 1, 1);
                let short = if in_channels != out_channels || stride != 1 {
                    conv(&x, s, &get(layer, "shortcut.weight"), &get(layer, "shortcut.bias"), out_channels, 1, stride, 0).0
                } else {
                    x.clone()
                };
                x = relu(z2.iter().zip(&short).map(|(a, b)| a + b).collect());
                shape = s2.to_vec();
            }
            LayerKind::CorrectionUnit { width, spatial, .. } => {
                let (dw, db, uw, ub) = (get(layer, "down.weight"), get(layer, "down.bias"), get(layer, "up.weight"), get(layer, "up.bias"));
                let u = if spatial {
                    let s = sh3(&shape);
                    let (h, s1) = conv(&x, s, &dw, &db, width, 1, 1, 0);
                    conv(&relu(h), s1, &uw, &ub, s[0], 1, 1, 0).0
                } else {
                    let h = relu(dense(&x, &dw, &db, width));
                    dense(&h, &uw, &ub, x.len())
                };
                x = x.iter().zip(&u).map(|(a, b)| a + b).collect();
            }
        }
    }
    x
}

fn sh3(s: &[usize]) -> [usize; 3] {
    [s[0], s[1], s[2]]
}

pub fn ref_logits(model: &Model, w: &RefWeights, input: &[f64], n: usize) -> Vec<Vec<f64>> {
    let per = input.len() / n;
    input
        .chunks(per)
        .map(|x| ref_forward_one(&model.layers, w, &model.input_shape, x))
        .collect()
}

pub fn ref_softmax(z: &[f64]) -> Vec<f64> {
    let m = z.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let e: Vec<f64> = z.iter().map(|v| (v - m).exp()).collect();
    let s: f64 = e.iter().sum();
    e.into_iter().map(|v| v / s).collect()
}

/// Per-group penalty `min(relu(1-eps-s), relu(s-eps))`, averaged over rows
/// and groups.
pub fn ref_constraint_loss(probs: &[Vec<f64>], spec: &ConstraintSpec) -> f64 {
    let mut total = 0.0;
    for p in probs {
        for g in &spec.groups {
            let s: f64 = g.iter().map(|&c| p[c]).sum();
            total += f64::min((1.0 - spec.epsilon - s).max(0.0), (s - spec.epsilon).max(0.0));
        }
    }
    total / (probs.len() * spec.groups.len()) as f64
}

pub fn ref_loss(model: &Model, w: &RefWeights, input: &[f64], labels: &[usize], loss: &LossSpec) -> f64 {
    let probs: Vec<Vec<f64>> = ref_logits(model, w, input, labels.len()).iter().map(|z| ref_softmax(z)).collect();
    let ce = probs.iter().zip(labels).map(|(p, &l)| -p[l].ln()).sum::<f64>() / labels.len() as f64;
    match (&loss.constraint, loss.lam) {
        (Some(spec), lam) if lam != 0.0 => ce + lam * ref_constraint_loss(&probs, spec),
        _ => ce,
    }
}

/// Central difference of the reference loss along one coordinate. The step
/// is halved while two consecutive estimates disagree, which happens when
/// the stencil straddles a ReLU or max-pool kink.
pub fn fd_grad(model: &Model, w: &RefWeights, input: &[f64], labels: &[usize], loss: &LossSpec, name: &str, i: usize) -> f64 {
    let eval = |h: f64| {
        let mut wp = w.clone();
        wp.get_mut(name).unwrap()[i] += h;
        let up = ref_loss(model, &wp, input, labels, loss);
        wp.get_mut(name).unwrap()[i] -= 2.0 * h;
        let down = ref_loss(model, &wp, input, labels, loss);
        (up - down) / (2.0 * h)
    };
    let mut h = 1e-4;
    let mut prev = eval(h);
    for _ in 0..8 {
        h /= 2.0;
        let next = eval(h);
        if (next - prev).abs() <= 1e-7 * (1.0 + next.abs()) {
            return next;
        }
        prev = next;
    }
    prev
}

pub struct GradCheck {
    pub name: String,
    pub rel_err: f64,
}

/// Norm-wise relative error between engine gradients and reference finite
/// differences, one entry per trainable tensor.
pub fn check_gradients(model: &Model, batch: &Tensor, labels: &[usize], loss: &LossSpec) -> Vec<GradCheck> {
    let (_, grads) = netrepair::nn::loss_and_grads(model, batch, labels, loss).expect("engine gradients");
    let w = ref_weights(model);
    let input: Vec<f64> = batch.data().iter().map(|&v| v as f64).collect();
    let mut out = Vec::new();
    for (name, g) in grads.iter() {
        let (mut diff, mut norm_a, mut norm_b) = (0.0f64, 0.0f64, 0.0f64);
        for (i, &a) in g.data().iter().enumerate() {
            let b = fd_grad(model, &w, &input, labels, loss, name, i);
            diff += (a as f64 - b).powi(2);
            norm_a += (a as f64).powi(2);
            norm_b += b * b;
        }
        let scale = norm_a.sqrt().max(norm_b.sqrt()).max(1e-8);
        out.push(GradCheck {
            name: name.clone(),
            rel_err: diff.sqrt() / scale,
        });
    }
    out
}

/// Small networks covering every layer kind, input `[2, 6, 6]`, 3 classes.
pub fn layer_fixtures() -> Vec<(&'static str, Vec<LayerSpec>)> {
    use LayerKind::*;
    let l = LayerSpec::new;
    vec![
        ("dense", vec![l("flat", Flatten), l("fc1", Dense { in_features: 72, out_features: 6 }), l("act", Relu), l("fc2", Dense { in_features: 6, out_features: 3 })]),
        (
            "conv2d",
            vec![
                l("conv", Conv2d { in_channels: 2, out_channels: 3, kernel_size: 3, stride: 2, padding: 1 }),
                l("act", Relu),
                l("flat", Flatten),
                l("fc", Dense { in_features: 27, out_features: 3 }),
            ],
        ),
        (
            "maxpool2d",
            vec![
                l("conv", Conv2d { in_channels: 2, out_channels: 2, kernel_size: 3, stride: 1, padding: 1 }),
                l("pool", MaxPool2d { kernel_size: 2, stride: 2 }),
                l("flat", Flatten),
                l("fc", Dense { in_features: 18, out_features: 3 }),
            ],
        ),
        ("global_avg_pool", vec![l("conv", Conv2d { in_channels: 2, out_channels: 4, kernel_size: 3, stride: 1, padding: 0 }), l("gap", GlobalAvgPool), l("fc", Dense { in_features: 4, out_features: 3 })]),
        (
            "residual_projection",
            vec![l("block", ResidualBlock { in_channels: 2, out_channels: 3, stride: 2 }), l("gap", GlobalAvgPool), l("fc", Dense { in_features: 3, out_features: 3 })],
        ),
        (
            "residual_identity",
            vec![l("block", ResidualBlock { in_channels: 2, out_channels: 2, stride: 1 }), l("gap", GlobalAvgPool), l("fc", Dense { in_features: 2, out_features: 3 })],
        ),
        (
            "correction_dense",
            vec![
                l("flat", Flatten),
                l("fc1", Dense { in_features: 72, out_features: 5 }),
                l("unit", CorrectionUnit { features: 5, width: 4, spatial: false }),
                l("act", Relu),
                l("fc2", Dense { in_features: 5, out_features: 3 }),
            ],
        ),
        (
            "correction_spatial",
            vec![
                l("conv", Conv2d { in_channels: 2, out_channels: 3, kernel_size: 3, stride: 2, padding: 1 }),
                l("unit", CorrectionUnit { features: 3, width: 2, spatial: true }),
                l("gap", GlobalAvgPool),
                l("fc", Dense { in_features: 3, out_features: 3 }),
            ],
        ),
    ]
}

/// A fixture model with every parameter (including zero-initialised ones)
/// filled with seeded values, plus a random batch.
pub fn fixture_case(layers: Vec<LayerSpec>, seed: u64) -> (Model, Tensor, Vec<usize>) {
    let mut model = Model::new("fixture", 1, [2, 6, 6], 3, layers, seed).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x5eed);
    for t in model.weights.values_mut() {
        for v in t.data_mut() {
            *v = rng.random_range(-0.6f32..0.6);
        }
    }
    let n = 4;
    let data: Vec<f32> = (0..n * 72).map(|_| rng.random_range(-1.0f32..1.0)).collect();
    let labels = (0..n).map(|_| rng.random_range(0..3)).collect();
    (model, Tensor::new(vec![n, 2, 6, 6], data).unwrap(), labels)
}

/// Plain accuracy by counting.
pub fn brute_accuracy(preds: &[usize], labels: &[usize]) -> f64 {
    let mut hits = 0usize;
    for i in 0..labels.len() {
        if preds[i] == labels[i] {
            hits += 1;
        }
    }
    hits as f64 / labels.len() as f64
}

/// Mean precision over classes that were predicted at least once.
pub fn brute_confusion_accuracy(preds: &[usize], labels: &[usize], classes: usize) -> f64 {
    let mut sum = 0.0;
    let mut defined = 0;
    for c in 0..classes {
        let predicted = preds.iter().filter(|&&p| p == c).count();
        if predicted == 0 {
            continue;
        }
        let tp = preds.iter().zip(labels).filter(|(&p, &l)| p == c && l == c).count();
        sum += tp as f64 / predicted as f64;
        defined += 1;
    }
    sum / defined as f64
}

/// Share of probability rows whose every group mass is within epsilon of 0
/// or 1.
pub fn brute_constraint_accuracy(probs: &[Vec<f64>], spec: &ConstraintSpec) -> f64 {
    let ok = probs
        .iter()
        .filter(|p| {
            spec.groups.iter().all(|g| {
                let s: f64 = g.iter().map(|&c| p[c]).sum();
                s <= spec.epsilon || s >= 1.0 - spec.epsilon
            })
        })
        .count();
    ok as f64 / probs.len() as f64
}

/// Predictions and labels whose confusion matrix `[true][pred]` is `m`.
pub fn from_confusion(m: &[Vec<usize>]) -> (Vec<usize>, Vec<usize>) {
    let (mut preds, mut labels) = (Vec::new(), Vec::new());
    for (t, row) in m.iter().enumerate() {
        for (p, &count) in row.iter().enumerate() {
            for _ in 0..count {
                preds.push(p);
                labels.push(t);
            }
        }
    }
    (preds, labels)
}

/// Model computing `16 * x - 8` per input pixel, so fixture logits in
/// `[-8, 8]` can be stored as images in `[0, 1]`. Exact for logits on a
/// 1/64 grid.
pub fn passthrough_model(classes: usize) -> Model {
    let layers = vec![
        LayerSpec::new("flat", LayerKind::Flatten),
        LayerSpec::new("map", LayerKind::Dense { in_features: classes, out_features: classes }),
    ];
    let mut model = Model::new("passthrough", 1, [classes, 1, 1], classes, layers, 0).unwrap();
    let w = model.weights.get_mut("map.weight").unwrap().data_mut();
    w.iter_mut().for_each(|v| *v = 0.0);
    for c in 0..classes {
        w[c * classes + c] = 16.0;
    }
    model.weights.get_mut("map.bias").unwrap().data_mut().iter_mut().for_each(|v| *v = -8.0);
    model
}

pub fn logit_dataset(rows: &[Vec<f32>], labels: &[usize]) -> LabeledDataset {
    let classes = rows[0].len();
    let data: Vec<f32> = rows.concat().iter().map(|&l| (l + 8.0) / 16.0).collect();
    let t = Tensor::new(vec![rows.len(), classes, 1, 1], data).unwrap();
    LabeledDataset::new(t, labels.to_vec(), Split::Test, classes).unwrap()
}

/// Logit rows whose softmax is exactly `probs` up to float rounding.
pub fn logits_for_probs(probs: &[f64]) -> Vec<f32> {
    probs.iter().map(|p| p.max(1e-30).ln() as f32).collect()
}

/// Feed-forward fixture for localization: `[1, 8, 8]` inputs, 64→8→4.
pub fn ffnn_fixture_layers() -> Vec<LayerSpec> {
    use LayerKind::*;
    vec![
        LayerSpec::new("flat", Flatten),
        LayerSpec::new("fc1", Dense { in_features: 64, out_features: 8 }),
        LayerSpec::new("act", Relu),
        LayerSpec::new("fc2", Dense { in_features: 8, out_features: 4 }),
    ]
}

pub struct DecisiveFixture {
    pub clean: Model,
    pub defective: Model,
    pub zeroed: usize,
    pub train: LabeledDataset,
    pub test: LabeledDataset,
}

/// Trains the feed-forward fixture on a 4-class synthetic corpus and zeroes
/// the single `fc2` weight whose removal costs the most training accuracy.
pub fn decisive_fixture(seed: u64) -> DecisiveFixture {
    use netrepair::data::make_synthetic;
    use netrepair::nn::{train_epochs, TrainOptions};
    let train = make_synthetic(4, 100, [1, 8, 8], 10 + seed, Split::Train).unwrap();
    let test = make_synthetic(4, 50, [1, 8, 8], 20 + seed, Split::Test).unwrap();
    let mut clean = Model::new("ffnn-fixture", 2, [1, 8, 8], 4, ffnn_fixture_layers(), seed).unwrap();
    let opts = TrainOptions {
        epochs: 30,
        batch_size: 16,
        lr: 0.05,
        seed,
        ..Default::default()
    };
    train_epochs(&mut clean, &train, &opts, &mut |_| {}).unwrap();
    let mut worst = (0, usize::MAX);
    for i in 0..32 {
        let mut m = clean.clone();
        m.weights.get_mut("fc2.weight").unwrap().data_mut()[i] = 0.0;
        let hits = netrepair::eval::predict(&m, &train)
            .unwrap()
            .iter()
            .zip(train.labels())
            .filter(|(p, l)| p == l)
            .count();
        if hits < worst.1 {
            worst = (i, hits);
        }
    }
    let mut defective = clean.clone();
    defective.weights.get_mut("fc2.weight").unwrap().data_mut()[worst.0] = 0.0;
    DecisiveFixture {
        clean,
        defective,
        zeroed: worst.0,
        train,
        test,
    }
}

/// Exhaustive single-weight ablation: `|L(w_i <- 0) - L|` of the mean
/// cross-entropy over `data`, for every coordinate of the named tensors,
/// ranked descending (ties by tensor order then offset).
pub fn ablation_ranking(model: &Model, data: &LabeledDataset, params: &[&str]) -> Vec<(String, usize, f64)> {
    let w = ref_weights(model);
    let input: Vec<f64> = data.images().data().iter().map(|&v| v as f64).collect();
    let base = ref_loss(model, &w, &input, data.labels(), &LossSpec::cross_entropy());
    let mut out = Vec::new();
    for &name in params {
        for i in 0..w[name].len() {
            let mut wp = w.clone();
            wp.get_mut(name).unwrap()[i] = 0.0;
            let l = ref_loss(model, &wp, &input, data.labels(), &LossSpec::cross_entropy());
            out.push((name.to_string(), i, (l - base).abs()));
        }
    }
    out.sort_by(|a, b| b.2.total_cmp(&a.2));
    out
}

/// The clean fixture model with its output layer scaled by 0.25: same
/// predictions, much flatter probabilities.
pub fn tempered_fixture(seed: u64) -> DecisiveFixture {
    let mut fx = decisive_fixture(seed);
    for name in ["fc2.weight", "fc2.bias"] {
        fx.clean.weights.get_mut(name).unwrap().data_mut().iter_mut().for_each(|v| *v *= 0.25);
    }
    fx
}

//! Built-in architectures, addressed by `(name, depth)`.

use crate::error::{Error, Result};
use crate::nn::{LayerKind, LayerSpec};

use super::Model;

/// `(name, depth)` pairs accepted by [`build_architecture`].
pub const SUPPORTED: &[(&str, usize)] = &[("ffnn", 6), ("cnn-small", 2), ("resnet", 8), ("resnet", 14)];

pub fn canonical_arch(name: &str) -> &str {
    match name.to_ascii_lowercase().as_str() {
        "ffnn" | "ffnn-6" | "mlp" => "ffnn",
        "cnn-small" | "cnn" | "cnn_small" => "cnn-small",
        "resnet" | "resnet-tiny" | "resnet_tiny" => "resnet",
        _ => name,
    }
}

pub fn supported_list() -> String {
    SUPPORTED
        .iter()
        .map(|(a, d)| format!("{a}/{d}"))
        .collect::<Vec<_>>()
        .join(", ")
}

/// Smallest registered depth for `arch`.
pub fn default_depth(arch: &str) -> Option<usize> {
    let arch = canonical_arch(arch);
    SUPPORTED.iter().find(|(a, _)| *a == arch).map(|(_, d)| *d)
}

pub fn is_supported(arch: &str, depth: usize) -> bool {
    let arch = canonical_arch(arch);
    SUPPORTED.iter().any(|&(a, d)| a == arch && d == depth)
}

pub fn build_architecture(
    arch_name: &str,
    depth: usize,
    input_shape: [usize; 3],
    num_classes: usize,
    seed: u64,
) -> Result<Model> {
    let arch = canonical_arch(arch_name);
    let layers = match (arch, depth) {
        ("ffnn", 6) => ffnn_layers(input_shape, num_classes),
        ("cnn-small", 2) => cnn_small_layers(input_shape, num_classes),
        ("resnet", 8) => resnet_layers(input_shape, num_classes, 1),
        ("resnet", 14) => resnet_layers(input_shape, num_classes, 2),
        _ => {
            return Err(Error::UnsupportedArchitecture {
                arch: arch_name.to_string(),
                depth,
                supported: supported_list(),
            })
        }
    };
    Model::new(arch, depth, input_shape, num_classes, layers, seed)
}

/// Flatten followed by six dense layers: five of width 784 with ReLU, then
/// the classifier.
fn ffnn_layers([c, h, w]: [usize; 3], classes: usize) -> Vec<LayerSpec> {
    const WIDTH: usize = 784;
    let mut layers = vec![LayerSpec::new("flatten", LayerKind::Flatten)];
    let mut fin = c * h * w;
    for i in 1..=5 {
        layers.push(LayerSpec::new(
            format!("fc{i}"),
            LayerKind::Dense {
                in_features: fin,
                out_features: WIDTH,
            },
        ));
        layers.push(LayerSpec::new(format!("relu{i}"), LayerKind::Relu));
        fin = WIDTH;
    }
    layers.push(LayerSpec::new(
        "fc6",
        LayerKind::Dense {
            in_features: fin,
            out_features: classes,
        },
    ));
    layers
}

/// conv(8) -> pool -> conv(16) -> pool -> fc(64) -> fc(classes).
fn cnn_small_layers([c, h, w]: [usize; 3], classes: usize) -> Vec<LayerSpec> {
    let conv = |name: &str, cin, cout| {
        LayerSpec::new(
            name,
            LayerKind::Conv2d {
                in_channels: cin,
                out_channels: cout,
                kernel_size: 3,
                stride: 1,
                padding: 1,
            },
        )
    };
    let pool = |name: &str| {
        LayerSpec::new(
            name,
            LayerKind::MaxPool2d {
                kernel_size: 2,
                stride: 2,
            },
        )
    };
    let flat = 16 * (h / 2 / 2) * (w / 2 / 2);
    vec![
        conv("conv1", c, 8),
        LayerSpec::new("relu1", LayerKind::Relu),
        pool("pool1"),
        conv("conv2", 8, 16),
        LayerSpec::new("relu2", LayerKind::Relu),
        pool("pool2"),
        LayerSpec::new("flatten", LayerKind::Flatten),
        LayerSpec::new(
            "fc1",
            LayerKind::Dense {
                in_features: flat,
                out_features: 64,
            },
        ),
        LayerSpec::new("relu3", LayerKind::Relu),
        LayerSpec::new(
            "fc2",
            LayerKind::Dense {
                in_features: 64,
                out_features: classes,
            },
        ),
    ]
}

/// CIFAR-style ResNet with `6n + 2` weighted layers: a stem convolution,
/// three stages of `n` residual blocks (8, 16, 32 channels; the last two
/// stages start with stride 2), global average pooling and the classifier.
fn resnet_layers([c, _, _]: [usize; 3], classes: usize, n: usize) -> Vec<LayerSpec> {
    let mut layers = vec![
        LayerSpec::new(
            "stem",
            LayerKind::Conv2d {
                in_channels: c,
                out_channels: 8,
                kernel_size: 3,
                stride: 1,
                padding: 1,
            },
        ),
        LayerSpec::new("stem_relu", LayerKind::Relu),
    ];
    let mut cin = 8;
    for (stage, &width) in [8usize, 16, 32].iter().enumerate() {
        for b in 0..n {
            let stride = if stage > 0 && b == 0 { 2 } else { 1 };
            layers.push(LayerSpec::new(
                format!("stage{}_block{}", stage + 1, b + 1),
                LayerKind::ResidualBlock {
                    in_channels: cin,
                    out_channels: width,
                    stride,
                },
            ));
            cin = width;
        }
    }
    layers.push(LayerSpec::new("gap", LayerKind::GlobalAvgPool));
    layers.push(LayerSpec::new(
        "fc",
        LayerKind::Dense {
            in_features: cin,
            out_features: classes,
        },
    ));
    layers
}

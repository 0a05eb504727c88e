use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// One named layer of a sequential network.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LayerSpec {
    pub name: String,
    #[serde(flatten)]
    pub kind: LayerKind,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum LayerKind {
    Dense {
        in_features: usize,
        out_features: usize,
    },
    Conv2d {
        in_channels: usize,
        out_channels: usize,
        kernel_size: usize,
        stride: usize,
        padding: usize,
    },
    MaxPool2d {
        kernel_size: usize,
        stride: usize,
    },
    Relu,
    Flatten,
    GlobalAvgPool,
    /// `relu(conv3x3(relu(conv3x3_s(x))) + shortcut(x))`, with a strided 1x1
    /// projection shortcut whenever the shape changes.
    ResidualBlock {
        in_channels: usize,
        out_channels: usize,
        stride: usize,
    },
    /// `x + up(relu(down(x)))`. Dense over features, or 1x1 convolutions
    /// over channels when `spatial` is set.
    CorrectionUnit {
        features: usize,
        width: usize,
        spatial: bool,
    },
}

/// Which role a parameter tensor plays; biases start at zero.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ParamRole {
    Weight { fan_in: usize },
    Bias,
    /// Output projection of a correction unit, zero at attach time.
    ZeroWeight,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ParamSpec {
    pub name: String,
    pub shape: Vec<usize>,
    pub role: ParamRole,
}

impl LayerSpec {
    pub fn new(name: impl Into<String>, kind: LayerKind) -> Self {
        LayerSpec {
            name: name.into(),
            kind,
        }
    }

    fn invalid(&self, reason: impl Into<String>) -> Error {
        Error::InvalidLayer {
            layer: self.name.clone(),
            reason: reason.into(),
        }
    }

    fn mismatch(&self, expected: Vec<usize>, actual: &[usize]) -> Error {
        Error::ShapeMismatch {
            layer: self.name.clone(),
            expected,
            actual: actual.to_vec(),
        }
    }

    pub fn is_parameterized(&self) -> bool {
        !self.params().is_empty()
    }

    pub fn validate(&self) -> Result<()> {
        let positive = |v: usize, what: &str| {
            if v == 0 {
                Err(self.invalid(format!("{what} must be >= 1")))
            } else {
                Ok(())
            }
        };
        match self.kind {
            LayerKind::Dense {
                in_features,
                out_features,
            } => {
                positive(in_features, "in_features")?;
                positive(out_features, "out_features")
            }
            LayerKind::Conv2d {
                in_channels,
                out_channels,
                kernel_size,
                stride,
                ..
            } => {
                positive(in_channels, "in_channels")?;
                positive(out_channels, "out_channels")?;
                positive(kernel_size, "kernel_size")?;
                positive(stride, "stride")
            }
            LayerKind::MaxPool2d {
                kernel_size,
                stride,
            } => {
                positive(kernel_size, "kernel_size")?;
                positive(stride, "stride")
            }
            LayerKind::ResidualBlock {
                in_channels,
                out_channels,
                stride,
            } => {
                positive(in_channels, "in_channels")?;
                positive(out_channels, "out_channels")?;
                positive(stride, "stride")
            }
            LayerKind::CorrectionUnit {
                features, width, ..
            } => {
                positive(features, "features")?;
                positive(width, "width")
            }
            LayerKind::Relu | LayerKind::Flatten | LayerKind::GlobalAvgPool => Ok(()),
        }
    }

    /// Per-sample output shape for a per-sample input shape.
    pub fn output_shape(&self, input: &[usize]) -> Result<Vec<usize>> {
        self.validate()?;
        match self.kind {
            LayerKind::Dense {
                in_features,
                out_features,
            } => {
                if input != [in_features] {
                    return Err(self.mismatch(vec![in_features], input));
                }
                Ok(vec![out_features])
            }
            LayerKind::Conv2d {
                in_channels,
                out_channels,
                kernel_size,
                stride,
                padding,
            } => {
                let (h, w) = self.spatial_input(input, in_channels)?;
                let oh = conv_out(h, kernel_size, stride, padding)
                    .ok_or_else(|| self.invalid(format!("kernel larger than padded input {input:?}")))?;
                let ow = conv_out(w, kernel_size, stride, padding)
                    .ok_or_else(|| self.invalid(format!("kernel larger than padded input {input:?}")))?;
                Ok(vec![out_channels, oh, ow])
            }
            LayerKind::MaxPool2d {
                kernel_size,
                stride,
            } => {
                if input.len() != 3 {
                    return Err(self.invalid(format!("expects [c, h, w], got {input:?}")));
                }
                let oh = conv_out(input[1], kernel_size, stride, 0)
                    .ok_or_else(|| self.invalid(format!("window larger than input {input:?}")))?;
                let ow = conv_out(input[2], kernel_size, stride, 0)
                    .ok_or_else(|| self.invalid(format!("window larger than input {input:?}")))?;
                Ok(vec![input[0], oh, ow])
            }
            LayerKind::Relu => Ok(input.to_vec()),
            LayerKind::Flatten => Ok(vec![input.iter().product()]),
            LayerKind::GlobalAvgPool => {
                if input.len() != 3 {
                    return Err(self.invalid(format!("expects [c, h, w], got {input:?}")));
                }
                Ok(vec![input[0]])
            }
            LayerKind::ResidualBlock {
                in_channels,
                out_channels,
                stride,
            } => {
                let (h, w) = self.spatial_input(input, in_channels)?;
                let oh = conv_out(h, 3, stride, 1).expect("3x3/pad 1 always fits");
                let ow = conv_out(w, 3, stride, 1).expect("3x3/pad 1 always fits");
                Ok(vec![out_channels, oh, ow])
            }
            LayerKind::CorrectionUnit {
                features, spatial, ..
            } => {
                if spatial {
                    self.spatial_input(input, features)?;
                } else if input != [features] {
                    return Err(self.mismatch(vec![features], input));
                }
                Ok(input.to_vec())
            }
        }
    }

    fn spatial_input(&self, input: &[usize], channels: usize) -> Result<(usize, usize)> {
        if input.len() != 3 || input[0] != channels {
            let mut expected = vec![channels];
            expected.extend(input.iter().skip(1).take(2));
            return Err(self.mismatch(expected, input));
        }
        Ok((input[1], input[2]))
    }

    /// Parameter tensors owned by this layer, named `<layer>.<param>`.
    pub fn params(&self) -> Vec<ParamSpec> {
        let p = |suffix: &str, shape: Vec<usize>, role: ParamRole| ParamSpec {
            name: format!("{}.{suffix}", self.name),
            shape,
            role,
        };
        match self.kind {
            LayerKind::Dense {
                in_features,
                out_features,
            } => vec![
                p(
                    "weight",
                    vec![out_features, in_features],
                    ParamRole::Weight {
                        fan_in: in_features,
                    },
                ),
                p("bias", vec![out_features], ParamRole::Bias),
            ],
            LayerKind::Conv2d {
                in_channels,
                out_channels,
                kernel_size: k,
                ..
            } => vec![
                p(
                    "weight",
                    vec![out_channels, in_channels, k, k],
                    ParamRole::Weight {
                        fan_in: in_channels * k * k,
                    },
                ),
                p("bias", vec![out_channels], ParamRole::Bias),
            ],
            LayerKind::ResidualBlock {
                in_channels,
                out_channels,
                stride,
            } => {
                let mut v = vec![
                    p(
                        "conv1.weight",
                        vec![out_channels, in_channels, 3, 3],
                        ParamRole::Weight {
                            fan_in: in_channels * 9,
                        },
                    ),
                    p("conv1.bias", vec![out_channels], ParamRole::Bias),
                    p(
                        "conv2.weight",
                        vec![out_channels, out_channels, 3, 3],
                        ParamRole::Weight {
                            fan_in: out_channels * 9,
                        },
                    ),
                    p("conv2.bias", vec![out_channels], ParamRole::Bias),
                ];
                if has_projection(in_channels, out_channels, stride) {
                    v.push(p(
                        "shortcut.weight",
                        vec![out_channels, in_channels, 1, 1],
                        ParamRole::Weight {
                            fan_in: in_channels,
                        },
                    ));
                    v.push(p("shortcut.bias", vec![out_channels], ParamRole::Bias));
                }
                v
            }
            LayerKind::CorrectionUnit {
                features,
                width,
                spatial,
            } => {
                let (down, up) = if spatial {
                    (vec![width, features, 1, 1], vec![features, width, 1, 1])
                } else {
                    (vec![width, features], vec![features, width])
                };
                vec![
                    p("down.weight", down, ParamRole::Weight { fan_in: features }),
                    p("down.bias", vec![width], ParamRole::Bias),
                    p("up.weight", up, ParamRole::ZeroWeight),
                    p("up.bias", vec![features], ParamRole::Bias),
                ]
            }
            LayerKind::MaxPool2d { .. }
            | LayerKind::Relu
            | LayerKind::Flatten
            | LayerKind::GlobalAvgPool => Vec::new(),
        }
    }
}

pub(crate) fn has_projection(in_channels: usize, out_channels: usize, stride: usize) -> bool {
    in_channels != out_channels || stride != 1
}

pub(crate) fn conv_out(size: usize, kernel: usize, stride: usize, padding: usize) -> Option<usize> {
    let padded = size + 2 * padding;
    if padded < kernel {
        return None;
    }
    Some((padded - kernel) / stride + 1)
}

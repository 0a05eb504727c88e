//! Reproducible defect injection, used to manufacture repair targets.

use std::fmt;
use std::str::FromStr;

use rand::Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};
use serde_json::json;

use super::Model;
use crate::data::LabeledDataset;
use crate::error::{Error, Result};
use crate::nn::{train_epochs, ParamRole, TrainOptions};
use crate::rng;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum DefectKind {
    /// Gaussian noise with standard deviation `magnitude`.
    WeightNoise,
    /// Zeroes `floor(magnitude * n)` of the layer's `n` weights.
    WeightZero,
    /// Swaps the labels of two seeded classes and fine-tunes only the target
    /// layer on them for `magnitude` epochs.
    LabelFlipFinetune,
}

impl fmt::Display for DefectKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            DefectKind::WeightNoise => "weight-noise",
            DefectKind::WeightZero => "weight-zero",
            DefectKind::LabelFlipFinetune => "label-flip-finetune",
        })
    }
}

impl FromStr for DefectKind {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "weight-noise" | "noise" => Ok(DefectKind::WeightNoise),
            "weight-zero" | "zero" => Ok(DefectKind::WeightZero),
            "label-flip-finetune" | "label-flip" | "flip" => Ok(DefectKind::LabelFlipFinetune),
            other => Err(Error::InvalidArgument(format!("unknown defect kind `{other}`"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DefectSpec {
    pub kind: DefectKind,
    pub target_layer: String,
    pub magnitude: f64,
    pub seed: u64,
}

impl DefectSpec {
    pub fn new(kind: DefectKind, target_layer: impl Into<String>, magnitude: f64, seed: u64) -> Self {
        DefectSpec {
            kind,
            target_layer: target_layer.into(),
            magnitude,
            seed,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.magnitude >= 0.0 && self.magnitude.is_finite()) {
            return Err(Error::InvalidArgument(format!(
                "defect magnitude must be >= 0, got {}",
                self.magnitude
            )));
        }
        if self.kind == DefectKind::WeightZero && self.magnitude > 1.0 {
            return Err(Error::InvalidArgument(format!(
                "zeroed fraction must be <= 1, got {}",
                self.magnitude
            )));
        }
        Ok(())
    }
}

/// `kind:layer:magnitude[:seed]`, e.g. `weight-zero:fc2:0.3`.
impl FromStr for DefectSpec {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        let parts: Vec<&str> = s.split(':').collect();
        if !(3..=4).contains(&parts.len()) {
            return Err(Error::InvalidArgument(format!(
                "defect `{s}` is not kind:layer:magnitude[:seed]"
            )));
        }
        let magnitude = parts[2]
            .parse()
            .map_err(|_| Error::InvalidArgument(format!("bad defect magnitude `{}`", parts[2])))?;
        let seed = match parts.get(3) {
            Some(v) => v
                .parse()
                .map_err(|_| Error::InvalidArgument(format!("bad defect seed `{v}`")))?,
            None => 0,
        };
        let spec = DefectSpec::new(parts[0].parse()?, parts[1], magnitude, seed);
        spec.validate()?;
        Ok(spec)
    }
}

/// Names of the weight (non-bias) tensors of a layer, in declaration order.
fn weight_tensors(model: &Model, layer: &str) -> Result<Vec<String>> {
    let spec = model.layer(layer)?;
    Ok(spec
        .params()
        .into_iter()
        .filter(|p| !matches!(p.role, ParamRole::Bias))
        .map(|p| p.name)
        .collect())
}

/// Returns a defective copy of `model`. Only the target layer's parameters
/// change. `data` is required for [`DefectKind::LabelFlipFinetune`].
pub fn inject_defect(model: &Model, spec: &DefectSpec, data: Option<&LabeledDataset>) -> Result<Model> {
    spec.validate()?;
    let names = weight_tensors(model, &spec.target_layer)?;
    let mut out = model.clone();
    match spec.kind {
        DefectKind::WeightNoise => {
            if spec.magnitude == 0.0 {
                return Ok(out);
            }
            let normal = Normal::new(0.0, spec.magnitude)
                .map_err(|e| Error::InvalidArgument(e.to_string()))?;
            let mut rng = rng::seeded(spec.seed);
            for name in &names {
                let t = out.weights.get_mut(name).expect("validated parameter");
                for v in t.data_mut() {
                    *v = (*v as f64 + normal.sample(&mut rng)) as f32;
                }
            }
        }
        DefectKind::WeightZero => {
            let sizes: Vec<usize> = names.iter().map(|n| out.weights[n].len()).collect();
            let total: usize = sizes.iter().sum();
            let k = (spec.magnitude * total as f64).floor() as usize;
            let picked = rng::sample_without_replacement(total, k, &mut rng::seeded(spec.seed));
            for flat in picked {
                let (mut t, mut i) = (0, flat);
                while i >= sizes[t] {
                    i -= sizes[t];
                    t += 1;
                }
                out.weights.get_mut(&names[t]).unwrap().data_mut()[i] = 0.0;
            }
        }
        DefectKind::LabelFlipFinetune => {
            let data = data.ok_or_else(|| {
                Error::InvalidArgument("label-flip-finetune needs a training dataset".into())
            })?;
            let classes = model.num_classes;
            if classes < 2 {
                return Err(Error::InvalidArgument("label flip needs >= 2 classes".into()));
            }
            let mut rng = rng::seeded(spec.seed);
            let a = rng.random_range(0..classes);
            let mut b = rng.random_range(0..classes - 1);
            if b >= a {
                b += 1;
            }
            let flipped = data.map_labels(|l| {
                if l == a {
                    b
                } else if l == b {
                    a
                } else {
                    l
                }
            });
            let layer_params: Vec<String> = model
                .layer(&spec.target_layer)?
                .params()
                .into_iter()
                .map(|p| p.name)
                .collect();
            out.frozen = out
                .weights
                .keys()
                .filter(|k| !layer_params.contains(k))
                .cloned()
                .collect();
            let epochs = spec.magnitude.floor() as usize;
            let opts = TrainOptions {
                epochs,
                batch_size: 64,
                lr: 0.05,
                momentum: 0.9,
                seed: rng::derive_seed(spec.seed, 1),
                ..TrainOptions::default()
            };
            train_epochs(&mut out, &flipped, &opts, &mut |_| {})?;
            out.frozen = model.frozen.clone();
            out.metadata.insert(
                "defect".into(),
                json!({
                    "kind": spec.kind.to_string(),
                    "target_layer": spec.target_layer,
                    "flipped_classes": [a, b],
                    "epochs": epochs,
                    "seed": spec.seed,
                }),
            );
        }
    }
    Ok(out)
}

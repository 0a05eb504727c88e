use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::data::Split;
use crate::error::{Error, Result};
use crate::nn::Sgd;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum RepairMethod {
    /// Localize suspicious weights and search new values for them.
    WeightPatch,
    /// Fine-tune on training data plus augmented misclassified inputs.
    FinetuneAugment,
    /// Attach a correction unit to the frozen model and train only the unit.
    ExtendCorrect,
}

impl RepairMethod {
    pub const ALL: [RepairMethod; 3] = [
        RepairMethod::WeightPatch,
        RepairMethod::FinetuneAugment,
        RepairMethod::ExtendCorrect,
    ];

    /// Tool-style names accepted on the command line.
    pub const ALIASES: [(&'static str, RepairMethod); 3] = [
        ("apricot", RepairMethod::WeightPatch),
        ("deeprepair", RepairMethod::FinetuneAugment),
        ("dl2", RepairMethod::ExtendCorrect),
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            RepairMethod::WeightPatch => "weight-patch",
            RepairMethod::FinetuneAugment => "finetune-augment",
            RepairMethod::ExtendCorrect => "extend-correct",
        }
    }
}

impl fmt::Display for RepairMethod {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for RepairMethod {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        let lower = s.to_ascii_lowercase();
        if let Some(m) = RepairMethod::ALL.iter().find(|m| m.as_str() == lower) {
            return Ok(*m);
        }
        RepairMethod::ALIASES
            .iter()
            .find(|(alias, _)| *alias == lower)
            .map(|(_, m)| *m)
            .ok_or_else(|| {
                Error::Config(format!(
                    "unknown repair method `{s}` (expected weight-patch|finetune-augment|extend-correct or apricot|deeprepair|dl2)"
                ))
            })
    }
}

/// Every tunable of the three repair families in one flat record. Each
/// method reads only the keys it needs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HyperParams {
    pub batch_size: usize,
    pub lr: f64,
    /// Weight of the constraint loss.
    pub lam: f64,
    /// Augmented samples appended to every fine-tuning batch.
    pub extra: usize,
    pub epoch: usize,
    /// Parameter of the symmetric Beta distribution mix ratios are drawn from.
    pub beta: f64,
    /// Probability that a mix is a cutmix rather than a blend.
    pub cutmix_prob: f64,
    /// Floor applied to drawn mix ratios.
    pub ratio: f64,
    pub momentum: f64,
    /// Gradient-norm ceiling for fine-tuning steps; 0 disables clipping.
    pub clip_norm: f64,
    /// Mixed samples generated per misclassified input.
    pub mixes: usize,
    pub swarm: usize,
    pub iters: usize,
    pub inertia: f64,
    pub c1: f64,
    pub c2: f64,
    pub top_k: usize,
    /// Layers searched by localization; empty means the last two
    /// parameterized layers.
    pub scope: Vec<String>,
    /// Failing inputs (and as many passing inputs) scored per fitness call.
    pub sample_size: usize,
    /// Bottleneck width of the correction unit.
    pub width: usize,
}

impl Default for HyperParams {
    fn default() -> Self {
        HyperParams {
            batch_size: 128,
            lr: 0.1,
            lam: 0.0,
            extra: 128,
            epoch: 60,
            beta: 1.0,
            cutmix_prob: 0.0,
            ratio: 0.9,
            momentum: 0.9,
            clip_norm: 0.0,
            mixes: 1,
            swarm: 32,
            iters: 100,
            inertia: 0.73,
            c1: 1.49,
            c2: 1.49,
            top_k: 32,
            scope: Vec::new(),
            sample_size: 256,
            width: 64,
        }
    }
}

fn parse<T: FromStr>(key: &str, value: &str) -> Result<T> {
    value
        .trim()
        .parse()
        .map_err(|_| Error::Config(format!("`{key}` does not accept `{value}`")))
}

impl HyperParams {
    pub const KEYS: [&'static str; 20] = [
        "batch_size",
        "lr",
        "lam",
        "extra",
        "epoch",
        "beta",
        "cutmix_prob",
        "ratio",
        "momentum",
        "clip_norm",
        "mixes",
        "swarm",
        "iters",
        "inertia",
        "c1",
        "c2",
        "top_k",
        "scope",
        "sample_size",
        "width",
    ];

    /// Sets one key from its textual value, checking the type.
    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        match key {
            "batch_size" => self.batch_size = parse(key, value)?,
            "lr" => self.lr = parse(key, value)?,
            "lam" => self.lam = parse(key, value)?,
            "extra" => self.extra = parse(key, value)?,
            "epoch" | "epochs" => self.epoch = parse(key, value)?,
            "beta" => self.beta = parse(key, value)?,
            "cutmix_prob" => self.cutmix_prob = parse(key, value)?,
            "ratio" => self.ratio = parse(key, value)?,
            "momentum" => self.momentum = parse(key, value)?,
            "clip_norm" => self.clip_norm = parse(key, value)?,
            "mixes" => self.mixes = parse(key, value)?,
            "swarm" => self.swarm = parse(key, value)?,
            "iters" => self.iters = parse(key, value)?,
            "inertia" | "w" => self.inertia = parse(key, value)?,
            "c1" => self.c1 = parse(key, value)?,
            "c2" => self.c2 = parse(key, value)?,
            "top_k" => self.top_k = parse(key, value)?,
            "scope" => {
                self.scope = value
                    .split(',')
                    .map(str::trim)
                    .filter(|s| !s.is_empty())
                    .map(String::from)
                    .collect()
            }
            "sample_size" => self.sample_size = parse(key, value)?,
            "width" => self.width = parse(key, value)?,
            other => {
                return Err(Error::Config(format!(
                    "unknown hyperparameter `{other}` (known: {})",
                    Self::KEYS.join(", ")
                )))
            }
        }
        Ok(())
    }

    /// Applies `key=value` overrides in order.
    pub fn apply_overrides<S: AsRef<str>>(&mut self, overrides: &[S]) -> Result<()> {
        for item in overrides {
            let item = item.as_ref();
            let (k, v) = item
                .split_once('=')
                .ok_or_else(|| Error::Config(format!("override `{item}` is not key=value")))?;
            self.set(k.trim(), v)?;
        }
        self.validate()
    }

    /// SGD configured from `lr`, `momentum` and `clip_norm`.
    pub(crate) fn optimizer(&self) -> Result<Sgd> {
        let opt = Sgd::new(self.lr, self.momentum)?;
        if self.clip_norm > 0.0 {
            opt.with_clip_norm(self.clip_norm)
        } else {
            Ok(opt)
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::Config(msg));
        if self.batch_size == 0 {
            return bad("batch_size must be >= 1".into());
        }
        if !(self.lr > 0.0 && self.lr.is_finite()) {
            return bad(format!("lr must be positive, got {}", self.lr));
        }
        if !(self.lam >= 0.0 && self.lam.is_finite()) {
            return bad(format!("lam must be >= 0, got {}", self.lam));
        }
        if !(self.beta > 0.0 && self.beta.is_finite()) {
            return bad(format!("beta must be positive, got {}", self.beta));
        }
        for (name, v) in [("cutmix_prob", self.cutmix_prob), ("ratio", self.ratio)] {
            if !(0.0..=1.0).contains(&v) {
                return bad(format!("{name} must lie in [0, 1], got {v}"));
            }
        }
        if !(0.0..1.0).contains(&self.momentum) {
            return bad(format!("momentum must lie in [0, 1), got {}", self.momentum));
        }
        if !(self.clip_norm >= 0.0 && self.clip_norm.is_finite()) {
            return bad(format!("clip_norm must be >= 0, got {}", self.clip_norm));
        }
        if self.swarm == 0 {
            return bad("swarm must be >= 1".into());
        }
        for (name, v) in [("inertia", self.inertia), ("c1", self.c1), ("c2", self.c2)] {
            if !(v >= 0.0 && v.is_finite()) {
                return bad(format!("{name} must be >= 0, got {v}"));
            }
        }
        if self.top_k == 0 || self.sample_size == 0 || self.width == 0 {
            return bad("top_k, sample_size and width must be >= 1".into());
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RepairConfig {
    pub method: RepairMethod,
    pub params: HyperParams,
    pub seed: u64,
    pub repetitions: usize,
    /// Split whose misclassified inputs drive the repair.
    pub failing_split: Split,
}

impl RepairConfig {
    pub fn new(method: RepairMethod, params: HyperParams, seed: u64) -> Self {
        RepairConfig {
            method,
            params,
            seed,
            repetitions: 1,
            failing_split: Split::Train,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.repetitions == 0 {
            return Err(Error::Config("repetitions must be >= 1".into()));
        }
        self.params.validate()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn aliases_resolve() {
        assert_eq!("apricot".parse::<RepairMethod>().unwrap(), RepairMethod::WeightPatch);
        assert_eq!("DeepRepair".parse::<RepairMethod>().unwrap(), RepairMethod::FinetuneAugment);
        assert_eq!("dl2".parse::<RepairMethod>().unwrap(), RepairMethod::ExtendCorrect);
        assert!("arachne".parse::<RepairMethod>().is_err());
    }

    #[test]
    fn overrides_typecheck() {
        let mut p = HyperParams::default();
        p.apply_overrides(&["epoch=2", "scope=fc1,fc2"]).unwrap();
        assert_eq!(p.epoch, 2);
        assert_eq!(p.scope, vec!["fc1", "fc2"]);
        assert_eq!(p.lr, 0.1);
        assert!(p.clone().apply_overrides(&["epoch=two"]).is_err());
        assert!(p.clone().apply_overrides(&["epoch"]).is_err());
        assert!(p.clone().apply_overrides(&["ratio=1.5"]).is_err());
        assert!(p.apply_overrides(&["nope=1"]).is_err());
    }
}

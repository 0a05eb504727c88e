//! Three repair families behind one contract: take a defective model and
//! data, return the repaired model with before/after metrics, fix rate and
//! retention.

mod augment;
mod config;
mod extend;
mod finetune;
mod localize;
mod pso;
mod weight_patch;

pub use augment::{build_augmented_set, draw_mix_ratio, AUGMENT_MAX_SEVERITY};
pub use config::{HyperParams, RepairConfig, RepairMethod};
pub use extend::{attach_correction_unit, repair_extend};
pub use finetune::repair_finetune;
pub use localize::{default_scope, localize_faulty_weights, ScoredCoord, WeightCoord};
pub use pso::{pso_optimize, pso_optimize_from, PsoParams, PsoResult};
pub use weight_patch::repair_weight_patch;

pub use crate::constraint::constraint_loss;

use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::constraint::ConstraintSpec;
use crate::data::{partition_indices, CorruptionSpec, LabeledDataset, Split};
use crate::error::{Error, Result};
use crate::eval::{evaluate, predict, MetricsReport};
use crate::monitor::ResourceMonitor;
use crate::store::Model;

/// Receives `(event, payload)` progress records. Payloads are deterministic
/// for a fixed seed.
pub type EventSink<'a> = &'a mut dyn FnMut(&str, Value);

/// Everything a repair run reads besides the model.
#[derive(Debug, Clone)]
pub struct RepairData {
    pub train: LabeledDataset,
    pub test: LabeledDataset,
    pub constraint: ConstraintSpec,
    /// Extra evaluation conditions for the before/after reports.
    pub corruptions: Vec<CorruptionSpec>,
}

impl RepairData {
    pub fn new(train: LabeledDataset, test: LabeledDataset) -> Result<Self> {
        if train.class_count() != test.class_count() || train.image_shape() != test.image_shape() {
            return Err(Error::InvalidArgument(format!(
                "train ({} classes, {:?}) and test ({} classes, {:?}) disagree",
                train.class_count(),
                train.image_shape(),
                test.class_count(),
                test.image_shape()
            )));
        }
        let constraint = ConstraintSpec::default_for(train.class_count());
        Ok(RepairData {
            train,
            test,
            constraint,
            corruptions: Vec::new(),
        })
    }

    pub fn split(&self, split: Split) -> &LabeledDataset {
        match split {
            Split::Train => &self.train,
            Split::Test => &self.test,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RepairOutcome {
    pub method: RepairMethod,
    #[serde(skip)]
    pub model: Option<Model>,
    /// Test-split metrics of the input model.
    pub before: MetricsReport,
    /// Test-split metrics of the repaired model, same configuration.
    pub after: MetricsReport,
    /// Share of test inputs misclassified before that are correct after
    /// (1.0 when nothing was misclassified).
    pub fix_rate: f64,
    /// Share of test inputs correct before that are still correct after
    /// (1.0 when nothing was correct).
    pub retention: f64,
    pub failing_count: usize,
    pub passing_count: usize,
    pub wall_clock_s: f64,
    pub peak_memory_bytes: Option<u64>,
    /// Where this run's events were written, when known.
    pub log_ref: Option<String>,
    pub config: RepairConfig,
}

impl RepairOutcome {
    pub fn model(&self) -> &Model {
        self.model.as_ref().expect("outcome carries its repaired model")
    }
}

/// `(fix rate, retention, failing count, passing count)` of `after` relative
/// to `before` on `data`.
pub fn fix_and_retention(before: &Model, after: &Model, data: &LabeledDataset) -> Result<(f64, f64, usize, usize)> {
    let (failing, passing) = partition_indices(before, data)?;
    let preds = predict(after, data)?;
    let labels = data.labels();
    let rate = |idx: &[usize]| {
        if idx.is_empty() {
            1.0
        } else {
            idx.iter().filter(|&&i| preds[i] == labels[i]).count() as f64 / idx.len() as f64
        }
    };
    Ok((rate(&failing), rate(&passing), failing.len(), passing.len()))
}

/// Runs `body` under a resource monitor between two identical evaluations.
fn run_method(
    model: &Model,
    data: &RepairData,
    config: &RepairConfig,
    events: EventSink,
    body: impl FnOnce(&mut dyn FnMut(&str, Value)) -> Result<Model>,
) -> Result<RepairOutcome> {
    config.validate()?;
    let monitor = ResourceMonitor::start();
    let before = evaluate(model, &data.test, &data.constraint, &data.corruptions)?;
    let repaired = body(events)?;
    let after = evaluate(&repaired, &data.test, &data.constraint, &data.corruptions)?;
    let (fix_rate, retention, failing_count, passing_count) = fix_and_retention(model, &repaired, &data.test)?;
    let usage = monitor.stop();
    Ok(RepairOutcome {
        method: config.method,
        model: Some(repaired),
        before,
        after,
        fix_rate,
        retention,
        failing_count,
        passing_count,
        wall_clock_s: usage.wall_clock_s,
        peak_memory_bytes: usage.peak_memory_bytes,
        log_ref: None,
        config: config.clone(),
    })
}

/// Dispatches on `config.method`.
pub fn repair(model: &Model, data: &RepairData, config: &RepairConfig, events: EventSink) -> Result<RepairOutcome> {
    match config.method {
        RepairMethod::WeightPatch => repair_weight_patch(model, data, config, events),
        RepairMethod::FinetuneAugment => repair_finetune(model, data, config, events),
        RepairMethod::ExtendCorrect => repair_extend(model, data, config, events),
    }
}

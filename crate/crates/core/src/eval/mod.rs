//! Accuracy, constraint accuracy and confusion accuracy, clean and under
//! blur corruptions.

mod metrics;
mod report;

pub use metrics::{
    accuracy_from_predictions, argmax, confusion_matrix, constraint_accuracy_rows, macro_precision,
    per_class_precision, MetricTriple,
};
pub use report::{format_delta, format_percent, CorruptionMetrics, MetricsReport, CONFUSION_AGGREGATION};

use serde_json::json;
use sha2::{Digest, Sha256};

pub use crate::constraint::ConstraintSpec;
use crate::data::{corrupt_dataset, CorruptionSpec, LabeledDataset};
use crate::error::{Error, Result};
use crate::nn::forward_chunked;
use crate::store::{model_to_bytes, Model};
use crate::tensor::Tensor;

const CHUNK: usize = 256;

fn check_compatible(model: &Model, dataset: &LabeledDataset) -> Result<()> {
    if model.num_classes != dataset.class_count() {
        return Err(Error::InvalidArgument(format!(
            "model has {} classes, dataset {}",
            model.num_classes,
            dataset.class_count()
        )));
    }
    Ok(())
}

pub fn logits(model: &Model, dataset: &LabeledDataset) -> Result<Tensor> {
    forward_chunked(model, dataset.images(), CHUNK)
}

/// Argmax class per sample (ties toward the lowest index).
pub fn predict(model: &Model, dataset: &LabeledDataset) -> Result<Vec<usize>> {
    let l = logits(model, dataset)?;
    Ok(l.data().chunks(model.num_classes).map(argmax).collect())
}

pub fn accuracy(model: &Model, dataset: &LabeledDataset) -> Result<f64> {
    if dataset.is_empty() {
        return Err(Error::EmptyDataset);
    }
    check_compatible(model, dataset)?;
    accuracy_from_predictions(&predict(model, dataset)?, dataset.labels())
}

pub fn confusion_accuracy(model: &Model, dataset: &LabeledDataset) -> Result<f64> {
    if dataset.is_empty() {
        return Err(Error::EmptyDataset);
    }
    check_compatible(model, dataset)?;
    let preds = predict(model, dataset)?;
    macro_precision(&confusion_matrix(&preds, dataset.labels(), model.num_classes))
}

pub fn constraint_accuracy(model: &Model, dataset: &LabeledDataset, spec: &ConstraintSpec) -> Result<f64> {
    check_compatible(model, dataset)?;
    spec.validate(model.num_classes)?;
    if dataset.is_empty() {
        return Err(Error::EmptyDataset);
    }
    let l = logits(model, dataset)?;
    let probs = crate::nn::softmax_rows(l.data(), model.num_classes);
    constraint_accuracy_rows(&probs, model.num_classes, spec)
}

/// Constraint accuracy of an explicit `[n, classes]` probability tensor.
pub fn constraint_accuracy_from_probs(probs: &Tensor, spec: &ConstraintSpec) -> Result<f64> {
    let classes = probs.shape().get(1).copied().unwrap_or(0);
    let p: Vec<f64> = probs.data().iter().map(|v| *v as f64).collect();
    constraint_accuracy_rows(&p, classes, spec)
}

/// Short content hash of a model's serialized form.
pub fn model_id(model: &Model) -> Result<String> {
    let bytes = model_to_bytes(model)?;
    Ok(hex16(&Sha256::digest(&bytes)))
}

fn hex16(digest: &[u8]) -> String {
    digest[..8].iter().map(|b| format!("{b:02x}")).collect()
}

/// Clean metrics plus one metric triple per requested corruption.
pub fn evaluate(
    model: &Model,
    dataset: &LabeledDataset,
    spec: &ConstraintSpec,
    corruptions: &[CorruptionSpec],
) -> Result<MetricsReport> {
    check_compatible(model, dataset)?;
    spec.validate(model.num_classes)?;
    if dataset.is_empty() {
        return Err(Error::EmptyDataset);
    }
    let classes = model.num_classes;
    let clean_logits = logits(model, dataset)?;
    let (clean, per_class) = metrics::triple_from_logits(clean_logits.data(), dataset.labels(), classes, spec)?;
    let mut table = Vec::with_capacity(corruptions.len());
    for c in corruptions {
        let metrics = if c.severity == 0 {
            clean
        } else {
            let data = corrupt_dataset(dataset, c)?;
            let l = logits(model, &data)?;
            metrics::triple_from_logits(l.data(), data.labels(), classes, spec)?.0
        };
        table.push(CorruptionMetrics {
            kind: c.kind,
            severity: c.severity,
            metrics,
        });
    }
    let config = json!({
        "constraint": spec,
        "corruptions": corruptions,
        "samples": dataset.len(),
        "split": dataset.split(),
    });
    Ok(MetricsReport {
        accuracy: clean.acc,
        constraint_accuracy: clean.const_acc,
        confusion_accuracy: clean.conf_acc,
        per_class_precision: per_class,
        corruptions: table,
        sample_count: dataset.len(),
        model_id: model_id(model)?,
        config_hash: hex16(&Sha256::digest(serde_json::to_vec(&config)?)),
        confusion_aggregation: CONFUSION_AGGREGATION.to_string(),
    })
}

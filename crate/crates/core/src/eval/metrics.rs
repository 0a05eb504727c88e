use crate::constraint::ConstraintSpec;
use crate::error::{Error, Result};
use crate::nn::softmax_rows;

/// Index of the largest value; ties go to the lowest index.
pub fn argmax(row: &[f32]) -> usize {
    let mut best = 0;
    for (i, v) in row.iter().enumerate() {
        if *v > row[best] {
            best = i;
        }
    }
    best
}

pub fn accuracy_from_predictions(preds: &[usize], labels: &[usize]) -> Result<f64> {
    if labels.is_empty() {
        return Err(Error::EmptyDataset);
    }
    let correct = preds.iter().zip(labels).filter(|(p, l)| p == l).count();
    Ok(correct as f64 / labels.len() as f64)
}

/// `matrix[true][predicted]` counts.
pub fn confusion_matrix(preds: &[usize], labels: &[usize], classes: usize) -> Vec<Vec<usize>> {
    let mut m = vec![vec![0; classes]; classes];
    for (&p, &l) in preds.iter().zip(labels) {
        m[l][p] += 1;
    }
    m
}

/// Per-class precision `TP / (TP + FP)`; `None` for classes never predicted.
pub fn per_class_precision(matrix: &[Vec<usize>]) -> Vec<Option<f64>> {
    let classes = matrix.len();
    (0..classes)
        .map(|c| {
            let predicted: usize = matrix.iter().map(|row| row[c]).sum();
            (predicted > 0).then(|| matrix[c][c] as f64 / predicted as f64)
        })
        .collect()
}

/// Macro mean of per-class precision over classes with at least one
/// predicted positive.
pub fn macro_precision(matrix: &[Vec<usize>]) -> Result<f64> {
    let defined: Vec<f64> = per_class_precision(matrix).into_iter().flatten().collect();
    if defined.is_empty() {
        return Err(Error::InvalidArgument("no class was ever predicted".into()));
    }
    Ok(defined.iter().sum::<f64>() / defined.len() as f64)
}

/// Fraction of probability rows (`[n, classes]`, row-major) satisfying the
/// group constraint.
pub fn constraint_accuracy_rows(probs: &[f64], classes: usize, spec: &ConstraintSpec) -> Result<f64> {
    spec.validate(classes)?;
    let n = probs.len() / classes;
    if n == 0 {
        return Err(Error::EmptyDataset);
    }
    let ok = probs.chunks(classes).filter(|row| spec.satisfied(row)).count();
    Ok(ok as f64 / n as f64)
}

/// The three headline metrics.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct MetricTriple {
    pub acc: f64,
    pub const_acc: f64,
    pub conf_acc: f64,
}

pub(crate) fn triple_from_logits(
    logits: &[f32],
    labels: &[usize],
    classes: usize,
    spec: &ConstraintSpec,
) -> Result<(MetricTriple, Vec<Option<f64>>)> {
    let preds: Vec<usize> = logits.chunks(classes).map(argmax).collect();
    let acc = accuracy_from_predictions(&preds, labels)?;
    let cm = confusion_matrix(&preds, labels, classes);
    let conf_acc = macro_precision(&cm)?;
    let probs = softmax_rows(logits, classes);
    let const_acc = constraint_accuracy_rows(&probs, classes, spec)?;
    Ok((
        MetricTriple {
            acc,
            const_acc,
            conf_acc,
        },
        per_class_precision(&cm),
    ))
}

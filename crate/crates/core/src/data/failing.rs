use super::LabeledDataset;
use crate::error::{Error, Result};
use crate::eval::predict;
use crate::store::Model;

/// Indices of misclassified and correctly classified samples, each in
/// dataset order.
pub fn partition_indices(model: &Model, dataset: &LabeledDataset) -> Result<(Vec<usize>, Vec<usize>)> {
    if model.num_classes != dataset.class_count() {
        return Err(Error::InvalidArgument(format!(
            "model has {} classes, dataset {}",
            model.num_classes,
            dataset.class_count()
        )));
    }
    let preds = predict(model, dataset)?;
    let (mut failing, mut passing) = (Vec::new(), Vec::new());
    for (i, (p, l)) in preds.iter().zip(dataset.labels()).enumerate() {
        if p == l {
            passing.push(i);
        } else {
            failing.push(i);
        }
    }
    Ok((failing, passing))
}

/// Splits `dataset` into `(failing, passing)` by whether the model's argmax
/// matches the label.
pub fn extract_failing_set(model: &Model, dataset: &LabeledDataset) -> Result<(LabeledDataset, LabeledDataset)> {
    let (f, p) = partition_indices(model, dataset)?;
    Ok((dataset.subset(&f), dataset.subset(&p)))
}

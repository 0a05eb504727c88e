use crate::constraint::{self, ConstraintSpec};
use crate::error::{Error, Result};
use crate::tensor::Tensor;

/// Cross-entropy, optionally plus `lam` times the constraint loss.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct LossSpec {
    pub lam: f64,
    pub constraint: Option<ConstraintSpec>,
}

impl LossSpec {
    pub fn cross_entropy() -> Self {
        LossSpec::default()
    }

    pub fn with_constraint(spec: ConstraintSpec, lam: f64) -> Self {
        LossSpec {
            lam,
            constraint: Some(spec),
        }
    }

    fn active_constraint(&self) -> Option<&ConstraintSpec> {
        if self.lam == 0.0 {
            None
        } else {
            self.constraint.as_ref()
        }
    }
}

/// Row-wise softmax in `f64` with max subtraction.
pub fn softmax_rows(logits: &[f32], classes: usize) -> Vec<f64> {
    let mut out = Vec::with_capacity(logits.len());
    for row in logits.chunks(classes) {
        let m = row.iter().fold(f32::NEG_INFINITY, |a, &b| a.max(b)) as f64;
        let start = out.len();
        let mut sum = 0.0;
        for &z in row {
            let e = (z as f64 - m).exp();
            sum += e;
            out.push(e);
        }
        for v in &mut out[start..] {
            *v /= sum;
        }
    }
    out
}

/// Softmax probabilities as an `[n, classes]` tensor.
pub fn softmax(logits: &Tensor) -> Tensor {
    let classes = logits.shape().last().copied().unwrap_or(0);
    let p = softmax_rows(logits.data(), classes.max(1));
    Tensor::new(logits.shape().to_vec(), p.into_iter().map(|v| v as f32).collect())
        .expect("softmax preserves shape")
}

/// Mean loss over the batch and its gradient w.r.t. the logits.
pub(crate) fn loss_and_dlogits(
    logits: &Tensor,
    labels: &[usize],
    spec: &LossSpec,
) -> Result<(f64, Vec<f32>)> {
    let n = logits.rows();
    let classes = logits.row_len();
    if labels.len() != n {
        return Err(Error::InvalidArgument(format!(
            "{} labels for a batch of {n}",
            labels.len()
        )));
    }
    if let Some(&label) = labels.iter().find(|&&l| l >= classes) {
        return Err(Error::LabelOutOfRange { label, classes });
    }
    if n == 0 {
        return Err(Error::NonFiniteLoss);
    }
    let probs = softmax_rows(logits.data(), classes);
    let mut loss = 0.0;
    let mut d: Vec<f64> = probs.clone();
    for (s, &label) in labels.iter().enumerate() {
        loss -= probs[s * classes + label].ln();
        d[s * classes + label] -= 1.0;
    }
    loss /= n as f64;
    d.iter_mut().for_each(|v| *v /= n as f64);

    if let Some(cs) = spec.active_constraint() {
        cs.validate(classes)?;
        let (cl, dprobs) = constraint::loss_and_grad(&probs, classes, cs);
        loss += spec.lam * cl;
        for s in 0..n {
            let p = &probs[s * classes..(s + 1) * classes];
            let g = &dprobs[s * classes..(s + 1) * classes];
            let dot: f64 = p.iter().zip(g).map(|(a, b)| a * b).sum();
            for k in 0..classes {
                d[s * classes + k] += spec.lam * p[k] * (g[k] - dot);
            }
        }
    }
    if !loss.is_finite() {
        return Err(Error::NonFiniteLoss);
    }
    Ok((loss, d.into_iter().map(|v| v as f32).collect()))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn uniform_logits_give_ln_classes() {
        let logits = Tensor::zeros(&[3, 10]);
        let (loss, _) = loss_and_dlogits(&logits, &[0, 4, 9], &LossSpec::cross_entropy()).unwrap();
        assert!((loss - 10f64.ln()).abs() < 1e-12);
        assert!((loss - 2.302585).abs() < 1e-6);
    }

    #[test]
    fn softmax_rows_sum_to_one() {
        let p = softmax_rows(&[1.0, 2.0, 3.0, -50.0, 0.0, 50.0], 3);
        for row in p.chunks(3) {
            assert!((row.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn out_of_range_label() {
        let logits = Tensor::zeros(&[1, 3]);
        assert!(matches!(
            loss_and_dlogits(&logits, &[3], &LossSpec::cross_entropy()),
            Err(Error::LabelOutOfRange { label: 3, classes: 3 })
        ));
    }

    #[test]
    fn zero_lambda_is_plain_cross_entropy() {
        let logits = Tensor::new(vec![2, 4], vec![0.3, -1.0, 2.0, 0.1, 1.0, 1.0, -0.5, 0.0]).unwrap();
        let plain = loss_and_dlogits(&logits, &[2, 0], &LossSpec::cross_entropy()).unwrap();
        let zero = loss_and_dlogits(
            &logits,
            &[2, 0],
            &LossSpec::with_constraint(ConstraintSpec::default_for(4), 0.0),
        )
        .unwrap();
        assert_eq!(plain.0.to_bits(), zero.0.to_bits());
        assert_eq!(plain.1, zero.1);
    }
}

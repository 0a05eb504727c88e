//! Class-group constraints: every group's total probability must sit near 0
//! or near 1.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::tensor::Tensor;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConstraintSpec {
    pub groups: Vec<Vec<usize>>,
    pub epsilon: f64,
}

impl ConstraintSpec {
    pub fn new(groups: Vec<Vec<usize>>, epsilon: f64) -> Self {
        ConstraintSpec { groups, epsilon }
    }

    /// Two groups splitting the classes in half (`{0..4}, {5..9}` for ten
    /// classes), epsilon 0.05.
    pub fn default_for(class_count: usize) -> Self {
        let half = class_count / 2;
        ConstraintSpec {
            groups: vec![(0..half).collect(), (half..class_count).collect()],
            epsilon: 0.05,
        }
    }

    pub fn validate(&self, class_count: usize) -> Result<()> {
        if self.groups.is_empty() {
            return Err(Error::InvalidConstraint("no groups".into()));
        }
        if let Some(i) = self.groups.iter().position(|g| g.is_empty()) {
            return Err(Error::InvalidConstraint(format!("group {i} is empty")));
        }
        if let Some(c) = self.groups.iter().flatten().find(|&&c| c >= class_count) {
            return Err(Error::InvalidConstraint(format!(
                "class {c} out of range for {class_count} classes"
            )));
        }
        if !(self.epsilon > 0.0 && self.epsilon < 0.5) {
            return Err(Error::InvalidConstraint(format!(
                "epsilon {} outside (0, 0.5)",
                self.epsilon
            )));
        }
        Ok(())
    }

    pub fn group_mass(&self, probs: &[f64], group: usize) -> f64 {
        self.groups[group].iter().map(|&c| probs[c]).sum()
    }

    pub fn satisfied(&self, probs: &[f64]) -> bool {
        (0..self.groups.len()).all(|g| {
            let s = self.group_mass(probs, g);
            s >= 1.0 - self.epsilon || s <= self.epsilon
        })
    }

    /// Distance of a group mass from the nearer feasible region.
    pub fn violation(&self, mass: f64) -> f64 {
        let eps = self.epsilon;
        ((1.0 - eps) - mass).max(0.0).min((mass - eps).max(0.0))
    }

    /// d violation / d mass, with 0 at the kinks.
    fn violation_slope(&self, mass: f64) -> f64 {
        let eps = self.epsilon;
        let hi = (1.0 - eps) - mass;
        let lo = mass - eps;
        if hi <= 0.0 || lo <= 0.0 || (hi - lo).abs() <= 1e-12 {
            0.0
        } else if hi < lo {
            -1.0
        } else {
            1.0
        }
    }
}

/// Mean constraint violation over samples and groups, plus its gradient
/// w.r.t. each probability (same layout as `probs`).
pub(crate) fn loss_and_grad(
    probs: &[f64],
    classes: usize,
    spec: &ConstraintSpec,
) -> (f64, Vec<f64>) {
    let n = probs.len() / classes;
    let denom = (n * spec.groups.len()) as f64;
    let mut total = 0.0;
    let mut grad = vec![0.0; probs.len()];
    if n == 0 {
        return (0.0, grad);
    }
    for s in 0..n {
        let row = &probs[s * classes..(s + 1) * classes];
        for (g, group) in spec.groups.iter().enumerate() {
            let mass = spec.group_mass(row, g);
            total += spec.violation(mass);
            let slope = spec.violation_slope(mass) / denom;
            if slope != 0.0 {
                for &c in group {
                    grad[s * classes + c] += slope;
                }
            }
        }
    }
    (total / denom, grad)
}

/// Mean over samples and groups of `min(max(0, (1-eps) - s), max(0, s - eps))`
/// where `s` is a group's probability mass. `probs` is `[n, classes]`.
pub fn constraint_loss(probs: &Tensor, spec: &ConstraintSpec) -> Result<f64> {
    if probs.shape().len() != 2 {
        return Err(Error::InvalidArgument(format!(
            "probabilities must be [n, classes], got {:?}",
            probs.shape()
        )));
    }
    let classes = probs.shape()[1];
    spec.validate(classes)?;
    let p: Vec<f64> = probs.data().iter().map(|v| *v as f64).collect();
    Ok(loss_and_grad(&p, classes, spec).0)
}

use std::collections::BTreeMap;

use super::Gradients;
use crate::error::{Error, Result};
use crate::tensor::Tensor;

/// SGD with heavy-ball momentum: `v <- m*v + g; p <- p - lr*v`.
#[derive(Debug, Clone)]
pub struct Sgd {
    lr: f64,
    momentum: f64,
    clip_norm: Option<f64>,
    velocity: BTreeMap<String, Vec<f64>>,
}

impl Sgd {
    pub fn new(lr: f64, momentum: f64) -> Result<Self> {
        if !(lr > 0.0 && lr.is_finite()) {
            return Err(Error::InvalidArgument(format!("learning rate must be > 0, got {lr}")));
        }
        if !(0.0..1.0).contains(&momentum) {
            return Err(Error::InvalidArgument(format!(
                "momentum must be in [0, 1), got {momentum}"
            )));
        }
        Ok(Sgd {
            lr,
            momentum,
            clip_norm: None,
            velocity: BTreeMap::new(),
        })
    }

    /// Rescales each step's gradients so their joint L2 norm is at most
    /// `max_norm`.
    pub fn with_clip_norm(mut self, max_norm: f64) -> Result<Self> {
        if !(max_norm > 0.0 && max_norm.is_finite()) {
            return Err(Error::InvalidArgument(format!("clip norm must be > 0, got {max_norm}")));
        }
        self.clip_norm = Some(max_norm);
        Ok(self)
    }

    pub fn lr(&self) -> f64 {
        self.lr
    }

    pub fn step(&mut self, params: &mut BTreeMap<String, Tensor>, grads: &Gradients) -> Result<()> {
        let scale = match self.clip_norm {
            Some(max) => {
                let norm = grads
                    .iter()
                    .flat_map(|(_, g)| g.data())
                    .map(|v| (*v as f64).powi(2))
                    .sum::<f64>()
                    .sqrt();
                if norm > max {
                    max / norm
                } else {
                    1.0
                }
            }
            None => 1.0,
        };
        for (name, g) in grads.iter() {
            let p = params
                .get_mut(name)
                .ok_or_else(|| Error::InvalidArgument(format!("no parameter `{name}`")))?;
            if p.shape() != g.shape() {
                return Err(Error::ShapeMismatch {
                    layer: name.clone(),
                    expected: p.shape().to_vec(),
                    actual: g.shape().to_vec(),
                });
            }
            if self.momentum == 0.0 {
                for (w, d) in p.data_mut().iter_mut().zip(g.data()) {
                    *w = (*w as f64 - self.lr * scale * *d as f64) as f32;
                }
                continue;
            }
            let v = self
                .velocity
                .entry(name.clone())
                .or_insert_with(|| vec![0.0; g.len()]);
            for ((w, d), vel) in p.data_mut().iter_mut().zip(g.data()).zip(v.iter_mut()) {
                *vel = self.momentum * *vel + scale * *d as f64;
                *w = (*w as f64 - self.lr * *vel) as f32;
            }
        }
        Ok(())
    }
}

use std::collections::{BTreeMap, BTreeSet};

use rand::Rng;
use serde_json::Value;

use crate::error::{Error, Result};
use crate::nn::{LayerSpec, ParamRole};
use crate::rng;
use crate::tensor::Tensor;

/// A sequential classifier: architecture, named weights and metadata.
#[derive(Debug, Clone, PartialEq)]
pub struct Model {
    pub arch_name: String,
    pub depth: usize,
    /// `[channels, height, width]`.
    pub input_shape: Vec<usize>,
    pub num_classes: usize,
    pub layers: Vec<LayerSpec>,
    pub weights: BTreeMap<String, Tensor>,
    /// Parameters excluded from gradient updates.
    pub frozen: BTreeSet<String>,
    pub metadata: BTreeMap<String, Value>,
}

impl Model {
    /// Builds a model with Kaiming-uniform weights (bound `sqrt(6 / fan_in)`)
    /// and zero biases, drawn in layer order from `seed`.
    pub fn new(
        arch_name: impl Into<String>,
        depth: usize,
        input_shape: [usize; 3],
        num_classes: usize,
        layers: Vec<LayerSpec>,
        seed: u64,
    ) -> Result<Self> {
        let mut model = Model {
            arch_name: arch_name.into(),
            depth,
            input_shape: input_shape.to_vec(),
            num_classes,
            layers,
            weights: BTreeMap::new(),
            frozen: BTreeSet::new(),
            metadata: BTreeMap::new(),
        };
        let mut rng = rng::seeded(seed);
        for layer in &model.layers {
            for p in layer.params() {
                let t = init_param(&p.shape, p.role, &mut rng);
                model.weights.insert(p.name, t);
            }
        }
        model.validate()?;
        Ok(model)
    }

    /// Per-sample input shape of every layer, followed by the output shape.
    pub fn layer_shapes(&self) -> Result<Vec<Vec<usize>>> {
        let mut shapes = vec![self.input_shape.clone()];
        for layer in &self.layers {
            let next = layer.output_shape(shapes.last().unwrap())?;
            shapes.push(next);
        }
        Ok(shapes)
    }

    pub fn validate(&self) -> Result<()> {
        if self.input_shape.len() != 3 || self.input_shape.contains(&0) {
            return Err(Error::InvalidModel(format!(
                "input shape must be three positive dims, got {:?}",
                self.input_shape
            )));
        }
        let mut names = BTreeSet::new();
        for l in &self.layers {
            if !names.insert(l.name.as_str()) {
                return Err(Error::InvalidModel(format!("duplicate layer name `{}`", l.name)));
            }
        }
        let shapes = self.layer_shapes()?;
        if shapes.last().unwrap() != &[self.num_classes] {
            return Err(Error::InvalidModel(format!(
                "final output {:?} does not match {} classes",
                shapes.last().unwrap(),
                self.num_classes
            )));
        }
        let mut expected = BTreeMap::new();
        for l in &self.layers {
            for p in l.params() {
                expected.insert(p.name, p.shape);
            }
        }
        if expected.len() != self.weights.len() {
            return Err(Error::InvalidModel(format!(
                "{} weight tensors present, layers declare {}",
                self.weights.len(),
                expected.len()
            )));
        }
        for (name, shape) in &expected {
            match self.weights.get(name) {
                None => return Err(Error::InvalidModel(format!("missing weight `{name}`"))),
                Some(t) if t.shape() != shape.as_slice() => {
                    return Err(Error::InvalidModel(format!(
                        "weight `{name}` has shape {:?}, expected {shape:?}",
                        t.shape()
                    )))
                }
                _ => {}
            }
        }
        if let Some(f) = self.frozen.iter().find(|f| !self.weights.contains_key(*f)) {
            return Err(Error::InvalidModel(format!("frozen entry `{f}` is not a parameter")));
        }
        Ok(())
    }

    pub fn parameter_count(&self) -> usize {
        self.weights.values().map(Tensor::len).sum()
    }

    pub fn trainable_names(&self) -> Vec<String> {
        self.weights
            .keys()
            .filter(|k| !self.frozen.contains(*k))
            .cloned()
            .collect()
    }

    pub fn layer_index(&self, name: &str) -> Option<usize> {
        self.layers.iter().position(|l| l.name == name)
    }

    pub fn layer(&self, name: &str) -> Result<&LayerSpec> {
        self.layers
            .iter()
            .find(|l| l.name == name)
            .ok_or_else(|| Error::UnknownLayer(name.to_string()))
    }

    /// Indices of layers that own parameters.
    pub fn parameterized_layers(&self) -> Vec<usize> {
        (0..self.layers.len())
            .filter(|&i| self.layers[i].is_parameterized())
            .collect()
    }

    pub fn freeze_all(&mut self) {
        self.frozen = self.weights.keys().cloned().collect();
    }
}

pub(crate) fn init_param(shape: &[usize], role: ParamRole, rng: &mut rng::Rng64) -> Tensor {
    let mut t = Tensor::zeros(shape);
    if let ParamRole::Weight { fan_in } = role {
        let bound = (6.0 / fan_in as f64).sqrt();
        for v in t.data_mut() {
            *v = rng.random_range(-bound..bound) as f32;
        }
    }
    t
}

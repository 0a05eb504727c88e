use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::tensor::Tensor;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Split {
    Train,
    Test,
}

impl fmt::Display for Split {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Split::Train => "train",
            Split::Test => "test",
        })
    }
}

impl FromStr for Split {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "train" => Ok(Split::Train),
            "test" => Ok(Split::Test),
            other => Err(Error::InvalidArgument(format!("unknown split `{other}`"))),
        }
    }
}

/// Images `[n, c, h, w]` in `[0, 1]` with integer labels.
#[derive(Debug, Clone, PartialEq)]
pub struct LabeledDataset {
    images: Tensor,
    labels: Vec<usize>,
    split: Split,
    class_count: usize,
}

impl LabeledDataset {
    pub fn new(images: Tensor, labels: Vec<usize>, split: Split, class_count: usize) -> Result<Self> {
        if images.shape().len() != 4 {
            return Err(Error::InvalidArgument(format!(
                "images must be [n, c, h, w], got {:?}",
                images.shape()
            )));
        }
        if images.rows() != labels.len() {
            return Err(Error::InvalidArgument(format!(
                "{} images but {} labels",
                images.rows(),
                labels.len()
            )));
        }
        if let Some(&label) = labels.iter().find(|&&l| l >= class_count) {
            return Err(Error::LabelOutOfRange {
                label,
                classes: class_count,
            });
        }
        if images.data().iter().any(|v| !(0.0..=1.0).contains(v)) {
            return Err(Error::InvalidArgument("pixel values must lie in [0, 1]".into()));
        }
        Ok(LabeledDataset {
            images,
            labels,
            split,
            class_count,
        })
    }

    pub fn empty(image_shape: [usize; 3], split: Split, class_count: usize) -> Self {
        let [c, h, w] = image_shape;
        LabeledDataset {
            images: Tensor::zeros(&[0, c, h, w]),
            labels: Vec::new(),
            split,
            class_count,
        }
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn images(&self) -> &Tensor {
        &self.images
    }

    pub fn labels(&self) -> &[usize] {
        &self.labels
    }

    pub fn split(&self) -> Split {
        self.split
    }

    pub fn class_count(&self) -> usize {
        self.class_count
    }

    pub fn image_shape(&self) -> [usize; 3] {
        let s = self.images.shape();
        [s[1], s[2], s[3]]
    }

    pub fn image(&self, i: usize) -> &[f32] {
        self.images.row(i)
    }

    /// One sample as a `[c, h, w]` tensor.
    pub fn image_tensor(&self, i: usize) -> Tensor {
        Tensor::new(self.image_shape().to_vec(), self.image(i).to_vec()).expect("row matches shape")
    }

    pub fn batch(&self, indices: &[usize]) -> (Tensor, Vec<usize>) {
        (
            self.images.select_rows(indices),
            indices.iter().map(|&i| self.labels[i]).collect(),
        )
    }

    pub fn subset(&self, indices: &[usize]) -> LabeledDataset {
        let (images, labels) = self.batch(indices);
        LabeledDataset {
            images,
            labels,
            split: self.split,
            class_count: self.class_count,
        }
    }

    pub fn with_split(mut self, split: Split) -> Self {
        self.split = split;
        self
    }

    /// Raises the class count, e.g. when a subset misses the top classes.
    pub fn with_class_count(mut self, class_count: usize) -> Result<Self> {
        if let Some(&label) = self.labels.iter().find(|&&l| l >= class_count) {
            return Err(Error::LabelOutOfRange {
                label,
                classes: class_count,
            });
        }
        self.class_count = class_count;
        Ok(self)
    }

    pub fn map_labels(&self, f: impl Fn(usize) -> usize) -> LabeledDataset {
        LabeledDataset {
            images: self.images.clone(),
            labels: self.labels.iter().map(|&l| f(l)).collect(),
            split: self.split,
            class_count: self.class_count,
        }
    }

    pub fn concat(&self, other: &LabeledDataset) -> Result<LabeledDataset> {
        if self.image_shape() != other.image_shape() || self.class_count != other.class_count {
            return Err(Error::InvalidArgument(
                "datasets differ in image shape or class count".into(),
            ));
        }
        let images = Tensor::concat_rows(&[&self.images, &other.images])?;
        let mut labels = self.labels.clone();
        labels.extend_from_slice(&other.labels);
        Ok(LabeledDataset {
            images,
            labels,
            split: self.split,
            class_count: self.class_count,
        })
    }

    /// Builds a dataset from per-sample images (each `c*h*w` long).
    pub fn from_samples(
        image_shape: [usize; 3],
        samples: Vec<(Vec<f32>, usize)>,
        split: Split,
        class_count: usize,
    ) -> Result<Self> {
        let [c, h, w] = image_shape;
        let n = samples.len();
        let mut data = Vec::with_capacity(n * c * h * w);
        let mut labels = Vec::with_capacity(n);
        for (img, label) in samples {
            data.extend_from_slice(&img);
            labels.push(label);
        }
        LabeledDataset::new(Tensor::new(vec![n, c, h, w], data)?, labels, split, class_count)
    }
}

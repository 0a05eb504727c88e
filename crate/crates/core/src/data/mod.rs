//! Datasets: IDX and native loaders, the synthetic corpus, blur corruptions,
//! sample mixing and failing/passing partitions.

mod corrupt;
mod dataset;
mod failing;
pub mod idx;
mod mix;
mod native;
mod synthetic;

pub use corrupt::{corrupt, BlurKind, CorruptionSpec, MAX_SEVERITY};
pub use dataset::{LabeledDataset, Split};
pub use failing::{extract_failing_set, partition_indices};
pub use idx::load_idx;
pub use mix::{cutmix_patch, mix_samples, MixMode};
pub use native::{dataset_from_bytes, dataset_to_bytes, load_dataset, save_dataset};
pub use synthetic::{class_templates, make_synthetic};

use rayon::prelude::*;

use crate::error::Result;
use crate::rng;
use crate::tensor::Tensor;

/// Corrupts every image; image `i` uses glass seed `derive(spec.seed, i)`.
pub fn corrupt_dataset(data: &LabeledDataset, spec: &CorruptionSpec) -> Result<LabeledDataset> {
    if spec.severity == 0 {
        spec_check(spec)?;
        return Ok(data.clone());
    }
    let shape = data.image_shape();
    let images = (0..data.len())
        .into_par_iter()
        .map(|i| {
            let s = CorruptionSpec {
                seed: rng::derive_seed(spec.seed, i as u64),
                ..*spec
            };
            Ok(corrupt(&data.image_tensor(i), &s)?.into_data())
        })
        .collect::<Result<Vec<_>>>()?;
    let mut dims = vec![data.len()];
    dims.extend(shape);
    LabeledDataset::new(
        Tensor::new(dims, images.concat())?,
        data.labels().to_vec(),
        data.split(),
        data.class_count(),
    )
}

fn spec_check(spec: &CorruptionSpec) -> Result<()> {
    corrupt(&Tensor::zeros(&[1, 1, 1]), spec).map(|_| ())
}

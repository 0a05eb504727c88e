//! Counterexample-guided augmentation around misclassified inputs.

use rand::Rng;
use rand_distr::{Beta, Distribution};

use super::HyperParams;
use crate::data::{corrupt, mix_samples, BlurKind, CorruptionSpec, LabeledDataset, MixMode};
use crate::error::{Error, Result};
use crate::rng;

/// Highest blur severity used for augmentation.
pub const AUGMENT_MAX_SEVERITY: u8 = 3;

/// `max(floor, Beta(beta, beta))`.
pub fn draw_mix_ratio(beta: f64, floor: f64, rng: &mut rng::Rng64) -> Result<f64> {
    let dist = Beta::new(beta, beta)
        .map_err(|e| Error::InvalidArgument(format!("beta {beta}: {e}")))?;
    Ok(dist.sample(rng).max(floor))
}

/// For every failing sample: the sample itself, one blur per kind at a
/// seeded severity in `1..=3`, and `params.mixes` mixes with seeded training
/// partners (cutmix with probability `cutmix_prob`, otherwise a blend; the
/// ratio is `max(ratio, Beta(beta, beta))`).
pub fn build_augmented_set(
    failing: &LabeledDataset,
    train: &LabeledDataset,
    params: &HyperParams,
    seed: u64,
) -> Result<LabeledDataset> {
    if failing.is_empty() {
        return Err(Error::EmptyFailingSet);
    }
    if params.mixes > 0 && train.is_empty() {
        return Err(Error::InvalidArgument("mixing needs a non-empty training set".into()));
    }
    let per = 1 + BlurKind::ALL.len() + params.mixes;
    let mut rng = rng::seeded(seed);
    let mut samples: Vec<(Vec<f32>, usize)> = Vec::with_capacity(failing.len() * per);
    for i in 0..failing.len() {
        let image = failing.image_tensor(i);
        let label = failing.labels()[i];
        samples.push((image.data().to_vec(), label));
        for kind in BlurKind::ALL {
            let spec = CorruptionSpec::new(kind, rng.random_range(1..=AUGMENT_MAX_SEVERITY), rng.random());
            samples.push((corrupt(&image, &spec)?.into_data(), label));
        }
        for _ in 0..params.mixes {
            let j = rng.random_range(0..train.len());
            let mode = if rng.random::<f64>() < params.cutmix_prob {
                MixMode::Cutmix
            } else {
                MixMode::Blend
            };
            let ratio = draw_mix_ratio(params.beta, params.ratio, &mut rng)?;
            let partner = train.image_tensor(j);
            let (mixed, l) = mix_samples((&image, label), (&partner, train.labels()[j]), ratio, mode, rng.random())?;
            samples.push((mixed.into_data(), l));
        }
    }
    LabeledDataset::from_samples(failing.image_shape(), samples, failing.split(), failing.class_count())
}

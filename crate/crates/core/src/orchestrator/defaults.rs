//! Default hyperparameters per (method, architecture, dataset).

use crate::repair::{HyperParams, RepairMethod};
use crate::store::canonical_arch;

/// The fine-tuning block used with ResNets on CIFAR-class data.
pub fn reference_finetune() -> HyperParams {
    HyperParams {
        batch_size: 128,
        lr: 0.1,
        lam: 0.0,
        extra: 128,
        epoch: 60,
        beta: 1.0,
        cutmix_prob: 0.0,
        ratio: 0.9,
        ..HyperParams::default()
    }
}

/// Desk-scale rows for the small built-in datasets.
fn desk(method: RepairMethod) -> HyperParams {
    match method {
        RepairMethod::WeightPatch => HyperParams::default(),
        RepairMethod::FinetuneAugment => HyperParams {
            lr: 0.01,
            epoch: 5,
            ..reference_finetune()
        },
        RepairMethod::ExtendCorrect => HyperParams {
            lr: 0.01,
            clip_norm: 1.0,
            epoch: 5,
            ..HyperParams::default()
        },
    }
}

/// Used for any triple without a registered row.
pub fn fallback(method: RepairMethod) -> HyperParams {
    match method {
        RepairMethod::WeightPatch | RepairMethod::FinetuneAugment => reference_finetune(),
        RepairMethod::ExtendCorrect => HyperParams {
            lr: 0.01,
            clip_norm: 1.0,
            ..reference_finetune()
        },
    }
}

const CIFAR: [&str; 2] = ["cifar10", "cifar100"];
const DESK: [&str; 2] = ["synthetic", "mnist"];
const DESK_ARCHS: [&str; 3] = ["ffnn", "cnn-small", "resnet"];

/// Registered row for the triple, or `None`.
pub fn registered(method: RepairMethod, arch: &str, dataset: &str) -> Option<HyperParams> {
    let arch = canonical_arch(arch).to_ascii_lowercase();
    let dataset = super::datasets::family(dataset);
    if CIFAR.contains(&dataset.as_str()) && arch == "resnet" {
        return Some(match method {
            RepairMethod::FinetuneAugment => reference_finetune(),
            m => fallback(m),
        });
    }
    if DESK.contains(&dataset.as_str()) && DESK_ARCHS.contains(&arch.as_str()) {
        return Some(desk(method));
    }
    None
}

/// Registered row, or the fallback row with a logged warning.
pub fn default_params(method: RepairMethod, arch: &str, dataset: &str) -> HyperParams {
    registered(method, arch, dataset).unwrap_or_else(|| {
        log::warn!("no default row for ({method}, {arch}, {dataset}); using the fallback row");
        fallback(method)
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn fallback_for_unknown_triples() {
        assert!(registered(RepairMethod::WeightPatch, "vgg", "svhn").is_none());
        assert_eq!(
            default_params(RepairMethod::WeightPatch, "vgg", "svhn"),
            fallback(RepairMethod::WeightPatch)
        );
    }
}

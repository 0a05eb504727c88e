use rand::Rng;
use serde_json::{json, Value};

use super::augment::build_augmented_set;
use super::{run_method, EventSink, RepairConfig, RepairData, RepairOutcome};
use crate::data::partition_indices;
use crate::error::Result;
use crate::nn::{loss_and_grads, LossSpec};
use crate::rng;
use crate::store::Model;
use crate::tensor::Tensor;

/// Fine-tunes every trainable parameter for `epoch` epochs. At the start of
/// each epoch the misclassified inputs of the configured split are
/// re-extracted and augmented; every batch of `batch_size` training samples
/// is extended with `extra` samples drawn from that pool.
pub fn repair_finetune(model: &Model, data: &RepairData, config: &RepairConfig, events: EventSink) -> Result<RepairOutcome> {
    run_method(model, data, config, events, |events| finetune(model, data, config, events))
}

fn finetune(model: &Model, data: &RepairData, config: &RepairConfig, events: &mut dyn FnMut(&str, Value)) -> Result<Model> {
    let p = &config.params;
    let mut m = model.clone();
    let train = &data.train;
    let source = data.split(config.failing_split);
    let loss = if p.lam > 0.0 {
        LossSpec::with_constraint(data.constraint.clone(), p.lam)
    } else {
        LossSpec::cross_entropy()
    };
    let mut opt = p.optimizer()?;
    let mut rng = rng::seeded(rng::derive_seed(config.seed, 3));
    let mut order: Vec<usize> = (0..train.len()).collect();
    for epoch in 0..p.epoch {
        let (fail_idx, _) = partition_indices(&m, source)?;
        let pool = if fail_idx.is_empty() || p.extra == 0 {
            None
        } else {
            let seed = rng::derive_seed(config.seed, 1000 + epoch as u64);
            Some(build_augmented_set(&source.subset(&fail_idx), train, p, seed)?)
        };
        events(
            "epoch-start",
            json!({"epoch": epoch, "failing": fail_idx.len(), "pool": pool.as_ref().map_or(0, |d| d.len())}),
        );
        rng::shuffle(&mut order, &mut rng);
        let mut total = 0.0;
        let mut count = 0usize;
        for chunk in order.chunks(p.batch_size) {
            let (mut x, mut y) = train.batch(chunk);
            if let Some(pool) = &pool {
                let picks: Vec<usize> = (0..p.extra).map(|_| rng.random_range(0..pool.len())).collect();
                let (xa, ya) = pool.batch(&picks);
                x = Tensor::concat_rows(&[&x, &xa])?;
                y.extend(ya);
            }
            let (value, grads) = loss_and_grads(&m, &x, &y, &loss)?;
            opt.step(&mut m.weights, &grads)?;
            total += value * y.len() as f64;
            count += y.len();
        }
        events("epoch", json!({"epoch": epoch, "loss": total / count.max(1) as f64}));
    }
    Ok(m)
}

use super::{loss_and_grads, LossSpec, Sgd};
use crate::data::LabeledDataset;
use crate::error::{Error, Result};
use crate::rng;
use crate::store::Model;

#[derive(Debug, Clone, PartialEq)]
pub struct TrainOptions {
    pub epochs: usize,
    pub batch_size: usize,
    pub lr: f64,
    pub momentum: f64,
    pub seed: u64,
    pub loss: LossSpec,
}

impl Default for TrainOptions {
    fn default() -> Self {
        TrainOptions {
            epochs: 1,
            batch_size: 64,
            lr: 0.05,
            momentum: 0.9,
            seed: 0,
            loss: LossSpec::cross_entropy(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EpochStats {
    pub epoch: usize,
    /// Sample-weighted mean loss over the epoch.
    pub loss: f64,
    pub batches: usize,
}

/// Mini-batch SGD over `data`. Sample order is a fresh Fisher-Yates shuffle
/// per epoch drawn from one stream seeded by `opts.seed`. Returns the
/// per-epoch mean losses.
pub fn train_epochs(
    model: &mut Model,
    data: &LabeledDataset,
    opts: &TrainOptions,
    on_epoch: &mut dyn FnMut(&EpochStats),
) -> Result<Vec<f64>> {
    if data.is_empty() {
        return Err(Error::EmptyDataset);
    }
    if opts.batch_size == 0 {
        return Err(Error::InvalidArgument("batch_size must be >= 1".into()));
    }
    let mut opt = Sgd::new(opts.lr, opts.momentum)?;
    let mut rng = rng::seeded(opts.seed);
    let mut order: Vec<usize> = (0..data.len()).collect();
    let mut trace = Vec::with_capacity(opts.epochs);
    for epoch in 0..opts.epochs {
        rng::shuffle(&mut order, &mut rng);
        let mut total = 0.0;
        let mut batches = 0;
        for chunk in order.chunks(opts.batch_size) {
            let (x, y) = data.batch(chunk);
            let (loss, grads) = loss_and_grads(model, &x, &y, &opts.loss)?;
            opt.step(&mut model.weights, &grads)?;
            total += loss * chunk.len() as f64;
            batches += 1;
        }
        let stats = EpochStats {
            epoch,
            loss: total / data.len() as f64,
            batches,
        };
        on_epoch(&stats);
        trace.push(stats.loss);
    }
    Ok(trace)
}

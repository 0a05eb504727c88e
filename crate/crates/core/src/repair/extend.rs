use serde_json::{json, Value};

use super::{run_method, EventSink, RepairConfig, RepairData, RepairOutcome};
use crate::error::{Error, Result};
use crate::nn::{activations_at, slice_loss_and_grads, LayerKind, LayerSpec, LossSpec};
use crate::rng;
use crate::store::{init_param, Model};

/// Inserts `x + up(relu(down(x)))` in front of layer `position`
/// (`position == layers.len()` appends after the last layer). The unit is
/// dense on flat activations and a pair of 1x1 convolutions on `[c, h, w]`
/// activations. `up` starts at zero, so the extended model computes exactly
/// the base logits. Every pre-existing parameter is frozen.
pub fn attach_correction_unit(model: &Model, position: usize, width: usize, seed: u64) -> Result<Model> {
    if position > model.layers.len() {
        return Err(Error::InvalidArgument(format!(
            "position {position} is past the last layer boundary ({})",
            model.layers.len()
        )));
    }
    if width == 0 {
        return Err(Error::InvalidArgument("correction width must be >= 1".into()));
    }
    let shape = model.layer_shapes()?[position].clone();
    let spatial = match shape.len() {
        1 => false,
        3 => true,
        _ => {
            return Err(Error::InvalidArgument(format!(
                "cannot attach a correction unit to activations shaped {shape:?}"
            )))
        }
    };
    let mut k = 0;
    let name = loop {
        let candidate = format!("correct{k}");
        if model.layer_index(&candidate).is_none() {
            break candidate;
        }
        k += 1;
    };
    let unit = LayerSpec::new(
        name,
        LayerKind::CorrectionUnit {
            features: shape[0],
            width,
            spatial,
        },
    );
    let mut out = model.clone();
    out.freeze_all();
    let mut rng = rng::seeded(seed);
    for p in unit.params() {
        let t = init_param(&p.shape, p.role, &mut rng);
        out.weights.insert(p.name, t);
    }
    out.layers.insert(position, unit);
    out.validate()?;
    Ok(out)
}

/// Attaches one correction unit before the final layer and trains only its
/// parameters on `CE + lam * constraint_loss` over the training split. The
/// frozen prefix is evaluated once and cached.
pub fn repair_extend(model: &Model, data: &RepairData, config: &RepairConfig, events: EventSink) -> Result<RepairOutcome> {
    run_method(model, data, config, events, |events| extend(model, data, config, events))
}

fn extend(model: &Model, data: &RepairData, config: &RepairConfig, events: &mut dyn FnMut(&str, Value)) -> Result<Model> {
    let p = &config.params;
    let position = model.layers.len() - 1;
    let mut m = attach_correction_unit(model, position, p.width, rng::derive_seed(config.seed, 4))?;
    let unit = m.layers[position].name.clone();
    events("attached", json!({"unit": unit, "position": position, "width": p.width}));
    if p.epoch == 0 {
        return Ok(m);
    }
    let loss = if p.lam > 0.0 {
        LossSpec::with_constraint(data.constraint.clone(), p.lam)
    } else {
        LossSpec::cross_entropy()
    };
    let train = &data.train;
    let cached = activations_at(&m, train.images(), position)?;
    let prefix = format!("{unit}.");
    let mut opt = p.optimizer()?;
    let mut rng = rng::seeded(rng::derive_seed(config.seed, 5));
    let mut order: Vec<usize> = (0..train.len()).collect();
    for epoch in 0..p.epoch {
        rng::shuffle(&mut order, &mut rng);
        let mut total = 0.0;
        for chunk in order.chunks(p.batch_size) {
            let x = cached.select_rows(chunk);
            let y: Vec<usize> = chunk.iter().map(|&i| train.labels()[i]).collect();
            let (value, grads) =
                slice_loss_and_grads(&m.layers[position..], &m.weights, &x, &y, &loss, |n| n.starts_with(&prefix))?;
            opt.step(&mut m.weights, &grads)?;
            total += value * chunk.len() as f64;
        }
        events("epoch", json!({"epoch": epoch, "loss": total / train.len() as f64}));
    }
    Ok(m)
}

use std::collections::BTreeMap;

use serde_json::{json, Value};

use super::localize::localize_faulty_weights;
use super::pso::{pso_optimize_from, PsoParams};
use super::{run_method, EventSink, RepairConfig, RepairData, RepairOutcome};
use crate::data::partition_indices;
use crate::error::{Error, Result};
use crate::eval::argmax;
use crate::nn::{activations_at, forward_layers, LayerSpec, WeightMap};
use crate::rng;
use crate::store::Model;
use crate::tensor::Tensor;

/// Seeded subsample of at most `k` indices, kept in dataset order.
fn pick(indices: &[usize], k: usize, rng: &mut rng::Rng64) -> Vec<usize> {
    let mut chosen: Vec<usize> = rng::sample_without_replacement(indices.len(), k.min(indices.len()), rng)
        .into_iter()
        .map(|i| indices[i])
        .collect();
    chosen.sort_unstable();
    chosen
}

fn hit_rate(layers: &[LayerSpec], weights: &WeightMap, input: &Tensor, labels: &[usize]) -> Option<f64> {
    if labels.is_empty() {
        return Some(1.0);
    }
    let logits = forward_layers(layers, weights, input).ok()?;
    let classes = logits.row_len();
    let hits = logits
        .data()
        .chunks(classes)
        .zip(labels)
        .filter(|(row, l)| argmax(row) == **l)
        .count();
    Some(hits as f64 / labels.len() as f64)
}

/// Localizes `top_k` weights on a failing sample of the configured split and
/// searches new values for them with PSO. Fitness is the fix rate on the
/// failing sample plus the retention on an equally sized passing sample;
/// each coordinate moves within `o ± (2|o| + 0.1)` of its original value `o`.
/// Only the localized coordinates change.
pub fn repair_weight_patch(
    model: &Model,
    data: &RepairData,
    config: &RepairConfig,
    events: EventSink,
) -> Result<RepairOutcome> {
    run_method(model, data, config, events, |events| patch(model, data, config, events))
}

fn patch(model: &Model, data: &RepairData, config: &RepairConfig, events: &mut dyn FnMut(&str, Value)) -> Result<Model> {
    let p = &config.params;
    let source = data.split(config.failing_split);
    let (fail_idx, pass_idx) = partition_indices(model, source)?;
    events(
        "partition",
        json!({"split": source.split(), "failing": fail_idx.len(), "passing": pass_idx.len()}),
    );
    if fail_idx.is_empty() {
        events("skipped", json!({"reason": "no misclassified inputs"}));
        return Ok(model.clone());
    }
    let mut rng = rng::seeded(rng::derive_seed(config.seed, 1));
    let failing = source.subset(&pick(&fail_idx, p.sample_size, &mut rng));
    let passing = source.subset(&pick(&pass_idx, failing.len(), &mut rng));

    let coords = localize_faulty_weights(model, &failing, p.top_k, &p.scope)?;
    events(
        "localized",
        json!({
            "coordinates": coords.len(),
            "top": coords.iter().take(5).map(|c| json!({"param": c.coord.param, "index": c.coord.index, "score": c.score})).collect::<Vec<_>>(),
        }),
    );

    let owner: BTreeMap<String, usize> = model
        .layers
        .iter()
        .enumerate()
        .flat_map(|(i, l)| l.params().into_iter().map(move |p| (p.name, i)))
        .collect();
    let first = coords.iter().map(|c| owner[&c.coord.param]).min().unwrap_or(model.layers.len() - 1);
    let tail = &model.layers[first..];
    let tail_weights: WeightMap = tail
        .iter()
        .flat_map(|l| l.params())
        .map(|p| {
            let t = model.weights[&p.name].clone();
            (p.name, t)
        })
        .collect();
    let fail_in = activations_at(model, failing.images(), first)?;
    let pass_in = activations_at(model, passing.images(), first)?;

    let origin: Vec<f64> = coords
        .iter()
        .map(|c| model.weights[&c.coord.param].data()[c.coord.index] as f64)
        .collect();
    let bounds: Vec<(f64, f64)> = origin
        .iter()
        .map(|&o| {
            let r = 2.0 * o.abs() + 0.1;
            (o - r, o + r)
        })
        .collect();
    let apply = |weights: &mut WeightMap, theta: &[f64]| {
        for (c, v) in coords.iter().zip(theta) {
            weights.get_mut(&c.coord.param).unwrap().data_mut()[c.coord.index] = *v as f32;
        }
    };
    let fitness = |theta: &[f64]| -> f64 {
        let mut w = tail_weights.clone();
        apply(&mut w, theta);
        let fix = hit_rate(tail, &w, &fail_in, failing.labels());
        let keep = hit_rate(tail, &w, &pass_in, passing.labels());
        match (fix, keep) {
            (Some(f), Some(k)) => f + k,
            _ => f64::NAN,
        }
    };
    let start_fitness = fitness(&origin);
    let params = PsoParams {
        swarm: p.swarm,
        iters: p.iters,
        inertia: p.inertia,
        c1: p.c1,
        c2: p.c2,
    };
    let mut on_iter = |it: usize, best: f64| events("pso-iteration", json!({"iteration": it, "best_fitness": best}));
    let result = match pso_optimize_from(
        fitness,
        &bounds,
        &params,
        rng::derive_seed(config.seed, 2),
        Some(&origin),
        &mut on_iter,
    ) {
        Ok(r) => r,
        Err(Error::NonFiniteFitness { iteration, particle }) => {
            log::warn!("weight search diverged at iteration {iteration}, particle {particle}; keeping the input model");
            events("pso-diverged", json!({"iteration": iteration, "particle": particle}));
            return Ok(model.clone());
        }
        Err(e) => return Err(e),
    };
    events(
        "patched",
        json!({"start_fitness": start_fitness, "best_fitness": result.best_fitness, "sample": failing.len()}),
    );
    let mut repaired = model.clone();
    apply(&mut repaired.weights, &result.best);
    Ok(repaired)
}

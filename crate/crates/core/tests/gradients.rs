mod common;

use common::{check_gradients, fixture_case, layer_fixtures, ref_logits, ref_weights};
use netrepair::nn::{forward, LossSpec};
use netrepair::ConstraintSpec;

const SEEDS: [u64; 5] = [0, 1, 2, 3, 4];

#[test]
fn engine_forward_matches_reference() {
    for (kind, layers) in layer_fixtures() {
        for seed in SEEDS {
            let (model, batch, _) = fixture_case(layers.clone(), seed);
            let got = forward(&model, &batch).unwrap();
            let input: Vec<f64> = batch.data().iter().map(|&v| v as f64).collect();
            let want = ref_logits(&model, &ref_weights(&model), &input, batch.rows());
            for (row, w) in got.data().chunks(3).zip(&want) {
                for (a, b) in row.iter().zip(w) {
                    assert!((*a as f64 - b).abs() < 1e-5 * (1.0 + b.abs()), "{kind} seed {seed}: {a} vs {b}");
                }
            }
        }
    }
}

#[test]
fn every_layer_kind_passes_finite_differences() {
    for (kind, layers) in layer_fixtures() {
        for seed in SEEDS {
            let (model, batch, labels) = fixture_case(layers.clone(), seed);
            for check in check_gradients(&model, &batch, &labels, &LossSpec::cross_entropy()) {
                assert!(check.rel_err < 1e-4, "{kind} seed {seed} {}: rel err {:e}", check.name, check.rel_err);
            }
        }
    }
}

#[test]
fn constraint_term_gradient_matches_finite_differences() {
    let spec = ConstraintSpec::new(vec![vec![0], vec![1, 2]], 0.05);
    let loss = LossSpec::with_constraint(spec, 2.0);
    let (_, layers) = layer_fixtures().into_iter().find(|(k, _)| *k == "dense").unwrap();
    for seed in SEEDS {
        let (model, batch, labels) = fixture_case(layers.clone(), seed);
        for check in check_gradients(&model, &batch, &labels, &loss) {
            assert!(check.rel_err < 1e-4, "seed {seed} {}: rel err {:e}", check.name, check.rel_err);
        }
    }
}

#[test]
fn frozen_parameters_get_no_gradient() {
    let (_, layers) = layer_fixtures().into_iter().find(|(k, _)| *k == "dense").unwrap();
    let (mut model, batch, labels) = fixture_case(layers, 0);
    model.frozen.insert("fc1.weight".into());
    let (_, grads) = netrepair::nn::loss_and_grads(&model, &batch, &labels, &LossSpec::cross_entropy()).unwrap();
    assert!(grads.get("fc1.weight").is_none());
    assert!(grads.get("fc1.bias").is_some());
}

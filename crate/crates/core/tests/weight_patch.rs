mod common;

use std::collections::BTreeSet;

use common::{ablation_ranking, decisive_fixture};
use netrepair::data::extract_failing_set;
use netrepair::eval;
use netrepair::repair::{
    localize_faulty_weights, pso_optimize, repair, HyperParams, PsoParams, RepairConfig, RepairData, RepairMethod,
};
use netrepair::Error;

const SCOPE: [&str; 4] = ["fc1.weight", "fc1.bias", "fc2.weight", "fc2.bias"];

#[test]
fn localization_overlaps_exhaustive_ablation() {
    let mut overlapping = 0;
    for seed in 0..3 {
        let fx = decisive_fixture(seed);
        let (failing, _) = extract_failing_set(&fx.defective, &fx.train).unwrap();
        let ours: BTreeSet<(String, usize)> = localize_faulty_weights(&fx.defective, &failing, 10, &[])
            .unwrap()
            .into_iter()
            .map(|c| (c.coord.param, c.coord.index))
            .collect();
        let oracle: BTreeSet<(String, usize)> = ablation_ranking(&fx.defective, &failing, &SCOPE)
            .into_iter()
            .take(10)
            .map(|(p, i, _)| (p, i))
            .collect();
        if ours.intersection(&oracle).count() >= 1 {
            overlapping += 1;
        }
    }
    assert!(overlapping >= 2, "overlap in {overlapping}/3 seeds");
}

#[test]
fn patch_fixes_failing_set_and_touches_only_localized_coordinates() {
    for seed in 0..3 {
        let fx = decisive_fixture(seed);
        let (failing, passing) = extract_failing_set(&fx.defective, &fx.train).unwrap();
        assert!(!failing.is_empty());
        let data = RepairData::new(fx.train.clone(), fx.test.clone()).unwrap();
        let params = HyperParams::default();
        let config = RepairConfig::new(RepairMethod::WeightPatch, params.clone(), seed);

        let mut trace = Vec::new();
        let mut sink = |name: &str, payload: serde_json::Value| {
            if name == "pso-iteration" {
                trace.push(payload["best_fitness"].as_f64().unwrap());
            }
        };
        let out = repair(&fx.defective, &data, &config, &mut sink).unwrap();
        assert_eq!(trace.len(), params.iters);
        assert!(trace.windows(2).all(|w| w[1] >= w[0]), "trace not monotone: {trace:?}");

        let fixed = eval::accuracy(out.model(), &failing).unwrap();
        assert!(fixed >= 0.9, "seed {seed}: failing-set accuracy after {fixed}");
        let kept = eval::accuracy(out.model(), &passing).unwrap();
        assert!(kept >= 0.95, "seed {seed}: passing retention {kept}");

        // The failing sample covers the whole failing set here, so the
        // localization the repair used can be recomputed.
        assert!(failing.len() <= params.sample_size);
        let localized: BTreeSet<(String, usize)> = localize_faulty_weights(&fx.defective, &failing, params.top_k, &[])
            .unwrap()
            .into_iter()
            .map(|c| (c.coord.param, c.coord.index))
            .collect();
        for (name, before) in &fx.defective.weights {
            let after = &out.model().weights[name];
            for (i, (a, b)) in before.data().iter().zip(after.data()).enumerate() {
                if a.to_bits() != b.to_bits() {
                    assert!(localized.contains(&(name.clone(), i)), "{name}[{i}] changed but was not localized");
                }
            }
        }
    }
}

#[test]
fn patch_is_deterministic() {
    let fx = decisive_fixture(0);
    let data = RepairData::new(fx.train.clone(), fx.test.clone()).unwrap();
    let params = HyperParams {
        iters: 10,
        ..HyperParams::default()
    };
    let config = RepairConfig::new(RepairMethod::WeightPatch, params, 7);
    let a = repair(&fx.defective, &data, &config, &mut |_, _| {}).unwrap();
    let b = repair(&fx.defective, &data, &config, &mut |_, _| {}).unwrap();
    assert_eq!(a.model().weights, b.model().weights);
}

#[test]
fn clean_model_is_returned_unchanged() {
    let fx = decisive_fixture(1);
    let (failing, _) = extract_failing_set(&fx.clean, &fx.train).unwrap();
    if !failing.is_empty() {
        return;
    }
    let data = RepairData::new(fx.train.clone(), fx.test.clone()).unwrap();
    let config = RepairConfig::new(RepairMethod::WeightPatch, HyperParams::default(), 0);
    let out = repair(&fx.clean, &data, &config, &mut |_, _| {}).unwrap();
    assert_eq!(out.model().weights, fx.clean.weights);
}

#[test]
fn empty_failing_set_cannot_be_localized() {
    let fx = decisive_fixture(0);
    let empty = fx.train.subset(&[]);
    assert!(matches!(
        localize_faulty_weights(&fx.defective, &empty, 10, &[]),
        Err(Error::EmptyFailingSet)
    ));
}

#[test]
fn pso_finds_parabola_peak() {
    let params = PsoParams {
        swarm: 16,
        iters: 100,
        ..PsoParams::default()
    };
    for seed in 0..3 {
        let r = pso_optimize(|w| -(w[0] - 3.0).powi(2), &[(-10.0, 10.0)], &params, seed).unwrap();
        assert!((r.best[0] - 3.0).abs() < 1e-2, "seed {seed}: {}", r.best[0]);
        assert_eq!(r.trace.len(), params.iters + 1);
        assert!(r.trace.windows(2).all(|w| w[1] >= w[0]));
    }
}

#[test]
fn pso_respects_bounds_and_rejects_nan() {
    let params = PsoParams {
        swarm: 8,
        iters: 20,
        ..PsoParams::default()
    };
    let r = pso_optimize(|w| w[0] + w[1], &[(-1.0, 0.5), (2.0, 2.25)], &params, 3).unwrap();
    assert!(r.best[0] <= 0.5 && r.best[0] >= -1.0);
    assert!(r.best[1] <= 2.25 && r.best[1] >= 2.0);
    assert!(matches!(
        pso_optimize(|_| f64::NAN, &[(0.0, 1.0)], &params, 0),
        Err(Error::NonFiniteFitness { .. })
    ));
}

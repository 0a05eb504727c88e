mod common;

use common::{decisive_fixture, tempered_fixture};
use netrepair::data::{make_synthetic, partition_indices};
use netrepair::nn::forward;
use netrepair::repair::{
    attach_correction_unit, build_augmented_set, draw_mix_ratio, repair, HyperParams, RepairConfig, RepairData,
    RepairMethod, AUGMENT_MAX_SEVERITY,
};
use netrepair::rng;
use netrepair::store::build_architecture;
use netrepair::Split;

#[test]
fn augmented_set_has_fixed_fan_out() {
    let train = make_synthetic(4, 10, [1, 8, 8], 1, Split::Train).unwrap();
    let failing = train.subset(&[0, 3, 5, 7, 9]);
    for mixes in [0, 1, 3] {
        let params = HyperParams {
            mixes,
            ..HyperParams::default()
        };
        let aug = build_augmented_set(&failing, &train, &params, 4).unwrap();
        let per = 1 + 3 + mixes;
        assert_eq!(aug.len(), failing.len() * per);
        for (i, chunk) in aug.labels().chunks(per).enumerate() {
            // Originals and blurs keep their label.
            assert!(chunk[..4].iter().all(|&l| l == failing.labels()[i]));
        }
        for i in 0..failing.len() {
            assert_eq!(aug.image(i * per), failing.image(i));
        }
        let again = build_augmented_set(&failing, &train, &params, 4).unwrap();
        assert_eq!(aug.images().data(), again.images().data());
    }
    assert_eq!(AUGMENT_MAX_SEVERITY, 3);
}

#[test]
fn mix_ratio_mean_matches_closed_form() {
    // E[max(0.9, U(0, 1))] = 0.9 * 0.9 + (1 - 0.81) / 2 = 0.905.
    let mut r = rng::seeded(11);
    let n = 200_000;
    let mut sum = 0.0;
    for _ in 0..n {
        let v = draw_mix_ratio(1.0, 0.9, &mut r).unwrap();
        assert!((0.9..=1.0).contains(&v));
        sum += v;
    }
    let mean = sum / n as f64;
    assert!((mean - 0.905).abs() < 2e-3, "mean {mean}");
}

#[test]
fn attached_unit_is_an_exact_identity() {
    for (arch, depth) in [("ffnn", 6), ("cnn-small", 2), ("resnet", 8)] {
        let model = build_architecture(arch, depth, [1, 12, 12], 10, 3).unwrap();
        let batch = make_synthetic(10, 2, [1, 12, 12], 5, Split::Test).unwrap();
        let base = forward(&model, batch.images()).unwrap();
        for position in 0..=model.layers.len() {
            let Ok(ext) = attach_correction_unit(&model, position, 16, 9) else {
                continue;
            };
            let out = forward(&ext, batch.images()).unwrap();
            let same = base.data().iter().zip(out.data()).all(|(a, b)| a.to_bits() == b.to_bits());
            assert!(same, "{arch} position {position}");
            assert_eq!(ext.layers.len(), model.layers.len() + 1);
            let unit = &ext.layers[position];
            let added: usize = unit.params().iter().map(|p| p.shape.iter().product::<usize>()).sum();
            assert_eq!(ext.parameter_count(), model.parameter_count() + added);
            assert_eq!(ext.trainable_names().len(), 4);
            assert!(ext.trainable_names().iter().all(|n| n.starts_with(&unit.name)));
        }
    }
}

#[test]
fn attached_units_compose() {
    let model = build_architecture("ffnn", 6, [1, 8, 8], 4, 0).unwrap();
    let last = model.layers.len() - 1;
    let one = attach_correction_unit(&model, last, 8, 1).unwrap();
    let two = attach_correction_unit(&one, last, 8, 2).unwrap();
    assert_eq!(two.layers[last].name, "correct1");
    assert_eq!(two.layers[last + 1].name, "correct0");
    let batch = make_synthetic(4, 3, [1, 8, 8], 2, Split::Test).unwrap();
    assert_eq!(forward(&model, batch.images()).unwrap(), forward(&two, batch.images()).unwrap());
    assert!(attach_correction_unit(&model, model.layers.len() + 1, 8, 0).is_err());
    assert!(attach_correction_unit(&model, last, 0, 0).is_err());
}

#[test]
fn extend_trains_only_the_unit() {
    let fx = decisive_fixture(0);
    let data = RepairData::new(fx.train.clone(), fx.test.clone()).unwrap();
    let params = HyperParams {
        lr: 0.01,
        clip_norm: 1.0,
        epoch: 2,
        ..HyperParams::default()
    };
    let out = repair(&fx.defective, &data, &RepairConfig::new(RepairMethod::ExtendCorrect, params, 0), &mut |_, _| {}).unwrap();
    let m = out.model();
    assert_eq!(m.layers.len(), fx.defective.layers.len() + 1);
    for (name, w) in &fx.defective.weights {
        assert_eq!(&m.weights[name], w, "{name} moved");
    }
    let unit = &m.layers[m.layers.len() - 2].name;
    assert!(m.weights.iter().any(|(n, w)| n.starts_with(unit.as_str()) && w.data().iter().any(|v| *v != 0.0)));
    assert!(out.after.accuracy > out.before.accuracy);
}

#[test]
fn extend_with_zero_epochs_is_identity() {
    let fx = decisive_fixture(0);
    let data = RepairData::new(fx.train.clone(), fx.test.clone()).unwrap();
    let params = HyperParams {
        epoch: 0,
        ..HyperParams::default()
    };
    let out = repair(&fx.defective, &data, &RepairConfig::new(RepairMethod::ExtendCorrect, params, 0), &mut |_, _| {}).unwrap();
    assert_eq!(out.before.accuracy, out.after.accuracy);
    assert_eq!(out.fix_rate, 0.0);
    assert_eq!(out.retention, 1.0);
}

#[test]
fn constraint_weight_trades_accuracy_for_constraint_accuracy() {
    for seed in 0..3 {
        let fx = tempered_fixture(seed);
        let data = RepairData::new(fx.train.clone(), fx.test.clone()).unwrap();
        let params = HyperParams {
            lam: 10.0,
            lr: 0.01,
            clip_norm: 1.0,
            epoch: 5,
            ..HyperParams::default()
        };
        let config = RepairConfig::new(RepairMethod::ExtendCorrect, params, seed);
        let out = repair(&fx.clean, &data, &config, &mut |_, _| {}).unwrap();
        let gain = out.after.constraint_accuracy - out.before.constraint_accuracy;
        let loss = out.before.accuracy - out.after.accuracy;
        assert!(gain >= 0.10, "seed {seed}: constraint gain {gain}");
        assert!(loss <= 0.03, "seed {seed}: accuracy loss {loss}");
    }
}

#[test]
fn finetune_recovers_zeroed_weight_and_reports_outcome() {
    let fx = decisive_fixture(2);
    let data = RepairData::new(fx.train.clone(), fx.test.clone()).unwrap();
    let params = HyperParams {
        lr: 0.01,
        epoch: 2,
        batch_size: 32,
        extra: 32,
        ..HyperParams::default()
    };
    let config = RepairConfig::new(RepairMethod::FinetuneAugment, params, 0);
    let out = repair(&fx.defective, &data, &config, &mut |_, _| {}).unwrap();
    let (failing, passing) = partition_indices(&fx.defective, &fx.test).unwrap();
    assert_eq!(out.failing_count, failing.len());
    assert_eq!(out.passing_count, passing.len());
    assert!(out.after.accuracy > out.before.accuracy);
    assert!(out.fix_rate > 0.5 && out.retention > 0.95);
    assert_eq!(out.model().layers, fx.defective.layers);
}

#[test]
fn hyperparameter_overrides_are_typed() {
    let mut p = HyperParams::default();
    p.apply_overrides(&["epoch=2", "lam=0.5", "scope=fc1,fc2"]).unwrap();
    assert_eq!(p.epoch, 2);
    assert_eq!(p.lam, 0.5);
    assert_eq!(p.scope, vec!["fc1".to_string(), "fc2".to_string()]);
    assert!(p.apply_overrides(&["epoch=two"]).is_err());
    assert!(p.apply_overrides(&["nonsense=1"]).is_err());
    assert!(p.apply_overrides(&["epoch"]).is_err());
}

#[test]
fn method_aliases_resolve() {
    assert_eq!("apricot".parse::<RepairMethod>().unwrap(), RepairMethod::WeightPatch);
    assert_eq!("DeepRepair".parse::<RepairMethod>().unwrap(), RepairMethod::FinetuneAugment);
    assert_eq!("dl2".parse::<RepairMethod>().unwrap(), RepairMethod::ExtendCorrect);
    assert_eq!("extend-correct".parse::<RepairMethod>().unwrap(), RepairMethod::ExtendCorrect);
    assert!("bogus".parse::<RepairMethod>().is_err());
}

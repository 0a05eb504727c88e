mod common;

use common::*;
use netrepair::eval::{self, confusion_matrix, macro_precision};
use netrepair::ConstraintSpec;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn random_fixture(n: usize, classes: usize, seed: u64) -> (Vec<Vec<f32>>, Vec<usize>) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let rows = (0..n)
        .map(|_| (0..classes).map(|_| rng.random_range(-256i32..=256) as f32 / 64.0).collect())
        .collect();
    let labels = (0..n).map(|_| rng.random_range(0..classes)).collect();
    (rows, labels)
}

fn oracle_preds(rows: &[Vec<f32>]) -> Vec<usize> {
    rows.iter()
        .map(|r| {
            let mut best = 0;
            for c in 1..r.len() {
                if r[c] > r[best] {
                    best = c;
                }
            }
            best
        })
        .collect()
}

fn oracle_probs(rows: &[Vec<f32>]) -> Vec<Vec<f64>> {
    rows.iter()
        .map(|r| ref_softmax(&r.iter().map(|&v| v as f64).collect::<Vec<_>>()))
        .collect()
}

fn check_against_oracles(rows: &[Vec<f32>], labels: &[usize], spec: &ConstraintSpec) {
    let classes = rows[0].len();
    let model = passthrough_model(classes);
    let data = logit_dataset(rows, labels);
    let preds = oracle_preds(rows);
    assert_eq!(eval::accuracy(&model, &data).unwrap(), brute_accuracy(&preds, labels));
    assert_eq!(
        eval::confusion_accuracy(&model, &data).unwrap(),
        brute_confusion_accuracy(&preds, labels, classes)
    );
    assert_eq!(
        eval::constraint_accuracy(&model, &data, spec).unwrap(),
        brute_constraint_accuracy(&oracle_probs(rows), spec)
    );
}

#[test]
fn two_hundred_sample_fixtures_match_brute_force() {
    for seed in 0..5 {
        let (rows, labels) = random_fixture(200, 10, seed);
        check_against_oracles(&rows, &labels, &ConstraintSpec::default_for(10));
        let (rows, labels) = random_fixture(200, 4, seed + 100);
        check_against_oracles(&rows, &labels, &ConstraintSpec::new(vec![vec![0, 1], vec![2, 3]], 0.05));
    }
}

#[test]
fn hand_confusion_matrix() {
    let (preds, labels) = from_confusion(&[vec![3, 1], vec![1, 5]]);
    let m = confusion_matrix(&preds, &labels, 2);
    assert_eq!(m, vec![vec![3, 1], vec![1, 5]]);
    let want = (3.0 / 4.0 + 5.0 / 6.0) / 2.0;
    assert_eq!(macro_precision(&m).unwrap(), want);
    assert_eq!(brute_confusion_accuracy(&preds, &labels, 2), want);
    assert!((want - 0.791_666_666_666_666_6).abs() < 1e-15);

    let rows: Vec<Vec<f32>> = preds.iter().map(|&p| if p == 0 { vec![1.0, 0.0] } else { vec![0.0, 1.0] }).collect();
    let got = eval::confusion_accuracy(&passthrough_model(2), &logit_dataset(&rows, &labels)).unwrap();
    assert_eq!(got, want);
}

#[test]
fn single_class_predictor_excludes_unpredicted_class() {
    let labels = vec![0, 1, 0, 1, 0, 1];
    let rows = vec![vec![1.0f32, 0.0]; 6];
    let got = eval::confusion_accuracy(&passthrough_model(2), &logit_dataset(&rows, &labels)).unwrap();
    assert_eq!(got, 0.5);
}

#[test]
fn two_group_probability_fixtures() {
    let spec = ConstraintSpec::new(vec![vec![0, 1], vec![2, 3]], 0.05);
    let model = passthrough_model(4);
    let sat = logits_for_probs(&[0.97, 0.01, 0.01, 0.01]);
    let viol = logits_for_probs(&[0.5, 0.1, 0.2, 0.2]);
    let acc = |rows: Vec<Vec<f32>>| {
        let labels = vec![0; rows.len()];
        eval::constraint_accuracy(&model, &logit_dataset(&rows, &labels), &spec).unwrap()
    };
    assert_eq!(acc(vec![sat.clone()]), 1.0);
    assert_eq!(acc(vec![viol.clone()]), 0.0);
    assert_eq!(acc(vec![sat, viol]), 0.5);
}

#[test]
fn one_hot_and_wide_epsilon_are_always_satisfied() {
    let (rows, labels) = random_fixture(50, 4, 9);
    let model = passthrough_model(4);
    let data = logit_dataset(&rows, &labels);
    let wide = ConstraintSpec::new(vec![vec![0], vec![1, 2, 3]], 0.4999999);
    let probs = oracle_probs(&rows);
    assert_eq!(eval::constraint_accuracy(&model, &data, &wide).unwrap(), brute_constraint_accuracy(&probs, &wide));

    let hot: Vec<Vec<f32>> = labels.iter().map(|&l| (0..4).map(|c| if c == l { 8.0 } else { -8.0 }).collect()).collect();
    let data = logit_dataset(&hot, &labels);
    assert_eq!(eval::constraint_accuracy(&model, &data, &ConstraintSpec::default_for(4)).unwrap(), 1.0);
    assert_eq!(eval::accuracy(&model, &data).unwrap(), 1.0);
    assert_eq!(eval::confusion_accuracy(&model, &data).unwrap(), 1.0);
}

#[test]
fn argmax_ties_go_to_lowest_class() {
    let rows = vec![vec![1.0f32, 1.0, 0.0], vec![0.0, 2.0, 2.0]];
    let preds = eval::predict(&passthrough_model(3), &logit_dataset(&rows, &[0, 1])).unwrap();
    assert_eq!(preds, vec![0, 1]);
}

#[test]
fn empty_dataset_is_an_error() {
    let model = passthrough_model(2);
    let data = netrepair::LabeledDataset::empty([2, 1, 1], netrepair::Split::Test, 2);
    assert!(eval::accuracy(&model, &data).is_err());
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn metrics_match_oracles(n in 1usize..500, classes in 2usize..8, seed in any::<u64>()) {
        let (rows, labels) = random_fixture(n, classes, seed);
        let half = classes / 2;
        let spec = ConstraintSpec::new(vec![(0..half).collect(), (half..classes).collect()], 0.1);
        check_against_oracles(&rows, &labels, &spec);
    }

    #[test]
    fn metrics_are_permutation_invariant(n in 2usize..200, seed in any::<u64>()) {
        let (rows, labels) = random_fixture(n, 5, seed);
        let mut order: Vec<usize> = (0..n).collect();
        order.reverse();
        order.rotate_left((seed % n as u64) as usize);
        let rows2: Vec<_> = order.iter().map(|&i| rows[i].clone()).collect();
        let labels2: Vec<_> = order.iter().map(|&i| labels[i]).collect();
        let model = passthrough_model(5);
        let spec = ConstraintSpec::new(vec![vec![0, 1], vec![2, 3, 4]], 0.2);
        let a = logit_dataset(&rows, &labels);
        let b = logit_dataset(&rows2, &labels2);
        prop_assert_eq!(eval::accuracy(&model, &a).unwrap(), eval::accuracy(&model, &b).unwrap());
        prop_assert_eq!(eval::confusion_accuracy(&model, &a).unwrap(), eval::confusion_accuracy(&model, &b).unwrap());
        prop_assert_eq!(
            eval::constraint_accuracy(&model, &a, &spec).unwrap(),
            eval::constraint_accuracy(&model, &b, &spec).unwrap()
        );
    }

    #[test]
    fn constraint_accuracy_monotone_in_epsilon(seed in any::<u64>(), e1 in 0.001f64..0.499, e2 in 0.001f64..0.499) {
        let (lo, hi) = if e1 <= e2 { (e1, e2) } else { (e2, e1) };
        let (rows, labels) = random_fixture(100, 4, seed);
        let model = passthrough_model(4);
        let data = logit_dataset(&rows, &labels);
        let groups = vec![vec![0, 1], vec![2, 3]];
        let a = eval::constraint_accuracy(&model, &data, &ConstraintSpec::new(groups.clone(), lo)).unwrap();
        let b = eval::constraint_accuracy(&model, &data, &ConstraintSpec::new(groups, hi)).unwrap();
        prop_assert!(a <= b);
    }

    #[test]
    fn symmetric_binary_confusion_equals_accuracy(tp in 1usize..60, off in 0usize..60) {
        let (preds, labels) = from_confusion(&[vec![tp, off], vec![off, tp]]);
        let rows: Vec<Vec<f32>> = preds.iter().map(|&p| if p == 0 { vec![1.0, 0.0] } else { vec![0.0, 1.0] }).collect();
        let model = passthrough_model(2);
        let data = logit_dataset(&rows, &labels);
        let acc = eval::accuracy(&model, &data).unwrap();
        let conf = eval::confusion_accuracy(&model, &data).unwrap();
        prop_assert!((acc - conf).abs() < 1e-12);
    }
}

mod common;

use common::{kkt_enumeration, random_separable, split};
use ota_anomaly::{train_svm, Label, LabeledSample, SolverConfig, TrainingSet};
use proptest::prelude::*;

fn rel(a: f64, b: f64) -> f64 {
    (a - b).abs() / b.abs().max(1e-300)
}

#[test]
fn matches_enumeration_on_random_instances() {
    for seed in 0..120 {
        let set = random_separable(seed, 3, 20);
        let hyp = train_svm(&set, &SolverConfig::default()).unwrap_or_else(|e| panic!("seed {seed}: {e}"));
        let (xs, ys) = split(&set);
        let (w, b) = kkt_enumeration(&xs, &ys).expect("oracle finds a solution");
        let oracle_norm: f64 = w.iter().map(|v| v * v).sum();
        assert!(rel(hyp.norm_sq(), oracle_norm) < 1e-6, "seed {seed}: {} vs {oracle_norm}", hyp.norm_sq());
        for (a, o) in hyp.w.iter().zip(&w) {
            assert!((a - o).abs() < 1e-5 * (1.0 + o.abs()), "seed {seed}: w {:?} vs {w:?}", hyp.w);
        }
        assert!((hyp.b - b).abs() < 1e-5 * (1.0 + b.abs()), "seed {seed}: b {} vs {b}", hyp.b);
        hyp.check_canonical(&set).unwrap();
    }
}

#[test]
fn rejects_overlapping_classes() {
    let set = TrainingSet::new(vec![
        LabeledSample::new(vec![0.0], Label::Normal),
        LabeledSample::new(vec![1.0], Label::Anomaly),
        LabeledSample::new(vec![2.0], Label::Normal),
    ])
    .unwrap();
    assert!(train_svm(&set, &SolverConfig::default()).is_err());
}

proptest! {
    #![proptest_config(ProptestConfig { cases: 48, failure_persistence: None, ..ProptestConfig::default() })]

    #[test]
    fn label_flip_negates(seed in 0u64..10_000) {
        let set = random_separable(seed, 3, 14);
        let flipped = TrainingSet::new(
            set.samples().iter().map(|s| LabeledSample::new(s.state.clone(), s.label.flipped())).collect(),
        ).unwrap();
        let a = train_svm(&set, &SolverConfig::default()).unwrap();
        let b = train_svm(&flipped, &SolverConfig::default()).unwrap();
        for (x, y) in a.w.iter().zip(&b.w) {
            prop_assert!((x + y).abs() < 1e-6 * (1.0 + x.abs()));
        }
        prop_assert!((a.b + b.b).abs() < 1e-6 * (1.0 + a.b.abs()));
    }

    #[test]
    fn translation_shifts_offset_only(seed in 0u64..10_000, shift in -10.0f64..10.0) {
        let set = random_separable(seed, 3, 14);
        let c: Vec<f64> = (0..set.dim()).map(|i| shift * (i as f64 + 1.0) / 3.0).collect();
        let moved = TrainingSet::new(
            set.samples()
                .iter()
                .map(|s| LabeledSample::new(s.state.iter().zip(&c).map(|(x, d)| x + d).collect(), s.label))
                .collect(),
        ).unwrap();
        let a = train_svm(&set, &SolverConfig::default()).unwrap();
        let b = train_svm(&moved, &SolverConfig::default()).unwrap();
        for (x, y) in a.w.iter().zip(&b.w) {
            prop_assert!((x - y).abs() < 1e-6 * (1.0 + x.abs()));
        }
        let expected = a.b - common::dot(&a.w, &c);
        prop_assert!((b.b - expected).abs() < 1e-5 * (1.0 + expected.abs()), "{} vs {}", b.b, expected);
    }

    #[test]
    fn trained_model_separates_training_set(seed in 0u64..10_000) {
        let set = random_separable(seed, 3, 20);
        let hyp = train_svm(&set, &SolverConfig::default()).unwrap();
        for s in set.samples() {
            let v = hyp.decision_value(&s.state).unwrap();
            prop_assert!(s.label.value() * v >= 1.0 - 1e-5);
        }
    }
}

#[test]
fn two_sensor_scenario_matches_enumeration() {
    use ota_anomaly::config::bundled;
    use ota_anomaly::{parse_config, Pipeline};
    let (scenario, config) = parse_config(bundled::SEC5A).unwrap();
    let set = Pipeline::training_samples(&scenario, &config).unwrap().set;
    assert_eq!(set.len(), 200);
    let hyp = train_svm(&set, &SolverConfig::default()).unwrap();
    let (xs, ys) = split(&set);
    let (w, b) = kkt_enumeration(&xs, &ys).unwrap();
    let (n_ours, n_oracle) = (hyp.norm_sq().sqrt(), common::dot(&w, &w).sqrt());
    for (a, o) in hyp.w.iter().zip(&w) {
        assert!((a / n_ours - o / n_oracle).abs() < 1e-4);
    }
    assert!((hyp.b / n_ours - b / n_oracle).abs() < 1e-4);
    let margin = hyp.margin().unwrap();
    assert!(rel(margin, 2.0 / n_oracle) < 1e-4, "margin {margin} vs {}", 2.0 / n_oracle);
}

use ota_anomaly::config::bundled;
use ota_anomaly::montecarlo::{write_map_csv, write_sweep_csv, TestState};
use ota_anomaly::{parse_config, Experiment, OperatingPoint, Pipeline, PowerMapping, Scheme, SeparatingHyperplane, SolverConfig};

fn in_pool<T: Send>(threads: usize, f: impl FnOnce() -> T + Send) -> T {
    rayon::ThreadPoolBuilder::new().num_threads(threads).build().unwrap().install(f)
}

#[test]
fn results_do_not_depend_on_thread_count() {
    let (scenario, config) = parse_config(bundled::SEC5A).unwrap();
    let p = Pipeline::train(scenario, config, &SolverConfig::default()).unwrap();
    let tests = p.test_states(40).unwrap();
    let op = p.operating_point(&tests, 0.0).unwrap();
    let run = || {
        let mut out = Vec::new();
        for scheme in [Scheme::Ei, Scheme::Tdma] {
            let reports = p.experiment.reliability_sweep(scheme, &op, &[2, 8, 32], &[0.0, 10.0], &tests, 200).unwrap();
            write_sweep_csv(&reports, &mut out).unwrap();
        }
        let map = p.experiment.reliability_map(Scheme::Ei, &op, 16, p.scenario.ranges(), 6, 100).unwrap();
        write_map_csv(&map, &mut out).unwrap();
        out
    };
    let one = in_pool(1, run);
    let four = in_pool(4, run);
    assert_eq!(one, four);
    assert_eq!(one, run());
}

#[test]
fn single_node_schemes_coincide() {
    let hyp = SeparatingHyperplane::new(vec![1.0], -0.5).unwrap();
    let mapping = PowerMapping::new(0.0, 1.0, 1e-4).unwrap();
    let exp = Experiment::unit_gains(hyp.clone(), mapping, 17);
    let tests: Vec<TestState> = [0.1, 0.3, 0.45, 0.55, 0.7, 0.9]
        .iter()
        .map(|&s| TestState::new(&hyp, vec![s], None).unwrap())
        .collect();
    let base = OperatingPoint::noiseless(0.5e-4).with_snr_db(0.0);
    let trials = 4000;
    for uses in [1, 4, 16] {
        let ei = exp.estimate_reliability(Scheme::Ei, &base, uses, &tests, trials).unwrap();
        let tdma = exp.estimate_reliability(Scheme::Tdma, &base, uses, &tests, trials).unwrap();
        let se = (ei.aggregate_std_error.powi(2) + tdma.aggregate_std_error.powi(2)).sqrt();
        assert!((ei.aggregate - tdma.aggregate).abs() < 4.0 * se + 1e-12, "M = {uses}: {} vs {}", ei.aggregate, tdma.aggregate);
    }
}

#[test]
fn noiseless_channel_is_always_right() {
    let (scenario, config) = parse_config(bundled::SEC5A).unwrap();
    let p = Pipeline::train(scenario, config, &SolverConfig::default()).unwrap();
    let tests = p.test_states(30).unwrap();
    let op = OperatingPoint::noiseless(1.0);
    for scheme in [Scheme::Ei, Scheme::Tdma] {
        // Random phases still interfere in EI, so only TDMA is exact at one use.
        let uses = if scheme == Scheme::Ei { 4096 } else { 1 };
        let r = p.experiment.estimate_reliability(scheme, &op, uses, &tests, 20).unwrap();
        assert!(r.aggregate > 0.99, "{scheme}: {}", r.aggregate);
    }
}

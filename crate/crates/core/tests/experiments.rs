use rewardot::lab::{
    inferred_reward, median, run_experiment, ExperimentConfig, ExperimentKind, NoiseModel,
    ResultRecord,
};

fn values(records: &[ResultRecord], metric: &str, variable: f64) -> Vec<f64> {
    records
        .iter()
        .filter(|r| r.metric == metric && r.variable == variable && r.seed.is_some())
        .map(|r| r.value)
        .collect()
}

#[test]
fn zero_noise_reproduces_the_convergence_reward() {
    let mut converge = ExperimentConfig::new(ExperimentKind::Converge);
    converge.seeds = vec![0, 1, 2];
    converge.irl.iterations = 300;
    converge.trajectory_counts = vec![32];
    let mut noise = converge.clone();
    noise.kind = ExperimentKind::Noise;
    noise.trajectory_counts = vec![];
    noise.noise_levels = vec![0.0, 0.1];
    noise.noise_trajectories = 32;

    let clean = NoiseModel::uniform_mix(0.0).unwrap();
    for &seed in &converge.seeds {
        let a = inferred_reward(&converge, 32, seed, &clean).unwrap();
        let b = inferred_reward(&noise, 32, seed, &clean).unwrap();
        assert_eq!(a, b, "seed {seed}");
    }
    let records = run_experiment(&noise).unwrap();
    assert!(values(&records, "wp_noise", 0.0).iter().all(|&v| v == 0.0));
    assert!(values(&records, "wp_noise", 0.1).iter().all(|&v| v > 0.0));
}

#[test]
fn records_do_not_depend_on_seed_order() {
    let mut config = ExperimentConfig::new(ExperimentKind::Converge);
    config.seeds = vec![3, 1, 2];
    config.irl.iterations = 100;
    config.trajectory_counts = vec![8, 16];
    let a = run_experiment(&config).unwrap();
    config.seeds = vec![1, 2, 3];
    let b = run_experiment(&config).unwrap();
    let strip = |r: &[ResultRecord]| {
        r.iter()
            .map(|x| ResultRecord {
                wall_ms: 0,
                ..x.clone()
            })
            .collect::<Vec<_>>()
    };
    assert_eq!(strip(&a), strip(&b));
}

/// Large-sample proxy: 4096 demonstrations, 3 seeds, against the n = 8
/// median. MaxEnt recovers a shaped and rescaled reward rather than the
/// true one, so the distance levels off well above half the n = 8 median.
#[test]
#[ignore = "known to fail: wp_to_true levels off near 0.45 against an n = 8 median near 0.57"]
fn large_sample_halves_the_distance() {
    let mut config = ExperimentConfig::new(ExperimentKind::Converge);
    let small = run_experiment(&config).unwrap();
    let base = median(&values(&small, "wp_to_true", 8.0)).unwrap();
    config.trajectory_counts = vec![4096];
    config.seeds = vec![0, 1, 2];
    let large = run_experiment(&config).unwrap();
    let big = values(&large, "wp_to_true", 4096.0);
    eprintln!("n = 8 median {base:.4}, n = 4096 values {big:?}");
    assert!(big.iter().all(|&v| v <= base / 2.0));
}

use motion_lingua::eval::{
    default_fixed_thresholds, generate_synthetic, jitter_sweep, run_benchmark, JitterKind, SyntheticSpec,
    DEFAULT_FIXED_WINDOW, DEFAULT_JITTER_SWEEP,
};
use motion_lingua::PipelineConfig;

#[test]
fn adaptive_accuracy_degrades_monotonically_with_jitter() {
    let cfg = PipelineConfig::default();
    let grid = default_fixed_thresholds(&cfg);
    let mut mean = vec![0.0; DEFAULT_JITTER_SWEEP.len()];
    for seed in 0..20 {
        let spec = SyntheticSpec {
            seed,
            n_episodes: 50,
            ..SyntheticSpec::default()
        };
        let rows = jitter_sweep(&spec, &cfg, &DEFAULT_JITTER_SWEEP, &grid, DEFAULT_FIXED_WINDOW).unwrap();
        for (m, r) in mean.iter_mut().zip(&rows) {
            *m += r.adaptive_accuracy / 20.0;
        }
    }
    assert!(mean.windows(2).all(|w| w[1] <= w[0]), "{mean:?}");
}

#[test]
fn clean_signal_matches_ground_truth() {
    let cfg = PipelineConfig::default();
    let r = run_benchmark(
        &SyntheticSpec::default(),
        &cfg,
        &default_fixed_thresholds(&cfg),
        DEFAULT_FIXED_WINDOW,
    )
    .unwrap();
    assert!(r.adaptive.mean >= 0.99, "{}", r.adaptive.mean);
    let total: u64 = r.adaptive.confusion.values().flat_map(|row| row.values()).sum();
    assert_eq!(total, r.adaptive.steps);
    assert_eq!(r.adaptive.steps, r.fixed.steps);
}

#[test]
fn clean_signal_is_shared_across_jitter_levels() {
    let cfg = PipelineConfig::default();
    let clean = generate_synthetic(&SyntheticSpec::default(), &cfg).unwrap();
    for kind in [JitterKind::Uniform, JitterKind::GaussianTruncated] {
        let spec = SyntheticSpec {
            jitter_amplitude: 0.01,
            jitter_kind: kind,
            ..SyntheticSpec::default()
        };
        let noisy = generate_synthetic(&spec, &cfg).unwrap();
        for (c, n) in clean.iter().zip(&noisy) {
            assert_eq!(c.truth, n.truth);
            for (a, b) in c.trajectory.steps.iter().zip(&n.trajectory.steps) {
                for i in 0..6 {
                    assert!((a.action.get(i) - b.action.get(i)).abs() <= 0.01 + 1e-15);
                }
            }
        }
    }
}

#[test]
fn benchmark_report_is_deterministic() {
    let cfg = PipelineConfig::default();
    let spec = SyntheticSpec {
        seed: 9,
        n_episodes: 40,
        jitter_amplitude: 0.015,
        ..SyntheticSpec::default()
    };
    let grid = default_fixed_thresholds(&cfg);
    let a = serde_json::to_string(&run_benchmark(&spec, &cfg, &grid, DEFAULT_FIXED_WINDOW).unwrap()).unwrap();
    let b = serde_json::to_string(&run_benchmark(&spec, &cfg, &grid, DEFAULT_FIXED_WINDOW).unwrap()).unwrap();
    assert_eq!(a, b);
    assert!(a.starts_with("{\"adaptive\":"));
}

use behav_core::behavior::{
    calibrate_params, random_params, run_subject_scene, subject_scene_runs, time_deviation_error, Baseline,
    CalibrationConfig, Classifier, SceneConfig,
};
use behav_core::config::RunConfig;
use behav_core::dynamics::presets;
use behav_core::env::{EnvConfig, Maneuver};
use behav_core::traffic_graph::CentralitySeries;
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn small_scene() -> SceneConfig {
    SceneConfig { vehicle_count: 8, spawn_length: 400.0, duration: 20.0 }
}

#[test]
fn classify_is_deterministic() {
    let cfg = RunConfig::default();
    let a = cfg.classifier(25.0).unwrap();
    let b = cfg.classifier(25.0).unwrap();
    assert_eq!(a, b);
    let records = run_subject_scene(&cfg.env, &cfg.calibration.scene, &presets::aggressive(), 3).unwrap();
    assert_eq!(a.classify_all(&records).unwrap(), b.classify_all(&records).unwrap());
}

#[test]
fn calibration_never_ends_below_its_start() {
    let base = EnvConfig::default();
    let scene = small_scene();
    let baseline = Baseline::generate(&base, &scene, 500..505, Default::default()).unwrap();
    let classifier = Classifier::new(baseline, base.d_min);
    for seed in 0..4 {
        let cfg = CalibrationConfig {
            max_episodes: 8,
            tde_threshold: 0.0,
            rng_seed: seed,
            scene_seeds: vec![seed],
            scene: scene.clone(),
            ..CalibrationConfig::default()
        };
        let init = random_params(&mut ChaCha8Rng::seed_from_u64(seed));
        let report = calibrate_params(init, |p| subject_scene_runs(&base, &cfg, p), &classifier, &cfg).unwrap();
        assert!(!report.converged);
        assert_eq!(report.episodes.len(), 8);
        assert!(report.best_score >= report.episodes[0].score);
        assert!(report.episodes[0].accepted);
        let accepted: Vec<f64> = report.episodes.iter().filter(|e| e.accepted).map(|e| e.score).collect();
        assert!(accepted.windows(2).all(|w| w[1] > w[0]));
    }
}

#[test]
fn default_calibration_converges_within_budget() {
    let cfg = RunConfig::default();
    let classifier = cfg.classifier(cfg.env.d_min).unwrap();
    let cal = &cfg.calibration;
    let init = random_params(&mut ChaCha8Rng::seed_from_u64(0));
    let report = calibrate_params(init, |p| subject_scene_runs(&cfg.env, cal, p), &classifier, cal).unwrap();
    assert!(report.converged, "final tde {:?} after {} episodes", report.final_tde, report.episodes.len());
    assert!(report.episodes.len() <= cal.max_episodes);
    assert!(report.final_tde.unwrap() < cal.tde_threshold);
}

fn series(t0: f64, closeness: &[f64]) -> CentralitySeries {
    CentralitySeries {
        vehicle_id: 0,
        timestamps: (0..closeness.len()).map(|k| t0 + k as f64).collect(),
        closeness: closeness.to_vec(),
        degree: vec![0; closeness.len()],
    }
}

proptest! {
    #[test]
    fn tde_invariant_to_time_shift(
        values in proptest::collection::vec(0.0f64..1.0, 12..40),
        picks in proptest::collection::vec(0usize..12, 1..4),
        shift in -500.0f64..500.0,
    ) {
        let log: Vec<(f64, Maneuver)> = picks.iter().map(|&k| (k as f64 + 0.5, Maneuver::LaneChangeLeft)).collect();
        let shifted: Vec<(f64, Maneuver)> = log.iter().map(|&(t, m)| (t + shift, m)).collect();
        let a = time_deviation_error(&series(0.0, &values), &log).unwrap();
        let b = time_deviation_error(&series(shift, &values), &shifted).unwrap();
        prop_assert!((a - b).abs() < 1e-9, "{} vs {}", a, b);
    }
}

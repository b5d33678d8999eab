use meso_spectra::experiments::{
    coverage_at, read_report, report_paths, run_eigenvector_experiment, run_experiment, run_location_experiment,
    run_pushforward_experiment, write_report, Aggregates, ExperimentConfig, ExperimentReport,
};
use meso_spectra::model::Model;
use meso_spectra::predictor::predict_projection_norm;
use meso_spectra::quantiles::semicircle_quantiles;
use proptest::prelude::*;
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn config(json: &str) -> ExperimentConfig {
    ExperimentConfig::from_json(json).unwrap()
}

fn small_location() -> ExperimentConfig {
    config(
        r#"{
        "experiment": "location",
        "kind": {"type": "orth_invariant_additive", "spectrum": {"source": "semicircle_quantiles"}},
        "n_values": [150, 300],
        "theta_spec": {"type": "explicit", "values": [2.5, 1.8, -2.0]},
        "trials": 6,
        "seed": 11,
        "cross_validate": true
    }"#,
    )
}

#[test]
fn zero_rank_gives_empty_outlier_sets() {
    let cfg = config(
        r#"{
        "experiment": "location",
        "kind": {"type": "wigner"},
        "n_values": [40],
        "theta_spec": {"type": "explicit", "values": []},
        "trials": 3,
        "seed": 1
    }"#,
    );
    let report = run_location_experiment(&cfg).unwrap();
    assert_eq!(report.records.len(), 3);
    assert!(report.records.iter().all(|t| t.outliers.is_empty() && t.failure.is_none()));
    assert_eq!(report.aggregates.coverage, None);
}

#[test]
fn zero_base_has_exact_eigenvectors() {
    let cfg = config(
        r#"{
        "experiment": "eigenvector",
        "kind": {"type": "orth_invariant_additive", "spectrum": {"source": "constant", "value": 0.0}},
        "n_values": [60],
        "theta_spec": {"type": "explicit", "values": [2.0, 1.5, -3.0]},
        "trials": 4,
        "seed": 3
    }"#,
    );
    let report = run_eigenvector_experiment(&cfg).unwrap();
    for t in &report.records {
        assert_eq!(t.outliers.len(), 3);
        for o in &t.outliers {
            assert!((o.predicted.unwrap() - o.theta).abs() < 1e-12);
            assert!((o.realized - o.theta).abs() < 1e-10);
            assert!((o.proj_norm_pred.unwrap() - 1.0).abs() < 1e-12);
            assert!((o.proj_norm_meas.unwrap() - 1.0).abs() < 1e-10);
            assert!(o.residual.unwrap() < 1e-10);
        }
    }
}

#[test]
fn tied_spikes_split_the_projection() {
    let cfg = config(
        r#"{
        "experiment": "eigenvector",
        "kind": {"type": "orth_invariant_additive", "spectrum": {"source": "semicircle_quantiles"}},
        "n_values": [400],
        "m_rule": {"rule": "fixed", "m": 2},
        "theta_spec": {"type": "atom", "value": 2.5},
        "trials": 10,
        "seed": 5
    }"#,
    );
    let report = run_eigenvector_experiment(&cfg).unwrap();
    let single = predict_projection_norm(&Model::additive(semicircle_quantiles(400).unwrap()), 0.1, 2.5).unwrap();
    let mut sums = Vec::new();
    for t in &report.records {
        assert_eq!(t.outliers.len(), 2);
        assert!(t.outliers.iter().all(|o| o.tied_theta));
        sums.push(t.outliers.iter().map(|o| o.proj_norm_meas.unwrap()).sum::<f64>());
    }
    let median = meso_spectra::stats::median(&sums).unwrap();
    assert!((median - 2.0 * single).abs() < 0.1, "median sum {median} vs {}", 2.0 * single);
}

#[test]
fn master_equation_agrees_with_eigensolve() {
    let report = run_experiment(&small_location()).unwrap();
    assert_eq!(report.aggregates.failed_trials, 0);
    let worst = report.aggregates.max_cross_validation_delta.unwrap();
    assert!(worst < 1e-8, "cross-validation gap {worst}");
}

#[test]
fn multiplicative_cross_validation() {
    let cfg = config(
        r#"{
        "experiment": "eigenvector",
        "kind": {"type": "orth_invariant_multiplicative", "spectrum": {"source": "mp_quantiles", "phi": 0.25}},
        "n_values": [200],
        "theta_spec": {"type": "explicit", "values": [3.0, 1.5, -0.9]},
        "trials": 4,
        "seed": 8,
        "cross_validate": true
    }"#,
    );
    let report = run_experiment(&cfg).unwrap();
    assert!(report.aggregates.max_cross_validation_delta.unwrap() < 1e-8);
    for o in report.records.iter().flat_map(|t| &t.outliers).filter(|o| o.predicted.is_some()) {
        assert!(o.w_norm_meas.is_some() && o.w_norm_pred.is_some());
    }
}

#[test]
fn identical_seeds_give_identical_reports() {
    let cfg = small_location();
    let a = run_experiment(&cfg).unwrap();
    let b = run_experiment(&cfg).unwrap();
    assert_eq!(a.canonical_json().unwrap(), b.canonical_json().unwrap());
    let mut other = cfg.clone();
    other.seed += 1;
    let c = run_experiment(&other).unwrap();
    assert_ne!(a.canonical_json().unwrap(), c.canonical_json().unwrap());
}

#[test]
fn aggregates_ignore_record_order() {
    let report = run_experiment(&small_location()).unwrap();
    let mut shuffled = report.records.clone();
    shuffled.shuffle(&mut ChaCha8Rng::seed_from_u64(2));
    assert_eq!(Aggregates::compute(&shuffled), report.aggregates);
    assert_eq!(Aggregates::compute(&report.records), report.aggregates);
}

#[test]
fn report_files_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let report = run_experiment(&small_location()).unwrap();
    let stem = dir.path().join("run");
    write_report(&report, &stem).unwrap();
    let (json, csv) = report_paths(&stem);
    assert_eq!(read_report(&json).unwrap(), report);
    let rows = std::fs::read_to_string(csv).unwrap().lines().count();
    let outliers: usize = report.records.iter().map(|t| t.outliers.len()).sum();
    assert_eq!(rows, outliers + 1);
}

#[test]
fn empty_and_single_row_reports() {
    let dir = tempfile::tempdir().unwrap();
    let empty = ExperimentReport::new(small_location(), Vec::new(), 0.0);
    let stem = dir.path().join("empty");
    write_report(&empty, &stem).unwrap();
    let (json, csv) = report_paths(&stem);
    let doc: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(&json).unwrap()).unwrap();
    assert_eq!(doc["schema"], "meso-spectra/report/v1");
    assert_eq!(doc["records"], serde_json::json!([]));
    assert_eq!(
        std::fs::read_to_string(&csv).unwrap().trim_end(),
        "trial,rank,theta,predicted,realized,abs_error,proj_norm_pred,proj_norm_meas,residual"
    );

    let cfg = config(
        r#"{
        "experiment": "location",
        "kind": {"type": "wigner"},
        "n_values": [100],
        "theta_spec": {"type": "explicit", "values": [3.0]},
        "trials": 1,
        "seed": 4
    }"#,
    );
    let one = run_experiment(&cfg).unwrap();
    let stem = dir.path().join("one");
    write_report(&one, &stem).unwrap();
    assert_eq!(std::fs::read_to_string(report_paths(&stem).1).unwrap().lines().count(), 2);
}

#[test]
fn unwritable_path_leaves_no_files() {
    let dir = tempfile::tempdir().unwrap();
    let empty = ExperimentReport::new(small_location(), Vec::new(), 0.0);
    let stem = dir.path().join("missing").join("run");
    let err = write_report(&empty, &stem).unwrap_err();
    assert!(err.to_string().contains("missing"));
    assert!(!report_paths(&stem).0.exists());
}

#[test]
fn single_spike_pushforward_is_location_error() {
    let cfg = config(
        r#"{
        "experiment": "pushforward",
        "kind": {"type": "wigner"},
        "n_values": [300],
        "theta_spec": {"type": "explicit", "values": [2.0]},
        "trials": 3,
        "seed": 9
    }"#,
    );
    let report = run_pushforward_experiment(&cfg).unwrap();
    for t in &report.records {
        let o = &t.outliers[0];
        assert!((t.w1.unwrap() - (o.realized - 2.5).abs()).abs() < 1e-15);
    }
}

#[test]
fn atom_pushforward_is_close_at_large_n() {
    let cfg = config(
        r#"{
        "experiment": "pushforward",
        "kind": {"type": "wigner"},
        "n_values": [2000],
        "m_rule": {"rule": "fixed", "m": 5},
        "theta_spec": {"type": "atom", "value": 2.0},
        "trials": 2,
        "seed": 21
    }"#,
    );
    let report = run_pushforward_experiment(&cfg).unwrap();
    for t in &report.records {
        assert!(t.w1.unwrap() <= 0.1, "W1 = {:?}", t.w1);
    }
}

#[test]
fn pushforward_support_must_be_separated() {
    let bad = r#"{
        "experiment": "pushforward",
        "kind": {"type": "wigner"},
        "n_values": [100],
        "m_rule": {"rule": "power", "alpha": 0.5},
        "theta_spec": {"type": "uniform", "low": 0.8, "high": 2.0},
        "trials": 1,
        "seed": 1
    }"#;
    assert!(ExperimentConfig::from_json(bad).is_err());
}

#[test]
fn wrong_runner_is_rejected() {
    assert!(run_pushforward_experiment(&small_location()).is_err());
}

#[test]
fn impossible_band_fails_thresholds() {
    let mut cfg = small_location();
    cfg.epsilon = Some(1e-6);
    cfg.thresholds.min_coverage = Some(0.95);
    let report = run_experiment(&cfg).unwrap();
    let failures = report.threshold_failures();
    assert_eq!(failures.len(), 1);
    assert!(failures[0].starts_with("coverage"));
}

proptest! {
    #![proptest_config(ProptestConfig { cases: 64, failure_persistence: None, ..ProptestConfig::default() })]

    #[test]
    fn coverage_is_monotone_in_band(a in 0.0f64..0.3, b in 0.0f64..0.3) {
        static REPORT: std::sync::OnceLock<ExperimentReport> = std::sync::OnceLock::new();
        let report = REPORT.get_or_init(|| run_experiment(&small_location()).unwrap());
        let (lo, hi) = if a <= b { (a, b) } else { (b, a) };
        prop_assert!(coverage_at(&report.records, hi).unwrap() >= coverage_at(&report.records, lo).unwrap());
    }
}

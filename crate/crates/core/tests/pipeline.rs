//! Driver-level behavior of the prediction, classification and bench
//! pipelines on small instances.

use std::sync::Arc;

use proptest::prelude::*;
use rand::Rng;
use shadowkit::experiments::{run_classify, run_shadow_bench, ExperimentConfig};
use shadowkit::kernels::KernelSpec;
use shadowkit::predictor::{rmse, train_dirichlet, train_ridge, TrainingRecord, TrainingSet};
use shadowkit::rng;
use shadowkit::shadows::ClassicalShadow;

/// Records on a 1D grid with dummy one-qubit shadows; tests supply labels.
fn grid(points: &[f64]) -> Arc<TrainingSet> {
    let recs = points
        .iter()
        .map(|&x| TrainingRecord {
            x: vec![x],
            shadow: ClassicalShadow::new(1, vec![0], 0).unwrap(),
        })
        .collect();
    Arc::new(TrainingSet::new(1, recs).unwrap())
}

fn uniform(n: usize, seed: u64) -> Vec<f64> {
    let mut r = rng::stream(seed, 0);
    (0..n).map(|_| r.gen_range(-1.0..1.0)).collect()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn predictions_are_linear_in_labels(
        a in proptest::collection::vec(-1.0f64..1.0, 12),
        b in proptest::collection::vec(-1.0f64..1.0, 12),
        s in -3.0f64..3.0,
        x in -1.0f64..1.0,
    ) {
        let data = grid(&uniform(12, 1));
        let combo: Vec<f64> = a.iter().zip(&b).map(|(u, v)| u + s * v).collect();
        for model in [train_dirichlet(data.clone(), 3.0).unwrap(),
                      train_ridge(data.clone(), &KernelSpec::Gaussian { gamma: Some(2.0) }, 0.1).unwrap()] {
            let lhs = model.predict_from_labels(&[x], &combo).unwrap();
            let rhs = model.predict_from_labels(&[x], &a).unwrap() + s * model.predict_from_labels(&[x], &b).unwrap();
            prop_assert!((lhs - rhs).abs() < 1e-9);
        }
    }
}

#[test]
fn dirichlet_noise_shrinks_as_inverse_sqrt_n() {
    // Pure +-1 noise labels: the prediction's spread falls like N^{-1/2}.
    let spread = |n: usize| {
        let mut sq = 0.0;
        let reps = 300;
        for rep in 0..reps {
            let data = grid(&uniform(n, 1000 + rep));
            let model = train_dirichlet(data, 2.0).unwrap();
            let mut r = rng::stream(2000 + rep, n as u64);
            let labels: Vec<f64> = (0..n).map(|_| if r.gen_bool(0.5) { 1.0 } else { -1.0 }).collect();
            sq += model.predict_from_labels(&[0.2], &labels).unwrap().powi(2);
        }
        (sq / reps as f64).sqrt()
    };
    let slope = (spread(400) / spread(100)).ln() / 4f64.ln();
    assert!((slope + 0.5).abs() < 0.1, "slope {slope}");
}

#[test]
fn ridge_recovers_smooth_function() {
    let xs = uniform(60, 7);
    let data = grid(&xs);
    let f = |x: f64| (2.0 * x).sin();
    let labels: Vec<f64> = xs.iter().map(|&x| f(x)).collect();
    let model = train_ridge(data, &KernelSpec::Gaussian { gamma: Some(4.0) }, 1e-4).unwrap();
    let test = uniform(40, 8);
    let preds: Vec<f64> = test
        .iter()
        .map(|&x| model.predict_from_labels(&[x], &labels).unwrap())
        .collect();
    let truth: Vec<f64> = test.iter().map(|&x| f(x)).collect();
    assert!(rmse(&preds, &truth).unwrap() < 0.02);
}

#[test]
fn bench_error_decreases_with_shadow_size() {
    let cfg = ExperimentConfig::from_json(
        r#"{"seed": 3, "bench": {"n": 5, "state": "ghz", "r": 2, "eps": 0.25, "delta": 0.1,
            "t_values": [50, 500, 5000], "repeats": 5}}"#,
    )
    .unwrap();
    let dir = tempfile::tempdir().unwrap();
    let s = run_shadow_bench(&cfg, dir.path()).unwrap();
    let med: Vec<f64> = s.rows.iter().map(|r| r.median_max_error).collect();
    assert!(med[0] > med[1] && med[1] > med[2], "{med:?}");
    assert!(dir.path().join("bench.csv").exists() && dir.path().join("bench_raw.csv").exists());
}

#[test]
fn classify_confusion_covers_test_split() {
    let cfg = ExperimentConfig::from_json(
        r#"{"seed": 9, "family": {"name": "xxz_ratio", "n": 8, "delta": 0.5, "ratio_box": [0.0, 3.0]},
            "dataset": {"n_train": 10, "n_validation": 2, "n_test": 6, "shadow_size": 100,
                        "regions": [{"physical_box": [[0.1, 0.5]], "count": 9},
                                    {"physical_box": [[2.0, 3.0]], "count": 9}]},
            "classify": {"labels": {"kind": "reflection", "interval": 2}, "lambda_sq": 100.0}}"#,
    )
    .unwrap();
    let dir = tempfile::tempdir().unwrap();
    let s = run_classify(&cfg, dir.path()).unwrap();
    assert_eq!(s.confusion.total(), 6);
    assert_eq!(s.n_train, 12);
    for f in ["labels.csv", "embedding.csv", "model.json", "summary.json"] {
        assert!(dir.path().join(f).exists(), "{f}");
    }
}

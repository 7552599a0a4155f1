use std::sync::Mutex;

use lcshift::{Error, Scheme, ShiftEstimate, TwoSample};
use lcshift_harness::experiment::ConfiguredEstimators;
use lcshift_harness::{
    run_experiment, run_with, EstimatorKind, ExperimentConfig, ReplicationEstimator, RowKey,
};

fn small(schemes: &[Scheme], estimators: &[EstimatorKind], replications: usize) -> ExperimentConfig {
    ExperimentConfig {
        schemes: schemes.to_vec(),
        sizes: vec![(40, 40)],
        estimators: estimators.to_vec(),
        etas: vec![0.0],
        replications,
        seed: 17,
        workers: 2,
        ..ExperimentConfig::default()
    }
}

/// Records the data each row sees and returns the Gaussian MLE for both rows.
struct Recorder {
    seen: Mutex<Vec<(Vec<f64>, Vec<f64>)>>,
}

impl ReplicationEstimator for Recorder {
    fn rows(&self) -> Vec<RowKey> {
        [EstimatorKind::DiffMeans, EstimatorKind::ParametricMle]
            .map(|estimator| RowKey { estimator, eta: None })
            .to_vec()
    }

    fn estimate(&self, scheme: Scheme, ts: &TwoSample) -> Vec<lcshift::Result<ShiftEstimate>> {
        (0..2)
            .map(|_| {
                self.seen.lock().unwrap().push((ts.x().to_vec(), ts.y().to_vec()));
                scheme.parametric_mle(ts)
            })
            .collect()
    }
}

#[test]
fn all_rows_see_the_same_sample() {
    let rec = Recorder {
        seen: Mutex::new(Vec::new()),
    };
    let cfg = small(&[Scheme::Gaussian], &[EstimatorKind::DiffMeans], 12);
    let rows = run_with(&cfg, &rec).unwrap();
    let seen = rec.seen.into_inner().unwrap();
    assert_eq!(seen.len(), 24);
    let mut distinct = 0;
    for chunk in seen.chunks(2) {
        assert_eq!(chunk[0], chunk[1]);
    }
    for (i, a) in seen.iter().enumerate().step_by(2) {
        if seen[..i].iter().all(|b| b != a) {
            distinct += 1;
        }
    }
    assert_eq!(distinct, 12);
    // Both rows reproduce the oracle exactly.
    for row in &rows {
        assert_eq!(row.efficiency, 1.0);
    }
}

/// Fails on every third replication, keyed by the first observation.
struct Flaky;

impl ReplicationEstimator for Flaky {
    fn rows(&self) -> Vec<RowKey> {
        vec![RowKey {
            estimator: EstimatorKind::DiffMeans,
            eta: None,
        }]
    }

    fn estimate(&self, _: Scheme, ts: &TwoSample) -> Vec<lcshift::Result<ShiftEstimate>> {
        if ((ts.x()[0] * 1e6).abs() as u64).is_multiple_of(3) {
            vec![Err(Error::NonConvergence { max_iterations: 0 })]
        } else {
            vec![Ok(lcshift::diff_of_means(ts))]
        }
    }
}

#[test]
fn failures_are_counted_and_excluded() {
    let cfg = small(
        &[Scheme::Logistic, Scheme::Gamma],
        &[EstimatorKind::DiffMeans],
        60,
    );
    let rows = run_with(&cfg, &Flaky).unwrap();
    assert_eq!(rows.len(), 2);
    for row in &rows {
        assert_eq!(row.failures + row.replications, 60);
        assert!(row.failures > 0 && row.replications > 0);
    }
}

#[test]
fn configured_runs_account_for_every_replication() {
    let cfg = ExperimentConfig {
        etas: vec![0.0, 0.01],
        ..small(&Scheme::ALL, &EstimatorKind::ALL, 20)
    };
    let rows = run_experiment(&cfg).unwrap();
    assert_eq!(rows.len(), 4 * 4);
    assert_eq!(ConfiguredEstimators::from_config(&cfg).rows().len(), 4);
    for row in &rows {
        assert_eq!(row.failures + row.replications, 20);
    }
    let gaussian_mle = rows
        .iter()
        .find(|r| r.scheme == "gaussian" && r.estimator == "parametric_mle")
        .unwrap();
    assert_eq!(gaussian_mle.efficiency, 1.0);
}

#[test]
fn bookkeeping_example() {
    let cfg = ExperimentConfig {
        replications: 2,
        ..small(&[Scheme::Gaussian], &[EstimatorKind::DiffMeans], 2)
    };
    let rows = run_experiment(&cfg).unwrap();
    assert_eq!(rows.len(), 1);
    assert_eq!((rows[0].replications, rows[0].failures), (2, 0));
    assert_eq!(
        (rows[0].scheme.as_str(), rows[0].estimator.as_str()),
        ("gaussian", "diff_means")
    );
}

#[test]
fn results_do_not_depend_on_worker_count() {
    let one = ExperimentConfig {
        workers: 1,
        ..small(
            &[Scheme::Laplace],
            &[EstimatorKind::ScOneStep, EstimatorKind::DiffMeans],
            25,
        )
    };
    let four = ExperimentConfig {
        workers: 4,
        ..one.clone()
    };
    let (a, b) = (run_experiment(&one).unwrap(), run_experiment(&four).unwrap());
    assert_eq!(
        lcshift_harness::output::to_csv_string(&a),
        lcshift_harness::output::to_csv_string(&b)
    );
}

#[test]
fn invalid_config_is_a_config_error() {
    let cfg = ExperimentConfig {
        replications: 1,
        ..small(&[Scheme::Gaussian], &[EstimatorKind::DiffMeans], 2)
    };
    assert!(matches!(
        run_experiment(&cfg),
        Err(lcshift_harness::HarnessError::Config(_))
    ));
}

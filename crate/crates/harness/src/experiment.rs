//! Seeded Monte Carlo replication engine.

use lcshift::shift::{fit_pooled_smoothed_with_floor, one_step_with_model, preliminary};
use lcshift::{summarize, McSummary, Scheme, ShiftEstimate, TwoSample};
use rayon::prelude::*;

use crate::config::{EstimatorKind, ExperimentConfig};
use crate::error::{HarnessError, Result};
use crate::rng::replication_rng;

/// Bandwidth used when the variance gap of a pooled fit is not positive.
pub const BANDWIDTH_FLOOR: f64 = 1e-6;

/// One output row per (estimator, truncation level).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RowKey {
    pub estimator: EstimatorKind,
    /// Present only for the shape-constrained estimator.
    pub eta: Option<f64>,
}

/// Applies every configured estimator to one replication's data.
pub trait ReplicationEstimator: Sync {
    fn rows(&self) -> Vec<RowKey>;
    /// One result per entry of [`rows`](Self::rows), in the same order.
    fn estimate(&self, scheme: Scheme, ts: &TwoSample) -> Vec<lcshift::Result<ShiftEstimate>>;
}

/// The estimators named in an [`ExperimentConfig`].
#[derive(Debug, Clone)]
pub struct ConfiguredEstimators {
    pub estimators: Vec<EstimatorKind>,
    pub etas: Vec<f64>,
    pub ci_level: f64,
}

impl ConfiguredEstimators {
    pub fn from_config(cfg: &ExperimentConfig) -> Self {
        ConfiguredEstimators {
            estimators: cfg.estimators.clone(),
            etas: cfg.etas.clone(),
            ci_level: cfg.ci_level,
        }
    }

    fn shape_constrained(&self, ts: &TwoSample) -> Vec<lcshift::Result<ShiftEstimate>> {
        let pre = preliminary(ts);
        match fit_pooled_smoothed_with_floor(&pre, BANDWIDTH_FLOOR) {
            Ok((smoothed, floored)) => {
                if floored {
                    log::warn!("non-positive bandwidth; using floor {BANDWIDTH_FLOOR}");
                }
                self.etas
                    .iter()
                    .map(|eta| one_step_with_model(&pre, &smoothed, *eta, self.ci_level))
                    .collect()
            }
            Err(e) => vec![Err(e); self.etas.len()],
        }
    }
}

impl ReplicationEstimator for ConfiguredEstimators {
    fn rows(&self) -> Vec<RowKey> {
        self.estimators
            .iter()
            .flat_map(|&estimator| match estimator {
                EstimatorKind::ScOneStep => self
                    .etas
                    .iter()
                    .map(|eta| RowKey {
                        estimator,
                        eta: Some(*eta),
                    })
                    .collect(),
                _ => vec![RowKey { estimator, eta: None }],
            })
            .collect()
    }

    fn estimate(&self, scheme: Scheme, ts: &TwoSample) -> Vec<lcshift::Result<ShiftEstimate>> {
        let mut out = Vec::new();
        for estimator in &self.estimators {
            match estimator {
                EstimatorKind::ScOneStep => out.extend(self.shape_constrained(ts)),
                EstimatorKind::DiffMeans => {
                    out.push(Ok(lcshift::shift::diff_of_means_at_level(ts, self.ci_level)));
                }
                EstimatorKind::ParametricMle => out.push(scheme.parametric_mle_at_level(ts, self.ci_level)),
            }
        }
        out
    }
}

struct Replication {
    rows: Vec<lcshift::Result<ShiftEstimate>>,
    oracle: lcshift::Result<ShiftEstimate>,
}

/// Runs the configured estimators over every (scheme, size) cell.
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<Vec<McSummary>> {
    run_with(cfg, &ConfiguredEstimators::from_config(cfg))
}

/// Runs `estimator` over every cell of `cfg`. Rows come out ordered by
/// scheme, then size, then the estimator's row order.
pub fn run_with(cfg: &ExperimentConfig, estimator: &dyn ReplicationEstimator) -> Result<Vec<McSummary>> {
    cfg.validate()?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(cfg.workers)
        .build()
        .map_err(|e| HarnessError::Config(format!("cannot start {} workers: {e}", cfg.workers)))?;
    let keys = estimator.rows();
    let mut summaries = Vec::new();
    for (si, &scheme) in cfg.schemes.iter().enumerate() {
        for (zi, &(m, n)) in cfg.sizes.iter().enumerate() {
            let reps: Vec<Replication> = pool.install(|| {
                (0..cfg.replications)
                    .into_par_iter()
                    .map(|r| {
                        let mut rng = replication_rng(cfg.seed, si, zi, r);
                        match scheme.sample(m, n, &mut rng) {
                            Ok(ts) => Replication {
                                rows: estimator.estimate(scheme, &ts),
                                oracle: scheme.parametric_mle_at_level(&ts, cfg.ci_level),
                            },
                            Err(e) => Replication {
                                rows: vec![Err(e.clone()); keys.len()],
                                oracle: Err(e),
                            },
                        }
                    })
                    .collect()
            });
            summaries.extend(summarize_cell(scheme, m, n, &keys, &reps));
        }
    }
    Ok(summaries)
}

fn summarize_cell(
    scheme: Scheme,
    m: usize,
    n: usize,
    keys: &[RowKey],
    reps: &[Replication],
) -> Vec<McSummary> {
    let oracle: Vec<f64> = reps
        .iter()
        .filter_map(|r| r.oracle.as_ref().ok().map(|e| e.delta_hat))
        .collect();
    let oracle_variance = sample_variance(&oracle);
    if oracle.len() < reps.len() {
        log::warn!(
            "{scheme} {m}x{n}: oracle failed in {} replications",
            reps.len() - oracle.len()
        );
    }
    keys.iter()
        .enumerate()
        .map(|(k, key)| {
            let mut triples = Vec::with_capacity(reps.len());
            let mut failures = 0;
            for (r, rep) in reps.iter().enumerate() {
                match &rep.rows[k] {
                    Ok(e) => triples.push((e.delta_hat, e.ci_low, e.ci_high)),
                    Err(err) => {
                        failures += 1;
                        log::warn!(
                            "{scheme} {m}x{n} replication {r}: {}{} failed: {err}",
                            key.estimator,
                            key.eta.map(|e| format!(" (eta {e})")).unwrap_or_default()
                        );
                    }
                }
            }
            summarize(&triples, scheme.delta0(), m, n, oracle_variance).labelled(
                scheme.id(),
                key.estimator.id(),
                key.eta,
                failures,
            )
        })
        .collect()
}

fn sample_variance(v: &[f64]) -> f64 {
    if v.len() < 2 {
        return f64::NAN;
    }
    let mean = v.iter().sum::<f64>() / v.len() as f64;
    v.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (v.len() - 1) as f64
}

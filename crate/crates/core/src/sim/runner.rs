//! Replication orchestration: generate, fit with every configured estimator,
//! collect per-replication records and aggregate rows.
//!
//! Replications run on a rayon pool capped by `SINDEX_WORKERS`; records are
//! collected in replication order, so output is independent of scheduling.

use super::metrics::{median, medse_eta, mse_beta, mse_eta};
use super::pipeline::{fit_dataset, EstimatorKind, PipelineOptions};
use super::{gen_clean, gen_contaminated, Dataset, Scheme, SimConfig};
use crate::error::{Error, Result};
use rayon::prelude::*;
use std::time::Instant;

/// One replication × estimator outcome.
#[derive(Debug, Clone)]
pub struct RepRecord {
    pub scheme: Scheme,
    pub estimator: EstimatorKind,
    pub rep: usize,
    pub seed: u64,
    pub ok: bool,
    pub error: Option<String>,
    pub beta_hat: Vec<f64>,
    pub theta_star: Vec<f64>,
    pub h1: f64,
    pub h2: f64,
    pub gamma_hat: Option<f64>,
    pub alpha_hat: f64,
    /// ‖β̂ − β₀‖²
    pub sq_err_beta: f64,
    /// per-replication mean of (η₀(xᵢᵀβ₀) − η̂(xᵢᵀβ̂))² at the training points
    pub mean_sq_eta: f64,
    /// per-replication median of the same squared errors
    pub med_sq_eta: f64,
    pub wall_ms: u128,
}

/// Aggregates matching the study's reporting layout.
#[derive(Debug, Clone)]
pub struct AggregateRow {
    pub scheme: Scheme,
    pub estimator: EstimatorKind,
    pub mse_beta: f64,
    pub mse_eta: f64,
    pub medse_eta: f64,
    pub median_h1: f64,
    pub median_h2: f64,
    pub n_reps: usize,
    pub n_failed: usize,
}

#[derive(Debug, Clone)]
pub struct SimResult {
    pub records: Vec<RepRecord>,
    pub aggregates: Vec<AggregateRow>,
}

pub(crate) fn worker_count() -> usize {
    let cores = std::thread::available_parallelism().map_or(1, |c| c.get());
    match std::env::var("SINDEX_WORKERS") {
        Ok(v) => v.parse::<usize>().ok().filter(|&w| w >= 1).unwrap_or(cores).min(cores.max(1)),
        Err(_) => cores,
    }
}

fn generate(scheme: Scheme, n: usize, seed: u64, cfg: &SimConfig) -> Result<Dataset> {
    match scheme {
        Scheme::C0 => gen_clean(n, seed, cfg),
        s => gen_contaminated(n, s, seed, cfg),
    }
}

fn eta_sq_errors(data: &Dataset, cfg: &SimConfig, fit: &crate::estimator::IndexFit) -> Result<Vec<f64>> {
    let mut out = Vec::with_capacity(data.n());
    for i in 0..data.n() {
        let truth = cfg.link.eval(data.proj_row(&cfg.beta0, i));
        let u = data.proj_row(&fit.beta, i);
        let est = fit.eta_state.eval(u)?;
        out.push((truth - est) * (truth - est));
    }
    Ok(out)
}

fn run_one(
    rep: usize,
    cfg: &SimConfig,
    kind: EstimatorKind,
) -> RepRecord {
    let seed = cfg.base_seed ^ rep as u64;
    let start = Instant::now();
    let outcome = (|| -> Result<RepRecord> {
        let data = generate(cfg.scheme, cfg.n, seed, cfg)?;
        let opts = PipelineOptions::from_sim_config(cfg, kind, seed);
        let full = fit_dataset(&data, &opts)?;
        let sq: Vec<f64> = eta_sq_errors(&data, cfg, &full.fit)?;
        let mean_sq = sq.iter().sum::<f64>() / sq.len() as f64;
        let med_sq = median(&sq);
        let sq_err_beta: f64 = full
            .fit
            .beta
            .iter()
            .zip(&cfg.beta0)
            .map(|(a, b)| (a - b) * (a - b))
            .sum();
        Ok(RepRecord {
            scheme: cfg.scheme,
            estimator: kind,
            rep,
            seed,
            ok: true,
            error: None,
            beta_hat: full.fit.beta.clone(),
            theta_star: full.fit.theta_star.clone(),
            h1: full.fit.h1,
            h2: full.fit.h2,
            gamma_hat: full.fit.gamma_hat,
            alpha_hat: full.fit.alpha_hat,
            sq_err_beta,
            mean_sq_eta: mean_sq,
            med_sq_eta: med_sq,
            wall_ms: 0,
        })
    })();
    let wall_ms = start.elapsed().as_millis();
    match outcome {
        Ok(mut rec) => {
            rec.wall_ms = wall_ms;
            rec
        }
        Err(e) => RepRecord {
            scheme: cfg.scheme,
            estimator: kind,
            rep,
            seed,
            ok: false,
            error: Some(e.to_string()),
            beta_hat: vec![],
            theta_star: vec![],
            h1: f64::NAN,
            h2: f64::NAN,
            gamma_hat: None,
            alpha_hat: f64::NAN,
            sq_err_beta: f64::NAN,
            mean_sq_eta: f64::NAN,
            med_sq_eta: f64::NAN,
            wall_ms,
        },
    }
}

fn aggregate(records: &[RepRecord], cfg: &SimConfig) -> Vec<AggregateRow> {
    let mut rows = Vec::new();
    for &kind in &cfg.losses {
        let subset: Vec<&RepRecord> = records
            .iter()
            .filter(|r| r.estimator == kind)
            .collect();
        let ok: Vec<&&RepRecord> = subset.iter().filter(|r| r.ok).collect();
        let n_failed = subset.len() - ok.len();
        if ok.is_empty() {
            rows.push(AggregateRow {
                scheme: cfg.scheme,
                estimator: kind,
                mse_beta: f64::NAN,
                mse_eta: f64::NAN,
                medse_eta: f64::NAN,
                median_h1: f64::NAN,
                median_h2: f64::NAN,
                n_reps: subset.len(),
                n_failed,
            });
            continue;
        }
        let betas: Vec<Vec<f64>> = ok.iter().map(|r| r.beta_hat.clone()).collect();
        let mean_sq: Vec<f64> = ok.iter().map(|r| r.mean_sq_eta).collect();
        let med_sq: Vec<f64> = ok.iter().map(|r| r.med_sq_eta).collect();
        let h1s: Vec<f64> = ok.iter().map(|r| r.h1).collect();
        let h2s: Vec<f64> = ok.iter().map(|r| r.h2).collect();
        rows.push(AggregateRow {
            scheme: cfg.scheme,
            estimator: kind,
            mse_beta: mse_beta(&betas, &cfg.beta0),
            mse_eta: mse_eta(&mean_sq),
            medse_eta: medse_eta(&med_sq),
            median_h1: median(&h1s),
            median_h2: median(&h2s),
            n_reps: subset.len(),
            n_failed,
        });
    }
    rows
}

/// Run the configured study for one scheme. Failed replications are counted
/// and reported, never silently dropped; more than 20% failures aborts.
pub fn run_replications(cfg: &SimConfig) -> Result<SimResult> {
    cfg.validate()?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(worker_count())
        .build()
        .map_err(|e| Error::SimAborted(e.to_string()))?;

    let records: Vec<RepRecord> = pool.install(|| {
        (0..cfg.n_reps)
            .into_par_iter()
            .flat_map_iter(|rep| {
                cfg.losses
                    .iter()
                    .map(move |&kind| (rep, kind))
                    .collect::<Vec<_>>()
            })
            .map(|(rep, kind)| run_one(rep, cfg, kind))
            .collect()
    });
    // deterministic order: by replication then by estimator position
    let mut records = records;
    let kind_pos = |k: EstimatorKind| cfg.losses.iter().position(|&x| x == k).unwrap_or(0);
    records.sort_by_key(|r| (r.rep, kind_pos(r.estimator)));

    let failed = records.iter().filter(|r| !r.ok).count();
    if failed * 5 > records.len() {
        let examples: Vec<String> = records
            .iter()
            .filter(|r| !r.ok)
            .take(5)
            .map(|r| {
                format!(
                    "scheme {} estimator {} rep {} seed {}: {}",
                    r.scheme.name(),
                    r.estimator.name(),
                    r.rep,
                    r.seed,
                    r.error.as_deref().unwrap_or("unknown")
                )
            })
            .collect();
        return Err(Error::SimAborted(format!(
            "{failed}/{} replications failed; first failures: {}",
            records.len(),
            examples.join(" | ")
        )));
    }
    let aggregates = aggregate(&records, cfg);
    Ok(SimResult {
        records,
        aggregates,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn tiny_smoke_run_is_deterministic() {
        let mut cfg = SimConfig::default();
        cfg.n = 60;
        cfg.n_reps = 2;
        cfg.h1_grid = crate::sim::GridSpec::new(0.25, 0.25, 1);
        cfg.h2_grid = crate::sim::GridSpec::new(0.25, 0.25, 1);
        cfg.losses = vec![EstimatorKind::Classical];
        cfg.base_seed = 11;
        let a = run_replications(&cfg).unwrap();
        let b = run_replications(&cfg).unwrap();
        assert_eq!(a.records.len(), 2);
        for (x, y) in a.records.iter().zip(&b.records) {
            assert_eq!(x.beta_hat, y.beta_hat);
            assert_eq!(x.h1, y.h1);
        }
        assert_eq!(a.aggregates.len(), 1);
        assert!(a.aggregates[0].mse_beta.is_finite());
        // per-replication seeds are base ^ rep
        assert_eq!(a.records[0].seed, 11);
        assert_eq!(a.records[1].seed, 11 ^ 1);
    }
}

#[cfg(test)]
mod failure_tests {
    use super::*;

    #[test]
    fn aborts_when_most_replications_fail() {
        // n below the initial estimator's floor: every robust replication
        // errors out, tripping the 20% failure budget
        let mut cfg = SimConfig::default();
        cfg.n = 15;
        cfg.n_reps = 5;
        cfg.h1_grid = crate::sim::GridSpec::new(0.25, 0.25, 1);
        cfg.h2_grid = crate::sim::GridSpec::new(0.25, 0.25, 1);
        cfg.losses = vec![EstimatorKind::Robust];
        let err = run_replications(&cfg).unwrap_err();
        match err {
            crate::error::Error::SimAborted(msg) => {
                assert!(msg.contains("failed"), "{msg}");
                assert!(msg.contains("seed"), "report should carry seeds: {msg}");
            }
            other => panic!("expected abort, got {other:?}"),
        }
    }
}

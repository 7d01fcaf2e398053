//! Robust and classical K-fold cross-validation for the two smoothing
//! parameters: the profile bandwidth (steps 1–2 are refit per fold and the
//! held-out responses predicted through the refitted index) and the final
//! local-linear bandwidth (the full-sample index stays fixed; only the
//! smoother is refit per fold).

use crate::error::{Error, Result};
use crate::error_models::{ErrorModel, DEVIANCE_CAP};
use crate::estimator::{optimize_sphere, weight_tau, SphereConfig, WeightFn};
use crate::loss::LossSpec;
use crate::sim::Dataset;
use crate::smoother::{local_m_constant, local_m_linear, KernelKind, KernelSpec, SortedProjections};
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Outcome of a bandwidth selection run.
#[derive(Debug, Clone)]
pub struct CvResult {
    pub grid: Vec<f64>,
    pub scores: Vec<f64>,
    pub chosen: f64,
    pub fold_assignment: Vec<Vec<usize>>,
    /// per-grid-point count of held-out terms that had to fall back to the
    /// saturation value
    pub flagged_terms: Vec<usize>,
}

/// Split `0..n` into K folds whose sizes differ by at most one,
/// deterministically for a given seed.
pub fn kfold_partition(n: usize, k: usize, seed: u64) -> Result<Vec<Vec<usize>>> {
    if k < 2 || k > n {
        return Err(Error::InvalidInput(format!(
            "need 2 <= K <= n, got K = {k}, n = {n}"
        )));
    }
    let mut idx: Vec<usize> = (0..n).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    idx.shuffle(&mut rng);
    let mut folds = vec![Vec::with_capacity(n / k + 1); k];
    for (pos, i) in idx.into_iter().enumerate() {
        folds[pos % k].push(i);
    }
    Ok(folds)
}

/// Everything a fold refit needs. `loss` is the resolved estimation loss
/// (tuning constant already fixed; it is not re-estimated per fold).
#[derive(Debug, Clone)]
pub struct CvConfig {
    pub kernel: KernelKind,
    pub loss: LossSpec,
    pub model: ErrorModel,
    pub tau: WeightFn,
    /// tuning constant of the robust CV criterion itself
    pub rcv_c: f64,
    pub sphere: SphereConfig,
    pub local_tol: f64,
}

impl CvConfig {
    fn complement(&self, data: &Dataset, fold: &[usize]) -> Dataset {
        let mut in_fold = vec![false; data.n()];
        for &i in fold {
            in_fold[i] = true;
        }
        let keep: Vec<usize> = (0..data.n()).filter(|i| !in_fold[*i]).collect();
        data.subset(&keep)
    }
}

/// Per-fold step-1/2 refit followed by held-out prediction. Returns the
/// deviances d(yᵢ, ŷᵢ) of the held-out observations, with `None` marking
/// predictions that starved even after bandwidth expansion.
fn fold_deviances(
    h: f64,
    data: &Dataset,
    partition: &[Vec<usize>],
    cfg: &CvConfig,
) -> Result<Vec<Option<f64>>> {
    let mut devs: Vec<Option<f64>> = vec![None; data.n()];
    for fold in partition {
        let train = cfg.complement(data, fold);
        let tau_vals: Vec<f64> = (0..train.n())
            .map(|i| weight_tau(&cfg.tau, train.x_row(i)))
            .collect();
        let (beta, _, _) = optimize_sphere(
            |b| {
                crate::estimator::profile_objective_tau(
                    &train,
                    b,
                    h,
                    cfg.kernel,
                    &cfg.loss,
                    &cfg.model,
                    &tau_vals,
                    cfg.local_tol,
                )
            },
            data.q,
            &cfg.sphere,
        )?;
        let sp = SortedProjections::from_dataset(&train, &beta);
        let kspec = KernelSpec {
            kind: cfg.kernel,
            h,
        };
        for &i in fold {
            let u = data.proj_row(&beta, i);
            devs[i] = local_m_constant(&sp, u, kspec, &cfg.loss, &cfg.model, cfg.local_tol)
                .ok()
                .map(|fit| cfg.model.deviance(data.y[i], fit.a));
        }
    }
    Ok(devs)
}

/// Robust criterion `RCV(h) = Σᵢ ρ_T(√d(yᵢ, ŷᵢ)/c)`; failed predictions
/// contribute ρ_max. Bounded above by n·ρ_max.
pub fn rcv_score(h: f64, data: &Dataset, partition: &[Vec<usize>], cfg: &CvConfig) -> Result<(f64, usize)> {
    let rho = LossSpec::tukey(cfg.rcv_c);
    let devs = fold_deviances(h, data, partition, cfg)?;
    let mut score = 0.0;
    let mut flagged = 0;
    for d in devs {
        match d {
            Some(d) => score += rho.rho_tilde(d / (cfg.rcv_c * cfg.rcv_c)),
            None => {
                score += rho.rho_max();
                flagged += 1;
            }
        }
    }
    Ok((score, flagged))
}

/// Classical criterion `CCV(h) = Σᵢ d(yᵢ, ŷᵢ)`; saturated deviances
/// accumulate large (finite) values by construction.
pub fn ccv_score(h: f64, data: &Dataset, partition: &[Vec<usize>], cfg: &CvConfig) -> Result<(f64, usize)> {
    let devs = fold_deviances(h, data, partition, cfg)?;
    let mut score = 0.0;
    let mut flagged = 0;
    for d in devs {
        match d {
            Some(d) => score += d,
            None => {
                score += DEVIANCE_CAP;
                flagged += 1;
            }
        }
    }
    Ok((score, flagged))
}

fn argmin_smallest(grid: &[f64], scores: &[f64]) -> Result<f64> {
    let mut best: Option<(f64, f64)> = None;
    for (&h, &s) in grid.iter().zip(scores) {
        if !s.is_finite() {
            continue;
        }
        match best {
            // strict improvement only: ties keep the smaller bandwidth
            Some((_, bs)) if s >= bs => {}
            _ => best = Some((h, s)),
        }
    }
    best.map(|(h, _)| h)
        .ok_or_else(|| Error::CvFailed("every grid point failed".into()))
}

/// Select the step-1 bandwidth by K-fold CV: robust criterion for bounded
/// losses, classical criterion otherwise. Ties break toward the smaller
/// bandwidth; grids are scanned in increasing order.
pub fn select_h1(
    data: &Dataset,
    grid: &[f64],
    k: usize,
    seed: u64,
    cfg: &CvConfig,
) -> Result<CvResult> {
    if grid.is_empty() {
        return Err(Error::CvFailed("empty bandwidth grid".into()));
    }
    let mut grid = grid.to_vec();
    grid.sort_by(f64::total_cmp);
    let partition = kfold_partition(data.n(), k, seed)?;
    let mut scores = Vec::with_capacity(grid.len());
    let mut flags = Vec::with_capacity(grid.len());
    for &h in &grid {
        let (s, f) = if cfg.loss.is_bounded() {
            rcv_score(h, data, &partition, cfg)?
        } else {
            ccv_score(h, data, &partition, cfg)?
        };
        scores.push(s);
        flags.push(f);
    }
    let chosen = argmin_smallest(&grid, &scores)?;
    Ok(CvResult {
        grid,
        scores,
        chosen,
        fold_assignment: partition,
        flagged_terms: flags,
    })
}

/// Select the step-3 (local-linear) bandwidth with the index held fixed at
/// the full-sample estimate; only the smoother is refit per fold.
pub fn select_h2(
    data: &Dataset,
    beta_hat: &[f64],
    grid: &[f64],
    k: usize,
    seed: u64,
    cfg: &CvConfig,
) -> Result<CvResult> {
    if grid.is_empty() {
        return Err(Error::CvFailed("empty bandwidth grid".into()));
    }
    let mut grid = grid.to_vec();
    grid.sort_by(f64::total_cmp);
    let partition = kfold_partition(data.n(), k, seed)?;
    let rho = LossSpec::tukey(cfg.rcv_c);
    let mut scores = Vec::with_capacity(grid.len());
    let mut flags = Vec::with_capacity(grid.len());
    for &h in &grid {
        let kspec = KernelSpec {
            kind: cfg.kernel,
            h,
        };
        let mut score = 0.0;
        let mut flagged = 0usize;
        for fold in &partition {
            let train = cfg.complement(data, fold);
            let sp = SortedProjections::from_dataset(&train, beta_hat);
            for &i in fold {
                let u = data.proj_row(beta_hat, i);
                let pred = local_m_linear(&sp, u, kspec, &cfg.loss, &cfg.model, cfg.local_tol)
                    .ok()
                    .map(|f| f.a);
                match pred {
                    Some(yhat) => {
                        let d = cfg.model.deviance(data.y[i], yhat);
                        if cfg.loss.is_bounded() {
                            score += rho.rho_tilde(d / (cfg.rcv_c * cfg.rcv_c));
                        } else {
                            score += d;
                        }
                    }
                    None => {
                        score += if cfg.loss.is_bounded() {
                            rho.rho_max()
                        } else {
                            DEVIANCE_CAP
                        };
                        flagged += 1;
                    }
                }
            }
        }
        scores.push(score);
        flags.push(flagged);
    }
    let chosen = argmin_smallest(&grid, &scores)?;
    Ok(CvResult {
        grid,
        scores,
        chosen,
        fold_assignment: partition,
        flagged_terms: flags,
    })
}

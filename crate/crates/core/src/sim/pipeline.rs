//! The full fitting pipeline for one dataset: nuisance estimation (robust
//! branch), bandwidth selection by K-fold CV for the profile step, the
//! three-step fit, then bandwidth selection for the final local-linear
//! smoother along the fitted index.

use super::{Dataset, SimConfig};
use crate::bandwidth::{select_h1, select_h2, CvConfig, CvResult};
use crate::error::Result;
use crate::error_models::ErrorModel;
use crate::estimator::{
    fit_initial_s, fit_three_step, FitConfig, IndexFit, NuisanceFit, SphereConfig,
    WeightFn,
};
use crate::loss::LossSpec;
use crate::sim::metrics::median;
use crate::smoother::{KernelKind, KernelSpec};
use serde::{Deserialize, Serialize};

/// Which loss family drives the pipeline.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EstimatorKind {
    Classical,
    Robust,
}

impl EstimatorKind {
    pub fn name(&self) -> &'static str {
        match self {
            EstimatorKind::Classical => "classical",
            EstimatorKind::Robust => "robust",
        }
    }
}

/// Options of a full pipeline run.
#[derive(Debug, Clone)]
pub struct PipelineOptions {
    pub kind: EstimatorKind,
    pub kernel: KernelKind,
    pub h1_grid: Vec<f64>,
    pub h2_grid: Vec<f64>,
    pub k_folds: usize,
    pub cv_seed: u64,
    pub tau: WeightFn,
    pub b_const: f64,
    pub target_eff: f64,
    /// tuning constant of the robust CV criterion (held fixed during CV)
    pub rcv_c: f64,
    pub sphere: SphereConfig,
    pub local_tol: f64,
}

impl PipelineOptions {
    pub fn from_sim_config(cfg: &SimConfig, kind: EstimatorKind, cv_seed: u64) -> Self {
        PipelineOptions {
            kind,
            kernel: KernelKind::Epanechnikov,
            h1_grid: cfg.h1_grid.values(),
            h2_grid: cfg.h2_grid.values(),
            k_folds: cfg.k_folds,
            cv_seed,
            tau: WeightFn::default_for(cfg.n, cfg.q, cfg.tau_mode),
            b_const: 0.5,
            target_eff: 0.90,
            rcv_c: 1.6394,
            sphere: SphereConfig::default(),
            local_tol: 1e-8,
        }
    }
}

/// A completed pipeline fit.
#[derive(Debug, Clone)]
pub struct FullFit {
    pub fit: IndexFit,
    pub cv1: Option<CvResult>,
    pub cv2: Option<CvResult>,
    pub nuisance: Option<NuisanceFit>,
}

pub fn fit_dataset(data: &Dataset, opts: &PipelineOptions) -> Result<FullFit> {
    let model = ErrorModel::log_gamma(1.0)?; // the deviance does not involve γ
    let robust = matches!(opts.kind, EstimatorKind::Robust);

    // nuisance estimation happens once, before CV, at a pilot bandwidth
    let nuisance = if robust {
        let pilot_h = median(&opts.h1_grid);
        Some(fit_initial_s(
            data,
            pilot_h,
            opts.kernel,
            &model,
            &opts.tau,
            opts.b_const,
            opts.target_eff,
            &opts.sphere,
            opts.local_tol,
        )?)
    } else {
        None
    };
    let loss = if robust {
        LossSpec::tukey(nuisance.as_ref().expect("set above").c_hat)
    } else {
        LossSpec::classical()
    };

    let cv_cfg = CvConfig {
        kernel: opts.kernel,
        loss,
        model: model.clone(),
        tau: opts.tau.clone(),
        rcv_c: opts.rcv_c,
        sphere: opts.sphere.clone(),
        local_tol: opts.local_tol,
    };

    let (h1, cv1) = if opts.h1_grid.len() > 1 {
        let r = select_h1(data, &opts.h1_grid, opts.k_folds, opts.cv_seed, &cv_cfg)?;
        (r.chosen, Some(r))
    } else {
        (opts.h1_grid[0], None)
    };

    let mut fit_cfg = FitConfig::new(loss, model, h1, h1, opts.tau.clone());
    fit_cfg.kernel = opts.kernel;
    fit_cfg.b_const = opts.b_const;
    fit_cfg.target_eff = opts.target_eff;
    fit_cfg.sphere = opts.sphere.clone();
    fit_cfg.local_tol = opts.local_tol;
    fit_cfg.nuisance = nuisance.clone();
    let mut fit = fit_three_step(data, &fit_cfg)?;

    let (h2, cv2) = if opts.h2_grid.len() > 1 {
        let r = select_h2(
            data,
            &fit.beta,
            &opts.h2_grid,
            opts.k_folds,
            opts.cv_seed,
            &cv_cfg,
        )?;
        (r.chosen, Some(r))
    } else {
        (opts.h2_grid[0], None)
    };
    fit.h2 = h2;
    fit.eta_state.kernel = KernelSpec {
        kind: opts.kernel,
        h: h2,
    };

    Ok(FullFit {
        fit,
        cv1,
        cv2,
        nuisance,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sim::gen_clean;

    #[test]
    fn classical_pipeline_end_to_end() {
        let mut cfg = SimConfig::default();
        cfg.h1_grid = crate::sim::GridSpec::new(0.1, 0.3, 3);
        cfg.h2_grid = crate::sim::GridSpec::new(0.1, 0.3, 3);
        let data = gen_clean(80, 42, &cfg).unwrap();
        let opts = PipelineOptions::from_sim_config(&cfg, EstimatorKind::Classical, 42);
        let full = fit_dataset(&data, &opts).unwrap();
        assert!(full.nuisance.is_none());
        assert!(full.cv1.is_some() && full.cv2.is_some());
        assert!(cfg.h1_grid.values().contains(&full.fit.h1));
        assert!(cfg.h2_grid.values().contains(&full.fit.h2));
        let err: f64 = full
            .fit
            .beta
            .iter()
            .zip(&cfg.beta0)
            .map(|(a, b)| (a - b) * (a - b))
            .sum();
        assert!(err < 0.1, "pipeline index error {err}");
    }

    #[test]
    fn fixed_bandwidths_skip_cv() {
        let mut cfg = SimConfig::default();
        cfg.h1_grid = crate::sim::GridSpec::new(0.2, 0.2, 1);
        cfg.h2_grid = crate::sim::GridSpec::new(0.2, 0.2, 1);
        let data = gen_clean(60, 3, &cfg).unwrap();
        let opts = PipelineOptions::from_sim_config(&cfg, EstimatorKind::Classical, 3);
        let full = fit_dataset(&data, &opts).unwrap();
        assert!(full.cv1.is_none() && full.cv2.is_none());
        assert_eq!(full.fit.h1, 0.2);
        assert_eq!(full.fit.h2, 0.2);
    }
}

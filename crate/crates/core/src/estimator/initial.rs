//! Initial S-estimators of the index and the nuisance parameter.
//!
//! For each candidate index the link is estimated by local S-locations
//! (minimizing the local M-scale of the deviances), a trimmed global M-scale
//! of the residual deviances gives σ̃(β), the index minimizing σ̃ gives the
//! initial estimate and the scale ŝ_n. Inverting the calibration curve S*
//! turns ŝ_n into a shape estimate γ̂, which in turn fixes the tuning constant
//! ĉ = max(c(γ̂), ŝ_n) for the efficient profile steps.

use super::sphere::{optimize_sphere, SphereConfig};
use super::{weight_tau, WeightFn};
use crate::error::{Error, Result};
use crate::error_models::ErrorModel;
use crate::loss::{calibrate_tuning, s_star_inverse};
use crate::sim::Dataset;
use crate::smoother::{local_s_location, scale_root, KernelKind, KernelSpec, ScaleSolution, SortedProjections};

/// Initial (S-step) estimates feeding the efficient profile steps.
#[derive(Debug, Clone)]
pub struct NuisanceFit {
    pub gamma_hat: f64,
    /// global S-scale ŝ_n = σ̃(β̃)
    pub s_n: f64,
    /// tuning constant for the M-steps, never below ŝ_n
    pub c_hat: f64,
    pub beta_tilde: Vec<f64>,
    /// initial link values at the training projections (along β̃)
    pub eta_tilde: Vec<f64>,
    /// γ̂ hit the boundary of the invertible range of S*
    pub gamma_clamped: bool,
}

/// Global M-scale of residual deviances under trimming weights: the root of
/// `Σ ρ_T(√dᵢ/σ) τᵢ = b Σ τᵢ`.
pub fn global_scale(devs: &[f64], tau_weights: &[f64], b_const: f64) -> Result<ScaleSolution> {
    let total: f64 = tau_weights.iter().sum();
    if !(total > 0.0) {
        return Err(Error::InvalidInput(
            "global scale needs positive total trimming weight".into(),
        ));
    }
    Ok(scale_root(tau_weights, devs, b_const, 1e-10))
}

fn sigma_tilde(
    data: &Dataset,
    beta: &[f64],
    kernel: KernelSpec,
    model: &ErrorModel,
    tau_vals: &[f64],
    b_const: f64,
    tol: f64,
) -> Result<(f64, Vec<f64>)> {
    let sp = SortedProjections::from_dataset(data, beta);
    let mut devs = Vec::new();
    let mut wts = Vec::new();
    let mut eta = vec![f64::NAN; data.n()];
    for j in 0..sp.len() {
        let t = tau_vals[sp.order[j]];
        if t == 0.0 || sp.cw[j] == 0.0 {
            continue;
        }
        let (a, _, _) = local_s_location(&sp, sp.proj[j], kernel, model, b_const, tol)?;
        eta[sp.order[j]] = a;
        devs.push(model.deviance(sp.y[j], a));
        wts.push(t * sp.cw[j]);
    }
    let sol = global_scale(&devs, &wts, b_const)?;
    Ok((sol.s, eta))
}

/// Steps ILG.1–ILG.3: initial S-estimation of the index, the scale, the
/// shape parameter and the tuning constant.
#[allow(clippy::too_many_arguments)]
pub fn fit_initial_s(
    data: &Dataset,
    h1: f64,
    kernel: KernelKind,
    model: &ErrorModel,
    tau: &WeightFn,
    b_const: f64,
    target_eff: f64,
    sphere: &SphereConfig,
    tol: f64,
) -> Result<NuisanceFit> {
    if data.n() < 10 * data.q {
        return Err(Error::InitialFitFailed(format!(
            "need at least {} observations for q = {}, got {}",
            10 * data.q,
            data.q,
            data.n()
        )));
    }
    let tau_vals: Vec<f64> = (0..data.n()).map(|i| weight_tau(tau, data.x_row(i))).collect();
    let kspec = KernelSpec { kind: kernel, h: h1 };

    // the initial estimator only needs statistical, not numerical, accuracy:
    // a coarser sphere sweep and coarser local searches suffice
    let coarse_tol = tol.max(1e-4);
    let sphere = SphereConfig {
        grid_points: sphere.grid_points.min(32),
        tol: sphere.tol.max(1e-3),
        ..sphere.clone()
    };
    let (beta_tilde, s_n_coarse, _) = optimize_sphere(
        |b| sigma_tilde(data, b, kspec, model, &tau_vals, b_const, coarse_tol).map(|(s, _)| s),
        data.q,
        &sphere,
    )?;
    let (s_n, eta_tilde) =
        sigma_tilde(data, &beta_tilde, kspec, model, &tau_vals, b_const, tol)?;
    let s_n = if s_n > 0.0 { s_n } else { s_n_coarse };
    if !(s_n > 1e-6) {
        return Err(Error::InitialFitFailed(format!(
            "global S-scale equation degenerated (s_n = {s_n:.3e})"
        )));
    }

    let (gamma_hat, gamma_clamped) = s_star_inverse(s_n, b_const)?;
    let cal = calibrate_tuning(gamma_hat, target_eff, s_n)?;
    Ok(NuisanceFit {
        gamma_hat,
        s_n,
        c_hat: cal.c,
        beta_tilde,
        eta_tilde,
        gamma_clamped,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::estimator::TauMode;
    use crate::loss::LossSpec;
    use crate::sim::{gen_clean, SimConfig};

    #[test]
    fn global_scale_consistency() {
        let devs = [0.3, 0.9, 0.05, 2.4, 0.7];
        let tau = [1.0, 1.0, 0.0, 1.0, 1.0];
        let sol = global_scale(&devs, &tau, 0.5).unwrap();
        let loss = LossSpec::tukey(1.0);
        let lhs: f64 = devs
            .iter()
            .zip(&tau)
            .map(|(d, t)| t * loss.rho_tilde(d / (sol.s * sol.s)))
            .sum();
        let rhs = 0.5 * tau.iter().sum::<f64>();
        assert!((lhs - rhs).abs() < 1e-9);
    }

    #[test]
    fn initial_fit_on_clean_data_recovers_shape_band() {
        // Monte Carlo sanity band for the shape estimate: median over a few
        // replications of gamma_hat should sit near the true 3
        let cfg = SimConfig::default();
        let model = ErrorModel::log_gamma(3.0).unwrap();
        let tau = WeightFn::default_for(200, 2, TauMode::Indicator);
        let mut gammas = Vec::new();
        for seed in 0..7u64 {
            let data = gen_clean(200, 1000 + seed, &cfg).unwrap();
            let nu = fit_initial_s(
                &data,
                0.2,
                KernelKind::Epanechnikov,
                &model,
                &tau,
                0.5,
                0.90,
                &SphereConfig {
                    tol: 1e-4,
                    ..SphereConfig::default()
                },
                1e-6,
            )
            .unwrap();
            assert!(nu.c_hat >= nu.s_n, "tuning constant below the scale floor");
            assert!(nu.gamma_hat > 0.0);
            gammas.push(nu.gamma_hat);
        }
        gammas.sort_by(f64::total_cmp);
        let med = gammas[gammas.len() / 2];
        assert!(
            (2.0..=4.5).contains(&med),
            "median gamma_hat {med} outside the sanity band {gammas:?}"
        );
    }

    #[test]
    fn initial_fit_rejects_tiny_samples() {
        let cfg = SimConfig::default();
        let data = gen_clean(15, 3, &cfg).unwrap();
        let model = ErrorModel::log_gamma(3.0).unwrap();
        let tau = WeightFn::default_for(15, 2, TauMode::Indicator);
        let err = fit_initial_s(
            &data,
            0.2,
            KernelKind::Epanechnikov,
            &model,
            &tau,
            0.5,
            0.90,
            &SphereConfig::default(),
            1e-6,
        )
        .unwrap_err();
        assert!(matches!(err, Error::InitialFitFailed(_)));
    }

    #[test]
    fn initial_fit_degenerates_on_noiseless_data() {
        // exactly representable responses: every local S-scale is zero and
        // the global equation cannot reach b
        let mut cfg = SimConfig::default();
        cfg.link = crate::sim::LinkFn::Flat;
        let mut data = gen_clean(60, 5, &cfg).unwrap();
        for y in &mut data.y {
            *y = 0.0;
        }
        let model = ErrorModel::log_gamma(3.0).unwrap();
        let tau = WeightFn::default_for(60, 2, TauMode::Indicator);
        let err = fit_initial_s(
            &data,
            0.3,
            KernelKind::Epanechnikov,
            &model,
            &tau,
            0.5,
            0.90,
            &SphereConfig {
                grid_points: 8,
                tol: 1e-3,
                ..SphereConfig::default()
            },
            1e-5,
        )
        .unwrap_err();
        assert!(matches!(err, Error::InitialFitFailed(_)));
    }
}

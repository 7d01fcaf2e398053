//! Plug-in sandwich covariance of the index estimator.
//!
//! With score ψ(yᵢ, η̂(β̂ᵀxᵢ)) τ(xᵢ) ν̂ᵢ, where ν̂ᵢ = ∂η̂/∂β + ∂η̂/∂u · xᵢ, the
//! (q−1)-dimensional free block of β̂ satisfies
//! `√n (β̂^{(q−1)} − β₀^{(q−1)}) → N(0, B₁⁻¹ Σ₁ B₁⁻ᵀ)` with
//! `B = E[χ τ ν νᵀ]` and `Σ = E[ψ² τ² ν νᵀ]`; the θ*-parametrization scales
//! the block by 1/β̂_q².

use super::IndexFit;
use crate::error::{Error, Result};
use crate::sim::Dataset;
use crate::smoother::{eta_derivatives, local_m_constant, KernelKind, KernelSpec, SortedProjections};
use crate::estimator::WeightFn;
use nalgebra::DMatrix;

#[derive(Debug, Clone)]
pub struct CovarianceReport {
    /// B̂ = (1/n) Σ χᵢ τᵢ ν̂ᵢ ν̂ᵢᵀ (q × q)
    pub b_hat: DMatrix<f64>,
    /// Σ̂ = (1/n) Σ ψᵢ² τᵢ² ν̂ᵢ ν̂ᵢᵀ (q × q)
    pub sigma_hat: DMatrix<f64>,
    /// covariance of β̂^{(q−1)}: B̂₁⁻¹ Σ̂₁ B̂₁⁻ᵀ / n
    pub cov_beta_sub: DMatrix<f64>,
    /// covariance of θ̂*: the β block divided by β̂_q²
    pub cov_theta_star: DMatrix<f64>,
}

/// Plug-in covariance at a converged fit. Derivative sums require a
/// continuously differentiable kernel, so the Gaussian kernel is used at the
/// fit's step-1 bandwidth regardless of the kernel used for estimation.
pub fn asymptotic_covariance(
    fit: &IndexFit,
    data: &Dataset,
    tau: &WeightFn,
) -> Result<CovarianceReport> {
    let q = data.q;
    let n = data.n();
    let kernel = KernelSpec {
        kind: KernelKind::Gaussian,
        h: fit.h1,
    };
    let loss = fit.eta_state.loss;
    let model = &fit.eta_state.model;
    let beta = &fit.beta;
    let sp = SortedProjections::from_dataset(data, beta);

    let mut b_hat = DMatrix::<f64>::zeros(q, q);
    let mut sigma_hat = DMatrix::<f64>::zeros(q, q);
    for i in 0..n {
        let t = super::weight_tau(tau, data.x_row(i));
        if t == 0.0 {
            continue;
        }
        let u = data.proj_row(beta, i);
        let fit_u = local_m_constant(&sp, u, kernel, &loss, model, 1e-10)?;
        let (du, dbeta) = eta_derivatives(data, beta, u, kernel, &loss, model, fit_u.a)?;
        let x = data.x_row(i);
        let nu: Vec<f64> = (0..q).map(|j| dbeta[j] + du * x[j]).collect();
        let psi = loss.psi(model, data.y[i], fit_u.a);
        let chi = loss.chi(model, data.y[i], fit_u.a);
        for a in 0..q {
            for b in 0..q {
                let outer = nu[a] * nu[b];
                b_hat[(a, b)] += chi * t * outer;
                sigma_hat[(a, b)] += psi * psi * t * t * outer;
            }
        }
    }
    b_hat /= n as f64;
    sigma_hat /= n as f64;

    let b1 = b_hat.view((0, 0), (q - 1, q - 1)).into_owned();
    let s1 = sigma_hat.view((0, 0), (q - 1, q - 1)).into_owned();
    let svd = b1.clone().svd(false, false);
    let smax = svd.singular_values.max();
    let smin = svd.singular_values.min();
    if !(smin > 0.0) || smax / smin > 1e10 {
        return Err(Error::DegenerateInformation(format!(
            "B1 condition number {:.3e}",
            if smin > 0.0 { smax / smin } else { f64::INFINITY }
        )));
    }
    let b1_inv = b1
        .try_inverse()
        .ok_or_else(|| Error::DegenerateInformation("B1 not invertible".into()))?;
    let cov_beta_sub = (&b1_inv * s1 * b1_inv.transpose()) / n as f64;
    let bq = beta[q - 1];
    let cov_theta_star = &cov_beta_sub / (bq * bq);
    Ok(CovarianceReport {
        b_hat,
        sigma_hat,
        cov_beta_sub,
        cov_theta_star,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::error_models::ErrorModel;
    use crate::estimator::{fit_three_step, FitConfig, TauMode, WeightFn};
    use crate::loss::LossSpec;
    use crate::sim::{gen_clean, SimConfig};

    fn clean_fit(seed: u64, n: usize) -> (Dataset, IndexFit, WeightFn) {
        let cfg_sim = SimConfig::default();
        let data = gen_clean(n, seed, &cfg_sim).unwrap();
        let tau = WeightFn::default_for(n, 2, TauMode::Indicator);
        let model = ErrorModel::log_gamma(3.0).unwrap();
        let mut cfg = FitConfig::new(LossSpec::tukey(1.6), model, 0.15, 0.15, tau.clone());
        cfg.kernel = crate::smoother::KernelKind::Gaussian;
        cfg.nuisance = Some(crate::estimator::NuisanceFit {
            gamma_hat: 3.0,
            s_n: 0.65,
            c_hat: 1.6,
            beta_tilde: cfg_sim.beta0.clone(),
            eta_tilde: vec![],
            gamma_clamped: false,
        });
        let fit = fit_three_step(&data, &cfg).unwrap();
        (data, fit, tau)
    }

    #[test]
    fn sigma_positive_semidefinite() {
        let (data, fit, tau) = clean_fit(5, 120);
        let rep = asymptotic_covariance(&fit, &data, &tau).unwrap();
        let eig = rep.sigma_hat.clone().symmetric_eigen();
        for v in eig.eigenvalues.iter() {
            assert!(*v >= -1e-10, "Sigma eigenvalue {v}");
        }
        // the covariance of a scalar theta* is a positive 1x1 block
        assert_eq!(rep.cov_theta_star.nrows(), 1);
        assert!(rep.cov_theta_star[(0, 0)] > 0.0);
    }

    #[test]
    fn classical_b_factorizes_under_independence() {
        // B = E[chi*] E[tau nu nu^T]: compare the mixed plug-in against the
        // factored product on clean data (classical loss, so chi = e^(y-a))
        let cfg_sim = SimConfig::default();
        let n = 400;
        let data = gen_clean(n, 77, &cfg_sim).unwrap();
        let tau = WeightFn::default_for(n, 2, TauMode::Indicator);
        let model = ErrorModel::log_gamma(3.0).unwrap();
        let mut cfg = FitConfig::new(LossSpec::classical(), model.clone(), 0.12, 0.12, tau.clone());
        cfg.kernel = crate::smoother::KernelKind::Gaussian;
        let fit = fit_three_step(&data, &cfg).unwrap();

        let kernel = KernelSpec {
            kind: KernelKind::Gaussian,
            h: fit.h1,
        };
        let sp = SortedProjections::from_dataset(&data, &fit.beta);
        let loss = fit.eta_state.loss;
        let mut mixed = 0.0; // (1/n) sum chi_i tau_i |nu_i|^2
        let mut chi_bar = 0.0;
        let mut design = 0.0; // (1/n) sum tau_i |nu_i|^2
        let mut m = 0usize;
        for i in 0..n {
            let t = crate::estimator::weight_tau(&tau, data.x_row(i));
            if t == 0.0 {
                continue;
            }
            let u = data.proj_row(&fit.beta, i);
            let a = local_m_constant(&sp, u, kernel, &loss, &model, 1e-10)
                .unwrap()
                .a;
            let (du, dbeta) =
                eta_derivatives(&data, &fit.beta, u, kernel, &loss, &model, a).unwrap();
            let x = data.x_row(i);
            let nu2: f64 = (0..2).map(|j| (dbeta[j] + du * x[j]).powi(2)).sum();
            let chi = loss.chi(&model, data.y[i], a);
            mixed += chi * t * nu2;
            chi_bar += chi;
            design += t * nu2;
            m += 1;
        }
        mixed /= m as f64;
        chi_bar /= m as f64;
        design /= m as f64;
        let factored = chi_bar * design;
        assert!(
            (mixed - factored).abs() <= 0.10 * factored.abs(),
            "mixed {mixed} vs factored {factored}"
        );
    }
}

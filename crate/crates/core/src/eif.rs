//! Empirical influence diagnostics: the effect of adding one observation
//! `(y₀, x₀)` with infinitesimal mass on the link estimate, its derivatives,
//! and the index estimate.
//!
//! The index estimator is equivariant under orthogonal maps, so the
//! computation runs in a rotated frame with β̂ = e_q where the q-th influence
//! coordinate vanishes identically; the report is rotated back.
//!
//! A note on denominators: differentiating the local estimating equation
//! `Σ K_h(βᵀxᵢ − u) ψ(yᵢ, η̂(u)) = 0` in the contamination mass yields a
//! curvature (χ-sum) denominator; the ψ-sum that would otherwise appear is
//! exactly zero at the fitted link by the first-order condition. The
//! χ-denominator form is the default; [`EifMode::ScoreDenominator`] evaluates the
//! literal ψ-sum variant side by side for comparison.

use crate::error::{Error, Result};
use crate::error_models::ErrorModel;
use crate::estimator::{weight_tau, IndexFit, WeightFn};
use crate::loss::LossSpec;
use crate::sim::Dataset;
use crate::smoother::{
    eta_second_derivatives, local_m_constant, KernelKind, KernelSpec,
    SortedProjections,
};
use nalgebra::{DMatrix, DVector};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum EifMode {
    /// curvature (χ-sum) denominators from the estimating-equation derivation
    #[default]
    ChiDenominator,
    /// the displayed ψ-sum denominators, kept for comparison; near-singular
    /// at fitted links
    ScoreDenominator,
}

/// Empirical influence report at one added observation.
#[derive(Debug, Clone)]
pub struct EifReport {
    pub y0: f64,
    pub x0: Vec<f64>,
    /// EIF(β̂) in the original coordinates
    pub eif_beta: Vec<f64>,
    /// EIF(β̂) in the rotated frame; the q-th entry is exactly 0
    pub eif_beta_rotated: Vec<f64>,
    /// EIF(η̂_β(u)) at the training projections, ordered as the input rows
    pub eif_eta: Vec<(f64, f64)>,
    pub ell_n: Vec<f64>,
    pub m_n: DMatrix<f64>,
    /// radial component β̂ᵀλ of the free score λ = (1/n)Σψᵢτᵢν̂ᵢ; the solved
    /// system is (M_{n,1} − radial_score·I)·EIF = −ℓ_n^{(q−1)} because only
    /// the tangential score vanishes at the sphere-constrained optimum
    pub radial_score: f64,
    /// rotation R with R β̂ = e_q
    pub rotation: DMatrix<f64>,
}

/// Householder reflection taking the unit vector `beta_hat` to `e_q`.
/// Returns the rotated dataset and the (symmetric, orthogonal) matrix.
pub fn rotate_to_canonical(data: &Dataset, beta_hat: &[f64]) -> (Dataset, DMatrix<f64>) {
    let q = beta_hat.len();
    let mut v: Vec<f64> = beta_hat.to_vec();
    v[q - 1] -= 1.0;
    let vnorm2: f64 = v.iter().map(|a| a * a).sum();
    let r = if vnorm2 < 1e-28 {
        DMatrix::<f64>::identity(q, q)
    } else {
        let mut m = DMatrix::<f64>::identity(q, q);
        for a in 0..q {
            for b in 0..q {
                m[(a, b)] -= 2.0 * v[a] * v[b] / vnorm2;
            }
        }
        m
    };
    let r_rows: Vec<f64> = (0..q).flat_map(|a| (0..q).map(move |b| (a, b))).map(|(a, b)| r[(a, b)]).collect();
    (data.rotated(&r_rows), r)
}

struct LinkStats {
    eta: f64,
    /// ∂η̂/∂u and ∂η̂/∂β at (β, u)
    du: f64,
    dbeta: Vec<f64>,
    /// mean kernel/score sums entering the influence expressions
    f_bar: f64,
    d_bar: f64,
    f1_bar: f64,
    e_bar: f64,
    g_bar: Vec<f64>,
    m_u: f64,
    m_vec: Vec<f64>,
}

fn link_stats(
    data: &Dataset,
    sp: &SortedProjections,
    beta: &[f64],
    u: f64,
    kernel: KernelSpec,
    loss: &LossSpec,
    model: &ErrorModel,
) -> Result<LinkStats> {
    let eta = local_m_constant(sp, u, kernel, loss, model, 1e-12)?.a;
    let q = data.q;
    let n = data.n() as f64;
    let h = kernel.h;
    let (mut d_bar, mut e_bar, mut f_bar, mut f1_bar, mut m_u) = (0.0, 0.0, 0.0, 0.0, 0.0);
    let mut g_bar = vec![0.0; q];
    let mut m_vec = vec![0.0; q];
    for i in 0..data.n() {
        let t = (data.proj_row(beta, i) - u) / h;
        let k = kernel.k(t);
        let kp = kernel.k_prime(t);
        if k == 0.0 && kp == 0.0 {
            continue;
        }
        let psi = loss.psi(model, data.y[i], eta);
        let chi = loss.chi(model, data.y[i], eta);
        let chi1 = loss.chi1(model, data.y[i], eta);
        d_bar += k * psi;
        e_bar += kp * psi;
        f_bar += k * chi;
        f1_bar += k * chi1;
        m_u += kp * chi;
        let x = data.x_row(i);
        for j in 0..q {
            g_bar[j] += kp * psi * x[j];
            m_vec[j] += kp * chi * x[j];
        }
    }
    d_bar /= n;
    e_bar /= n;
    f_bar /= n;
    f1_bar /= n;
    m_u /= n;
    for j in 0..q {
        g_bar[j] /= n;
        m_vec[j] /= n;
    }
    if f_bar.abs() < 1e-10 {
        return Err(Error::DegenerateCurvature(f_bar.abs()));
    }
    let du = e_bar / (h * f_bar);
    let dbeta: Vec<f64> = g_bar.iter().map(|g| -g / (h * f_bar)).collect();
    Ok(LinkStats {
        eta,
        du,
        dbeta,
        f_bar,
        d_bar,
        f1_bar,
        e_bar,
        g_bar,
        m_u,
        m_vec,
    })
}

struct PointEif {
    /// EIF(η̂(u))
    value: f64,
    /// EIF(∂η̂/∂β) and EIF(∂η̂/∂u)
    dbeta: Vec<f64>,
    du: f64,
}

fn point_eif(
    stats: &LinkStats,
    q: usize,
    h: f64,
    kernel: KernelSpec,
    loss: &LossSpec,
    model: &ErrorModel,
    u: f64,
    y0: f64,
    x0: &[f64],
    beta: &[f64],
    mode: EifMode,
) -> Result<PointEif> {
    let t0 = (x0.iter().zip(beta).map(|(a, b)| a * b).sum::<f64>() - u) / h;
    let k0 = kernel.k(t0);
    let k0p = kernel.k_prime(t0);
    let psi0 = loss.psi(model, y0, stats.eta);
    let chi0 = loss.chi(model, y0, stats.eta);
    let numer = k0 * psi0;

    let den = match mode {
        EifMode::ChiDenominator => stats.f_bar,
        EifMode::ScoreDenominator => stats.d_bar,
    };
    if den.abs() < 1e-10 {
        return Err(Error::DegenerateCurvature(den.abs()));
    }
    let value = -numer / den;

    // gradient of the numerator in (β, u)
    let dn_beta: Vec<f64> = (0..q)
        .map(|j| k0p * psi0 * x0[j] / h + k0 * chi0 * stats.dbeta[j])
        .collect();
    let dn_u = -k0p * psi0 / h + k0 * chi0 * stats.du;

    // gradient of the denominator in (β, u)
    let (dd_beta, dd_u): (Vec<f64>, f64) = match mode {
        EifMode::ChiDenominator => (
            (0..q)
                .map(|j| stats.m_vec[j] / h + stats.f1_bar * stats.dbeta[j])
                .collect(),
            -stats.m_u / h + stats.f1_bar * stats.du,
        ),
        EifMode::ScoreDenominator => (
            (0..q)
                .map(|j| stats.g_bar[j] / h + stats.f_bar * stats.dbeta[j])
                .collect(),
            -stats.e_bar / h + stats.f_bar * stats.du,
        ),
    };

    let dbeta: Vec<f64> = (0..q)
        .map(|j| -dn_beta[j] / den + numer * dd_beta[j] / (den * den))
        .collect();
    let du = -dn_u / den + numer * dd_u / (den * den);
    Ok(PointEif { value, dbeta, du })
}

/// EIF of the link estimate at one evaluation point.
#[allow(clippy::too_many_arguments)]
pub fn eif_eta(
    data: &Dataset,
    beta: &[f64],
    u: f64,
    y0: f64,
    x0: &[f64],
    kernel: KernelSpec,
    loss: &LossSpec,
    model: &ErrorModel,
    mode: EifMode,
) -> Result<f64> {
    require_differentiable(kernel)?;
    let sp = SortedProjections::from_dataset(data, beta);
    let stats = link_stats(data, &sp, beta, u, kernel, loss, model)?;
    point_eif(&stats, data.q, kernel.h, kernel, loss, model, u, y0, x0, beta, mode).map(|p| p.value)
}

/// EIF of the link derivative estimates (∂η̂/∂β, ∂η̂/∂u) at one point.
#[allow(clippy::too_many_arguments)]
pub fn eif_eta_derivatives(
    data: &Dataset,
    beta: &[f64],
    u: f64,
    y0: f64,
    x0: &[f64],
    kernel: KernelSpec,
    loss: &LossSpec,
    model: &ErrorModel,
    mode: EifMode,
) -> Result<(Vec<f64>, f64)> {
    require_differentiable(kernel)?;
    let sp = SortedProjections::from_dataset(data, beta);
    let stats = link_stats(data, &sp, beta, u, kernel, loss, model)?;
    point_eif(&stats, data.q, kernel.h, kernel, loss, model, u, y0, x0, beta, mode)
        .map(|p| (p.dbeta, p.du))
}

fn require_differentiable(kernel: KernelSpec) -> Result<()> {
    if !kernel.is_differentiable() {
        return Err(Error::InvalidInput(
            "influence formulas need a continuously differentiable kernel (Gaussian)".into(),
        ));
    }
    Ok(())
}

/// Empirical influence of the index estimate at `(y0, x0)`.
///
/// Assembles the score-perturbation system in the rotated frame:
/// `M_{n,1} · EIF(β̂^{(q−1)}) = −ℓ_n^{(q−1)}`, with ℓ_n collecting the
/// link-influence, link-derivative-influence and added-point terms, and M_n
/// the curvature of the profile score.
pub fn eif_beta(
    fit: &IndexFit,
    data: &Dataset,
    tau: &WeightFn,
    y0: f64,
    x0: &[f64],
    mode: EifMode,
) -> Result<EifReport> {
    let q = data.q;
    let loss = fit.eta_state.loss;
    let model = fit.eta_state.model.clone();
    let kernel = KernelSpec {
        kind: KernelKind::Gaussian,
        h: fit.h1,
    };
    let h = kernel.h;

    // τ in the original coordinates (rotating both data and center would
    // leave it unchanged)
    let tau_vals: Vec<f64> = (0..data.n()).map(|i| weight_tau(tau, data.x_row(i))).collect();
    let tau0 = weight_tau(tau, x0);

    let (data_r, rotation) = rotate_to_canonical(data, &fit.beta);
    let mut x0_r = vec![0.0; q];
    for a in 0..q {
        for b in 0..q {
            x0_r[a] += rotation[(a, b)] * x0[b];
        }
    }
    let mut beta_r = vec![0.0; q];
    beta_r[q - 1] = 1.0;

    let sp = SortedProjections::from_dataset(&data_r, &beta_r);
    let n = data.n() as f64;
    let mut ell = DVector::<f64>::zeros(q);
    let mut m_n = DMatrix::<f64>::zeros(q, q);
    let mut radial_score = 0.0;
    let mut eif_eta_out = vec![(0.0, 0.0); data.n()];

    for i in 0..data.n() {
        let u = data_r.proj_row(&beta_r, i);
        let stats = link_stats(&data_r, &sp, &beta_r, u, kernel, &loss, &model)?;
        let pe = point_eif(
            &stats, q, h, kernel, &loss, &model, u, y0, &x0_r, &beta_r, mode,
        )?;
        eif_eta_out[i] = (u, pe.value);
        let t = tau_vals[i];
        if t == 0.0 {
            continue;
        }
        let x = data_r.x_row(i);
        let nu: Vec<f64> = (0..q).map(|j| stats.dbeta[j] + stats.du * x[j]).collect();
        let psi = loss.psi(&model, data_r.y[i], stats.eta);
        let chi = loss.chi(&model, data_r.y[i], stats.eta);
        // in the rotated frame the radial direction is e_q
        radial_score += psi * t * nu[q - 1] / n;

        let sd = eta_second_derivatives(&data_r, &beta_r, u, kernel, &loss, &model, 1e-12)?;
        for a in 0..q {
            ell[a] += (chi * t * pe.value * nu[a]
                + psi * t * (pe.dbeta[a] + pe.du * x[a]))
                / n;
            for b in 0..q {
                let v_ab = sd.d2_bb[a * q + b]
                    + sd.d2_uu * x[a] * x[b]
                    + sd.d2_ub[a] * x[b]
                    + x[a] * sd.d2_ub[b];
                m_n[(a, b)] += (chi * t * nu[a] * nu[b] + psi * t * v_ab) / n;
            }
        }
    }

    // added-point term of the score
    let u0 = x0_r[q - 1];
    let stats0 = link_stats(&data_r, &sp, &beta_r, u0, kernel, &loss, &model)?;
    let psi0 = loss.psi(&model, y0, stats0.eta);
    for a in 0..q {
        let nu0 = stats0.dbeta[a] + stats0.du * x0_r[a];
        ell[a] += psi0 * nu0 * tau0;
    }

    let mut m1 = m_n.view((0, 0), (q - 1, q - 1)).into_owned();
    for a in 0..q - 1 {
        m1[(a, a)] -= radial_score;
    }
    let svd = m1.clone().svd(false, false);
    let (smax, smin) = (svd.singular_values.max(), svd.singular_values.min());
    if !(smin > 0.0) || smax / smin > 1e10 {
        return Err(Error::DegenerateEifSystem(format!(
            "M_n1 condition number {:.3e}",
            if smin > 0.0 { smax / smin } else { f64::INFINITY }
        )));
    }
    let rhs = DVector::from_iterator(q - 1, (0..q - 1).map(|a| -ell[a]));
    let sol = m1
        .lu()
        .solve(&rhs)
        .ok_or_else(|| Error::DegenerateEifSystem("singular M_n1".into()))?;

    let mut eif_rot = vec![0.0; q];
    eif_rot[..q - 1].copy_from_slice(sol.as_slice());
    // rotate back: R is symmetric orthogonal, so Rᵀ = R
    let mut eif = vec![0.0; q];
    for a in 0..q {
        for b in 0..q {
            eif[a] += rotation[(b, a)] * eif_rot[b];
        }
    }
    Ok(EifReport {
        y0,
        x0: x0.to_vec(),
        eif_beta: eif,
        eif_beta_rotated: eif_rot,
        eif_eta: eif_eta_out,
        ell_n: (0..q).map(|a| ell[a]).collect(),
        m_n,
        radial_score,
        rotation,
    })
}

/// One cell of the sensitivity surface.
#[derive(Debug, Clone)]
pub struct EifMapRow {
    pub y0: f64,
    pub x0: Vec<f64>,
    pub eif: Option<Vec<f64>>,
    pub flag: Option<String>,
}

impl EifMapRow {
    pub fn norm(&self) -> Option<f64> {
        self.eif
            .as_ref()
            .map(|v| v.iter().map(|a| a * a).sum::<f64>().sqrt())
    }
}

/// Evaluate ‖EIF(β̂)‖ on a grid of contaminating points. Per-cell failures are
/// recorded as flags, never as NaN.
pub fn eif_map(
    fit: &IndexFit,
    data: &Dataset,
    tau: &WeightFn,
    y_grid: &[f64],
    x_grid: &[Vec<f64>],
    mode: EifMode,
) -> Vec<EifMapRow> {
    let mut rows = Vec::with_capacity(y_grid.len() * x_grid.len());
    for &y0 in y_grid {
        for x0 in x_grid {
            match eif_beta(fit, data, tau, y0, x0, mode) {
                Ok(rep) => rows.push(EifMapRow {
                    y0,
                    x0: x0.clone(),
                    eif: Some(rep.eif_beta),
                    flag: None,
                }),
                Err(e) => rows.push(EifMapRow {
                    y0,
                    x0: x0.clone(),
                    eif: None,
                    flag: Some(e.to_string()),
                }),
            }
        }
    }
    rows
}

//! ρ-functions and the deviance score chain.
//!
//! Everything is evaluated through the substitution `z = d/α²` where `d` is a
//! deviance: with `q(z) = Ψ(√z)/√z`, the composite scores
//!
//! ```text
//! φ(y,a)  = ρ(√d/α)                 = ρ̃(z)
//! ψ(y,a)  = ∂φ/∂a                   = q(z)·t′(u) / (2α²)
//! χ(y,a)  = ∂ψ/∂a                   = (q′(z)·t′(u)²/α² − q(z)·t″(u)) / (2α²)
//! χ₁(y,a) = ∂χ/∂a = (q″(z)·t′(u)³/α⁴ − 3q′(z)·t′(u)t″(u)/α² + q(z)·t‴(u)) / (2α²)
//! ```
//!
//! are polynomial in `z` for both supported families, so the 0/0 singularity
//! of the raw `Ψ(√d/α)/√d` expressions at `u = y − a = e0` never arises: the
//! same formula is exact everywhere, including at the mode.
//!
//! The module also hosts the log-Gamma S-scale calibration curve `S*(γ)`
//! (solving `E_γ ρ_T(√d*(ε)/S) = b`), its inverse, the asymptotic efficiency
//! of the Tukey deviance M-estimator relative to the classical one, and the
//! efficiency-targeted choice of the tuning constant.

use crate::error::{Error, Result};
use crate::error_models::ErrorModel;
use crate::num::{bisect_root, gamma_p, gamma_q, integrate, QuadOptions};
use serde::{Deserialize, Serialize};
use statrs::function::gamma::ln_gamma;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum LossFamily {
    TukeyBisquare,
    ClassicalSquared,
}

/// A loss ρ(√d/α). `alpha` is the tuning constant for the bounded family and
/// is fixed at 1 for the classical squared loss, which makes φ equal the raw
/// deviance and every downstream pipeline shared between the two estimators.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct LossSpec {
    pub family: LossFamily,
    pub alpha: f64,
}

impl LossSpec {
    pub fn tukey(alpha: f64) -> Self {
        assert!(alpha > 0.0 && alpha.is_finite(), "tuning constant must be positive");
        LossSpec {
            family: LossFamily::TukeyBisquare,
            alpha,
        }
    }

    pub fn classical() -> Self {
        LossSpec {
            family: LossFamily::ClassicalSquared,
            alpha: 1.0,
        }
    }

    pub fn is_bounded(&self) -> bool {
        matches!(self.family, LossFamily::TukeyBisquare)
    }

    pub fn rho_max(&self) -> f64 {
        match self.family {
            LossFamily::TukeyBisquare => 1.0,
            LossFamily::ClassicalSquared => f64::INFINITY,
        }
    }

    /// ρ(s): Tukey bisquare `min(1, 3s² − 3s⁴ + s⁶)` or classical `s²`.
    #[inline]
    pub fn rho(&self, s: f64) -> f64 {
        self.rho_tilde(s * s)
    }

    /// ρ̃(z) = ρ(√z).
    #[inline]
    pub fn rho_tilde(&self, z: f64) -> f64 {
        match self.family {
            LossFamily::TukeyBisquare => {
                if z < 1.0 {
                    z * (3.0 + z * (-3.0 + z))
                } else {
                    1.0
                }
            }
            LossFamily::ClassicalSquared => z,
        }
    }

    /// (Ψ, Ψ′, Ψ″) = (ρ′, ρ″, ρ‴) at `s`.
    pub fn rho_derivatives(&self, s: f64) -> (f64, f64, f64) {
        match self.family {
            LossFamily::TukeyBisquare => {
                if s.abs() < 1.0 {
                    let s2 = s * s;
                    (
                        s * (6.0 + s2 * (-12.0 + 6.0 * s2)),
                        6.0 + s2 * (-36.0 + 30.0 * s2),
                        s * (-72.0 + 120.0 * s2),
                    )
                } else {
                    (0.0, 0.0, 0.0)
                }
            }
            LossFamily::ClassicalSquared => (2.0 * s, 2.0, 0.0),
        }
    }

    /// q(z) = Ψ(√z)/√z and its first two z-derivatives.
    #[inline]
    pub fn q_chain(&self, z: f64) -> (f64, f64, f64) {
        match self.family {
            LossFamily::TukeyBisquare => {
                if z < 1.0 {
                    (6.0 + z * (-12.0 + 6.0 * z), -12.0 + 12.0 * z, 12.0)
                } else {
                    (0.0, 0.0, 0.0)
                }
            }
            LossFamily::ClassicalSquared => (2.0, 0.0, 0.0),
        }
    }

    #[inline]
    pub fn q0(&self, z: f64) -> f64 {
        match self.family {
            LossFamily::TukeyBisquare => {
                if z < 1.0 {
                    6.0 + z * (-12.0 + 6.0 * z)
                } else {
                    0.0
                }
            }
            LossFamily::ClassicalSquared => 2.0,
        }
    }

    /// φ(y, a) = ρ(√d(y,a)/α).
    #[inline]
    pub fn phi(&self, model: &ErrorModel, y: f64, a: f64) -> f64 {
        self.rho_tilde(model.deviance(y, a) / (self.alpha * self.alpha))
    }

    /// ψ(y, a) = ∂φ/∂a, exact at the mode.
    pub fn psi(&self, model: &ErrorModel, y: f64, a: f64) -> f64 {
        let u = y - a;
        let a2 = self.alpha * self.alpha;
        let z = model.deviance_star(u) / a2;
        let (t1, _, _) = model.t_derivs(u);
        self.q0(z) * t1 / (2.0 * a2)
    }

    /// χ(y, a) = ∂ψ/∂a.
    pub fn chi(&self, model: &ErrorModel, y: f64, a: f64) -> f64 {
        let u = y - a;
        let a2 = self.alpha * self.alpha;
        let z = model.deviance_star(u) / a2;
        let (q0, q1, _) = self.q_chain(z);
        let (t1, t2, _) = model.t_derivs(u);
        (q1 * t1 * t1 / a2 - q0 * t2) / (2.0 * a2)
    }

    /// χ₁(y, a) = ∂χ/∂a.
    pub fn chi1(&self, model: &ErrorModel, y: f64, a: f64) -> f64 {
        let u = y - a;
        let a2 = self.alpha * self.alpha;
        let z = model.deviance_star(u) / a2;
        let (q0, q1, q2) = self.q_chain(z);
        let (t1, t2, t3) = model.t_derivs(u);
        (q2 * t1 * t1 * t1 / (a2 * a2) - 3.0 * q1 * t1 * t2 / a2 + q0 * t3) / (2.0 * a2)
    }

    /// Residual forms: ψ*(u) = ψ(u, 0) and so on (valid because the deviance
    /// depends on (y, a) only through y − a).
    pub fn psi_star(&self, model: &ErrorModel, u: f64) -> f64 {
        self.psi(model, u, 0.0)
    }

    pub fn chi_star(&self, model: &ErrorModel, u: f64) -> f64 {
        self.chi(model, u, 0.0)
    }

    pub fn chi1_star(&self, model: &ErrorModel, u: f64) -> f64 {
        self.chi1(model, u, 0.0)
    }
}

// ---------------------------------------------------------------------------
// log-Gamma calibration curve and tuning-constant selection
// ---------------------------------------------------------------------------

/// Solve `d*(x) = cap` on both sides of the mode for the log-Gamma deviance.
fn saturation_bounds(cap: f64) -> (f64, f64) {
    let dstar = |u: f64| u.exp_m1() - u;
    // left: d*(-x) = x - 1 + e^(-x) >= x - 1
    let left = bisect_root(|u| dstar(u) - cap, -(cap + 2.0), -1e-14, 1e-12, 1e-14);
    let hi = (2.0 * cap + 10.0).ln() + 1.0;
    let right = bisect_root(|u| dstar(u) - cap, 1e-14, hi.max(2.0), 1e-12, 1e-14);
    (left, right)
}

/// CDF of the log-Gamma law, P(ε ≤ s) = P(γ, γ e^s). Far in the left tail
/// the exponent term of the density is flat and the CDF is the closed form
/// Q(γ) e^(γs) / γ, exact to double precision for s ≤ −35.
pub(crate) fn log_gamma_cdf(gamma: f64, s: f64) -> f64 {
    if s <= -35.0 {
        ((gamma - 1.0) * gamma.ln() - ln_gamma(gamma) + gamma * s).exp()
    } else {
        gamma_p(gamma, gamma * s.exp())
    }
}

fn log_gamma_sf(gamma: f64, s: f64) -> f64 {
    if s <= -35.0 {
        1.0 - log_gamma_cdf(gamma, s)
    } else {
        gamma_q(gamma, gamma * s.exp())
    }
}

/// Region outside which the log-Gamma density carries mass below ~1e-16.
fn support_bounds(gamma: f64) -> (f64, f64) {
    let mut lo = -40.0 / gamma.sqrt();
    // heavy left tail for small gamma: g ~ Q e^(γs), walk further out until
    // the analytic tail mass is negligible
    while log_gamma_cdf(gamma, lo) > 1e-16 && lo > -1e6 {
        lo *= 1.5;
    }
    (lo, 15.0)
}

fn split_integrate<F: Fn(f64) -> f64 + Copy>(f: F, lo: f64, hi: f64) -> f64 {
    let opts = QuadOptions::default();
    if lo < 0.0 && hi > 0.0 {
        integrate(f, lo, 0.0, opts) + integrate(f, 0.0, hi, opts)
    } else {
        integrate(f, lo, hi, opts)
    }
}

/// `E_γ ρ_T(√d*(ε)/S)` with the saturated tails accumulated analytically
/// through the Gamma CDF.
fn expected_rho(scale: f64, gamma: f64) -> Result<f64> {
    let model = ErrorModel::log_gamma(gamma)?;
    let loss = LossSpec::tukey(1.0);
    let (sat_lo, sat_hi) = saturation_bounds(scale * scale);
    let (sup_lo, sup_hi) = support_bounds(gamma);
    let lo = sat_lo.max(sup_lo);
    let hi = sat_hi.min(sup_hi);
    let s2 = scale * scale;
    let mut e = log_gamma_cdf(gamma, lo) + log_gamma_sf(gamma, hi);
    if lo < hi {
        e += split_integrate(
            |s| loss.rho_tilde(model.deviance_star(s) / s2) * model.density(s).unwrap_or(0.0),
            lo,
            hi,
        );
    }
    if !e.is_finite() {
        return Err(Error::CalibrationFailed(format!(
            "E rho quadrature not finite at scale {scale}, gamma {gamma}"
        )));
    }
    Ok(e)
}

/// The calibration curve S*(γ): the unique scale with
/// `E_γ ρ_T(√d*(ε)/S*) = b`. Strictly decreasing in γ.
pub fn s_star(gamma: f64, b: f64) -> Result<f64> {
    if !(gamma > 0.0) || !gamma.is_finite() {
        return Err(Error::InvalidInput(format!("gamma must be positive, got {gamma}")));
    }
    if !(b > 0.0 && b < 1.0) {
        return Err(Error::InvalidInput(format!(
            "b must lie strictly between 0 and rho_max = 1, got {b}"
        )));
    }
    let f = |s: f64| expected_rho(s, gamma).map(|e| e - b);
    let (mut lo, mut hi) = (1e-4, 8.0);
    while f(lo)? < 0.0 {
        lo *= 0.25;
        if lo < 1e-280 {
            return Err(Error::CalibrationFailed("no lower bracket for S*".into()));
        }
    }
    while f(hi)? > 0.0 {
        hi *= 2.0;
        if hi > 1e6 {
            return Err(Error::CalibrationFailed("no upper bracket for S*".into()));
        }
    }
    // E rho is monotone decreasing in the scale
    let root = bisect_root(|s| f(s).unwrap_or(f64::NAN), lo, hi, 1e-11, 1e-300);
    let residual = (expected_rho(root, gamma)? - b).abs();
    if residual > 1e-8 {
        return Err(Error::CalibrationFailed(format!(
            "S* equation residual {residual:.2e} at gamma {gamma}"
        )));
    }
    Ok(root)
}

pub const GAMMA_MIN: f64 = 0.05;
pub const GAMMA_MAX: f64 = 500.0;

/// Inverse of the calibration curve on γ ∈ [GAMMA_MIN, GAMMA_MAX]. Values of
/// `s` outside the attainable range clamp to the boundary with `clamped`
/// set.
pub fn s_star_inverse(s: f64, b: f64) -> Result<(f64, bool)> {
    if !(s > 0.0) || !s.is_finite() {
        return Err(Error::InvalidInput(format!("scale must be positive, got {s}")));
    }
    let s_at_min = s_star(GAMMA_MIN, b)?;
    if s >= s_at_min {
        return Ok((GAMMA_MIN, s > s_at_min));
    }
    let s_at_max = s_star(GAMMA_MAX, b)?;
    if s <= s_at_max {
        return Ok((GAMMA_MAX, s < s_at_max));
    }
    let root = bisect_root(
        |g| s_star(g, b).map(|v| v - s).unwrap_or(f64::NAN),
        GAMMA_MIN,
        GAMMA_MAX,
        1e-10,
        1e-12,
    );
    Ok((root, false))
}

/// Asymptotic efficiency of the Tukey deviance M-estimator with constant `c`
/// relative to the classical (maximum likelihood) one at the log-Gamma model
/// with shape γ:
///
/// ```text
/// e(c, γ) = (1/γ) · (E χ*(ε, c))² / E ψ*²(ε, c)
/// ```
pub fn efficiency(c: f64, gamma: f64) -> Result<f64> {
    if !(c > 0.0) || !(gamma > 0.0) {
        return Err(Error::InvalidInput("efficiency needs c > 0 and gamma > 0".into()));
    }
    let model = ErrorModel::log_gamma(gamma)?;
    let loss = LossSpec::tukey(c);
    // both integrands vanish wherever the loss saturates
    let (sat_lo, sat_hi) = saturation_bounds(c * c);
    let (sup_lo, sup_hi) = support_bounds(gamma);
    let (lo, hi) = (sat_lo.max(sup_lo), sat_hi.min(sup_hi));
    if lo >= hi {
        return Err(Error::CalibrationFailed(
            "efficiency quadrature domain is empty".into(),
        ));
    }
    let a = split_integrate(
        |s| loss.chi_star(&model, s) * model.density(s).unwrap_or(0.0),
        lo,
        hi,
    );
    let b = split_integrate(
        |s| {
            let p = loss.psi_star(&model, s);
            p * p * model.density(s).unwrap_or(0.0)
        },
        lo,
        hi,
    );
    if !(b > 0.0) || !a.is_finite() {
        return Err(Error::CalibrationFailed(format!(
            "efficiency quadrature degenerate (A = {a:.3e}, B = {b:.3e})"
        )));
    }
    Ok(a * a / (gamma * b))
}

#[derive(Debug, Clone, Copy)]
pub struct Calibration {
    pub c: f64,
    /// the scale floor was binding
    pub floored: bool,
    /// the target efficiency was unreachable below c = 100
    pub unreachable: bool,
}

/// Smallest `c` with `efficiency(c, γ) ≥ target`, floored at `s_floor`
/// (taking the tuning constant no smaller than the S-scale keeps the
/// M-step's loss at least as tolerant as the initial S-step's).
pub fn calibrate_tuning(gamma: f64, target_eff: f64, s_floor: f64) -> Result<Calibration> {
    if !(target_eff > 0.0 && target_eff < 1.0) {
        return Err(Error::InvalidInput(format!(
            "target efficiency must lie in (0, 1), got {target_eff}"
        )));
    }
    const C_MAX: f64 = 100.0;
    let f = |c: f64| efficiency(c, gamma).map(|e| e - target_eff);
    if f(C_MAX)? < 0.0 {
        return Ok(Calibration {
            c: C_MAX,
            floored: s_floor >= C_MAX,
            unreachable: true,
        });
    }
    let mut lo = 0.05;
    if f(lo)? > 0.0 {
        // already efficient enough at the smallest constant considered
        return Ok(Calibration {
            c: lo.max(s_floor),
            floored: s_floor > lo,
            unreachable: false,
        });
    }
    let mut hi = C_MAX;
    // efficiency is monotone increasing in c
    for _ in 0..64 {
        let mid = 0.5 * (lo + hi);
        if hi - lo < 1e-4 {
            break;
        }
        if f(mid)? < 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let c = hi;
    Ok(Calibration {
        c: c.max(s_floor),
        floored: s_floor > c,
        unreachable: false,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::{assert_abs_diff_eq, assert_relative_eq};

    fn lg3() -> ErrorModel {
        ErrorModel::log_gamma(3.0).unwrap()
    }

    #[test]
    fn rho_examples() {
        let t = LossSpec::tukey(1.0);
        assert_eq!(t.rho(0.0), 0.0);
        assert_eq!(t.rho(1.5), 1.0);
        assert_relative_eq!(t.rho(0.5), 0.578125, max_relative = 1e-15);
        let c = LossSpec::classical();
        assert_eq!(c.rho(3.0), 9.0);
    }

    #[test]
    fn rho_derivative_values() {
        let t = LossSpec::tukey(1.0);
        assert_eq!(t.rho_derivatives(0.0), (0.0, 6.0, 0.0));
        assert_eq!(t.rho_derivatives(2.0), (0.0, 0.0, 0.0));
        let c = LossSpec::classical();
        assert_eq!(c.rho_derivatives(1.5), (3.0, 2.0, 0.0));
    }

    #[test]
    fn rho_derivative_finite_difference() {
        let t = LossSpec::tukey(1.0);
        let s = 0.3;
        let h = 1e-6;
        let fd = (t.rho(s + h) - t.rho(s - h)) / (2.0 * h);
        let (psi, _, _) = t.rho_derivatives(s);
        assert_abs_diff_eq!(fd, psi, epsilon = 1e-6);
    }

    #[test]
    fn phi_classical_equals_deviance() {
        let loss = LossSpec::classical();
        let m = lg3();
        for i in 0..100 {
            let y = -2.0 + 0.04 * i as f64;
            let a = 1.5 - 0.03 * i as f64;
            assert_relative_eq!(loss.phi(&m, y, a), m.deviance(y, a), max_relative = 1e-14);
        }
    }

    #[test]
    fn phi_bounded_at_saturated_deviance() {
        let loss = LossSpec::tukey(1.6394);
        let m = lg3();
        assert_eq!(loss.phi(&m, 1000.0, 0.0), 1.0);
        assert_eq!(loss.phi(&m, 5.0, 5.0), 0.0);
    }

    #[test]
    fn psi_at_mode_is_zero() {
        let loss = LossSpec::tukey(1.6394);
        assert_eq!(loss.psi_star(&lg3(), 0.0), 0.0);
    }

    #[test]
    fn score_chain_matches_finite_differences() {
        // oracle: central finite differences of phi, psi, chi in `a`
        let m = lg3();
        for &c in &[0.8, 1.6394, 3.0] {
            let loss = LossSpec::tukey(c);
            let mut u: f64 = -3.0;
            while u <= 3.0 {
                if u.abs() > 1e-3 {
                    let h = 1e-6;
                    let fd_psi = (loss.phi(&m, u, h) - loss.phi(&m, u, -h)) / (2.0 * h);
                    let scale = loss.psi_star(&m, u).abs().max(1e-3);
                    assert_abs_diff_eq!(
                        fd_psi / scale,
                        loss.psi_star(&m, u) / scale,
                        epsilon = 1e-6
                    );

                    let h = 1e-5;
                    let fd_chi = (loss.psi(&m, u, h) - loss.psi(&m, u, -h)) / (2.0 * h);
                    let scale = loss.chi_star(&m, u).abs().max(1e-3);
                    assert_abs_diff_eq!(
                        fd_chi / scale,
                        loss.chi_star(&m, u) / scale,
                        epsilon = 1e-5
                    );

                    let fd_chi1 = (loss.chi(&m, u, h) - loss.chi(&m, u, -h)) / (2.0 * h);
                    let scale = loss.chi1_star(&m, u).abs().max(1e-3);
                    assert_abs_diff_eq!(
                        fd_chi1 / scale,
                        loss.chi1_star(&m, u) / scale,
                        epsilon = 1e-5
                    );
                }
                u += 0.1;
            }
        }
    }

    #[test]
    fn chi_at_mode_closed_form() {
        // chi*(0) = Psi'(0)/(2c^2) = 3/c^2
        let c = 1.6394;
        let loss = LossSpec::tukey(c);
        assert_relative_eq!(loss.chi_star(&lg3(), 0.0), 3.0 / (c * c), max_relative = 1e-12);
    }

    #[test]
    fn classical_psi_closed_form() {
        // classical + log-Gamma: psi(y, a) = 1 - exp(y - a)
        let loss = LossSpec::classical();
        let m = lg3();
        for i in 0..50 {
            let y = -1.0 + 0.06 * i as f64;
            let a = 0.8 - 0.05 * i as f64;
            assert_relative_eq!(
                loss.psi(&m, y, a),
                1.0 - (y - a).exp(),
                max_relative = 1e-10
            );
        }
    }

    #[test]
    fn s_star_defining_equation() {
        for &g in &[1.0, 3.0, 10.0] {
            let s = s_star(g, 0.5).unwrap();
            let e = expected_rho(s, g).unwrap();
            assert_abs_diff_eq!(e, 0.5, epsilon = 1e-8);
        }
    }

    #[test]
    fn s_star_strictly_decreasing() {
        let grid = [0.5, 1.0, 2.0, 3.0, 5.0, 10.0];
        let vals: Vec<f64> = grid.iter().map(|&g| s_star(g, 0.5).unwrap()).collect();
        for w in vals.windows(2) {
            assert!(w[0] > w[1], "S* not decreasing: {vals:?}");
        }
    }

    #[test]
    fn s_star_round_trips() {
        for &g in &[0.8, 3.0, 20.0] {
            let s = s_star(g, 0.5).unwrap();
            let (g_back, clamped) = s_star_inverse(s, 0.5).unwrap();
            assert!(!clamped);
            assert_abs_diff_eq!(g_back, g, epsilon = 1e-6);
        }
    }

    #[test]
    fn s_star_inverse_monotone_and_clamps() {
        let mut prev = f64::INFINITY;
        for k in 0..10 {
            let s = 0.2 + 0.15 * k as f64;
            let (g, _) = s_star_inverse(s, 0.5).unwrap();
            assert!(g <= prev);
            prev = g;
        }
        let (g, clamped) = s_star_inverse(1e4, 0.5).unwrap();
        assert!(clamped);
        assert_eq!(g, GAMMA_MIN);
    }

    #[test]
    fn efficiency_monotone_and_limits() {
        let mut prev = 0.0;
        let mut c = 1.0;
        while c <= 4.0 {
            let e = efficiency(c, 3.0).unwrap();
            assert!(e > prev, "efficiency not increasing at c = {c}");
            prev = e;
            c += 0.25;
        }
        let e_large = efficiency(50.0, 3.0).unwrap();
        assert_abs_diff_eq!(e_large, 1.0, epsilon = 0.01);
    }

    #[test]
    fn efficiency_at_reference_constant() {
        // the exact value of e(1.6394, 3); the reference value rounds this to 0.90
        let e = efficiency(1.6394, 3.0).unwrap();
        assert_abs_diff_eq!(e, 0.90838, epsilon = 5e-4);
    }

    #[test]
    fn fisher_consistency_integral_vanishes() {
        for &g in &[1.0, 3.0, 10.0] {
            let cal = calibrate_tuning(g, 0.90, 0.0).unwrap();
            let model = ErrorModel::log_gamma(g).unwrap();
            let loss = LossSpec::tukey(cal.c);
            let (sat_lo, sat_hi) = saturation_bounds(cal.c * cal.c);
            let (sup_lo, sup_hi) = support_bounds(g);
            let (lo, hi) = (sat_lo.max(sup_lo), sat_hi.min(sup_hi));
            let integral = split_integrate(
                |s| loss.psi_star(&model, s) * model.density(s).unwrap_or(0.0),
                lo,
                hi,
            );
            assert!(
                integral.abs() < 1e-6,
                "E psi* = {integral:.3e} at gamma {g} (c = {})",
                cal.c
            );
        }
    }

    #[test]
    fn location_functional_minimized_at_zero() {
        // brute quadrature of a ↦ E_γ φ(ε, a) over a grid
        let model = lg3();
        let loss = LossSpec::tukey(1.6394);
        let (sup_lo, sup_hi) = support_bounds(3.0);
        let obj = |a: f64| {
            split_integrate(
                |s| loss.phi(&model, s, a) * model.density(s).unwrap_or(0.0),
                sup_lo,
                sup_hi,
            )
        };
        let at_zero = obj(0.0);
        let mut a: f64 = -1.0;
        while a <= 1.0 {
            if a.abs() > 5e-3 {
                assert!(obj(a) > at_zero, "E phi({a}) below the mode value");
            }
            a += 0.01;
        }
    }

    #[test]
    fn calibrate_tuning_monotone_and_floor() {
        let c90 = calibrate_tuning(3.0, 0.90, 0.0).unwrap();
        let c999 = calibrate_tuning(3.0, 0.999, 0.0).unwrap();
        assert!(c999.c > c90.c);
        let floored = calibrate_tuning(3.0, 0.90, 10.0).unwrap();
        assert_eq!(floored.c, 10.0);
        assert!(floored.floored);
    }

    #[test]
    fn calibrate_tuning_self_consistent() {
        let cal = calibrate_tuning(3.0, 0.90, 0.0).unwrap();
        let e = efficiency(cal.c, 3.0).unwrap();
        assert_abs_diff_eq!(e, 0.90, epsilon = 2e-3);
    }
}


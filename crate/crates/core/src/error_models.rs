//! Error families with strongly unimodal densities `g(s, γ) = Q(γ) exp(γ t(s))`
//! where `t` has a unique mode at `e0`, together with their deviances and
//! samplers. The log-Gamma specialization (`t(s) = s - exp(s)`, `e0 = 0`) is
//! the asymmetric benchmark; the symmetric Gaussian case uses
//! `t(s) = -s²/(2σ²)`.

use crate::error::{Error, Result};
use crate::num::{integrate, QuadOptions};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Gamma, Normal};
use statrs::function::gamma::ln_gamma;
use std::fmt;
use std::sync::Arc;

/// Deviances saturate at this value instead of overflowing to infinity; a
/// bounded ρ maps anything this large to ρ_max, so ordering is preserved
/// without NaN propagation.
pub const DEVIANCE_CAP: f64 = 1e300;

/// Residual threshold beyond which `exp(y - a)` would overflow.
const EXP_OVERFLOW: f64 = 700.0;

pub fn deviance_is_saturated(d: f64) -> bool {
    d >= DEVIANCE_CAP
}

#[derive(Clone)]
pub enum ModelKind {
    LogGamma,
    GaussianSymmetric,
    GeneralUnimodal {
        t_fn: Arc<dyn Fn(f64) -> f64 + Send + Sync>,
    },
}

impl fmt::Debug for ModelKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ModelKind::LogGamma => write!(f, "LogGamma"),
            ModelKind::GaussianSymmetric => write!(f, "GaussianSymmetric"),
            ModelKind::GeneralUnimodal { .. } => write!(f, "GeneralUnimodal"),
        }
    }
}

/// An error distribution from the strongly unimodal family.
///
/// `gamma` is the shape parameter for `LogGamma`, the scale σ for
/// `GaussianSymmetric` and a free family parameter for `GeneralUnimodal`.
#[derive(Clone, Debug)]
pub struct ErrorModel {
    pub kind: ModelKind,
    pub gamma: f64,
    pub e0: f64,
    /// log of the normalizing constant Q(γ); lazily irrelevant for deviances.
    log_q: f64,
}

impl ErrorModel {
    pub fn log_gamma(gamma: f64) -> Result<Self> {
        if !(gamma > 0.0) || !gamma.is_finite() {
            return Err(Error::InvalidInput(format!(
                "log-Gamma shape must be a positive real, got {gamma}"
            )));
        }
        Ok(ErrorModel {
            kind: ModelKind::LogGamma,
            gamma,
            e0: 0.0,
            log_q: gamma * gamma.ln() - ln_gamma(gamma),
        })
    }

    pub fn gaussian(sigma: f64) -> Result<Self> {
        if !(sigma > 0.0) || !sigma.is_finite() {
            return Err(Error::InvalidInput(format!(
                "Gaussian scale must be a positive real, got {sigma}"
            )));
        }
        Ok(ErrorModel {
            kind: ModelKind::GaussianSymmetric,
            gamma: sigma,
            e0: 0.0,
            // g(s) = Q exp(γ t(s)) with γ = 1, t(s) = -s²/(2σ²)
            log_q: -(sigma * (2.0 * std::f64::consts::PI).sqrt()).ln(),
        })
    }

    /// A user-supplied unimodal family member. `t_fn` must attain its unique
    /// maximum at `e0`; no mode search is attempted. The normalizing constant
    /// is computed by quadrature over `[e0 - 50, e0 + 50]`.
    pub fn general<F>(t_fn: F, e0: f64, gamma: f64) -> Result<Self>
    where
        F: Fn(f64) -> f64 + Send + Sync + 'static,
    {
        if !(gamma > 0.0) || !gamma.is_finite() || !e0.is_finite() {
            return Err(Error::InvalidInput(
                "general unimodal model needs finite e0 and positive gamma".into(),
            ));
        }
        let t_fn: Arc<dyn Fn(f64) -> f64 + Send + Sync> = Arc::new(t_fn);
        let t0 = t_fn(e0);
        let tf = t_fn.clone();
        // integrate exp(γ(t(s) - t(e0))) and restore the peak factor afterwards
        let mass = integrate(
            move |s| (gamma * (tf(s) - t0)).exp(),
            e0 - 50.0,
            e0 + 50.0,
            QuadOptions::default(),
        );
        if !(mass > 0.0) || !mass.is_finite() {
            return Err(Error::InvalidInput(
                "general unimodal model: normalization quadrature failed".into(),
            ));
        }
        Ok(ErrorModel {
            kind: ModelKind::GeneralUnimodal { t_fn },
            gamma,
            e0,
            log_q: -(mass.ln() + gamma * t0),
        })
    }

    pub fn is_log_gamma(&self) -> bool {
        matches!(self.kind, ModelKind::LogGamma)
    }

    pub fn is_gaussian(&self) -> bool {
        matches!(self.kind, ModelKind::GaussianSymmetric)
    }

    /// t(s) of the exponent.
    pub fn t(&self, s: f64) -> f64 {
        match &self.kind {
            ModelKind::LogGamma => {
                if s > EXP_OVERFLOW {
                    -DEVIANCE_CAP
                } else {
                    s - s.exp()
                }
            }
            ModelKind::GaussianSymmetric => {
                let sig = self.gamma;
                -s * s / (2.0 * sig * sig)
            }
            ModelKind::GeneralUnimodal { t_fn } => t_fn(s),
        }
    }

    /// First three derivatives of `t`, analytic for the named kinds and by
    /// central differences for user-supplied `t`.
    pub fn t_derivs(&self, u: f64) -> (f64, f64, f64) {
        match &self.kind {
            ModelKind::LogGamma => {
                let e = if u > EXP_OVERFLOW { f64::MAX } else { u.exp() };
                (1.0 - e, -e, -e)
            }
            ModelKind::GaussianSymmetric => {
                let s2 = self.gamma * self.gamma;
                (-u / s2, -1.0 / s2, 0.0)
            }
            ModelKind::GeneralUnimodal { t_fn } => {
                let h = 1e-5 * (1.0 + u.abs());
                let (fm2, fm1, f1, f2) = (t_fn(u - 2.0 * h), t_fn(u - h), t_fn(u + h), t_fn(u + 2.0 * h));
                let f0 = t_fn(u);
                let d1 = (f1 - fm1) / (2.0 * h);
                let d2 = (f1 - 2.0 * f0 + fm1) / (h * h);
                let d3 = (f2 - 2.0 * f1 + 2.0 * fm1 - fm2) / (2.0 * h * h * h);
                (d1, d2, d3)
            }
        }
    }

    /// Density `g(s, γ)`.
    pub fn density(&self, s: f64) -> Result<f64> {
        if !s.is_finite() {
            return Err(Error::InvalidInput(format!("invalid input: s = {s}")));
        }
        let gamma_factor = match self.kind {
            ModelKind::GaussianSymmetric => 1.0,
            _ => self.gamma,
        };
        Ok((self.log_q + gamma_factor * self.t(s)).exp())
    }

    /// Deviance `d(y, a) = t(e0) - t(y - a) ≥ 0`, zero exactly when
    /// `y - a = e0`. Saturates at [`DEVIANCE_CAP`] instead of overflowing.
    pub fn deviance(&self, y: f64, a: f64) -> f64 {
        self.deviance_star(y - a)
    }

    /// Residual form `d*(u) = d(u, 0)`; for log-Gamma `exp(u) - u - 1`.
    pub fn deviance_star(&self, u: f64) -> f64 {
        match &self.kind {
            ModelKind::LogGamma => {
                if u > EXP_OVERFLOW {
                    return DEVIANCE_CAP;
                }
                // exp(u) - u - 1 via expm1 to keep precision near the mode
                u.exp_m1() - u
            }
            ModelKind::GaussianSymmetric => {
                let sig = self.gamma;
                (u * u / (2.0 * sig * sig)).min(DEVIANCE_CAP)
            }
            ModelKind::GeneralUnimodal { t_fn } => {
                let d = t_fn(self.e0) - t_fn(u);
                if d.is_finite() {
                    d.max(0.0)
                } else {
                    DEVIANCE_CAP
                }
            }
        }
    }

    /// Draw `n` errors. Log-Gamma draws `log G` with `G ~ Gamma(γ, rate γ)`
    /// (mean-one parametrization); the Gaussian kind draws `N(0, σ²)`.
    /// Deterministic for a given seed.
    pub fn sample_errors(&self, n: usize, seed: u64) -> Result<Vec<f64>> {
        if n == 0 {
            return Err(Error::InvalidInput("sample size must be >= 1".into()));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        self.sample_errors_with(n, &mut rng)
    }

    /// Same as [`sample_errors`](Self::sample_errors) on a caller-managed RNG
    /// stream.
    pub fn sample_errors_with(&self, n: usize, rng: &mut ChaCha8Rng) -> Result<Vec<f64>> {
        match self.kind {
            ModelKind::LogGamma => {
                let g = Gamma::new(self.gamma, 1.0 / self.gamma)
                    .map_err(|e| Error::InvalidInput(e.to_string()))?;
                Ok((0..n).map(|_| g.sample(rng).ln()).collect())
            }
            ModelKind::GaussianSymmetric => {
                let g = Normal::new(0.0, self.gamma)
                    .map_err(|e| Error::InvalidInput(e.to_string()))?;
                Ok((0..n).map(|_| g.sample(rng)).collect())
            }
            ModelKind::GeneralUnimodal { .. } => Err(Error::InvalidInput(
                "no sampler is defined for user-supplied unimodal families".into(),
            )),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::num::{integrate, QuadOptions};
    use approx::{assert_abs_diff_eq, assert_relative_eq};

    #[test]
    fn log_gamma_density_closed_form() {
        let m = ErrorModel::log_gamma(1.0).unwrap();
        // gamma = 1: g(0) = exp(0 - 1) = 1/e
        assert_relative_eq!(m.density(0.0).unwrap(), (-1.0f64).exp(), max_relative = 1e-12);
    }

    #[test]
    fn log_gamma_density_normalizes() {
        let m = ErrorModel::log_gamma(3.0).unwrap();
        let mass = integrate(
            |s| m.density(s).unwrap(),
            -30.0,
            10.0,
            QuadOptions::default(),
        );
        assert_abs_diff_eq!(mass, 1.0, epsilon = 1e-8);
    }

    #[test]
    fn gaussian_density_mode() {
        let m = ErrorModel::gaussian(1.0).unwrap();
        assert_relative_eq!(
            m.density(0.0).unwrap(),
            1.0 / (2.0 * std::f64::consts::PI).sqrt(),
            max_relative = 1e-12
        );
    }

    #[test]
    fn density_rejects_non_finite() {
        let m = ErrorModel::log_gamma(2.0).unwrap();
        assert!(m.density(f64::NAN).is_err());
        assert!(m.density(f64::INFINITY).is_err());
    }

    #[test]
    fn deviance_examples() {
        let lg = ErrorModel::log_gamma(3.0).unwrap();
        assert_eq!(lg.deviance(1.7, 1.7), 0.0);
        let two = std::f64::consts::LN_2;
        assert_relative_eq!(lg.deviance(two, 0.0), 1.0 - two, max_relative = 1e-12);
        let gs = ErrorModel::gaussian(1.0).unwrap();
        assert_relative_eq!(gs.deviance(2.0, 0.0), 2.0, max_relative = 1e-12);
    }

    #[test]
    fn deviance_star_examples() {
        let lg = ErrorModel::log_gamma(3.0).unwrap();
        assert_eq!(lg.deviance_star(0.0), 0.0);
        assert_relative_eq!(
            lg.deviance_star(1.0),
            std::f64::consts::E - 2.0,
            max_relative = 1e-12
        );
        assert_relative_eq!(
            lg.deviance_star(-1.0),
            (-1.0f64).exp(),
            max_relative = 1e-12
        );
    }

    #[test]
    fn deviance_saturates_not_overflows() {
        let lg = ErrorModel::log_gamma(3.0).unwrap();
        let d = lg.deviance(800.0, 0.0);
        assert!(deviance_is_saturated(d));
        assert!(d.is_finite());
    }

    #[test]
    fn deviance_matches_star_exactly() {
        let lg = ErrorModel::log_gamma(2.5).unwrap();
        for i in 0..100 {
            let y = -3.0 + 0.07 * i as f64;
            let a = 1.0 - 0.05 * i as f64;
            assert_eq!(lg.deviance(y, a), lg.deviance_star(y - a));
        }
    }

    #[test]
    fn deviance_zero_iff_at_mode() {
        let models = [
            ErrorModel::log_gamma(3.0).unwrap(),
            ErrorModel::gaussian(0.7).unwrap(),
            ErrorModel::general(|s: f64| -(s - 0.3).powi(4), 0.3, 1.5).unwrap(),
        ];
        for m in &models {
            for i in 0..10 {
                for j in 0..10 {
                    let y = -2.0 + 0.45 * i as f64;
                    let a = -2.0 + 0.45 * j as f64;
                    let d = m.deviance(y, a);
                    assert!(d >= 0.0);
                    if (y - a - m.e0).abs() < 1e-15 {
                        assert_eq!(d, 0.0);
                    } else {
                        assert!(d > 0.0, "d({y},{a}) = 0 away from the mode");
                    }
                }
            }
        }
    }

    #[test]
    fn deviance_star_strictly_convex_log_gamma() {
        let lg = ErrorModel::log_gamma(3.0).unwrap();
        let h = 1e-4;
        let mut u = -5.0;
        while u <= 5.0 {
            let second =
                lg.deviance_star(u + h) - 2.0 * lg.deviance_star(u) + lg.deviance_star(u - h);
            assert!(second > 0.0, "second difference not positive at u = {u}");
            u += 0.25;
        }
    }

    #[test]
    fn sampler_mean_one_and_variance() {
        let m = ErrorModel::log_gamma(3.0).unwrap();
        let n = 100_000;
        let eps = m.sample_errors(n, 42).unwrap();
        let mean_exp: f64 = eps.iter().map(|e| e.exp()).sum::<f64>() / n as f64;
        assert_abs_diff_eq!(mean_exp, 1.0, epsilon = 0.02);

        // Var(log G) for G ~ Gamma(3, rate 3) is trigamma(3) ≈ 0.394934.
        // The quadrature oracle below recomputes it from the density.
        let mean: f64 = eps.iter().sum::<f64>() / n as f64;
        let var: f64 = eps.iter().map(|e| (e - mean).powi(2)).sum::<f64>() / n as f64;
        let mu = integrate(
            |s| s * m.density(s).unwrap(),
            -30.0,
            10.0,
            QuadOptions::default(),
        );
        let var_quad = integrate(
            |s| (s - mu).powi(2) * m.density(s).unwrap(),
            -30.0,
            10.0,
            QuadOptions::default(),
        );
        assert_abs_diff_eq!(var_quad, 0.3949, epsilon = 1e-3);
        assert_abs_diff_eq!(var, var_quad, epsilon = 0.02);
    }

    #[test]
    fn sampler_mode_near_zero() {
        let m = ErrorModel::log_gamma(3.0).unwrap();
        let eps = m.sample_errors(100_000, 7).unwrap();
        // Gaussian KDE argmax over a grid
        let n = eps.len() as f64;
        let mean: f64 = eps.iter().sum::<f64>() / n;
        let sd: f64 = (eps.iter().map(|e| (e - mean).powi(2)).sum::<f64>() / n).sqrt();
        let h = 1.06 * sd * n.powf(-0.2);
        let mut best = (f64::NEG_INFINITY, 0.0);
        let mut x = -1.0;
        while x <= 1.0 {
            let dens: f64 = eps
                .iter()
                .map(|e| (-0.5 * ((e - x) / h).powi(2)).exp())
                .sum();
            if dens > best.0 {
                best = (dens, x);
            }
            x += 0.01;
        }
        assert!(best.1.abs() <= 0.05, "KDE mode at {}", best.1);
    }

    #[test]
    fn sampler_deterministic() {
        let m = ErrorModel::log_gamma(2.0).unwrap();
        assert_eq!(
            m.sample_errors(50, 123).unwrap(),
            m.sample_errors(50, 123).unwrap()
        );
    }

    #[test]
    fn sampler_matches_density_ks() {
        let m = ErrorModel::log_gamma(3.0).unwrap();
        let mut eps = m.sample_errors(100_000, 99).unwrap();
        eps.sort_by(f64::total_cmp);
        // CDF by cumulative quadrature on a fine grid
        let lo = -12.0;
        let steps = 4000;
        let hi = 6.0;
        let dx = (hi - lo) / steps as f64;
        let mut cdf = vec![0.0f64; steps + 1];
        let mut prev = m.density(lo).unwrap();
        for k in 1..=steps {
            let x = lo + dx * k as f64;
            let cur = m.density(x).unwrap();
            cdf[k] = cdf[k - 1] + 0.5 * (prev + cur) * dx;
            prev = cur;
        }
        let eval_cdf = |x: f64| -> f64 {
            if x <= lo {
                return 0.0;
            }
            if x >= hi {
                return 1.0;
            }
            let t = (x - lo) / dx;
            let k = t.floor() as usize;
            let frac = t - k as f64;
            cdf[k] * (1.0 - frac) + cdf[(k + 1).min(steps)] * frac
        };
        let n = eps.len();
        let mut ks = 0.0f64;
        for (i, &e) in eps.iter().enumerate() {
            let f = eval_cdf(e);
            let emp_hi = (i + 1) as f64 / n as f64;
            let emp_lo = i as f64 / n as f64;
            ks = ks.max((f - emp_hi).abs()).max((f - emp_lo).abs());
        }
        assert!(ks < 0.01, "KS distance {ks}");
    }

    #[test]
    fn general_model_density_normalizes() {
        // a shifted quartic family
        let m = ErrorModel::general(|s: f64| -(s - 0.5).powi(4), 0.5, 2.0).unwrap();
        let mass = integrate(
            |s| m.density(s).unwrap(),
            -20.0,
            20.0,
            QuadOptions::default(),
        );
        assert_abs_diff_eq!(mass, 1.0, epsilon = 1e-8);
    }
}

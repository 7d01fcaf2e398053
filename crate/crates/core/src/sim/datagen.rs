//! Data generation for the numerical study: covariates uniform on the unit
//! cube, responses through the single index link plus log-Gamma errors, and
//! the six contamination schemes.

use super::{Dataset, Scheme, SimConfig};
use crate::error::{Error, Result};
use crate::error_models::ErrorModel;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Draws, in a fixed stream order (covariates, then errors): the clean part
/// of a sample is bitwise identical across schemes for the same seed.
fn gen_parts(n: usize, seed: u64, cfg: &SimConfig) -> Result<(Vec<f64>, Vec<f64>, ChaCha8Rng)> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let q = cfg.q;
    let mut x = Vec::with_capacity(n * q);
    for _ in 0..n * q {
        x.push(rng.gen_range(0.0..1.0));
    }
    let model = ErrorModel::log_gamma(cfg.gamma0)?;
    let eps = model.sample_errors_with(n, &mut rng)?;
    Ok((x, eps, rng))
}

/// Clean sample: `y = η₀(β₀ᵀx) + ε`.
pub fn gen_clean(n: usize, seed: u64, cfg: &SimConfig) -> Result<Dataset> {
    let (x, eps, _) = gen_parts(n, seed, cfg)?;
    let q = cfg.q;
    let mut y = Vec::with_capacity(n);
    for i in 0..n {
        let proj: f64 = x[i * q..(i + 1) * q]
            .iter()
            .zip(&cfg.beta0)
            .map(|(a, b)| a * b)
            .sum();
        y.push(cfg.link.eval(proj) + eps[i]);
    }
    Dataset::new(y, x, q)
}

/// Contaminated sample: each observation is independently replaced with
/// probability 0.10. Moderate schemes shift by `log k` and re-route the
/// signal through β₀⊥ = (−β₀₂, β₀₁); severe schemes replace the signal
/// entirely by `log k + ε`.
pub fn gen_contaminated(n: usize, scheme: Scheme, seed: u64, cfg: &SimConfig) -> Result<Dataset> {
    let Some(k) = scheme.k() else {
        return Err(Error::InvalidInput(
            "gen_contaminated needs a contaminated scheme; use gen_clean for C0".into(),
        ));
    };
    if scheme.is_moderate() && cfg.q != 2 {
        return Err(Error::InvalidInput(
            "moderate schemes route the signal through the orthogonal direction; defined for q = 2"
                .into(),
        ));
    }
    let (x, eps, mut rng) = gen_parts(n, seed, cfg)?;
    let q = cfg.q;
    let log_k = k.ln();
    // counterclockwise orthogonal direction, fixed for reproducibility
    let beta_perp = if q == 2 {
        vec![-cfg.beta0[1], cfg.beta0[0]]
    } else {
        vec![]
    };
    let mut y = Vec::with_capacity(n);
    for i in 0..n {
        let row = &x[i * q..(i + 1) * q];
        let proj: f64 = row.iter().zip(&cfg.beta0).map(|(a, b)| a * b).sum();
        let clean = cfg.link.eval(proj) + eps[i];
        let u: f64 = rng.gen_range(0.0..1.0);
        if u > 0.90 {
            let contaminated = if scheme.is_moderate() {
                let proj_perp: f64 = row.iter().zip(&beta_perp).map(|(a, b)| a * b).sum();
                log_k + cfg.link.eval(proj_perp) + eps[i]
            } else {
                log_k + eps[i]
            };
            y.push(contaminated);
        } else {
            y.push(clean);
        }
    }
    Dataset::new(y, x, q)
}

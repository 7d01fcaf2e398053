//! Derivative-free minimization over the unit sphere with the sign convention
//! `β_q > 0`.
//!
//! For q = 2 the sphere is a circle: a dense angle grid over (0, π) (which
//! already pins the second component positive) followed by golden-section
//! refinement. For q > 2: hyperspherical angles searched by Nelder–Mead from
//! several seeded restarts, with the sign fixed on output. Profile objectives
//! are antipodally invariant, so the sign flip costs nothing.

use crate::error::{Error, Result};
use crate::num::{golden_min, nelder_mead, NelderMeadOptions};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

#[derive(Debug, Clone)]
pub struct SphereConfig {
    /// grid resolution of the q = 2 angle sweep
    pub grid_points: usize,
    /// angle tolerance of the final refinement
    pub tol: f64,
    /// Nelder–Mead restarts for q > 2
    pub restarts: usize,
    pub seed: u64,
    /// optional warm start (need not be exactly unit)
    pub init: Option<Vec<f64>>,
}

impl Default for SphereConfig {
    fn default() -> Self {
        SphereConfig {
            grid_points: 64,
            tol: 1e-6,
            restarts: 8,
            seed: 0,
            init: None,
        }
    }
}

fn angles_to_beta(angles: &[f64]) -> Vec<f64> {
    let q = angles.len() + 1;
    let mut beta = vec![0.0; q];
    let mut sin_prod = 1.0;
    for (j, &phi) in angles.iter().enumerate() {
        beta[j] = sin_prod * phi.cos();
        sin_prod *= phi.sin();
    }
    beta[q - 1] = sin_prod;
    beta
}

fn beta_to_angles(beta: &[f64]) -> Vec<f64> {
    let q = beta.len();
    let mut angles = vec![0.0; q - 1];
    let mut rest: f64 = beta.iter().map(|b| b * b).sum::<f64>().sqrt();
    for j in 0..q - 1 {
        if rest < 1e-300 {
            angles[j] = 0.5 * std::f64::consts::PI;
            continue;
        }
        let c = (beta[j] / rest).clamp(-1.0, 1.0);
        angles[j] = c.acos();
        rest = (rest * rest - beta[j] * beta[j]).max(0.0).sqrt();
    }
    // recover the sign of the last coordinate through the final angle
    if beta[q - 1] < 0.0 {
        angles[q - 2] = 2.0 * std::f64::consts::PI - angles[q - 2];
    }
    angles
}

fn fix_sign(mut beta: Vec<f64>) -> Vec<f64> {
    if beta[beta.len() - 1] < 0.0 {
        for b in &mut beta {
            *b = -*b;
        }
    }
    beta
}

/// Minimize `objective` over the unit sphere in ℝ^q. Candidate evaluations
/// that fail (e.g. kernel starvation at extreme projections) count as +∞.
/// Returns `(β̂, objective value, improved)` where `improved` is false when no
/// candidate beat the supplied warm start.
pub fn optimize_sphere<F>(mut objective: F, q: usize, cfg: &SphereConfig) -> Result<(Vec<f64>, f64, bool)>
where
    F: FnMut(&[f64]) -> Result<f64>,
{
    if q < 2 {
        return Err(Error::InvalidInput("sphere search needs q >= 2".into()));
    }
    let mut eval_inf = |b: &[f64]| -> f64 { objective(b).unwrap_or(f64::INFINITY) };

    if q == 2 {
        let pi = std::f64::consts::PI;
        let g = cfg.grid_points.max(4);
        let theta_of = |b: &[f64]| -> f64 {
            let (b1, b2) = if b[1] < 0.0 { (-b[0], -b[1]) } else { (b[0], b[1]) };
            b2.atan2(b1).clamp(1e-9, pi - 1e-9)
        };
        let beta_of = |t: f64| vec![t.cos(), t.sin()];

        let init_val = cfg.init.as_ref().map(|b| {
            let t = theta_of(b);
            (t, eval_inf(&beta_of(t)))
        });
        let mut best = init_val.unwrap_or((f64::NAN, f64::INFINITY));
        let step = pi / g as f64;
        for k in 0..g {
            let t = step * (k as f64 + 0.5);
            let v = eval_inf(&beta_of(t));
            if v < best.1 {
                best = (t, v);
            }
        }
        if !best.1.is_finite() {
            return Err(Error::InvalidInput(
                "sphere objective failed on the whole grid".into(),
            ));
        }
        let lo = (best.0 - step).max(1e-9);
        let hi = (best.0 + step).min(pi - 1e-9);
        let (t_ref, v_ref) = golden_min(|t| eval_inf(&beta_of(t)), lo, hi, cfg.tol);
        if v_ref < best.1 {
            best = (t_ref, v_ref);
        }
        let improved = init_val.map_or(true, |(_, v0)| best.1 <= v0);
        return Ok((beta_of(best.0), best.1, improved));
    }

    // q > 2: Nelder-Mead over hyperspherical angles, several restarts
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let pi = std::f64::consts::PI;
    let mut starts: Vec<Vec<f64>> = Vec::new();
    if let Some(init) = &cfg.init {
        starts.push(beta_to_angles(init));
    }
    starts.push(vec![pi / 2.0; q - 1]);
    for _ in 0..cfg.restarts {
        starts.push((0..q - 1).map(|_| rng.gen_range(0.1..pi - 0.1)).collect());
    }

    let init_val = cfg
        .init
        .as_ref()
        .map(|b| {
            let norm: f64 = b.iter().map(|v| v * v).sum::<f64>().sqrt();
            let unit: Vec<f64> = b.iter().map(|v| v / norm).collect();
            (unit.clone(), eval_inf(&unit))
        });
    let mut best: (Vec<f64>, f64) = init_val
        .clone()
        .unwrap_or_else(|| (vec![0.0; q], f64::INFINITY));

    for start in starts {
        let (angles, value) = nelder_mead(
            |a| eval_inf(&angles_to_beta(a)),
            &start,
            NelderMeadOptions {
                max_iter: 600,
                x_tol: cfg.tol,
                f_tol: 0.0,
                step: 0.3,
            },
        );
        if value < best.1 {
            best = (angles_to_beta(&angles), value);
        }
    }
    if !best.1.is_finite() {
        return Err(Error::InvalidInput(
            "sphere objective failed at every restart".into(),
        ));
    }
    let improved = init_val.map_or(true, |(_, v0)| best.1 <= v0);
    Ok((fix_sign(best.0), best.1, improved))
}

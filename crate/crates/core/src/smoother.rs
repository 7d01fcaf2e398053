//! One-dimensional kernel-local fits along a projected design: local-constant
//! and local-linear M-estimates, local S-scale/location, kernel-weighted
//! medians, and the implicit-function derivatives of the local-constant link
//! estimate with respect to the evaluation point and the index.
//!
//! All fits run on a [`SortedProjections`] view (projections in ascending
//! order with a data-intrinsic tie-break), which makes every weighted sum
//! independent of the input row order and lets compact-support kernels touch
//! only a contiguous window.

use crate::error::{Error, Result};
use crate::error_models::{ErrorModel, ModelKind};
use crate::loss::LossSpec;
use crate::num::{brent_min, golden_min, nelder_mead, weighted_median, NelderMeadOptions};
use crate::sim::Dataset;
use serde::{Deserialize, Serialize};

/// Kernel mass below this is treated as starvation.
pub const MASS_EPS: f64 = 1e-12;

/// Gaussian kernels are truncated at this many bandwidths; the discarded
/// relative mass is ~2e-16, below double-precision resolution of the sums.
const GAUSS_RADIUS: f64 = 8.5;

const INV_SQRT_2PI: f64 = 0.398_942_280_401_432_7;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum KernelKind {
    Epanechnikov,
    Gaussian,
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct KernelSpec {
    pub kind: KernelKind,
    pub h: f64,
}

impl KernelSpec {
    pub fn epanechnikov(h: f64) -> Self {
        KernelSpec {
            kind: KernelKind::Epanechnikov,
            h,
        }
    }

    pub fn gaussian(h: f64) -> Self {
        KernelSpec {
            kind: KernelKind::Gaussian,
            h,
        }
    }

    /// K(t), unnormalized argument (bandwidth already divided out).
    #[inline]
    pub fn k(&self, t: f64) -> f64 {
        match self.kind {
            KernelKind::Epanechnikov => {
                if t.abs() < 1.0 {
                    0.75 * (1.0 - t * t)
                } else {
                    0.0
                }
            }
            KernelKind::Gaussian => INV_SQRT_2PI * (-0.5 * t * t).exp(),
        }
    }

    /// K′(t). Continuous everywhere only for the Gaussian kernel.
    #[inline]
    pub fn k_prime(&self, t: f64) -> f64 {
        match self.kind {
            KernelKind::Epanechnikov => {
                if t.abs() < 1.0 {
                    -1.5 * t
                } else {
                    0.0
                }
            }
            KernelKind::Gaussian => -t * INV_SQRT_2PI * (-0.5 * t * t).exp(),
        }
    }

    pub fn is_differentiable(&self) -> bool {
        matches!(self.kind, KernelKind::Gaussian)
    }

    fn support_radius(&self) -> f64 {
        match self.kind {
            KernelKind::Epanechnikov => 1.0,
            KernelKind::Gaussian => GAUSS_RADIUS,
        }
    }
}

/// Result of a local fit.
#[derive(Debug, Clone, Copy)]
pub struct LocalFit {
    /// fitted level η̂(u)
    pub a: f64,
    /// fitted slope (local-linear only, zero otherwise)
    pub b: f64,
    /// raw kernel mass Σᵢ wᵢ K_h(pᵢ − u)
    pub weight_mass: f64,
    pub converged: bool,
}

/// Projections sorted ascending with a data-intrinsic tie-break so that every
/// downstream sum is invariant under permutations of the input rows.
#[derive(Debug, Clone)]
pub struct SortedProjections {
    pub proj: Vec<f64>,
    pub y: Vec<f64>,
    /// exp(y), cached for the log-Gamma closed form and deviance fast path
    pub ey: Vec<f64>,
    /// case weights (all 1 unless reweighted, e.g. by the EIF oracle)
    pub cw: Vec<f64>,
    /// original row index of each sorted slot
    pub order: Vec<usize>,
}

impl SortedProjections {
    pub fn new(proj: &[f64], y: &[f64], case_weights: Option<&[f64]>) -> Self {
        let n = proj.len();
        assert_eq!(n, y.len());
        let mut order: Vec<usize> = (0..n).collect();
        order.sort_by(|&a, &b| {
            proj[a]
                .total_cmp(&proj[b])
                .then(y[a].total_cmp(&y[b]))
                .then(a.cmp(&b))
        });
        let mut sp = SortedProjections {
            proj: Vec::with_capacity(n),
            y: Vec::with_capacity(n),
            ey: Vec::with_capacity(n),
            cw: Vec::with_capacity(n),
            order: Vec::with_capacity(n),
        };
        for &i in &order {
            sp.proj.push(proj[i]);
            sp.y.push(y[i]);
            sp.ey.push(y[i].exp());
            sp.cw.push(case_weights.map_or(1.0, |w| w[i]));
            sp.order.push(i);
        }
        sp
    }

    pub fn from_dataset(data: &Dataset, beta: &[f64]) -> Self {
        let proj = data.projections(beta);
        Self::new(&proj, &data.y, Some(&data.w))
    }

    pub fn len(&self) -> usize {
        self.proj.len()
    }

    pub fn is_empty(&self) -> bool {
        self.proj.is_empty()
    }

    fn window_range(&self, u: f64, radius: f64) -> (usize, usize) {
        let lo = self.proj.partition_point(|&p| p <= u - radius);
        let hi = self.proj.partition_point(|&p| p < u + radius);
        (lo, hi)
    }
}

/// A kernel window: raw kernel values (times case weights) over a contiguous
/// slice of the sorted sample.
pub struct Window {
    pub lo: usize,
    pub hi: usize,
    pub k: Vec<f64>,
    pub sum_k: f64,
    /// Σᵢ wᵢ K_h(pᵢ − u) with the 1/h normalization
    pub raw_mass: f64,
    pub h_used: f64,
}

fn window_at(sp: &SortedProjections, u: f64, kernel: KernelSpec, h: f64) -> Window {
    let radius = kernel.support_radius() * h;
    let (lo, hi) = sp.window_range(u, radius);
    let mut k = Vec::with_capacity(hi - lo);
    let mut sum = 0.0;
    for i in lo..hi {
        let v = sp.cw[i] * kernel.k((sp.proj[i] - u) / h);
        k.push(v);
        sum += v;
    }
    Window {
        lo,
        hi,
        k,
        sum_k: sum,
        raw_mass: sum / h,
        h_used: h,
    }
}

/// Build a window, expanding the bandwidth by 1.5 up to five times if the
/// kernel mass is starved (cross-validation folds can leave gaps in
/// projection space).
pub fn make_window(sp: &SortedProjections, u: f64, kernel: KernelSpec) -> Result<Window> {
    let mut h = kernel.h;
    for _ in 0..=5 {
        let w = window_at(sp, u, kernel, h);
        if w.raw_mass > MASS_EPS {
            return Ok(w);
        }
        h *= 1.5;
    }
    Err(Error::NoEffectiveNeighbors {
        u,
        mass: window_at(sp, u, kernel, h).raw_mass,
    })
}

/// Normalized kernel weights over the whole sample (no bandwidth expansion).
/// Returns the weight vector aligned with `projections` and the raw mass.
pub fn kernel_weights(u: f64, projections: &[f64], kernel: KernelSpec) -> Result<(Vec<f64>, f64)> {
    if projections.is_empty() {
        return Err(Error::InvalidInput("projections must be non-empty".into()));
    }
    let mut w: Vec<f64> = projections
        .iter()
        .map(|&p| kernel.k((p - u) / kernel.h))
        .collect();
    let sum: f64 = w.iter().sum();
    let raw_mass = sum / kernel.h;
    if raw_mass <= MASS_EPS {
        return Err(Error::NoEffectiveNeighbors { u, mass: raw_mass });
    }
    for v in &mut w {
        *v /= sum;
    }
    Ok((w, raw_mass))
}

// ---------------------------------------------------------------------------
// weighted deviance objective over a window
// ---------------------------------------------------------------------------

/// Σᵢ kᵢ ρ̃(d(yᵢ, a)/α²) / Σᵢ kᵢ with a log-Gamma fast path (one exp per
/// candidate level instead of one per observation).
fn window_objective(sp: &SortedProjections, win: &Window, loss: &LossSpec, model: &ErrorModel, a: f64) -> f64 {
    let inv_a2 = 1.0 / (loss.alpha * loss.alpha);
    let mut acc = 0.0;
    match model.kind {
        ModelKind::LogGamma if a > -690.0 && a < 690.0 => {
            let ea = (-a).exp();
            for (j, i) in (win.lo..win.hi).enumerate() {
                let d = (sp.ey[i] * ea - sp.y[i] + a - 1.0).max(0.0);
                acc += win.k[j] * loss.rho_tilde(d * inv_a2);
            }
        }
        _ => {
            for (j, i) in (win.lo..win.hi).enumerate() {
                acc += win.k[j] * loss.rho_tilde(model.deviance(sp.y[i], a) * inv_a2);
            }
        }
    }
    acc / win.sum_k
}

fn window_objective_linear(
    sp: &SortedProjections,
    win: &Window,
    loss: &LossSpec,
    model: &ErrorModel,
    u: f64,
    a: f64,
    b: f64,
) -> f64 {
    let inv_a2 = 1.0 / (loss.alpha * loss.alpha);
    let mut acc = 0.0;
    for (j, i) in (win.lo..win.hi).enumerate() {
        let center = a + b * (sp.proj[i] - u);
        acc += win.k[j] * loss.rho_tilde(model.deviance(sp.y[i], center) * inv_a2);
    }
    acc / win.sum_k
}

/// y-range of the positively weighted observations, padded by one.
fn search_range(sp: &SortedProjections, win: &Window) -> (f64, f64) {
    let mut lo = f64::INFINITY;
    let mut hi = f64::NEG_INFINITY;
    for (j, i) in (win.lo..win.hi).enumerate() {
        if win.k[j] > 0.0 {
            lo = lo.min(sp.y[i]);
            hi = hi.max(sp.y[i]);
        }
    }
    (lo - 1.0, hi + 1.0)
}

/// Closed-form local-constant minimizer for the classical loss, when the
/// model admits one.
fn classical_seed(sp: &SortedProjections, win: &Window, model: &ErrorModel) -> f64 {
    match model.kind {
        ModelKind::LogGamma => {
            let mut s = 0.0;
            for (j, i) in (win.lo..win.hi).enumerate() {
                s += win.k[j] * sp.ey[i];
            }
            (s / win.sum_k).ln()
        }
        ModelKind::GaussianSymmetric => {
            let mut s = 0.0;
            for (j, i) in (win.lo..win.hi).enumerate() {
                s += win.k[j] * sp.y[i];
            }
            s / win.sum_k
        }
        ModelKind::GeneralUnimodal { .. } => {
            let vals: Vec<f64> = (win.lo..win.hi).map(|i| sp.y[i] - model.e0).collect();
            weighted_median(&vals, &win.k)
        }
    }
}

const LEVEL_GRID: usize = 16;

/// Local-constant M-estimate: minimize `Σ Wᵢ φ(yᵢ, a)` over the level `a`.
///
/// Bounded losses are non-convex, so the search seeds from the classical
/// closed form plus a 16-point grid over the local response range, then
/// refines the best seed with Brent.
pub fn local_m_constant(
    sp: &SortedProjections,
    u: f64,
    kernel: KernelSpec,
    loss: &LossSpec,
    model: &ErrorModel,
    tol: f64,
) -> Result<LocalFit> {
    let win = make_window(sp, u, kernel)?;
    let a_cl = classical_seed(sp, &win, model);
    let exact_classical = !loss.is_bounded()
        && matches!(
            model.kind,
            ModelKind::LogGamma | ModelKind::GaussianSymmetric
        );
    if exact_classical {
        return Ok(LocalFit {
            a: a_cl,
            b: 0.0,
            weight_mass: win.raw_mass,
            converged: true,
        });
    }
    let f = |a: f64| window_objective(sp, &win, loss, model, a);
    let (range_lo, range_hi) = search_range(sp, &win);
    let step = (range_hi - range_lo) / (LEVEL_GRID - 1) as f64;
    let mut best = (a_cl, f(a_cl));
    for g in 0..LEVEL_GRID {
        let a = range_lo + step * g as f64;
        let v = f(a);
        if v < best.1 {
            best = (a, v);
        }
    }
    // the grid degrades when a wild response stretches the range; the
    // weighted median is a resistant extra seed
    let med = {
        let vals: Vec<f64> = (win.lo..win.hi).map(|i| sp.y[i] - model.e0).collect();
        weighted_median(&vals, &win.k)
    };
    let grid_seed = best;
    for (seed, radius) in [(grid_seed.0, step.max(tol)), (med, 1.5), (a_cl, 1.5)] {
        if !seed.is_finite() {
            continue;
        }
        // skip refining seeds that sit in the basin already refined
        if seed != grid_seed.0 && (seed - best.0).abs() < 0.5 * step && f(seed) >= best.1 {
            continue;
        }
        let (a, fa) = brent_min(f, seed - radius, seed + radius, tol);
        if fa < best.1 {
            best = (a, fa);
        }
    }
    // Newton polish on the score equation sharpens tight fits to machine
    // precision, which the influence oracles rely on
    let mut a = best.0;
    let mut fv = best.1;
    let newton_iters = if tol <= 1e-9 { 4 } else { 0 };
    for _ in 0..newton_iters {
        let mut score = 0.0;
        let mut curv = 0.0;
        for (j, i) in (win.lo..win.hi).enumerate() {
            score += win.k[j] * loss.psi(model, sp.y[i], a);
            curv += win.k[j] * loss.chi(model, sp.y[i], a);
        }
        if !(curv > 0.0) {
            break;
        }
        let a_new = a - score / curv;
        if !a_new.is_finite() {
            break;
        }
        let f_new = f(a_new);
        if f_new > fv + 1e-14 {
            break;
        }
        let moved = (a_new - a).abs();
        a = a_new;
        fv = f_new;
        if moved < 1e-14 * (1.0 + a.abs()) {
            break;
        }
    }
    Ok(LocalFit {
        a,
        b: 0.0,
        weight_mass: win.raw_mass,
        converged: true,
    })
}

/// Local-linear M-estimate: joint minimization over level and slope.
///
/// Seeds at the classical local-constant level with slope 0 plus a coarse
/// level × slope grid, alternates five one-dimensional refinements in each
/// coordinate, then polishes with Nelder–Mead.
pub fn local_m_linear(
    sp: &SortedProjections,
    u: f64,
    kernel: KernelSpec,
    loss: &LossSpec,
    model: &ErrorModel,
    tol: f64,
) -> Result<LocalFit> {
    let win = make_window(sp, u, kernel)?;
    let a_cl = classical_seed(sp, &win, model);
    let f = |a: f64, b: f64| window_objective_linear(sp, &win, loss, model, u, a, b);
    let (range_lo, range_hi) = search_range(sp, &win);
    let yspan = range_hi - range_lo;
    let bmax = yspan / win.h_used;

    let mut best = (a_cl, 0.0, f(a_cl, 0.0));
    let astep = yspan / (LEVEL_GRID - 1) as f64;
    for g in 0..LEVEL_GRID {
        let a = range_lo + astep * g as f64;
        for bs in [-1.0, -0.5, 0.0, 0.5, 1.0] {
            let b = bs * bmax;
            let v = f(a, b);
            if v < best.2 {
                best = (a, b, v);
            }
        }
    }
    let (mut a, mut b, mut fv) = best;
    for _ in 0..5 {
        let (na, nfa) = brent_min(|x| f(x, b), a - astep, a + astep, tol);
        if nfa < fv {
            a = na;
            fv = nfa;
        }
        let bstep = 0.5 * bmax.max(1.0);
        let (nb, nfb) = brent_min(|x| f(a, x), b - bstep, b + bstep, tol);
        if nfb < fv {
            b = nb;
            fv = nfb;
        }
    }
    let (polished, fp) = nelder_mead(
        |x| f(x[0], x[1]),
        &[a, b],
        NelderMeadOptions {
            max_iter: 200,
            x_tol: tol,
            f_tol: 0.0,
            step: astep.max(1e-3),
        },
    );
    if fp < fv {
        a = polished[0];
        b = polished[1];
    }
    Ok(LocalFit {
        a,
        b,
        weight_mass: win.raw_mass,
        converged: true,
    })
}

/// Outcome of an M-scale equation solve.
#[derive(Debug, Clone, Copy)]
pub struct ScaleSolution {
    pub s: f64,
    /// the equation was degenerate (all deviances zero, or too many zeros for
    /// the target b); `s` is 0 in that case
    pub degenerate: bool,
}

/// Solve `Σ wᵢ ρ_T(√dᵢ / s) = b Σ wᵢ` for the scale `s` given nonnegative
/// deviances. The left side is continuous and nonincreasing in `s`, so the
/// root is unique when it exists.
pub fn scale_root(weights: &[f64], devs: &[f64], b: f64, rel_tol: f64) -> ScaleSolution {
    debug_assert_eq!(weights.len(), devs.len());
    let loss = LossSpec::tukey(1.0);
    let wsum: f64 = weights.iter().sum();
    let mut wpos = 0.0;
    let mut dmax: f64 = 0.0;
    for (w, d) in weights.iter().zip(devs) {
        if *d > 0.0 {
            wpos += w;
            dmax = dmax.max(*d);
        }
    }
    // the M-scale root exists and is unique only while the mass at zero
    // deviance stays below (1 - b); at or past that boundary the equation
    // degenerates (the scale functional is at its breakdown point)
    if wpos <= b * wsum {
        return ScaleSolution {
            s: 0.0,
            degenerate: true,
        };
    }
    // Neumaier-compensated sum: near-saturated windows otherwise absorb the
    // contribution of an almost exactly fitted point and the bisection walks
    // off the root
    let eval = |s: f64| {
        let inv_s2 = 1.0 / (s * s);
        let mut acc = -b * wsum;
        let mut comp = 0.0;
        for (w, d) in weights.iter().zip(devs) {
            let term = w * loss.rho_tilde(d * inv_s2);
            let t = acc + term;
            comp += if acc.abs() >= term.abs() {
                (acc - t) + term
            } else {
                (term - t) + acc
            };
            acc = t;
        }
        acc + comp
    };
    let mut hi = dmax.sqrt();
    while eval(hi) > 0.0 {
        hi *= 2.0;
        if !hi.is_finite() {
            return ScaleSolution {
                s: 0.0,
                degenerate: true,
            };
        }
    }
    let mut lo = hi * 1e-6;
    while eval(lo) <= 0.0 {
        lo *= 0.25;
        if lo < 1e-300 {
            return ScaleSolution {
                s: 0.0,
                degenerate: true,
            };
        }
    }
    for _ in 0..200 {
        if hi - lo <= rel_tol * hi {
            break;
        }
        let mid = 0.5 * (lo + hi);
        if eval(mid) > 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    ScaleSolution {
        s: 0.5 * (lo + hi),
        degenerate: false,
    }
}

/// Local S-scale at a fixed level: the M-scale of the deviances `d(yᵢ, a)`
/// under the kernel weights at `u`.
pub fn local_s_scale(
    sp: &SortedProjections,
    a: f64,
    u: f64,
    kernel: KernelSpec,
    model: &ErrorModel,
    b_const: f64,
) -> Result<ScaleSolution> {
    let win = make_window(sp, u, kernel)?;
    let devs: Vec<f64> = (win.lo..win.hi).map(|i| model.deviance(sp.y[i], a)).collect();
    Ok(scale_root(&win.k, &devs, b_const, 1e-10))
}

/// Local S-location: minimize the S-scale curve `a ↦ s(a)` by a 32-point
/// coarse grid over the local response range followed by golden-section
/// refinement. Returns the argmin and the minimal scale.
pub fn local_s_location(
    sp: &SortedProjections,
    u: f64,
    kernel: KernelSpec,
    model: &ErrorModel,
    b_const: f64,
    tol: f64,
) -> Result<(f64, f64, f64)> {
    const S_GRID: usize = 32;
    let win = make_window(sp, u, kernel)?;
    if win.hi - win.lo == 1 {
        // single observation: perfect fit at the mode
        return Ok((sp.y[win.lo] - model.e0, 0.0, win.raw_mass));
    }
    let mut devs = vec![0.0; win.hi - win.lo];
    let mut eval = |a: f64, rel_tol: f64| -> f64 {
        match model.kind {
            ModelKind::LogGamma if a > -690.0 && a < 690.0 => {
                let ea = (-a).exp();
                for (j, i) in (win.lo..win.hi).enumerate() {
                    devs[j] = (sp.ey[i] * ea - sp.y[i] + a - 1.0).max(0.0);
                }
            }
            _ => {
                for (j, i) in (win.lo..win.hi).enumerate() {
                    devs[j] = model.deviance(sp.y[i], a);
                }
            }
        }
        let sol = scale_root(&win.k, &devs, b_const, rel_tol);
        // levels fitting >= (1-b) of the mass exactly sit at the breakdown
        // boundary of the scale functional; reject them as candidates
        if sol.degenerate {
            f64::INFINITY
        } else {
            sol.s
        }
    };
    let (range_lo, range_hi) = search_range(sp, &win);
    let step = (range_hi - range_lo) / (S_GRID - 1) as f64;
    // coarse scale solves are enough to locate the best grid cell
    let mut best = (range_lo, f64::INFINITY);
    for g in 0..S_GRID {
        let a = range_lo + step * g as f64;
        let s = eval(a, 1e-3);
        if s < best.1 {
            best = (a, s);
        }
    }
    let (a, _) = golden_min(|a| eval(a, 1e-7), best.0 - step, best.0 + step, tol);
    let a = if eval(a, 1e-10) <= eval(best.0, 1e-10) { a } else { best.0 };
    let s = eval(a, 1e-12);
    Ok((a, s, win.raw_mass))
}

/// Kernel-weighted median of the responses at `u` (initial step of the
/// symmetric pipeline).
pub fn local_median(sp: &SortedProjections, u: f64, kernel: KernelSpec) -> Result<f64> {
    let win = make_window(sp, u, kernel)?;
    let vals: Vec<f64> = (win.lo..win.hi).map(|i| sp.y[i]).collect();
    Ok(weighted_median(&vals, &win.k))
}

// ---------------------------------------------------------------------------
// implicit-function derivatives of the local-constant link estimate
// ---------------------------------------------------------------------------

/// First derivatives (∂η̂/∂u, ∂η̂/∂β) of the local-constant fit at `(beta, u)`
/// by the implicit function theorem on the estimating equation
/// `Σ K((βᵀxᵢ−u)/h) ψ(yᵢ, η̂) = 0`:
///
/// ```text
/// ∂η̂/∂u = (1/h) F̄⁻¹ Ē          Ē = (1/n) Σ K′((βᵀxᵢ−u)/h) ψᵢ
/// ∂η̂/∂β = −(1/h) F̄⁻¹ ḡ         ḡ = (1/n) Σ K′((βᵀxᵢ−u)/h) ψᵢ xᵢ
///                                 F̄ = (1/n) Σ K((βᵀxᵢ−u)/h) χᵢ
/// ```
///
/// `eta_u` must be the converged local-constant value at `(beta, u)`.
pub fn eta_derivatives(
    data: &Dataset,
    beta: &[f64],
    u: f64,
    kernel: KernelSpec,
    loss: &LossSpec,
    model: &ErrorModel,
    eta_u: f64,
) -> Result<(f64, Vec<f64>)> {
    let q = data.q;
    let n = data.n() as f64;
    let h = kernel.h;
    let mut e_bar = 0.0;
    let mut f_bar = 0.0;
    let mut g_bar = vec![0.0; q];
    for i in 0..data.n() {
        let p = data.proj_row(beta, i);
        let t = (p - u) / h;
        let k = kernel.k(t);
        let kp = kernel.k_prime(t);
        if k == 0.0 && kp == 0.0 {
            continue;
        }
        let w = data.w[i];
        let psi = loss.psi(model, data.y[i], eta_u);
        let chi = loss.chi(model, data.y[i], eta_u);
        e_bar += w * kp * psi;
        f_bar += w * k * chi;
        let x = data.x_row(i);
        for j in 0..q {
            g_bar[j] += w * kp * psi * x[j];
        }
    }
    e_bar /= n;
    f_bar /= n;
    if f_bar.abs() < 1e-10 {
        return Err(Error::DegenerateCurvature(f_bar.abs()));
    }
    let du = e_bar / (h * f_bar);
    let dbeta: Vec<f64> = g_bar.iter().map(|g| -g / (n * h * f_bar)).collect();
    Ok((du, dbeta))
}

/// Second derivatives of the link estimate via central finite differences of
/// [`eta_derivatives`] (step `1e-3·h` in u, `1e-3` in each β coordinate,
/// free-coordinate perturbations; any sphere-chart correction is the
/// caller's concern).
pub struct EtaSecondDerivs {
    pub d2_uu: f64,
    /// ∂²η̂/∂u∂β
    pub d2_ub: Vec<f64>,
    /// ∂²η̂/∂β∂βᵀ, row-major q×q
    pub d2_bb: Vec<f64>,
    /// mixed partial from the other order, for symmetry checks
    pub d2_bu: Vec<f64>,
}

pub fn eta_second_derivatives(
    data: &Dataset,
    beta: &[f64],
    u: f64,
    kernel: KernelSpec,
    loss: &LossSpec,
    model: &ErrorModel,
    tol: f64,
) -> Result<EtaSecondDerivs> {
    let q = data.q;
    let du_step = 1e-3 * kernel.h;
    let db_step = 1e-3;

    let derivs_at = |beta_p: &[f64], u_p: f64| -> Result<(f64, Vec<f64>)> {
        let sp = SortedProjections::from_dataset(data, beta_p);
        let fit = local_m_constant(&sp, u_p, kernel, loss, model, tol)?;
        eta_derivatives(data, beta_p, u_p, kernel, loss, model, fit.a)
    };

    let (du_plus, db_plus) = derivs_at(beta, u + du_step)?;
    let (du_minus, db_minus) = derivs_at(beta, u - du_step)?;
    let d2_uu = (du_plus - du_minus) / (2.0 * du_step);
    // ∂/∂u of ∂η̂/∂β
    let d2_bu: Vec<f64> = (0..q)
        .map(|j| (db_plus[j] - db_minus[j]) / (2.0 * du_step))
        .collect();

    let mut d2_ub = vec![0.0; q];
    let mut d2_bb = vec![0.0; q * q];
    for j in 0..q {
        let mut bp = beta.to_vec();
        bp[j] += db_step;
        let (du_p, db_p) = derivs_at(&bp, u)?;
        let mut bm = beta.to_vec();
        bm[j] -= db_step;
        let (du_m, db_m) = derivs_at(&bm, u)?;
        d2_ub[j] = (du_p - du_m) / (2.0 * db_step);
        for l in 0..q {
            d2_bb[l * q + j] = (db_p[l] - db_m[l]) / (2.0 * db_step);
        }
    }
    // symmetrize the Hessian block (finite differences break exact symmetry)
    for j in 0..q {
        for l in (j + 1)..q {
            let avg = 0.5 * (d2_bb[j * q + l] + d2_bb[l * q + j]);
            d2_bb[j * q + l] = avg;
            d2_bb[l * q + j] = avg;
        }
    }
    Ok(EtaSecondDerivs {
        d2_uu,
        d2_ub,
        d2_bb,
        d2_bu,
    })
}

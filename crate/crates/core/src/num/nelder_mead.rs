//! Plain Nelder–Mead simplex minimizer for low-dimensional smooth-ish
//! objectives (used to polish local-linear fits and to search hyperspherical
//! angle charts).

#[derive(Debug, Clone, Copy)]
pub struct NelderMeadOptions {
    pub max_iter: usize,
    pub x_tol: f64,
    pub f_tol: f64,
    /// Initial simplex edge length per coordinate.
    pub step: f64,
}

impl Default for NelderMeadOptions {
    fn default() -> Self {
        NelderMeadOptions {
            max_iter: 400,
            x_tol: 1e-8,
            f_tol: 1e-12,
            step: 0.1,
        }
    }
}

/// Minimize `f` starting from `x0`. Returns `(argmin, min)`.
pub fn nelder_mead<F: FnMut(&[f64]) -> f64>(
    mut f: F,
    x0: &[f64],
    opts: NelderMeadOptions,
) -> (Vec<f64>, f64) {
    let n = x0.len();
    let (alpha, gamma, rho, sigma) = (1.0, 2.0, 0.5, 0.5);

    let mut simplex: Vec<(Vec<f64>, f64)> = Vec::with_capacity(n + 1);
    let f0 = f(x0);
    simplex.push((x0.to_vec(), f0));
    for i in 0..n {
        let mut p = x0.to_vec();
        p[i] += opts.step;
        let fp = f(&p);
        simplex.push((p, fp));
    }

    for _ in 0..opts.max_iter {
        simplex.sort_by(|a, b| a.1.total_cmp(&b.1));
        let best = simplex[0].1;
        let worst = simplex[n].1;
        let spread: f64 = (0..n)
            .map(|j| {
                simplex
                    .iter()
                    .map(|(p, _)| p[j])
                    .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), v| {
                        (lo.min(v), hi.max(v))
                    })
            })
            .map(|(lo, hi)| hi - lo)
            .fold(0.0, f64::max);
        if (worst - best).abs() <= opts.f_tol && spread <= opts.x_tol {
            break;
        }

        // centroid of all but the worst vertex
        let mut centroid = vec![0.0; n];
        for (p, _) in simplex.iter().take(n) {
            for j in 0..n {
                centroid[j] += p[j] / n as f64;
            }
        }

        let reflect: Vec<f64> = (0..n)
            .map(|j| centroid[j] + alpha * (centroid[j] - simplex[n].0[j]))
            .collect();
        let f_r = f(&reflect);

        if f_r < simplex[0].1 {
            let expand: Vec<f64> = (0..n)
                .map(|j| centroid[j] + gamma * (reflect[j] - centroid[j]))
                .collect();
            let f_e = f(&expand);
            simplex[n] = if f_e < f_r { (expand, f_e) } else { (reflect, f_r) };
        } else if f_r < simplex[n - 1].1 {
            simplex[n] = (reflect, f_r);
        } else {
            let contract: Vec<f64> = (0..n)
                .map(|j| centroid[j] + rho * (simplex[n].0[j] - centroid[j]))
                .collect();
            let f_c = f(&contract);
            if f_c < simplex[n].1 {
                simplex[n] = (contract, f_c);
            } else {
                // shrink toward the best vertex
                let best_p = simplex[0].0.clone();
                for k in 1..=n {
                    let p: Vec<f64> = (0..n)
                        .map(|j| best_p[j] + sigma * (simplex[k].0[j] - best_p[j]))
                        .collect();
                    let fp = f(&p);
                    simplex[k] = (p, fp);
                }
            }
        }
    }
    simplex.sort_by(|a, b| a.1.total_cmp(&b.1));
    simplex.swap_remove(0)
}

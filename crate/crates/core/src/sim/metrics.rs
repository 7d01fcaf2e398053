//! Replication metrics: the three summaries of the study.

/// Mean over replications of ‖β̂ − β₀‖².
pub fn mse_beta(estimates: &[Vec<f64>], beta0: &[f64]) -> f64 {
    let n = estimates.len() as f64;
    estimates
        .iter()
        .map(|b| {
            b.iter()
                .zip(beta0)
                .map(|(a, t)| (a - t) * (a - t))
                .sum::<f64>()
        })
        .sum::<f64>()
        / n
}

/// Mean over replications of the per-replication mean squared link error.
pub fn mse_eta(per_rep_mean_sq: &[f64]) -> f64 {
    per_rep_mean_sq.iter().sum::<f64>() / per_rep_mean_sq.len() as f64
}

/// Median over replications of the per-replication median squared link error.
pub fn medse_eta(per_rep_median_sq: &[f64]) -> f64 {
    median(per_rep_median_sq)
}

pub fn median(values: &[f64]) -> f64 {
    let mut v: Vec<f64> = values.to_vec();
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n == 0 {
        return f64::NAN;
    }
    if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn mse_beta_examples() {
        let beta0 = vec![0.6, 0.8];
        assert_eq!(mse_beta(&[beta0.clone(), beta0.clone()], &beta0), 0.0);
        let off = vec![0.6, 0.9];
        assert!((mse_beta(&[off], &beta0) - 0.01).abs() < 1e-15);
    }

    #[test]
    fn medse_median_of_medians() {
        // per-rep medians {1, 4, 9} -> 4
        assert_eq!(medse_eta(&[1.0, 4.0, 9.0]), 4.0);
    }

    #[test]
    fn median_even_case() {
        assert_eq!(median(&[4.0, 1.0, 3.0, 2.0]), 2.5);
    }
}

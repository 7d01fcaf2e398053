//! Small numerical toolkit: adaptive Gauss–Kronrod quadrature, bracketed scalar
//! solvers (bisection, golden section, Brent) and a plain Nelder–Mead simplex.

mod nelder_mead;
mod quad;
mod scalar;
mod special;

pub use nelder_mead::{nelder_mead, NelderMeadOptions};
pub use quad::{integrate, QuadOptions};
pub use scalar::{bisect_root, brent_min, expand_bracket_down, golden_min};
pub use special::{gamma_p, gamma_q};

/// Weighted median: smallest value whose cumulative (normalized) weight
/// reaches 1/2. Weights must be nonnegative with positive total mass.
pub fn weighted_median(values: &[f64], weights: &[f64]) -> f64 {
    debug_assert_eq!(values.len(), weights.len());
    let mut idx: Vec<usize> = (0..values.len()).collect();
    idx.sort_by(|&a, &b| values[a].total_cmp(&values[b]));
    let total: f64 = weights.iter().sum();
    let half = 0.5 * total;
    let mut cum = 0.0;
    for &i in &idx {
        cum += weights[i];
        if cum >= half {
            return values[i];
        }
    }
    values[*idx.last().expect("nonempty sample")]
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn weighted_median_equal_weights_odd() {
        let y = [3.0, 1.0, 2.0];
        let w = [1.0, 1.0, 1.0];
        assert_eq!(weighted_median(&y, &w), 2.0);
    }

    #[test]
    fn weighted_median_dominant_weight() {
        let y = [3.0, 1.0, 2.0];
        let w = [1e-9, 1.0, 1e-9];
        assert_eq!(weighted_median(&y, &w), 1.0);
    }

    #[test]
    fn weighted_median_cumulative_rule() {
        // weights (0.2, 0.5, 0.3) on sorted values: cumulative hits 1/2 at the
        // second value
        let y = [10.0, 20.0, 30.0];
        let w = [0.2, 0.5, 0.3];
        assert_eq!(weighted_median(&y, &w), 20.0);
    }
}

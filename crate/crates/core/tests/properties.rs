//! Property tests for the structural invariants.

use proptest::prelude::*;
use sindex_core::{
    beta_to_theta, theta_to_beta, weight_tau, ErrorModel, LossSpec, TauMode, WeightFn,
};

proptest! {
    #[test]
    fn deviance_factors_through_the_residual(
        y in -50.0f64..50.0,
        a in -50.0f64..50.0,
        gamma in 0.2f64..20.0,
    ) {
        let m = ErrorModel::log_gamma(gamma).unwrap();
        prop_assert_eq!(m.deviance(y, a), m.deviance_star(y - a));
        prop_assert!(m.deviance(y, a) >= 0.0);
    }

    #[test]
    fn gaussian_deviance_mode_and_positivity(
        u in -30.0f64..30.0,
        sigma in 0.1f64..5.0,
    ) {
        let m = ErrorModel::gaussian(sigma).unwrap();
        let d = m.deviance_star(u);
        prop_assert!(d >= 0.0);
        if u != 0.0 {
            prop_assert!(d > 0.0);
        }
    }

    #[test]
    fn tukey_rho_even_bounded_monotone(s in -5.0f64..5.0, t in 0.0f64..5.0) {
        let loss = LossSpec::tukey(1.0);
        prop_assert!((loss.rho(s) - loss.rho(-s)).abs() < 1e-15);
        prop_assert!(loss.rho(s) >= 0.0 && loss.rho(s) <= 1.0);
        // nondecreasing in |s|
        let lo = loss.rho(t);
        let hi = loss.rho(t + 0.25);
        prop_assert!(hi >= lo - 1e-15);
    }

    #[test]
    fn theta_round_trip(
        b1 in -1.0f64..1.0,
        b2 in -1.0f64..1.0,
        b3 in 0.05f64..1.0,
    ) {
        let norm = (b1 * b1 + b2 * b2 + b3 * b3).sqrt();
        let beta = [b1 / norm, b2 / norm, b3 / norm];
        let theta = beta_to_theta(&beta).unwrap();
        let back = theta_to_beta(&theta);
        for (u, v) in beta.iter().zip(&back) {
            prop_assert!((u - v).abs() < 1e-12);
        }
        prop_assert!(back[2] > 0.0);
    }

    #[test]
    fn tau_zero_outside_ball(
        x1 in -3.0f64..3.0,
        x2 in -3.0f64..3.0,
        radius in 0.05f64..1.0,
    ) {
        let w = WeightFn {
            center: vec![0.5, 0.5],
            radius,
            mode: TauMode::Indicator,
        };
        let t = weight_tau(&w, &[x1, x2]);
        let dist = ((x1 - 0.5f64).powi(2) + (x2 - 0.5f64).powi(2)).sqrt();
        if dist > radius {
            prop_assert_eq!(t, 0.0);
        } else {
            prop_assert_eq!(t, 1.0);
        }
        let wd = WeightFn {
            mode: TauMode::DistanceTimesIndicator,
            ..w
        };
        let td = weight_tau(&wd, &[x1, x2]);
        prop_assert!(td >= 0.0);
        if dist > radius {
            prop_assert_eq!(td, 0.0);
        }
    }

    #[test]
    fn score_chain_signs_at_mode(gamma in 0.5f64..10.0, c in 0.5f64..5.0) {
        let m = ErrorModel::log_gamma(gamma).unwrap();
        let loss = LossSpec::tukey(c);
        prop_assert_eq!(loss.psi_star(&m, 0.0), 0.0);
        // positive curvature at the mode
        prop_assert!(loss.chi_star(&m, 0.0) > 0.0);
    }
}

//! End-to-end integration checks that fall outside the acceptance gate:
//! determinism of the harness, the shared classical/robust code path, and
//! the objective-descent guarantee of the sphere search.

use sindex_core::estimator::profile_objective;
use sindex_core::{
    fit_dataset, fit_three_step, gen_clean, run_replications, ErrorModel, EstimatorKind,
    FitConfig, GridSpec, KernelKind, LossSpec, PipelineOptions, SimConfig, TauMode, WeightFn,
};

#[test]
fn end_to_end_byte_determinism() {
    let mut cfg = SimConfig::default();
    cfg.n = 50;
    cfg.n_reps = 3;
    cfg.h1_grid = GridSpec::new(0.15, 0.35, 3);
    cfg.h2_grid = GridSpec::new(0.15, 0.35, 3);
    cfg.base_seed = 7;
    let dir = std::env::temp_dir().join("sindex_pipeline_test");
    std::fs::create_dir_all(&dir).unwrap();
    let (p1, p2) = (dir.join("a.csv"), dir.join("b.csv"));
    for path in [&p1, &p2] {
        let result = run_replications(&cfg).unwrap();
        sindex_core::sim::write_rep_records(path, &result.records).unwrap();
    }
    let a = std::fs::read(&p1).unwrap();
    let b = std::fs::read(&p2).unwrap();
    assert_eq!(a, b, "identical config and seed must produce identical bytes");
}

#[test]
fn classical_is_the_same_code_path_with_unit_constant() {
    // structurally: the classical estimator is fit_three_step with the
    // squared loss, whose constant is pinned at 1; no separate pipeline
    let loss = LossSpec::classical();
    assert_eq!(loss.alpha, 1.0);
    let cfg_sim = SimConfig::default();
    let data = gen_clean(80, 3, &cfg_sim).unwrap();
    let tau = WeightFn::default_for(80, 2, TauMode::Indicator);
    let cfg = FitConfig::new(
        loss,
        ErrorModel::log_gamma(3.0).unwrap(),
        0.2,
        0.2,
        tau.clone(),
    );
    let fit = fit_three_step(&data, &cfg).unwrap();
    assert_eq!(fit.alpha_hat, 1.0);
    assert!(fit.gamma_hat.is_none());
    // and through the full pipeline type
    let opts = PipelineOptions {
        kind: EstimatorKind::Classical,
        kernel: KernelKind::Epanechnikov,
        h1_grid: vec![0.2],
        h2_grid: vec![0.2],
        k_folds: 5,
        cv_seed: 1,
        tau,
        b_const: 0.5,
        target_eff: 0.90,
        rcv_c: 1.6394,
        sphere: Default::default(),
        local_tol: 1e-8,
    };
    let full = fit_dataset(&data, &opts).unwrap();
    assert_eq!(full.fit.beta, fit.beta);
}

#[test]
fn objective_descent_from_warm_start() {
    let cfg_sim = SimConfig::default();
    let data = gen_clean(90, 5, &cfg_sim).unwrap();
    let model = ErrorModel::log_gamma(3.0).unwrap();
    let tau = WeightFn::default_for(90, 2, TauMode::Indicator);
    let loss = LossSpec::tukey(1.6394);
    // a deliberately bad warm start
    let init = vec![0.9950371902099892, 0.0995037190209989];
    let init_obj = profile_objective(
        &data,
        &init,
        0.2,
        KernelKind::Epanechnikov,
        &loss,
        &model,
        &tau,
    )
    .unwrap();
    let mut cfg = FitConfig::new(loss, model, 0.2, 0.2, tau);
    cfg.sphere.init = Some(init.clone());
    cfg.nuisance = Some(sindex_core::NuisanceFit {
        gamma_hat: 3.0,
        s_n: 0.6494,
        c_hat: 1.6394,
        beta_tilde: init,
        eta_tilde: vec![],
        gamma_clamped: false,
    });
    let fit = fit_three_step(&data, &cfg).unwrap();
    assert!(
        fit.objective <= init_obj + 1e-12,
        "optimizer must never end above its initial point: {} vs {}",
        fit.objective,
        init_obj
    );
    // the returned index is unit with a positive last component
    let norm: f64 = fit.beta.iter().map(|b| b * b).sum::<f64>().sqrt();
    assert!((norm - 1.0).abs() < 1e-12);
    assert!(*fit.beta.last().unwrap() > 0.0);
}

#[test]
fn eta_state_evaluates_along_the_fitted_index() {
    let cfg_sim = SimConfig::default();
    let data = gen_clean(120, 9, &cfg_sim).unwrap();
    let tau = WeightFn::default_for(120, 2, TauMode::Indicator);
    let cfg = FitConfig::new(
        LossSpec::classical(),
        ErrorModel::log_gamma(3.0).unwrap(),
        0.15,
        0.15,
        tau,
    );
    let fit = fit_three_step(&data, &cfg).unwrap();
    // predictions at training covariates track the true link reasonably
    let mut errs: Vec<f64> = (0..data.n())
        .map(|i| {
            let truth = cfg_sim.link.eval(data.proj_row(&cfg_sim.beta0, i));
            let pred = fit.eta_state.predict(data.x_row(i)).unwrap();
            (truth - pred).abs()
        })
        .collect();
    errs.sort_by(f64::total_cmp);
    let med = errs[errs.len() / 2];
    assert!(med < 0.35, "median link error {med}");
}

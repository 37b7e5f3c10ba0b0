//! End-to-end checks of the experiment engine: determinism, baseline
//! ordering, per-run failure isolation, and file round-trips.

use pcl_cli::config::{DgpKind, EstimatorKind, ExperimentConfig, PolicyKind};
use pcl_cli::runner::{
    grid_mse, run_ope_experiment, run_structural_experiment, write_structural_outputs,
};
use pcl_cli::schema::{read_truth_csv, ModelJson, TrainConfigJson};
use pcl_core::causal::{estimate_value, Policy};
use pcl_core::datagen::{gen_demand, gen_demand_with_ope, DemandPolicyContext};
use pcl_core::numkit::DenseMatrix;
use pcl_core::two_stage::{fit_fixed_feature, FixedDictionaries, FixedFeatureModel};

fn quick_config(dgp: DgpKind, estimators: Vec<EstimatorKind>, size: usize) -> ExperimentConfig {
    ExperimentConfig {
        estimators,
        sizes: vec![size],
        n_sims: 2,
        base_seed: 5,
        train: TrainConfigJson { outer_iterations: 4, ..TrainConfigJson::default() },
        ..ExperimentConfig::single(dgp, EstimatorKind::FixedFeature, size, 5)
    }
}

#[test]
fn bench_rerun_writes_identical_bytes() {
    let cfg = quick_config(DgpKind::Mastouri, vec![EstimatorKind::FixedFeature], 50);
    let out_a = tempfile::tempdir().unwrap();
    let out_b = tempfile::tempdir().unwrap();
    let run_a = run_structural_experiment(&cfg).unwrap();
    let run_b = run_structural_experiment(&cfg).unwrap();
    write_structural_outputs(&run_a, out_a.path()).unwrap();
    write_structural_outputs(&run_b, out_b.path()).unwrap();
    for name in ["results.csv", "summary.csv", "failures.csv", "mastouri_oos_mse.svg"] {
        let a = std::fs::read(out_a.path().join(name)).unwrap();
        let b = std::fs::read(out_b.path().join(name)).unwrap();
        assert_eq!(a, b, "{name} differs between reruns");
    }
}

#[test]
fn empty_estimator_list_fails_before_any_work() {
    let mut cfg = quick_config(DgpKind::Mastouri, vec![], 50);
    cfg.estimators.clear();
    let err = run_structural_experiment(&cfg).unwrap_err();
    assert!(err.to_string().contains("estimators"), "unexpected error: {err}");
}

#[test]
fn demand_fixed_feature_beats_direct_ridge_at_1000() {
    let mut cfg = quick_config(DgpKind::Demand, vec![EstimatorKind::FixedFeature], 1000);
    cfg.n_sims = 1;
    cfg.base_seed = 11;
    let output = run_structural_experiment(&cfg).unwrap();
    assert!(output.failures.is_empty(), "failures: {:?}", output.failures);
    let mse_of = |name: &str| {
        output
            .results
            .iter()
            .find(|r| r.estimator == name)
            .map(|r| r.oos_mse)
            .expect("row present")
    };
    let fixed = mse_of("fixed_feature");
    let ridge = mse_of("direct_ridge");
    assert!(
        fixed < ridge,
        "proxy correction should beat the confounded fit: {fixed} vs {ridge}"
    );
}

#[test]
fn ope_results_are_deterministic_per_seed() {
    let mut cfg = quick_config(DgpKind::Demand, vec![EstimatorKind::FixedFeature], 100);
    cfg.n_sims = 1;
    let run_a = run_ope_experiment(&cfg, PolicyKind::Price).unwrap();
    let run_b = run_ope_experiment(&cfg, PolicyKind::Price).unwrap();
    // everything but the wall clock must reproduce bit for bit
    let key = |r: &pcl_cli::runner::OpeResult| {
        (r.estimator.clone(), r.size, r.seed, r.v_hat.to_bits(), r.sq_err.to_bits())
    };
    let keys_a: Vec<_> = run_a.results.iter().map(key).collect();
    let keys_b: Vec<_> = run_b.results.iter().map(key).collect();
    assert_eq!(keys_a, keys_b);
    assert!(run_a.failures.is_empty());
    // the baseline row accompanies every estimator row
    assert_eq!(run_a.results.len(), 2);
    assert!(run_a.results.iter().any(|r| r.estimator == "mean_outcome"));
}

#[test]
fn ope_rejects_non_demand_designs() {
    let cfg = quick_config(DgpKind::Mastouri, vec![EstimatorKind::FixedFeature], 50);
    let err = run_ope_experiment(&cfg, PolicyKind::Price).unwrap_err();
    assert!(err.to_string().contains("demand"), "unexpected error: {err}");
}

/// A model whose stage-2 weights are all zero predicts v̂ = 0, so its
/// squared error equals v(π)² exactly.
#[test]
fn zero_weight_model_squared_error_is_v_true_squared() {
    let data =
        gen_demand_with_ope(60, 60, 60, DemandPolicyContext::Price, 3).unwrap();
    let dicts = FixedDictionaries::from_stage1(&data, 30, 3).unwrap();
    let fitted = fit_fixed_feature(&data, &dicts, 0.1, 0.1).unwrap();
    let zeroed = FixedFeatureModel::from_parts(
        fitted.dicts().clone(),
        None,
        vec![0.0; fitted.u().len()],
        fitted.mu_w().to_vec(),
        0.1,
        0.1,
        (0.0, 0.0),
    )
    .unwrap();
    let v_hat = estimate_value(
        &zeroed.bridge(),
        &Policy::Price,
        data.ope_c().unwrap(),
        data.ope_w().unwrap(),
    )
    .unwrap();
    assert_eq!(v_hat, 0.0);
    let v_true = 62.56; // any reference point: sq_err must be its square
    assert_eq!((v_hat - v_true) * (v_hat - v_true), v_true * v_true);
}

/// For a constant policy `a₀`, averaging the bridge over the same proxy
/// sample that defines μ_W collapses to the structural readout at a₀.
#[test]
fn constant_policy_value_matches_structural_readout() {
    let data = gen_demand(80, 80, 9).unwrap();
    let s_w = data.mean_feature_w().clone();
    let rows = s_w.rows();
    let contexts = DenseMatrix::from_vec(rows, 1, vec![17.0; rows]).unwrap();
    let data = data.with_ope(contexts, s_w).unwrap();

    let dicts = FixedDictionaries::from_stage1(&data, 40, 9).unwrap();
    let model = fit_fixed_feature(&data, &dicts, 0.1, 0.1).unwrap();
    let a0 = 21.5;
    let policy = Policy::Tabulated {
        contexts: DenseMatrix::from_vec(1, 1, vec![0.0]).unwrap(),
        actions: DenseMatrix::from_vec(1, 1, vec![a0]).unwrap(),
    };
    let v_hat = estimate_value(
        &model.bridge(),
        &policy,
        data.ope_c().unwrap(),
        data.ope_w().unwrap(),
    )
    .unwrap();
    let f_hat = model.predict_structural(&[a0]).unwrap();
    assert!((v_hat - f_hat).abs() <= 1e-9, "v_hat {v_hat} vs f_hat {f_hat}");
}

#[test]
fn saved_model_reproduces_benched_mse() {
    let mut cfg = quick_config(DgpKind::Mastouri, vec![EstimatorKind::FixedFeature], 60);
    cfg.n_sims = 1;
    let output = run_structural_experiment(&cfg).unwrap();
    let dir = tempfile::tempdir().unwrap();
    write_structural_outputs(&output, dir.path()).unwrap();

    let logged = output
        .results
        .iter()
        .find(|r| r.estimator == "fixed_feature")
        .unwrap()
        .oos_mse;
    let model = ModelJson::load(&dir.path().join("models/mastouri_fixed_feature_60_5.json"))
        .unwrap()
        .to_model()
        .unwrap();
    let truth = read_truth_csv(&dir.path().join("truth_mastouri.csv")).unwrap();
    let recomputed = grid_mse(|a| model.predict_structural(a), &truth).unwrap();
    assert!(
        (recomputed - logged).abs() <= 1e-12,
        "recomputed {recomputed} vs logged {logged}"
    );
}

#[test]
fn failures_are_isolated_per_run() {
    // tuning demands cross-stage extras; strip them from one run by using
    // a grid on a dgp whose data always carries them, then force failure
    // through an impossible dictionary budget instead.
    let mut cfg = quick_config(DgpKind::Mastouri, vec![EstimatorKind::FixedFeature], 40);
    cfg.n_sims = 2;
    cfg.tune = Some(vec![(-1.0, 0.1)]);
    let output = run_structural_experiment(&cfg).unwrap();
    // fixed_feature runs fail on the negative grid point, direct ridge
    // rows (untuned) still complete
    assert_eq!(output.failures.len(), 2);
    assert!(output.failures.iter().all(|f| f.estimator == "fixed_feature"));
    assert_eq!(output.results.len(), 2);
    assert!(output.results.iter().all(|r| r.estimator == "direct_ridge"));
}

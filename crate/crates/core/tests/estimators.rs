use riesz::estimators::{
    duality_residual, estimate_conditional, estimate_density, estimate_density_grad, EstimatorConfig, TestBump,
    Truncation,
};
use riesz::malliavin::MultiIndex;
use riesz::scenarios::{get_scenario, ScenarioParams};

fn scenario(id: &str) -> riesz::scenarios::Scenario {
    get_scenario(id, &ScenarioParams::default()).unwrap()
}

#[test]
fn results_do_not_depend_on_worker_count() {
    let sc = scenario("tanh-couple");
    let base = EstimatorConfig::default().with_n(40_000).with_seed(77).with_chunk(1000);
    let one = estimate_density(&sc.f, &[0.2, 0.1], &base.clone().with_workers(1)).unwrap();
    for w in [2, 3, 8] {
        let r = estimate_density(&sc.f, &[0.2, 0.1], &base.clone().with_workers(w)).unwrap();
        assert_eq!(r.value.to_bits(), one.value.to_bits(), "workers = {w}");
        assert_eq!(r.n_rejected, one.n_rejected);
    }
}

#[test]
fn seed_changes_the_estimate() {
    let sc = scenario("linear");
    let c = EstimatorConfig::default().with_n(20_000);
    let a = estimate_density(&sc.f, &[0.0, 0.0], &c.clone().with_seed(1)).unwrap();
    let b = estimate_density(&sc.f, &[0.0, 0.0], &c.with_seed(2)).unwrap();
    assert_ne!(a.value, b.value);
}

#[test]
fn truncation_bias_shrinks_with_the_radius() {
    let sc = scenario("gauss-identity-d2");
    let exact = 1.0 / (2.0 * std::f64::consts::PI);
    let mut last = f64::INFINITY;
    for r in [0.2, 0.1, 0.05, 0.02] {
        let c = EstimatorConfig::default().with_n(400_000).with_seed(9).with_truncation(Truncation::Fixed(r));
        let est = estimate_density(&sc.f, &[0.0, 0.0], &c).unwrap();
        let bias = (est.value - exact).abs();
        assert!(bias <= last + 3.0 * est.stderr.unwrap(), "r = {r}: {bias} after {last}");
        last = bias;
    }
}

#[test]
fn untruncated_mode_reports_no_stderr() {
    let sc = scenario("gauss-identity-d2");
    let c = EstimatorConfig::default().with_n(5_000).with_truncation(Truncation::Off);
    assert!(estimate_density(&sc.f, &[0.1, 0.0], &c).unwrap().stderr.is_none());
}

#[test]
fn duality_holds_with_nontrivial_g() {
    let sc = scenario("poly-perturb");
    let c = EstimatorConfig::default().with_n(100_000).with_seed(3);
    let g = sc.g("bump").unwrap().clone();
    for i in 0..2 {
        let r = duality_residual(&sc.f, &g, &TestBump::new(vec![0.3, 0.2], 1.2), i, &c).unwrap();
        assert!(r.value.abs() <= 4.0 * r.stderr.unwrap(), "i = {i}: {} ± {:?}", r.value, r.stderr);
    }
}

#[test]
fn gaussian_density_gradient() {
    // ∂₁φ₂(x) = −x₁φ₂(x)
    let sc = scenario("gauss-identity-d2");
    let c = EstimatorConfig::default().with_n(300_000).with_seed(4);
    let x = [0.8, -0.3];
    let r = estimate_density_grad(&sc.f, &x, &MultiIndex::new(&[0]), &c).unwrap();
    let exact = -x[0] * sc.analytic_density(&x).unwrap();
    assert!(r.within(exact, 4.0), "{} ± {:?} vs {exact}", r.value, r.stderr);
}

#[test]
fn conditional_expectation_of_the_functional_itself() {
    // E[F₁ | F = x] = x₁
    let sc = scenario("linear");
    let c = EstimatorConfig::default().with_n(200_000).with_seed(5);
    let g = sc.g("f1").unwrap().clone();
    let r = estimate_conditional(&sc.f, &g, &[0.4, 0.2], &c).unwrap();
    assert!(r.within(0.4, 4.0), "{} ± {:?}", r.value, r.stderr);
}

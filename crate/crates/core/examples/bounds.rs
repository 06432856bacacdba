//! Θ_p, the Sobolev norm of 1 and the explicit constants of the sup bound.

use riesz::estimators::{estimate_theta, sobolev_norm_one, theoretical_constants, EstimatorConfig};
use riesz::scenarios::{get_scenario, ScenarioParams};

fn main() -> riesz::Result<()> {
    let p = 4.0;
    let sc = get_scenario("poly-perturb", &ScenarioParams::default())?;
    let cfg = EstimatorConfig::default().with_n(200_000).with_seed(4).with_workers(0);
    let probes: Vec<Vec<f64>> = (-2..=2).flat_map(|i| (-2..=2).map(move |j| vec![i as f64, j as f64])).collect();

    let c = theoretical_constants(2, p)?;
    let norm = sobolev_norm_one(&sc.f, p, &cfg)?;
    let theta = estimate_theta(&sc.f, p, &probes, &cfg)?;
    println!("k = {}, K = {}", c.k, c.big_k);
    println!("‖1‖ = {:.4} ± {:.4}", norm.value, norm.stderr.unwrap_or(f64::NAN));
    println!("Θ_p ≈ {:.4} (max at {:?}), bound {:.1}", theta.result.value, theta.argmax, c.theta_bound(norm.value));
    println!("sup p ≤ {:.1}", c.sup_bound(norm.value));
    Ok(())
}
